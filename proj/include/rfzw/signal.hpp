// Core numeric types shared by every stage of the simulator: complex
// baseband waveforms in sqrt-milliwatt units, dB conversions and
// deterministic labelled random-number streams.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace rfzw {

/// Raised for invalid parameters or configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Scalar>
using BasicSamples = Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, 1>;

/// A block of complex baseband samples. |x|^2 is instantaneous power in mW.
/// `t0` is the index of the first sample on the simulation's global clock.
template <typename Scalar>
struct BasicWaveform {
  BasicSamples<Scalar> samples;
  double sample_rate = 2.0e7;
  std::int64_t t0 = 0;

  BasicWaveform() = default;
  BasicWaveform(BasicSamples<Scalar> s, double rate, std::int64_t start = 0)
      : samples(std::move(s)), sample_rate(rate), t0(start) {
    if (!(rate > 0.0)) throw ConfigError("waveform sample rate must be positive");
  }
  static BasicWaveform zeros(Eigen::Index n, double rate, std::int64_t start = 0) {
    return BasicWaveform(BasicSamples<Scalar>::Zero(n), rate, start);
  }

  Eigen::Index size() const { return samples.size(); }
  bool empty() const { return samples.size() == 0; }
  /// Sum of |x|^2 over all samples (mW x samples).
  Scalar total_power() const { return samples.abs2().sum(); }
  Scalar mean_power() const { return empty() ? Scalar(0) : samples.abs2().mean(); }
  /// Energy in mW*s.
  Scalar energy() const { return total_power() / static_cast<Scalar>(sample_rate); }
  bool all_finite() const { return samples.real().allFinite() && samples.imag().allFinite(); }
};

using Complex = std::complex<double>;
using Samples = BasicSamples<double>;
using Waveform = BasicWaveform<double>;

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// sqrt(10^(dBm/10)): the amplitude whose square is the given power in mW.
inline double dbm_to_amplitude(double power_dbm) { return std::sqrt(dbm_to_mw(power_dbm)); }
inline double amplitude_to_dbm(double amplitude) { return 20.0 * std::log10(amplitude); }

// 64-bit finalizer from SplitMix64.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based random stream keyed by (root seed, label). Draw i is a pure
/// function of the key and i, so streams for different labels never
/// perturb one another and can be evaluated in any order.
class RngStream {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  RngStream(std::uint64_t root_seed, std::string_view label);

  const std::string& label() const { return label_; }
  std::uint64_t root_seed() const { return seed_; }
  std::uint64_t key() const { return key_; }

  /// Stream for "<label>/<sub>" under the same root seed.
  RngStream child(std::string_view sub) const;

  /// Random access: the 64-bit word at position `counter`.
  std::uint64_t at(std::uint64_t counter) const {
    return mix64(key_ + (counter + 1) * 0x9e3779b97f4a7c15ULL);
  }

  result_type operator()() { return at(counter_++); }
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Circular complex Gaussian with E|z|^2 = variance.
  Complex complex_normal(double variance = 1.0);

  std::uint64_t position() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline RngStream substream(std::uint64_t root_seed, std::string_view label) {
  return RngStream(root_seed, label);
}

/// Complex AWGN indexed by global sample number. Each sample is derived from a
/// single hashed word: u1 sets |n|^2 = -P ln(u1) (exponential power) and u2
/// sets the phase, which gives a circular Gaussian of total power P.
class NoiseField {
 public:
  NoiseField() = default;
  NoiseField(const RngStream& stream, double power_mw) : key_(stream.key()), power_(power_mw) {}

  double power_mw() const { return power_; }

  Complex sample(std::int64_t k) const {
    const auto [u1, u2] = uniforms(k);
    if (power_ <= 0.0) return {0.0, 0.0};
    const double mag = std::sqrt(-power_ * std::log(u1));
    const double ph = 2.0 * std::numbers::pi * u2;
    return {mag * std::cos(ph), mag * std::sin(ph)};
  }

  /// Equivalent to |sample(k)|^2 > thr2 when no signal is present, given
  /// p_exceed = exp(-thr2 / power).
  bool exceeds(std::int64_t k, double p_exceed) const { return uniforms(k).first < p_exceed; }

  double exceed_probability(double threshold_amplitude) const {
    if (power_ <= 0.0) return 0.0;
    return std::exp(-threshold_amplitude * threshold_amplitude / power_);
  }

 private:
  std::pair<double, double> uniforms(std::int64_t k) const {
    const std::uint64_t w = mix64(key_ + (static_cast<std::uint64_t>(k) + 1) * 0x9e3779b97f4a7c15ULL);
    const double u1 = (static_cast<double>(w >> 32) + 0.5) * 0x1.0p-32;
    const double u2 = static_cast<double>(w & 0xffffffffULL) * 0x1.0p-32;
    return {u1, u2};
  }

  std::uint64_t key_ = 0;
  double power_ = 0.0;
};

}  // namespace rfzw
