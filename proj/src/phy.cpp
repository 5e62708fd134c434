#include "rfzw/phy.hpp"

#include <fmt/format.h>

namespace rfzw {

Eigen::Index whole_samples(double seconds, double sample_rate, const char* what) {
  const double exact = seconds * sample_rate;
  const double rounded = std::round(exact);
  if (!(rounded >= 1.0) || std::abs(exact - rounded) > 1e-3 * rounded) {
    throw ConfigError(fmt::format("{} of {:g} s is not a whole number of samples at {:g} Hz",
                                  what, seconds, sample_rate));
  }
  return static_cast<Eigen::Index>(rounded);
}

void PhyParams::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
  if (!(pulse_duration > 0.0)) throw ConfigError("pulse duration must be positive");
  if (!(pulse_duration < symbol_period)) {
    throw ConfigError("pulse duration must be shorter than the symbol period");
  }
  if (!(rolloff >= 0.0 && rolloff <= 1.0)) throw ConfigError("rolloff must lie in [0, 1]");
  if (!(occupied_bandwidth > 0.0)) throw ConfigError("occupied bandwidth must be positive");
  if (pulse_samples() >= symbol_samples()) {
    throw ConfigError("pulse must be shorter than the symbol slot in samples");
  }
}

Eigen::Index PhyParams::pulse_samples() const {
  return whole_samples(pulse_duration, sample_rate, "pulse duration");
}

Eigen::Index PhyParams::symbol_samples() const {
  return whole_samples(symbol_period, sample_rate, "symbol period");
}

double raised_cosine(double t, double rolloff) {
  constexpr double pi = std::numbers::pi;
  auto sinc = [](double x) { return x == 0.0 ? 1.0 : std::sin(pi * x) / (pi * x); };
  const double denom = 1.0 - 4.0 * rolloff * rolloff * t * t;
  if (rolloff > 0.0 && std::abs(denom) < 1e-10) {
    return pi / 4.0 * sinc(1.0 / (2.0 * rolloff));
  }
  return sinc(t) * std::cos(pi * rolloff * t) / denom;
}

ShapingFilter design_shaping_filter(const PhyParams& params) {
  if (!(params.rolloff >= 0.0 && params.rolloff <= 1.0)) {
    throw ConfigError("rolloff must lie in [0, 1]");
  }
  if (!(params.occupied_bandwidth > 0.0) || params.occupied_bandwidth > params.sample_rate) {
    throw ConfigError(fmt::format("occupied bandwidth {:g} Hz not representable at {:g} Hz sampling",
                                  params.occupied_bandwidth, params.sample_rate));
  }
  ShapingFilter f;
  f.chip_rate = params.occupied_bandwidth / (1.0 + params.rolloff);
  const double chip_samples = params.sample_rate / f.chip_rate;
  constexpr double span_chips = 8.0;
  const auto half = static_cast<Eigen::Index>(std::floor(span_chips / 2.0 * chip_samples));
  f.group_delay = half;
  f.taps.resize(2 * half + 1);
  for (Eigen::Index n = -half; n <= half; ++n) {
    f.taps[n + half] = raised_cosine(static_cast<double>(n) / chip_samples, params.rolloff);
  }
  // Mirror to make the symmetry exact in floating point.
  for (Eigen::Index i = 0; i < half; ++i) f.taps[f.taps.size() - 1 - i] = f.taps[i];
  f.taps /= f.taps.sum();
  return f;
}

Samples shaped_pulse(const PhyParams& params) {
  params.validate();
  const ShapingFilter filt = design_shaping_filter(params);
  const Eigen::Index np = params.pulse_samples();
  const Eigen::Index ns = params.symbol_samples();
  const Eigen::Index nt = filt.taps.size();
  const Eigen::Index d = filt.group_delay;

  // y[k] = sum_{m in [0, np)} h[k - m + d], k in [0, ns)
  Eigen::ArrayXd y = Eigen::ArrayXd::Zero(ns);
  for (Eigen::Index k = 0; k < ns; ++k) {
    double acc = 0.0;
    for (Eigen::Index m = 0; m < np; ++m) {
      const Eigen::Index j = k - m + d;
      if (j >= 0 && j < nt) acc += filt.taps[j];
    }
    y[k] = acc;
  }
  const double target = dbm_to_mw(params.tx_power_dbm) * static_cast<double>(np);
  y *= std::sqrt(target / y.square().sum());
  return y.cast<Complex>();
}

Samples pulse_support(const PhyParams& params) {
  Samples p = shaped_pulse(params);
  Eigen::Index n = p.size();
  while (n > 0 && p[n - 1] == Complex(0.0, 0.0)) --n;
  return p.head(n);
}

Waveform modulate_bit(int bit, const PhyParams& params, std::int64_t t0) {
  params.validate();
  if (bit != 0 && bit != 1) throw ConfigError("bit must be 0 or 1");
  if (bit == 0) return Waveform::zeros(params.symbol_samples(), params.sample_rate, t0);
  return Waveform(shaped_pulse(params), params.sample_rate, t0);
}

Waveform modulate_bits(std::span<const std::uint8_t> bits, const PhyParams& params,
                       std::int64_t t0) {
  const Samples pulse = shaped_pulse(params);
  const Eigen::Index ns = pulse.size();
  Waveform w = Waveform::zeros(ns * static_cast<Eigen::Index>(bits.size()), params.sample_rate, t0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1) throw ConfigError("bit must be 0 or 1");
    if (bits[i]) w.samples.segment(static_cast<Eigen::Index>(i) * ns, ns) = pulse;
  }
  return w;
}

}  // namespace rfzw
