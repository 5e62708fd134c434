// Pulse-based OOK transmitter (raised-cosine shaped pulse followed by a
// silent guard), carrier-offset rotation and receiver noise-floor estimation.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

#include <Eigen/Core>

#include "rfzw/signal.hpp"

namespace rfzw {

struct PhyParams {
  double sample_rate = 2.0e7;
  double pulse_duration = 3.0e-6;
  double symbol_period = 1.0e-5;
  double rolloff = 0.5;
  double tx_power_dbm = 0.0;
  double antenna_gain_dbi = 5.0;
  double carrier_freq = 2.491e9;
  double occupied_bandwidth = 2.8e6;

  /// Throws ConfigError unless 0 < Tp < Ts, 0 <= rolloff <= 1 and both
  /// durations land on whole samples.
  void validate() const;

  Eigen::Index pulse_samples() const;
  Eigen::Index symbol_samples() const;
  double data_rate() const { return 1.0 / symbol_period; }
};

/// Sample count for a duration; rejects durations more than 0.1% away from
/// a whole number of samples.
Eigen::Index whole_samples(double seconds, double sample_rate, const char* what);

struct ShapingFilter {
  Eigen::ArrayXd taps;
  Eigen::Index group_delay = 0;
  double chip_rate = 0.0;
};

/// Raised-cosine FIR at the sample rate. The chip rate is chosen so that
/// (1 + rolloff) * chip_rate equals the occupied bandwidth; the response is
/// truncated to 8 chip periods and normalized to unit DC gain.
ShapingFilter design_shaping_filter(const PhyParams& params);

/// Continuous-time raised-cosine impulse response, t in chip periods.
double raised_cosine(double t, double rolloff);

/// The transmitted 1-symbol: a Tp-long rectangle through the shaping filter,
/// delay-compensated so the envelope starts at sample 0, truncated to one
/// symbol slot, and scaled so its energy equals tx_power * Tp.
Samples shaped_pulse(const PhyParams& params);

/// Like shaped_pulse but with trailing all-zero samples removed.
Samples pulse_support(const PhyParams& params);

/// Exactly Ts * sample_rate samples: silence for 0, the shaped pulse for 1.
Waveform modulate_bit(int bit, const PhyParams& params, std::int64_t t0 = 0);

/// Modulates a bit string symbol by symbol; sample-identical to
/// concatenating modulate_bit outputs.
Waveform modulate_bits(std::span<const std::uint8_t> bits, const PhyParams& params,
                       std::int64_t t0 = 0);

/// Rotates by exp(i(2 pi cfo (t0 + k) / fs + phase0)).
template <typename Scalar>
BasicWaveform<Scalar> apply_cfo(const BasicWaveform<Scalar>& w, double cfo_hz, double phase0) {
  using C = std::complex<Scalar>;
  BasicWaveform<Scalar> out = w;
  const double step = 2.0 * std::numbers::pi * cfo_hz / w.sample_rate;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    const double ph = step * static_cast<double>(w.t0 + k) + phase0;
    out.samples[k] = w.samples[k] * C(static_cast<Scalar>(std::cos(ph)), static_cast<Scalar>(std::sin(ph)));
  }
  return out;
}

struct NoiseFloor {
  double floor_dbm = 0.0;
  double threshold_amplitude = 0.0;
};

/// Mean power of an ambient-noise capture, and the detection threshold set
/// `margin_db` above it.
template <typename Scalar>
NoiseFloor measure_noise_floor(const BasicWaveform<Scalar>& ambient, double margin_db = 9.0) {
  if (ambient.empty()) throw ConfigError("noise floor needs a non-empty ambient capture");
  const double mean_mw = static_cast<double>(ambient.mean_power());
  NoiseFloor nf;
  nf.floor_dbm = mw_to_dbm(mean_mw);
  nf.threshold_amplitude = dbm_to_amplitude(nf.floor_dbm + margin_db);
  return nf;
}

}  // namespace rfzw
