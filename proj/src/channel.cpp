#include "rfzw/channel.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace rfzw {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

ChannelProfile ChannelProfile::d_like() { return {}; }

ChannelProfile ChannelProfile::e_like() {
  ChannelProfile p;
  p.name = ProfileName::ELike;
  p.breakpoint_m = 20.0;
  p.rician_k_db = 6.0;
  return p;
}

ChannelProfile ChannelProfile::from_name(const std::string& name) {
  if (name == "D" || name == "D-like" || name == "d") return d_like();
  if (name == "E" || name == "E-like" || name == "e") return e_like();
  if (name == "custom") {
    ChannelProfile p;
    p.name = ProfileName::Custom;
    return p;
  }
  throw ConfigError(fmt::format("unknown channel profile '{}'", name));
}

void ChannelProfile::validate() const {
  if (!(breakpoint_m > 0.0)) throw ConfigError("channel breakpoint must be positive");
  for (double e : {pathloss_exponent_near, pathloss_exponent_far}) {
    if (!(e >= 1.6 && e <= 6.0)) {
      throw ConfigError(fmt::format("path-loss exponent {:g} outside [1.6, 6]", e));
    }
  }
  if (!(shadowing_sigma_db >= 0.0)) throw ConfigError("shadowing sigma must be non-negative");
}

std::string to_string(ProfileName p) {
  switch (p) {
    case ProfileName::DLike:
      return "D-like";
    case ProfileName::ELike:
      return "E-like";
    case ProfileName::Custom:
      return "custom";
  }
  return "?";
}

double fspl_1m_db(double carrier_hz) {
  return 20.0 * std::log10(4.0 * std::numbers::pi * carrier_hz / kSpeedOfLight);
}

double path_gain_db(double distance_m, const ChannelProfile& profile, double carrier_hz) {
  if (!(distance_m > 0.0)) throw ConfigError("link distance must be positive");
  const double bp = profile.breakpoint_m;
  const double loss = fspl_1m_db(carrier_hz) +
                      10.0 * profile.pathloss_exponent_near * std::log10(std::min(distance_m, bp)) +
                      10.0 * profile.pathloss_exponent_far * std::log10(std::max(distance_m / bp, 1.0));
  return -loss;
}

Complex draw_fading(double k_db, RngStream& rng) {
  const double k = db_to_linear(k_db);
  const double los = std::sqrt(k / (k + 1.0));
  const double nlos = std::sqrt(1.0 / (k + 1.0));
  const double theta = kTwoPi * rng.uniform();
  const Complex scatter = rng.complex_normal(1.0);
  return los * std::polar(1.0, theta) + nlos * scatter;
}

std::int64_t propagation_delay_samples(double distance_m, double sample_rate) {
  return std::llround(distance_m / kSpeedOfLight * sample_rate);
}

LinkState make_link(int tx, int rx, double distance_m, const ChannelProfile& profile,
                    const PhyParams& phy, Complex fading, double shadowing_db) {
  const double gain_db =
      path_gain_db(distance_m, profile, phy.carrier_freq) + 2.0 * phy.antenna_gain_dbi + shadowing_db;
  LinkState s;
  s.gain = fading * std::sqrt(db_to_linear(gain_db));
  s.delay_samples = propagation_delay_samples(distance_m, phy.sample_rate);
  s.tx = tx;
  s.rx = rx;
  return s;
}

std::int64_t CfoSchedule::epoch_of(double t) const {
  if (t < 0.0) throw ConfigError("CFO query time must be non-negative");
  return static_cast<std::int64_t>(std::floor(t / redraw_interval));
}

double CfoSchedule::offset(int node, std::int64_t epoch) const {
  if (range_hz == 0.0) return 0.0;
  RngStream s(root_seed, fmt::format("node/{}/cfo/epoch/{}", node, epoch));
  return s.uniform(-range_hz, range_hz);
}

double CfoSchedule::phase_at(int node, double t) const {
  const std::int64_t e = epoch_of(t);
  double phase = 0.0;
  for (std::int64_t i = 0; i < e; ++i) {
    phase = std::fmod(phase + kTwoPi * offset(node, i) * redraw_interval, kTwoPi);
  }
  return std::fmod(phase + kTwoPi * offset(node, e) * (t - static_cast<double>(e) * redraw_interval), kTwoPi);
}

double cfo_at(const CfoSchedule& schedule, int node, double t) {
  return schedule.offset(node, schedule.epoch_of(t));
}

Waveform superpose_at_receiver(std::span<const Transmission> txs, const ReceiverWindow& rx,
                               const NoiseField& noise) {
  for (const auto& tx : txs) {
    if (tx.waveform.sample_rate != rx.sample_rate) {
      throw ConfigError("all transmissions must share the receiver sample rate");
    }
  }
  Waveform out = Waveform::zeros(rx.length, rx.sample_rate, rx.t_start);
  const double w_rx = kTwoPi * rx.cfo_hz / rx.sample_rate;
  for (Eigen::Index k = 0; k < rx.length; ++k) {
    const std::int64_t t = rx.t_start + k;
    if (rx.own_tx && t >= rx.own_tx->first && t < rx.own_tx->second) continue;
    Complex acc{0.0, 0.0};
    for (const auto& tx : txs) {
      const std::int64_t idx = t - tx.delay_samples - tx.waveform.t0;
      if (idx < 0 || idx >= tx.waveform.size()) continue;
      // Transmitter oscillator phase at emission time.
      const double ph =
          kTwoPi * tx.cfo_hz / rx.sample_rate * static_cast<double>(t - tx.delay_samples) + tx.phase0;
      acc += tx.gain * tx.waveform.samples[idx] * std::polar(1.0, ph);
    }
    if (acc != Complex(0.0, 0.0)) acc *= std::polar(1.0, -(w_rx * static_cast<double>(t) + rx.phase0));
    out.samples[k] = acc + noise.sample(t);
  }
  return out;
}

Waveform superpose_at_receiver(std::span<const Transmission> txs, const ReceiverWindow& rx,
                               double noise_power_dbm, const RngStream& rng) {
  return superpose_at_receiver(txs, rx, NoiseField(rng, dbm_to_mw(noise_power_dbm)));
}

}  // namespace rfzw
