// Per-link propagation: dual-slope log-distance path loss, Rician block
// fading, integer-sample propagation delay, per-node carrier offsets that
// are redrawn every epoch, and superposition plus AWGN at a receiver.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfzw/phy.hpp"
#include "rfzw/signal.hpp"

namespace rfzw {

inline constexpr double kSpeedOfLight = 299792458.0;

enum class ProfileName { DLike, ELike, Custom };

struct ChannelProfile {
  ProfileName name = ProfileName::DLike;
  double pathloss_exponent_near = 2.0;
  double pathloss_exponent_far = 3.5;
  double breakpoint_m = 10.0;
  double rician_k_db = 3.0;
  double shadowing_sigma_db = 0.0;

  /// Large indoor space with line of sight.
  static ChannelProfile d_like();
  /// More open hall: later breakpoint, stronger line-of-sight component.
  static ChannelProfile e_like();
  static ChannelProfile from_name(const std::string& name);

  void validate() const;
};

std::string to_string(ProfileName p);

/// Free-space loss at 1 m in dB.
double fspl_1m_db(double carrier_hz);

/// Negative dB gain: -(FSPL(1 m) + 10 n1 log10(min(d, bp)) + 10 n2 log10(max(d / bp, 1))).
double path_gain_db(double distance_m, const ChannelProfile& profile, double carrier_hz);

/// h = sqrt(K / (K + 1)) e^{i theta} + sqrt(1 / (K + 1)) CN(0, 1), E|h|^2 = 1.
Complex draw_fading(double k_db, RngStream& rng);

struct LinkState {
  Complex gain{0.0, 0.0};
  std::int64_t delay_samples = 0;
  int tx = -1;
  int rx = -1;
};

std::int64_t propagation_delay_samples(double distance_m, double sample_rate);

/// Combines path gain, both antenna gains, a shadowing offset and the fading
/// coefficient into a single complex amplitude gain.
LinkState make_link(int tx, int rx, double distance_m, const ChannelProfile& profile,
                    const PhyParams& phy, Complex fading, double shadowing_db = 0.0);

/// Per-node carrier offsets, piecewise constant over epochs of
/// `redraw_interval` seconds, drawn uniformly from [-range, +range].
struct CfoSchedule {
  double range_hz = 0.0;
  double redraw_interval = 1.0;
  std::uint64_t root_seed = 0;

  std::int64_t epoch_of(double t) const;
  double offset(int node, std::int64_t epoch) const;
  /// Oscillator phase at time t, continuous across epoch boundaries.
  double phase_at(int node, double t) const;
};

double cfo_at(const CfoSchedule& schedule, int node, double t);

struct Transmission {
  Waveform waveform;  // samples on the transmitter clock, starting at waveform.t0
  Complex gain{1.0, 0.0};
  std::int64_t delay_samples = 0;
  double cfo_hz = 0.0;
  double phase0 = 0.0;
};

struct ReceiverWindow {
  std::int64_t t_start = 0;
  Eigen::Index length = 0;
  double sample_rate = 2.0e7;
  double cfo_hz = 0.0;
  double phase0 = 0.0;
  /// Samples in [first, second) are blanked while the receiver transmits.
  std::optional<std::pair<std::int64_t, std::int64_t>> own_tx;
};

/// y[t] = sum_j g_j x_j[t - d_j] e^{i(phi_j(t - d_j) - phi_rx(t))} + n[t], with
/// phi(t) = 2 pi cfo t / fs + phase0.
Waveform superpose_at_receiver(std::span<const Transmission> txs, const ReceiverWindow& rx,
                               const NoiseField& noise);

Waveform superpose_at_receiver(std::span<const Transmission> txs, const ReceiverWindow& rx,
                               double noise_power_dbm, const RngStream& rng);

}  // namespace rfzw
