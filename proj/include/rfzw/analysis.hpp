// Latency formulas for symbol-synchronous and store-and-forward relaying,
// error statistics over bit-error positions, and BCH correction-capacity
// frame-loss estimates. compute_metrics() turns a simulated flood into a
// MetricsReport.
#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rfzw/netsim.hpp"

namespace rfzw {

struct LatencyBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// ((n - 1) Ts, (n - 1) Ts + r h_max).
LatencyBounds latency_bounds(int n, double symbol_period, double relay, int h_max);

/// h_max (n Ts + T_acc).
double sf_latency(int n, double symbol_period, double access_wait, int h_max);

struct EmpiricalCdf {
  std::vector<double> breakpoints;
  std::vector<double> values;
  std::size_t samples = 0;

  bool empty() const { return samples == 0; }
  /// Fraction of samples <= x for an arbitrary x (not only breakpoints).
  double at(double x) const;

  std::vector<double> sorted;  // all samples, ascending
};

/// 1, 2, 4, ..., 2^20.
std::vector<double> power_of_two_breakpoints(int max_exponent = 20);

std::vector<std::int64_t> error_spacings(std::span<const std::int64_t> positions);

EmpiricalCdf empirical_cdf(std::vector<double> samples, std::span<const double> breakpoints);

/// CDF of gaps between consecutive error positions (strictly increasing);
/// empty when fewer than two errors.
EmpiricalCdf error_spacing_cdf(std::span<const std::int64_t> positions,
                               std::span<const double> breakpoints = {});

struct ErrorsPerFrame {
  int frame_size = 0;
  std::vector<int> counts;          // errors in each frame
  std::vector<std::size_t> histogram;  // histogram[c] = frames with c errors

  double mean() const;
  double cdf(int c) const;  // fraction of frames with <= c errors
};

/// Splits the bit stream [0, total_bits) into consecutive frames. Without
/// total_bits the stream ends at the frame holding the last error.
ErrorsPerFrame errors_per_frame(std::span<const std::int64_t> positions, int frame_size,
                                std::optional<std::int64_t> total_bits = std::nullopt);

struct BchModel {
  int codeword_len = 64;
  double code_rate = 0.8;
  int t = 1;
};

/// Redundancy of the narrow-sense binary BCH code of length 2^m - 1 with
/// designed distance 2t + 1 (degree of its generator polynomial).
int bch_generator_degree(int m, int t);

/// Correctable errors for a rate-`rate` BCH code shortened to codeword_len.
int bch_capacity(int codeword_len, double rate);

BchModel bch_model(int frame_size, double rate, bool frame_is_payload = false);

/// Fraction of frames carrying more than t errors.
double frame_loss_ratio(std::span<const std::int64_t> positions, int frame_size, int t,
                        std::optional<std::int64_t> total_bits = std::nullopt);

/// Latest sync, relative to the frame start, that can still come from the
/// preamble: max(Ts, (h_max + 1) r). Later syncs locked onto a payload 1.
std::int64_t preamble_deadline(const ProtocolTiming& timing, int h_max);

/// True when the node completed the frame after syncing on its preamble.
bool delivered(const NodeFrameResult& r, std::int64_t source_start, std::int64_t deadline);

/// Max over destinations of (completion - source start), in seconds; empty
/// if any destination missed the preamble or did not complete the frame.
std::optional<double> e2e_latency(const FrameRecord& record, int source, double sample_rate,
                                  std::int64_t deadline = std::numeric_limits<std::int64_t>::max());

struct NodeMetrics {
  int node = 0;
  int hop = 0;
  std::int64_t bits = 0;
  std::int64_t errors = 0;
  std::int64_t ones = 0;
  std::int64_t ones_missed = 0;
  std::int64_t zeros = 0;
  std::int64_t zeros_flipped = 0;
  int frames_synced = 0;
  int frames_timeout = 0;  // includes preamble misses
  int preamble_misses = 0;
  std::vector<std::int64_t> error_positions;

  double ber() const { return bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0; }
};

struct BchLoss {
  int frame_size = 0;
  int t = 0;
  std::int64_t frames = 0;
  std::int64_t lost = 0;
  double mean_errors = 0.0;
  double ratio() const { return frames ? static_cast<double>(lost) / static_cast<double>(frames) : 0.0; }
};

struct MetricsReport {
  std::vector<NodeMetrics> nodes;  // destinations only
  int node_count = 0;
  int h_max = 0;
  int frames = 0;
  int frames_complete = 0;
  int frame_timeouts = 0;
  int node_frame_timeouts = 0;
  int preamble_misses = 0;

  double ber_mean = 0.0;
  double ber_max = 0.0;
  double ser1 = 0.0;
  double ser0 = 0.0;
  std::int64_t bits = 0;
  std::int64_t errors = 0;

  std::vector<double> frame_latency;  // completed frames, seconds
  double latency_mean = 0.0;
  double latency_min = 0.0;
  double latency_max = 0.0;

  LatencyBounds bounds;
  int bound_checked = 0;
  int bound_violations = 0;
  double bound_worst_excess = 0.0;  // seconds above the upper bound

  double decision_delay0 = 0.0;
  double decision_delay1 = 0.0;
  double hop_slope = 0.0;  // seconds per hop
  double hop_intercept = 0.0;

  EmpiricalCdf spacing;
  std::vector<BchLoss> bch;

  std::vector<std::pair<std::string, std::string>> config;

  /// Flattened scalar columns, in a fixed order.
  std::vector<std::pair<std::string, double>> columns() const;
  /// Deterministic text form of the whole report.
  std::string to_text() const;
};

struct MetricsOptions {
  std::vector<int> bch_frame_sizes{64, 128, 256, 512};
  double bch_rate = 0.8;
  bool bch_frame_is_payload = false;
};

std::vector<std::pair<std::string, std::string>> describe(const SimConfig& cfg);

MetricsReport compute_metrics(const FloodRun& run, const MetricsOptions& opts = {});

struct FloodResult {
  FloodRun run;
  MetricsReport metrics;
};

/// Simulates the flood and evaluates it.
FloodResult run_flood(const SimConfig& cfg, const MetricsOptions& opts = {});

}  // namespace rfzw
