// Symbol-synchronous flooding over a shared 20 MHz sample clock.
//
// Every non-source node runs the same three-state protocol machine:
//   Listening - continuous buffer-by-buffer voting on the global buffer grid;
//               the first hit is the 1-bit preamble.
//   Synced    - one detection window per symbol, placed at t_n - r - tau plus
//               a whole number of symbol periods; a 1-decision is relayed as
//               a pulse starting on the next sample.
//   Holdoff   - deaf for a fixed time after the last symbol so trailing echoes
//               of the frame cannot be taken for a new preamble.
// A node that is transmitting receives nothing (half-duplex); window samples
// that fall in its own transmission are fed to the detector as silence.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "rfzw/channel.hpp"
#include "rfzw/detector.hpp"
#include "rfzw/phy.hpp"
#include "rfzw/topology.hpp"

namespace rfzw {

struct SimConfig {
  PhyParams phy;
  DetectorConfig detector;
  ChannelProfile channel = ChannelProfile::d_like();
  int grid_rows = 5;
  int grid_cols = 5;
  double grid_distance_m = 5.0;
  double max_range_m = 11.0;
  Corner source_corner = Corner::BottomRight;
  int frame_size_bits = 512;  // including the preamble bit
  int num_frames = 20;
  double cfo_range_hz = 0.0;
  double cfo_redraw_s = 1.0;
  bool noise_enabled = true;
  double noise_power_dbm = -60.0;
  double tau_s = 0.5e-6;
  std::uint64_t root_seed = 1;
  int inter_frame_gap_symbols = 20;
  int listen_holdoff_symbols = 10;
  Eigen::Index calibration_samples = 20000;
  /// Links whose mean received power sits more than this far below the
  /// noise power are dropped from the superposition.
  double link_cutoff_db = 30.0;
  /// Overrides the random payload (length frame_size_bits - 1) when set.
  std::optional<std::vector<std::uint8_t>> fixed_payload;

  double data_rate() const { return phy.data_rate(); }
  void set_data_rate(double bps) { phy.symbol_period = 1.0 / bps; }
  double noise_power_mw() const { return noise_enabled ? dbm_to_mw(noise_power_dbm) : 0.0; }
  void validate() const;
};

/// Sample-domain constants derived from a SimConfig.
struct ProtocolTiming {
  std::int64_t symbol_samples = 200;
  std::int64_t window_len = 200;
  std::int64_t buffer_size = 100;
  std::int64_t group_size = 10;
  std::int64_t relay_samples = 100;
  std::int64_t tau_samples = 10;
  std::int64_t pulse_len = 102;
  std::int64_t holdoff_samples = 2000;
  std::int64_t gap_samples = 4000;
  int frame_bits = 512;

  static ProtocolTiming from(const SimConfig& cfg);
  std::int64_t frame_span() const { return frame_bits * symbol_samples + gap_samples; }
};

/// One preamble synchronisation and the symbol decisions that followed it.
struct SyncedFrame {
  std::int64_t sync_time = 0;     // preamble decision sample
  std::int64_t window_origin = 0;  // t_n - r - tau
  std::vector<std::uint8_t> bits;
  std::vector<std::int64_t> decision_times;
  std::vector<std::int32_t> decided_at;
};

class NodeMachine {
 public:
  enum class Mode { Listening, Synced, Transmitting, Holdoff };
  enum class Input { None, Blank, Sample };

  NodeMachine() = default;
  NodeMachine(const ProtocolTiming& timing, double threshold_amplitude, std::int64_t listen_from = 0);

  /// What the node consumes at sample k. Also applies time-driven
  /// transitions (holdoff expiry), so call it once per tick before step().
  Input poll(std::int64_t k) {
    if (mode_ == Mode::Holdoff) {
      if (k < resume_at_) return Input::None;
      mode_ = Mode::Listening;
      acc_.reset();
    }
    if (mode_ == Mode::Listening) return k < tx_until_ ? Input::None : Input::Sample;
    if (k < window_start_) return Input::None;
    return k < tx_until_ ? Input::Blank : Input::Sample;
  }

  /// Consumes one thresholded sample. Returns the start sample of a relay
  /// pulse when the node decides to transmit.
  std::optional<std::int64_t> step(bool above_threshold, std::int64_t k);
  std::optional<std::int64_t> step(Complex rx_sample, std::int64_t k) {
    return step(std::norm(rx_sample) > threshold_ * threshold_, k);
  }

  Mode mode(std::int64_t k) const;
  double threshold() const { return threshold_; }
  int symbol_index() const { return symbol_; }
  std::int64_t window_start() const { return window_start_; }
  std::int64_t transmitting_until() const { return tx_until_; }
  const std::vector<SyncedFrame>& frames() const { return frames_; }

 private:
  std::optional<std::int64_t> decide(int bit, std::int64_t t);

  ProtocolTiming timing_{};
  double threshold_ = 0.0;
  Mode mode_ = Mode::Listening;
  VoteAccumulator acc_{};
  std::int64_t window_start_ = 0;
  std::int64_t tx_until_ = 0;
  std::int64_t resume_at_ = 0;
  int symbol_ = 0;
  std::vector<SyncedFrame> frames_;
};

/// Free-function form of NodeMachine::step on a complex receive sample.
inline std::optional<std::int64_t> step_node(NodeMachine& node, Complex rx_sample, std::int64_t k) {
  node.poll(k);
  return node.step(rx_sample, k);
}

struct NodeFrameResult {
  bool synced = false;
  bool complete = false;
  std::int64_t sync_time = 0;
  std::vector<std::uint8_t> payload;
  std::vector<std::int64_t> decision_times;
  std::vector<std::int32_t> decided_at;
  std::int64_t completion = 0;  // sample of the last payload decision
};

struct FrameRecord {
  int index = 0;
  std::int64_t source_start = 0;
  std::vector<std::uint8_t> truth;  // preamble + payload
  std::vector<NodeFrameResult> nodes;
};

struct FloodRun {
  SimConfig config;
  Topology topology;
  ProtocolTiming timing;
  std::vector<FrameRecord> frames;
  std::vector<double> floor_dbm;
  std::vector<double> threshold;
  std::int64_t total_samples = 0;
};

struct SimHooks {
  /// Called with every computed receive sample (disables the noise-only
  /// fast path; meant for tests).
  std::function<void(int node, std::int64_t k, Complex y)> on_sample;
  std::function<void(int node, std::int64_t start)> on_transmit;
};

/// Runs every frame of the configured flood.
FloodRun simulate_flood(const SimConfig& cfg, const SimHooks& hooks = {});

/// Buffer-grid-aligned start sample of frame f.
std::int64_t frame_start(const ProtocolTiming& timing, int f);

/// Payload bits of frame f under cfg (random unless fixed_payload is set).
std::vector<std::uint8_t> frame_bits(const SimConfig& cfg, int f);

}  // namespace rfzw
