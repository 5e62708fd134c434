// Window-based voting symbol detector.
//
// A detection window of `window_len` samples is consumed in buffers of
// `buffer_size` samples. Each full buffer is split into consecutive,
// non-overlapping groups of `group_size` samples; a group votes "pulse" when
// strictly more than half of its samples exceed the amplitude threshold.
// The first buffer holding a winning group decides symbol 1 at that buffer's
// end; a window with no winning group decides symbol 0 at its end.
#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "rfzw/signal.hpp"

namespace rfzw {

struct DetectorConfig {
  Eigen::Index window_len = 200;
  Eigen::Index buffer_size = 100;
  Eigen::Index group_size = 10;
  double threshold_amplitude = 0.0;
  double margin_db = 9.0;

  /// Buffer/group divisibility and positivity.
  void validate() const;
  /// Additionally requires pulse_samples < window_len <= symbol_samples.
  void validate_for_symbol(Eigen::Index pulse_samples, Eigen::Index symbol_samples) const;
  Eigen::Index attempts_per_window() const { return window_len / buffer_size; }
};

struct SymbolDecision {
  int bit = 0;
  /// Samples from the window start at which the decision was made.
  Eigen::Index decided_at = 0;

  friend bool operator==(const SymbolDecision&, const SymbolDecision&) = default;
};

template <typename Derived>
bool vote_group(const Eigen::ArrayBase<Derived>& group, double threshold_amplitude,
                Eigen::Index group_size) {
  if (group.size() != group_size) throw ConfigError("vote group has the wrong length");
  const Eigen::Index above = (group.abs() > threshold_amplitude).count();
  return 2 * above > group_size;
}

template <typename Scalar>
SymbolDecision detect_window(const BasicWaveform<Scalar>& window, const DetectorConfig& cfg) {
  cfg.validate();
  if (window.size() != cfg.window_len) throw ConfigError("detection window has the wrong length");
  const Eigen::Index groups = cfg.buffer_size / cfg.group_size;
  for (Eigen::Index b = 0; b < cfg.attempts_per_window(); ++b) {
    const Eigen::Index base = b * cfg.buffer_size;
    for (Eigen::Index g = 0; g < groups; ++g) {
      const auto seg = window.samples.segment(base + g * cfg.group_size, cfg.group_size);
      if (vote_group(seg, cfg.threshold_amplitude, cfg.group_size)) {
        return {1, base + cfg.buffer_size};
      }
    }
  }
  return {0, cfg.window_len};
}

/// Sample-at-a-time form of the buffer/group vote, used by the network
/// simulator where samples arrive one tick at a time.
class VoteAccumulator {
 public:
  enum class Event { None, BufferMiss, BufferHit };

  VoteAccumulator() = default;
  VoteAccumulator(Eigen::Index buffer_size, Eigen::Index group_size)
      : buffer_(static_cast<int>(buffer_size)), group_(static_cast<int>(group_size)) {}

  void reset() {
    in_buffer_ = in_group_ = above_ = 0;
    hit_ = false;
  }

  Event feed(bool above_threshold) {
    above_ += above_threshold ? 1 : 0;
    if (++in_group_ == group_) {
      if (2 * above_ > group_) hit_ = true;
      in_group_ = above_ = 0;
    }
    if (++in_buffer_ == buffer_) {
      const bool hit = hit_;
      reset();
      return hit ? Event::BufferHit : Event::BufferMiss;
    }
    return Event::None;
  }

  int position() const { return in_buffer_; }

 private:
  int buffer_ = 100;
  int group_ = 10;
  int in_buffer_ = 0;
  int in_group_ = 0;
  int above_ = 0;
  bool hit_ = false;
};

/// Detection-window start for a preamble detected at t_n: t_n - r - tau.
double window_start(double t_n, double relay, double tau);

/// Time to fill one receive buffer.
double relay_time(Eigen::Index buffer_size, double sample_rate);

}  // namespace rfzw
