#include "rfzw/netsim.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace rfzw {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::int64_t align_up(std::int64_t v, std::int64_t step) { return (v + step - 1) / step * step; }

}  // namespace

void SimConfig::validate() const {
  phy.validate();
  channel.validate();
  detector.validate_for_symbol(phy.pulse_samples(), phy.symbol_samples());
  if (frame_size_bits < 1) throw ConfigError("frame size must be at least one bit");
  if (num_frames < 1) throw ConfigError("need at least one frame");
  if (!(cfo_range_hz >= 0.0)) throw ConfigError("CFO range must be non-negative");
  if (!(cfo_redraw_s > 0.0)) throw ConfigError("CFO redraw interval must be positive");
  if (!(tau_s >= 0.0)) throw ConfigError("tau must be non-negative");
  if (inter_frame_gap_symbols < 0 || listen_holdoff_symbols < 0) {
    throw ConfigError("gap and holdoff must be non-negative");
  }
  if (calibration_samples < 1) throw ConfigError("noise calibration needs at least one sample");
  if (fixed_payload && static_cast<int>(fixed_payload->size()) != frame_size_bits - 1) {
    throw ConfigError("fixed payload length must equal frame size minus the preamble");
  }
}

ProtocolTiming ProtocolTiming::from(const SimConfig& cfg) {
  ProtocolTiming t;
  t.symbol_samples = cfg.phy.symbol_samples();
  t.window_len = cfg.detector.window_len;
  t.buffer_size = cfg.detector.buffer_size;
  t.group_size = cfg.detector.group_size;
  t.relay_samples = cfg.detector.buffer_size;
  t.tau_samples = std::llround(cfg.tau_s * cfg.phy.sample_rate);
  t.pulse_len = pulse_support(cfg.phy).size();
  t.holdoff_samples = static_cast<std::int64_t>(cfg.listen_holdoff_symbols) * t.symbol_samples;
  t.gap_samples = static_cast<std::int64_t>(cfg.inter_frame_gap_symbols) * t.symbol_samples;
  t.frame_bits = cfg.frame_size_bits;
  return t;
}

NodeMachine::NodeMachine(const ProtocolTiming& timing, double threshold_amplitude,
                         std::int64_t listen_from)
    : timing_(timing),
      threshold_(threshold_amplitude),
      acc_(timing.buffer_size, timing.group_size) {
  if (listen_from > 0) {
    mode_ = Mode::Holdoff;
    resume_at_ = align_up(listen_from, timing.buffer_size);
  }
}

NodeMachine::Mode NodeMachine::mode(std::int64_t k) const {
  if (k < tx_until_) return Mode::Transmitting;
  if (mode_ == Mode::Holdoff && k >= resume_at_) return Mode::Listening;
  return mode_;
}

std::optional<std::int64_t> NodeMachine::step(bool above, std::int64_t k) {
  if (mode_ == Mode::Listening) {
    if (acc_.feed(above) != VoteAccumulator::Event::BufferHit) return std::nullopt;
    const std::int64_t t_n = k + 1;
    SyncedFrame f;
    f.sync_time = t_n;
    f.window_origin = t_n - timing_.relay_samples - timing_.tau_samples;
    frames_.push_back(std::move(f));
    window_start_ = frames_.back().window_origin + timing_.symbol_samples;
    symbol_ = 1;
    mode_ = Mode::Synced;
    acc_.reset();
    tx_until_ = t_n + timing_.pulse_len;
    if (timing_.frame_bits == 1) {
      mode_ = Mode::Holdoff;
      resume_at_ = align_up(t_n + timing_.holdoff_samples, timing_.buffer_size);
    }
    return t_n;
  }
  if (mode_ != Mode::Synced || k < window_start_) return std::nullopt;

  const auto ev = acc_.feed(above);
  if (ev == VoteAccumulator::Event::BufferHit) return decide(1, k + 1);
  if (k + 1 - window_start_ == timing_.window_len) return decide(0, k + 1);
  return std::nullopt;
}

std::optional<std::int64_t> NodeMachine::decide(int bit, std::int64_t t) {
  SyncedFrame& f = frames_.back();
  f.bits.push_back(static_cast<std::uint8_t>(bit));
  f.decision_times.push_back(t);
  f.decided_at.push_back(static_cast<std::int32_t>(t - window_start_));
  window_start_ += timing_.symbol_samples;
  ++symbol_;
  acc_.reset();
  if (symbol_ >= timing_.frame_bits) {
    mode_ = Mode::Holdoff;
    resume_at_ = align_up(t + timing_.holdoff_samples, timing_.buffer_size);
  }
  if (bit == 0) return std::nullopt;
  tx_until_ = t + timing_.pulse_len;
  return t;
}

std::int64_t frame_start(const ProtocolTiming& timing, int f) {
  const std::int64_t lead = align_up(timing.symbol_samples, timing.buffer_size);
  return align_up(lead + static_cast<std::int64_t>(f) * timing.frame_span(), timing.buffer_size);
}

std::vector<std::uint8_t> frame_bits(const SimConfig& cfg, int f) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(cfg.frame_size_bits), 0);
  bits[0] = 1;
  if (cfg.fixed_payload) {
    std::copy(cfg.fixed_payload->begin(), cfg.fixed_payload->end(), bits.begin() + 1);
    return bits;
  }
  RngStream rng(cfg.root_seed, fmt::format("source/frame/{}/bits", f));
  for (std::size_t i = 1; i < bits.size(); ++i) bits[i] = static_cast<std::uint8_t>(rng() >> 63);
  return bits;
}

namespace {

// Oscillator phase of every node, piecewise linear over CFO epochs.
class PhaseTable {
 public:
  PhaseTable(const CfoSchedule& sched, int nodes, std::int64_t total_samples, double fs)
      : fs_(fs),
        epoch_len_(std::max<std::int64_t>(1, std::llround(sched.redraw_interval * fs))),
        epochs_(total_samples / epoch_len_ + 1),
        cfo_(static_cast<std::size_t>(nodes * epochs_)),
        start_(cfo_.size()) {
    for (int n = 0; n < nodes; ++n) {
      double ph = 0.0;
      for (std::int64_t e = 0; e < epochs_; ++e) {
        const auto i = static_cast<std::size_t>(n * epochs_ + e);
        cfo_[i] = sched.offset(n, e);
        start_[i] = ph;
        ph = std::fmod(ph + kTwoPi * cfo_[i] * static_cast<double>(epoch_len_) / fs_, kTwoPi);
      }
    }
  }

  double phase(int node, std::int64_t k) const {
    const std::int64_t e = std::min(k / epoch_len_, epochs_ - 1);
    const auto i = static_cast<std::size_t>(node * epochs_ + e);
    return start_[i] + kTwoPi * cfo_[i] * static_cast<double>(k - e * epoch_len_) / fs_;
  }

 private:
  double fs_;
  std::int64_t epoch_len_;
  std::int64_t epochs_;
  std::vector<double> cfo_;
  std::vector<double> start_;
};

struct ActiveTx {
  int node = 0;
  std::int64_t start = 0;
  std::vector<Complex> rotated;
};

}  // namespace

FloodRun simulate_flood(const SimConfig& cfg, const SimHooks& hooks) {
  cfg.validate();
  FloodRun run;
  run.config = cfg;
  run.topology = build_grid(cfg.grid_rows, cfg.grid_cols, cfg.grid_distance_m, cfg.max_range_m,
                            cfg.source_corner);
  run.timing = ProtocolTiming::from(cfg);
  const Topology& topo = run.topology;
  const ProtocolTiming& tm = run.timing;
  const int n_nodes = topo.size();
  const int src = topo.source;
  const double fs = cfg.phy.sample_rate;

  const Samples pulse = pulse_support(cfg.phy);

  // Noise fields and per-node thresholds from a pre-run ambient capture.
  const double noise_mw = cfg.noise_power_mw();
  std::vector<NoiseField> noise;
  std::vector<double> p_exceed(n_nodes, 0.0);
  run.floor_dbm.assign(n_nodes, -std::numeric_limits<double>::infinity());
  run.threshold.assign(n_nodes, 0.0);
  noise.reserve(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    noise.emplace_back(RngStream(cfg.root_seed, fmt::format("node/{}/noise", i)), noise_mw);
    if (noise_mw > 0.0) {
      Waveform amb = Waveform::zeros(cfg.calibration_samples, fs, -cfg.calibration_samples);
      for (Eigen::Index k = 0; k < amb.size(); ++k) amb.samples[k] = noise[i].sample(amb.t0 + k);
      const NoiseFloor nf = measure_noise_floor(amb, cfg.detector.margin_db);
      run.floor_dbm[i] = nf.floor_dbm;
      run.threshold[i] = nf.threshold_amplitude;
    } else {
      // Without noise the detector still needs a finite threshold; use the
      // configured one, else margin above the nominal noise power.
      run.threshold[i] = cfg.detector.threshold_amplitude > 0.0
                             ? cfg.detector.threshold_amplitude
                             : dbm_to_amplitude(cfg.noise_power_dbm + cfg.detector.margin_db);
    }
    p_exceed[i] = noise[i].exceed_probability(run.threshold[i]);
  }

  // Frame schedule and truth bits.
  std::vector<std::int64_t> starts(cfg.num_frames);
  run.frames.resize(cfg.num_frames);
  for (int f = 0; f < cfg.num_frames; ++f) {
    starts[f] = frame_start(tm, f);
    run.frames[f].index = f;
    run.frames[f].source_start = starts[f];
    run.frames[f].truth = frame_bits(cfg, f);
  }
  const std::int64_t end = starts.back() + tm.frame_span();
  run.total_samples = end;

  CfoSchedule sched{cfg.cfo_range_hz, cfg.cfo_redraw_s, cfg.root_seed};
  const PhaseTable phases(sched, n_nodes, end, fs);

  // Static part of every link: path gain, antennas, shadowing, delay.
  Eigen::MatrixXd mean_gain = Eigen::MatrixXd::Zero(n_nodes, n_nodes);
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> delay =
      Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n_nodes, n_nodes);
  std::int64_t max_delay = 0;
  const double cutoff_mw = noise_mw > 0.0 ? noise_mw * db_to_linear(-cfg.link_cutoff_db) : 0.0;
  const double tx_mw = dbm_to_mw(cfg.phy.tx_power_dbm);
  for (int a = 0; a < n_nodes; ++a) {
    for (int b = a + 1; b < n_nodes; ++b) {
      double shadow_db = 0.0;
      if (cfg.channel.shadowing_sigma_db > 0.0) {
        RngStream s(cfg.root_seed, fmt::format("link/{}/{}/shadow", a, b));
        shadow_db = cfg.channel.shadowing_sigma_db * s.normal();
      }
      const LinkState link = make_link(a, b, topo.distance(a, b), cfg.channel, cfg.phy, {1.0, 0.0}, shadow_db);
      const double g = std::abs(link.gain);
      if (g * g * tx_mw < cutoff_mw) continue;
      mean_gain(a, b) = mean_gain(b, a) = g;
      delay(a, b) = delay(b, a) = link.delay_samples;
      max_delay = std::max(max_delay, link.delay_samples);
    }
  }

  // Reciprocal block fading, redrawn every frame.
  Eigen::MatrixXcd gain = Eigen::MatrixXcd::Zero(n_nodes, n_nodes);
  auto draw_frame_fading = [&](int f) {
    for (int a = 0; a < n_nodes; ++a) {
      for (int b = a + 1; b < n_nodes; ++b) {
        if (mean_gain(a, b) == 0.0) continue;
        RngStream s(cfg.root_seed, fmt::format("link/{}/{}/frame/{}", a, b, f));
        gain(a, b) = gain(b, a) = mean_gain(a, b) * draw_fading(cfg.channel.rician_k_db, s);
      }
    }
  };

  std::vector<NodeMachine> machines(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    if (i != src) machines[i] = NodeMachine(tm, run.threshold[i]);
  }

  std::vector<ActiveTx> active;
  std::vector<int> relays;
  auto emit = [&](int node, std::int64_t start) {
    ActiveTx tx;
    tx.node = node;
    tx.start = start;
    tx.rotated.resize(static_cast<std::size_t>(pulse.size()));
    for (Eigen::Index m = 0; m < pulse.size(); ++m) {
      tx.rotated[m] = pulse[m] * std::polar(1.0, phases.phase(node, start + m));
    }
    active.push_back(std::move(tx));
    if (hooks.on_transmit) hooks.on_transmit(node, start);
  };

  const bool full_samples = static_cast<bool>(hooks.on_sample);
  int next_frame = 0;
  int source_frame = -1;
  int source_symbol = 0;
  std::vector<std::int64_t> relay_start(n_nodes, 0);

  for (std::int64_t k = 0; k < end; ++k) {
    if (next_frame < cfg.num_frames && k == starts[next_frame]) {
      draw_frame_fading(next_frame);
      source_frame = next_frame;
      source_symbol = 0;
      ++next_frame;
    }
    if (source_frame >= 0 && source_symbol < tm.frame_bits &&
        k == starts[source_frame] + source_symbol * tm.symbol_samples) {
      if (run.frames[source_frame].truth[source_symbol]) emit(src, k);
      ++source_symbol;
    }

    relays.clear();
    for (int i = 0; i < n_nodes; ++i) {
      if (i == src) continue;
      NodeMachine& m = machines[i];
      const auto need = m.poll(k);
      if (need == NodeMachine::Input::None) continue;
      bool above = false;
      if (need == NodeMachine::Input::Sample) {
        Complex acc{0.0, 0.0};
        for (const ActiveTx& tx : active) {
          if (tx.node == i) continue;
          const std::int64_t idx = k - delay(i, tx.node) - tx.start;
          if (idx < 0 || idx >= static_cast<std::int64_t>(tx.rotated.size())) continue;
          acc += gain(i, tx.node) * tx.rotated[static_cast<std::size_t>(idx)];
        }
        if (acc != Complex(0.0, 0.0) || full_samples) {
          if (acc != Complex(0.0, 0.0)) acc *= std::polar(1.0, -phases.phase(i, k));
          const Complex y = acc + noise[i].sample(k);
          if (full_samples) hooks.on_sample(i, k, y);
          above = std::norm(y) > run.threshold[i] * run.threshold[i];
        } else {
          above = noise[i].exceeds(k, p_exceed[i]);
        }
      }
      if (const auto t = m.step(above, k)) {
        relays.push_back(i);
        relay_start[i] = *t;
      }
    }
    for (int i : relays) emit(i, relay_start[i]);

    std::erase_if(active, [&](const ActiveTx& tx) {
      return tx.start + static_cast<std::int64_t>(tx.rotated.size()) + max_delay <= k + 1;
    });
  }

  // Attribute each node's synchronisations to source frames.
  for (FrameRecord& fr : run.frames) fr.nodes.resize(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    if (i == src) continue;
    for (const SyncedFrame& sf : machines[i].frames()) {
      const auto it = std::upper_bound(starts.begin(), starts.end(), sf.sync_time);
      if (it == starts.begin()) continue;
      const auto f = static_cast<std::size_t>(std::distance(starts.begin(), it) - 1);
      NodeFrameResult& r = run.frames[f].nodes[i];
      if (r.synced) continue;
      r.synced = true;
      r.sync_time = sf.sync_time;
      r.payload = sf.bits;
      r.decision_times = sf.decision_times;
      r.decided_at = sf.decided_at;
      r.complete = static_cast<int>(sf.bits.size()) == tm.frame_bits - 1;
      r.completion = sf.decision_times.empty() ? sf.sync_time : sf.decision_times.back();
    }
  }
  return run;
}

}  // namespace rfzw
