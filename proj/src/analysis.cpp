#include "rfzw/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace rfzw {

LatencyBounds latency_bounds(int n, double symbol_period, double relay, int h_max) {
  if (n < 1) throw ConfigError("frame length must be at least one bit");
  if (h_max < 0) throw ConfigError("hop count must be non-negative");
  const double lower = static_cast<double>(n - 1) * symbol_period;
  return {lower, lower + relay * static_cast<double>(h_max)};
}

double sf_latency(int n, double symbol_period, double access_wait, int h_max) {
  if (n < 0 || symbol_period < 0.0 || access_wait < 0.0 || h_max < 0) {
    throw ConfigError("store-and-forward latency inputs must be non-negative");
  }
  return static_cast<double>(h_max) * (static_cast<double>(n) * symbol_period + access_wait);
}

double EmpiricalCdf::at(double x) const {
  if (sorted.empty()) return 0.0;
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

std::vector<double> power_of_two_breakpoints(int max_exponent) {
  std::vector<double> b;
  for (int e = 0; e <= max_exponent; ++e) b.push_back(std::ldexp(1.0, e));
  return b;
}

std::vector<std::int64_t> error_spacings(std::span<const std::int64_t> positions) {
  std::vector<std::int64_t> d;
  if (positions.size() < 2) return d;
  d.reserve(positions.size() - 1);
  for (std::size_t i = 1; i < positions.size(); ++i) {
    if (positions[i] <= positions[i - 1]) throw ConfigError("error positions must be strictly increasing");
    d.push_back(positions[i] - positions[i - 1]);
  }
  return d;
}

EmpiricalCdf empirical_cdf(std::vector<double> samples, std::span<const double> breakpoints) {
  EmpiricalCdf c;
  std::sort(samples.begin(), samples.end());
  c.sorted = std::move(samples);
  c.samples = c.sorted.size();
  c.breakpoints.assign(breakpoints.begin(), breakpoints.end());
  c.values.reserve(c.breakpoints.size());
  for (double b : c.breakpoints) c.values.push_back(c.at(b));
  return c;
}

EmpiricalCdf error_spacing_cdf(std::span<const std::int64_t> positions, std::span<const double> breakpoints) {
  const auto gaps = error_spacings(positions);
  std::vector<double> s(gaps.begin(), gaps.end());
  if (breakpoints.empty()) {
    const auto def = power_of_two_breakpoints();
    return empirical_cdf(std::move(s), def);
  }
  return empirical_cdf(std::move(s), breakpoints);
}

double ErrorsPerFrame::mean() const {
  if (counts.empty()) return 0.0;
  const double sum = std::accumulate(counts.begin(), counts.end(), 0.0);
  return sum / static_cast<double>(counts.size());
}

double ErrorsPerFrame::cdf(int c) const {
  if (counts.empty() || c < 0) return 0.0;
  std::size_t le = 0;
  for (std::size_t i = 0; i < histogram.size() && static_cast<int>(i) <= c; ++i) le += histogram[i];
  return static_cast<double>(le) / static_cast<double>(counts.size());
}

ErrorsPerFrame errors_per_frame(std::span<const std::int64_t> positions, int frame_size,
                                std::optional<std::int64_t> total_bits) {
  if (frame_size < 1) throw ConfigError("frame size must be at least one bit");
  ErrorsPerFrame out;
  out.frame_size = frame_size;
  std::int64_t frames = 0;
  if (total_bits) {
    if (*total_bits < 0) throw ConfigError("total bit count must be non-negative");
    frames = (*total_bits + frame_size - 1) / frame_size;
  } else if (!positions.empty()) {
    frames = positions.back() / frame_size + 1;
  }
  out.counts.assign(static_cast<std::size_t>(frames), 0);
  for (std::int64_t p : positions) {
    if (p < 0) throw ConfigError("error positions must be non-negative");
    const std::int64_t f = p / frame_size;
    if (f >= frames) throw ConfigError("error position beyond the end of the bit stream");
    ++out.counts[static_cast<std::size_t>(f)];
  }
  int max_count = 0;
  for (int c : out.counts) max_count = std::max(max_count, c);
  out.histogram.assign(static_cast<std::size_t>(max_count) + 1, 0);
  for (int c : out.counts) ++out.histogram[static_cast<std::size_t>(c)];
  if (out.counts.empty()) out.histogram.clear();
  return out;
}

int bch_generator_degree(int m, int t) {
  if (m < 2 || m > 30) throw ConfigError("BCH field degree out of range");
  if (t < 0) throw ConfigError("BCH t must be non-negative");
  const std::int64_t n = (std::int64_t{1} << m) - 1;
  std::set<std::int64_t> roots;
  for (int i = 1; i <= 2 * t - 1; i += 2) {
    std::int64_t r = i % n;
    while (roots.insert(r).second) r = (r * 2) % n;
  }
  return static_cast<int>(roots.size());
}

int bch_capacity(int codeword_len, double rate) {
  if (codeword_len < 7) throw ConfigError("BCH codeword length must be at least 7");
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError(fmt::format("code rate {:g} outside (0, 1)", rate));
  const int m = static_cast<int>(std::ceil(std::log2(static_cast<double>(codeword_len) + 1.0)));
  const int k = static_cast<int>(std::floor(rate * static_cast<double>(codeword_len)));
  const int parity = codeword_len - k;
  int t = parity / m;
  while (t > 0 && bch_generator_degree(m, t) > parity) --t;
  return t;
}

BchModel bch_model(int frame_size, double rate, bool frame_is_payload) {
  BchModel b;
  b.code_rate = rate;
  b.codeword_len =
      frame_is_payload ? static_cast<int>(std::ceil(static_cast<double>(frame_size) / rate)) : frame_size;
  b.t = bch_capacity(b.codeword_len, rate);
  return b;
}

double frame_loss_ratio(std::span<const std::int64_t> positions, int frame_size, int t,
                        std::optional<std::int64_t> total_bits) {
  if (t < 0) throw ConfigError("correction capacity must be non-negative");
  const ErrorsPerFrame e = errors_per_frame(positions, frame_size, total_bits);
  if (e.counts.empty()) return 0.0;
  const auto lost = std::count_if(e.counts.begin(), e.counts.end(), [t](int c) { return c > t; });
  return static_cast<double>(lost) / static_cast<double>(e.counts.size());
}

std::int64_t preamble_deadline(const ProtocolTiming& timing, int h_max) {
  return std::max(timing.symbol_samples, static_cast<std::int64_t>(h_max + 1) * timing.relay_samples);
}

bool delivered(const NodeFrameResult& r, std::int64_t source_start, std::int64_t deadline) {
  return r.complete && r.sync_time - source_start <= deadline;
}

std::optional<double> e2e_latency(const FrameRecord& record, int source, double sample_rate,
                                  std::int64_t deadline) {
  std::int64_t worst = record.source_start;
  for (std::size_t i = 0; i < record.nodes.size(); ++i) {
    if (static_cast<int>(i) == source) continue;
    const NodeFrameResult& r = record.nodes[i];
    if (!delivered(r, record.source_start, deadline)) return std::nullopt;
    worst = std::max(worst, r.completion);
  }
  return static_cast<double>(worst - record.source_start) / sample_rate;
}

std::vector<std::pair<std::string, std::string>> describe(const SimConfig& cfg) {
  const auto g = [](double v) { return fmt::format("{:.9g}", v); };
  return {
      {"grid_rows", std::to_string(cfg.grid_rows)},
      {"grid_cols", std::to_string(cfg.grid_cols)},
      {"grid_distance_m", g(cfg.grid_distance_m)},
      {"max_range_m", g(cfg.max_range_m)},
      {"source_corner", to_string(cfg.source_corner)},
      {"data_rate_bps", g(cfg.data_rate())},
      {"sample_rate_hz", g(cfg.phy.sample_rate)},
      {"pulse_duration_s", g(cfg.phy.pulse_duration)},
      {"tx_power_dbm", g(cfg.phy.tx_power_dbm)},
      {"frame_size_bits", std::to_string(cfg.frame_size_bits)},
      {"num_frames", std::to_string(cfg.num_frames)},
      {"channel_profile", to_string(cfg.channel.name)},
      {"pathloss_exponent_near", g(cfg.channel.pathloss_exponent_near)},
      {"pathloss_exponent_far", g(cfg.channel.pathloss_exponent_far)},
      {"breakpoint_m", g(cfg.channel.breakpoint_m)},
      {"rician_k_db", g(cfg.channel.rician_k_db)},
      {"shadowing_sigma_db", g(cfg.channel.shadowing_sigma_db)},
      {"cfo_range_hz", g(cfg.cfo_range_hz)},
      {"cfo_redraw_s", g(cfg.cfo_redraw_s)},
      {"noise_enabled", cfg.noise_enabled ? "true" : "false"},
      {"noise_power_dbm", g(cfg.noise_power_dbm)},
      {"window_len_samples", std::to_string(cfg.detector.window_len)},
      {"buffer_size_samples", std::to_string(cfg.detector.buffer_size)},
      {"group_size", std::to_string(cfg.detector.group_size)},
      {"margin_db", g(cfg.detector.margin_db)},
      {"tau_s", g(cfg.tau_s)},
      {"root_seed", std::to_string(cfg.root_seed)},
  };
}

MetricsReport compute_metrics(const FloodRun& run, const MetricsOptions& opts) {
  const SimConfig& cfg = run.config;
  const Topology& topo = run.topology;
  const int n_nodes = topo.size();
  const int src = topo.source;
  const double fs = cfg.phy.sample_rate;
  const std::int64_t payload_bits = cfg.frame_size_bits - 1;
  const std::int64_t deadline = preamble_deadline(run.timing, topo.h_max);

  MetricsReport rep;
  rep.node_count = n_nodes;
  rep.h_max = topo.h_max;
  rep.frames = static_cast<int>(run.frames.size());
  rep.config = describe(cfg);
  rep.bounds = latency_bounds(cfg.frame_size_bits, cfg.phy.symbol_period,
                           static_cast<double>(run.timing.relay_samples) / fs, topo.h_max);

  for (int i = 0; i < n_nodes; ++i) {
    if (i == src) continue;
    NodeMetrics nm;
    nm.node = i;
    nm.hop = topo.hop_count[static_cast<std::size_t>(i)];
    rep.nodes.push_back(nm);
  }

  double delay_sum[2] = {0.0, 0.0};
  std::int64_t delay_n[2] = {0, 0};
  // Within-frame centred sums for the hop regression.
  double sxy = 0.0, sxx = 0.0, sum_h = 0.0, sum_y = 0.0;
  std::int64_t n_reg = 0;

  for (const FrameRecord& fr : run.frames) {
    bool frame_ok = true;
    std::vector<std::pair<double, double>> hop_points;
    for (NodeMetrics& nm : rep.nodes) {
      const NodeFrameResult& r = fr.nodes[static_cast<std::size_t>(nm.node)];
      if (!delivered(r, fr.source_start, deadline)) {
        if (r.complete) {
          ++nm.preamble_misses;
          ++rep.preamble_misses;
        }
        ++nm.frames_timeout;
        ++rep.node_frame_timeouts;
        frame_ok = false;
        continue;
      }
      ++nm.frames_synced;
      bool node_ok = true;
      for (std::int64_t j = 0; j < payload_bits; ++j) {
        const int want = fr.truth[static_cast<std::size_t>(j + 1)];
        const int got = r.payload[static_cast<std::size_t>(j)];
        ++nm.bits;
        if (want) {
          ++nm.ones;
          if (!got) ++nm.ones_missed;
        } else {
          ++nm.zeros;
          if (got) ++nm.zeros_flipped;
        }
        if (want != got) {
          ++nm.errors;
          nm.error_positions.push_back(static_cast<std::int64_t>(fr.index) * payload_bits + j);
          node_ok = false;
        }
        const int b = got ? 1 : 0;
        delay_sum[b] += static_cast<double>(r.decided_at[static_cast<std::size_t>(j)]) / fs;
        ++delay_n[b];
      }
      if (!node_ok) frame_ok = false;
      if (node_ok) {
        hop_points.emplace_back(static_cast<double>(nm.hop),
                                static_cast<double>(r.completion - fr.source_start) / fs);
      }
    }

    if (hop_points.size() >= 2) {
      double mh = 0.0, my = 0.0;
      for (const auto& [h, y] : hop_points) {
        mh += h;
        my += y;
      }
      mh /= static_cast<double>(hop_points.size());
      my /= static_cast<double>(hop_points.size());
      for (const auto& [h, y] : hop_points) {
        sxy += (h - mh) * (y - my);
        sxx += (h - mh) * (h - mh);
        sum_h += h;
        sum_y += y;
        ++n_reg;
      }
    }

    const auto d = e2e_latency(fr, src, fs, deadline);
    if (!d) {
      ++rep.frame_timeouts;
      continue;
    }
    ++rep.frames_complete;
    rep.frame_latency.push_back(*d);
    if (frame_ok) {
      ++rep.bound_checked;
      if (*d < rep.bounds.lower || *d > rep.bounds.upper) {
        ++rep.bound_violations;
        const double excess = std::max(*d - rep.bounds.upper, rep.bounds.lower - *d);
        rep.bound_worst_excess = std::max(rep.bound_worst_excess, excess);
      }
    }
  }

  if (!rep.frame_latency.empty()) {
    const auto [mn, mx] = std::minmax_element(rep.frame_latency.begin(), rep.frame_latency.end());
    rep.latency_min = *mn;
    rep.latency_max = *mx;
    rep.latency_mean = std::accumulate(rep.frame_latency.begin(), rep.frame_latency.end(), 0.0) /
                       static_cast<double>(rep.frame_latency.size());
  }
  if (delay_n[0]) rep.decision_delay0 = delay_sum[0] / static_cast<double>(delay_n[0]);
  if (delay_n[1]) rep.decision_delay1 = delay_sum[1] / static_cast<double>(delay_n[1]);
  if (sxx > 0.0) {
    rep.hop_slope = sxy / sxx;
    rep.hop_intercept = (sum_y - rep.hop_slope * sum_h) / static_cast<double>(n_reg);
  }

  std::int64_t ones = 0, ones_missed = 0, zeros = 0, zeros_flipped = 0;
  std::vector<double> gaps;
  double ber_sum = 0.0;
  int ber_n = 0;
  for (const NodeMetrics& nm : rep.nodes) {
    rep.bits += nm.bits;
    rep.errors += nm.errors;
    ones += nm.ones;
    ones_missed += nm.ones_missed;
    zeros += nm.zeros;
    zeros_flipped += nm.zeros_flipped;
    if (nm.bits > 0) {
      ber_sum += nm.ber();
      ++ber_n;
      rep.ber_max = std::max(rep.ber_max, nm.ber());
    }
    for (std::int64_t s : error_spacings(nm.error_positions)) gaps.push_back(static_cast<double>(s));
  }
  if (ber_n) rep.ber_mean = ber_sum / ber_n;
  if (ones) rep.ser1 = static_cast<double>(ones_missed) / static_cast<double>(ones);
  if (zeros) rep.ser0 = static_cast<double>(zeros_flipped) / static_cast<double>(zeros);
  rep.spacing = empirical_cdf(std::move(gaps), power_of_two_breakpoints());

  const std::int64_t stream_bits = static_cast<std::int64_t>(run.frames.size()) * payload_bits;
  for (int size : opts.bch_frame_sizes) {
    const BchModel model = bch_model(size, opts.bch_rate, opts.bch_frame_is_payload);
    BchLoss loss;
    loss.frame_size = size;
    loss.t = model.t;
    double err_sum = 0.0;
    for (const NodeMetrics& nm : rep.nodes) {
      const ErrorsPerFrame e = errors_per_frame(nm.error_positions, model.codeword_len, stream_bits);
      loss.frames += static_cast<std::int64_t>(e.counts.size());
      for (int c : e.counts) {
        err_sum += c;
        if (c > model.t) ++loss.lost;
      }
    }
    if (loss.frames) loss.mean_errors = err_sum / static_cast<double>(loss.frames);
    rep.bch.push_back(loss);
  }
  return rep;
}

std::vector<std::pair<std::string, double>> MetricsReport::columns() const {
  std::vector<std::pair<std::string, double>> c{
      {"nodes", node_count},
      {"h_max", h_max},
      {"frames", frames},
      {"frames_complete", frames_complete},
      {"frame_timeouts", frame_timeouts},
      {"node_frame_timeouts", node_frame_timeouts},
      {"preamble_misses", preamble_misses},
      {"payload_bits", static_cast<double>(bits)},
      {"bit_errors", static_cast<double>(errors)},
      {"ber_mean", ber_mean},
      {"ber_max", ber_max},
      {"ber_pooled", bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0},
      {"ser1", ser1},
      {"ser0", ser0},
      {"latency_mean_s", latency_mean},
      {"latency_min_s", latency_min},
      {"latency_max_s", latency_max},
      {"latency_lower_s", bounds.lower},
      {"latency_upper_s", bounds.upper},
      {"bound_checked_frames", bound_checked},
      {"bound_violations", bound_violations},
      {"bound_worst_excess_s", bound_worst_excess},
      {"decision_delay0_s", decision_delay0},
      {"decision_delay1_s", decision_delay1},
      {"hop_slope_s", hop_slope},
      {"error_spacings", static_cast<double>(spacing.samples)},
  };
  for (std::size_t i = 0; i < spacing.breakpoints.size(); i += 2) {
    c.emplace_back(fmt::format("spacing_cdf_le_{:.0f}", spacing.breakpoints[i]), spacing.values[i]);
  }
  for (const BchLoss& b : bch) {
    c.emplace_back(fmt::format("bch{}_t", b.frame_size), b.t);
    c.emplace_back(fmt::format("bch{}_frames", b.frame_size), static_cast<double>(b.frames));
    c.emplace_back(fmt::format("bch{}_lost", b.frame_size), static_cast<double>(b.lost));
    c.emplace_back(fmt::format("bch{}_loss_ratio", b.frame_size), b.ratio());
    c.emplace_back(fmt::format("bch{}_mean_errors", b.frame_size), b.mean_errors);
  }
  return c;
}

std::string MetricsReport::to_text() const {
  std::string out;
  for (const auto& [k, v] : config) out += fmt::format("config.{} = {}\n", k, v);
  for (const auto& [k, v] : columns()) out += fmt::format("{} = {:.9g}\n", k, v);
  for (const NodeMetrics& nm : nodes) {
    out += fmt::format("node {} hop {} bits {} errors {} ber {:.9g} timeouts {}\n", nm.node, nm.hop, nm.bits,
                       nm.errors, nm.ber(), nm.frames_timeout);
  }
  out += "frame_latency_s =";
  for (double d : frame_latency) out += fmt::format(" {:.9g}", d);
  out += "\n";
  return out;
}

FloodResult run_flood(const SimConfig& cfg, const MetricsOptions& opts) {
  FloodResult r;
  r.run = simulate_flood(cfg);
  r.metrics = compute_metrics(r.run, opts);
  return r;
}

}  // namespace rfzw
