#include "rfzw/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

namespace rfzw {

namespace {

std::string where(const std::string& source, const YAML::Node& node) {
  const YAML::Mark m = node.Mark();
  if (m.line < 0) return source + ": ";
  return fmt::format("{}:{}:{}: ", source, m.line + 1, m.column + 1);
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key, const std::string& source) {
  if (!node.IsScalar()) throw SpecError(where(source, node) + fmt::format("'{}' expects a scalar", key));
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw SpecError(where(source, node) + fmt::format("'{}' has an invalid value '{}'", key, node.Scalar()));
  }
}

using Setter = std::function<void(SimConfig&, const YAML::Node&, const std::string&)>;

Setter real(double SimConfig::*field) {
  return [field](SimConfig& c, const YAML::Node& v, const std::string& s) {
    c.*field = scalar<double>(v, "value", s);
  };
}

template <typename F>
Setter with_double(F f) {
  return [f](SimConfig& c, const YAML::Node& v, const std::string& s) { f(c, scalar<double>(v, "value", s)); };
}

template <typename F>
Setter with_int(F f) {
  return [f](SimConfig& c, const YAML::Node& v, const std::string& s) { f(c, scalar<long long>(v, "value", s)); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"grid_rows", with_int([](SimConfig& c, long long v) { c.grid_rows = static_cast<int>(v); })},
      {"grid_cols", with_int([](SimConfig& c, long long v) { c.grid_cols = static_cast<int>(v); })},
      {"grid_size", with_int([](SimConfig& c, long long v) { c.grid_rows = c.grid_cols = static_cast<int>(v); })},
      {"grid_distance_m", real(&SimConfig::grid_distance_m)},
      {"max_range_m", real(&SimConfig::max_range_m)},
      {"source_corner",
       [](SimConfig& c, const YAML::Node& v, const std::string& s) {
         c.source_corner = corner_from_string(scalar<std::string>(v, "source_corner", s));
       }},
      {"data_rate_bps", with_double([](SimConfig& c, double v) {
         if (!(v > 0.0)) throw ConfigError("data rate must be positive");
         c.set_data_rate(v);
       })},
      {"symbol_period_s", with_double([](SimConfig& c, double v) { c.phy.symbol_period = v; })},
      {"sample_rate_hz", with_double([](SimConfig& c, double v) { c.phy.sample_rate = v; })},
      {"pulse_duration_s", with_double([](SimConfig& c, double v) { c.phy.pulse_duration = v; })},
      {"rolloff", with_double([](SimConfig& c, double v) { c.phy.rolloff = v; })},
      {"tx_power_dbm", with_double([](SimConfig& c, double v) { c.phy.tx_power_dbm = v; })},
      {"antenna_gain_dbi", with_double([](SimConfig& c, double v) { c.phy.antenna_gain_dbi = v; })},
      {"carrier_freq_hz", with_double([](SimConfig& c, double v) { c.phy.carrier_freq = v; })},
      {"occupied_bandwidth_hz", with_double([](SimConfig& c, double v) { c.phy.occupied_bandwidth = v; })},
      {"frame_size_bits", with_int([](SimConfig& c, long long v) { c.frame_size_bits = static_cast<int>(v); })},
      {"num_frames", with_int([](SimConfig& c, long long v) { c.num_frames = static_cast<int>(v); })},
      {"channel_profile",
       [](SimConfig& c, const YAML::Node& v, const std::string& s) {
         c.channel = ChannelProfile::from_name(scalar<std::string>(v, "channel_profile", s));
       }},
      {"pathloss_exponent_near", with_double([](SimConfig& c, double v) { c.channel.pathloss_exponent_near = v; })},
      {"pathloss_exponent_far", with_double([](SimConfig& c, double v) { c.channel.pathloss_exponent_far = v; })},
      {"breakpoint_m", with_double([](SimConfig& c, double v) { c.channel.breakpoint_m = v; })},
      {"rician_k_db", with_double([](SimConfig& c, double v) { c.channel.rician_k_db = v; })},
      {"shadowing_sigma_db", with_double([](SimConfig& c, double v) { c.channel.shadowing_sigma_db = v; })},
      {"cfo_range_hz", real(&SimConfig::cfo_range_hz)},
      {"cfo_redraw_s", real(&SimConfig::cfo_redraw_s)},
      {"noise_enabled",
       [](SimConfig& c, const YAML::Node& v, const std::string& s) {
         c.noise_enabled = scalar<bool>(v, "noise_enabled", s);
       }},
      {"noise_power_dbm", real(&SimConfig::noise_power_dbm)},
      {"window_len_samples", with_int([](SimConfig& c, long long v) { c.detector.window_len = v; })},
      {"buffer_size_samples", with_int([](SimConfig& c, long long v) { c.detector.buffer_size = v; })},
      {"group_size", with_int([](SimConfig& c, long long v) { c.detector.group_size = v; })},
      {"threshold_margin_db", with_double([](SimConfig& c, double v) { c.detector.margin_db = v; })},
      {"threshold_amplitude", with_double([](SimConfig& c, double v) { c.detector.threshold_amplitude = v; })},
      {"tau_s", real(&SimConfig::tau_s)},
      {"root_seed", with_int([](SimConfig& c, long long v) {
         if (v < 0) throw ConfigError("root seed must be non-negative");
         c.root_seed = static_cast<std::uint64_t>(v);
       })},
      {"inter_frame_gap_symbols",
       with_int([](SimConfig& c, long long v) { c.inter_frame_gap_symbols = static_cast<int>(v); })},
      {"listen_holdoff_symbols",
       with_int([](SimConfig& c, long long v) { c.listen_holdoff_symbols = static_cast<int>(v); })},
      {"calibration_samples", with_int([](SimConfig& c, long long v) { c.calibration_samples = v; })},
      {"link_cutoff_db", real(&SimConfig::link_cutoff_db)},
  };
  return table;
}

// Keys that depend on others and are applied after everything else.
const std::set<std::string> kDeferred = {"window_len_s", "run_duration_s"};

void apply_deferred(SimConfig& cfg, const Param& p, const std::string& source) {
  const double v = scalar<double>(p.value, p.key, source);
  if (p.key == "window_len_s") {
    cfg.detector.window_len = whole_samples(v, cfg.phy.sample_rate, "window length");
    return;
  }
  // run_duration_s: as many whole frames as fit.
  if (!(v > 0.0)) throw ConfigError("run duration must be positive");
  cfg.phy.validate();
  const ProtocolTiming t = ProtocolTiming::from(cfg);
  const auto samples = static_cast<std::int64_t>(std::llround(v * cfg.phy.sample_rate));
  cfg.num_frames = static_cast<int>(std::max<std::int64_t>(1, samples / t.frame_span()));
}

std::string value_label(const YAML::Node& v) {
  if (v.IsScalar()) {
    const std::string& s = v.Scalar();
    try {
      std::size_t used = 0;
      const double d = std::stod(s, &used);
      if (used == s.size()) return format_float(d);
    } catch (const std::exception&) {
    }
    return s;
  }
  std::ostringstream os;
  os << YAML::Dump(v);
  return os.str();
}

ParamSet read_params(const YAML::Node& map, const std::string& source, bool allow_label) {
  if (!map.IsMap()) throw SpecError(where(source, map) + "expected a mapping of configuration keys");
  ParamSet out;
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (allow_label && key == "label") continue;
    if (!setters().count(key) && !kDeferred.count(key)) {
      throw SpecError(where(source, kv.first) + fmt::format("unknown configuration key '{}'", key));
    }
    out.push_back({key, kv.second});
  }
  return out;
}

}  // namespace

std::string format_float(double v) {
  if (v == 0.0) return "0";
  return fmt::format("{:.9g}", v);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    k.insert(k.end(), kDeferred.begin(), kDeferred.end());
    std::sort(k.begin(), k.end());
    return k;
  }();
  return keys;
}

void apply_params(SimConfig& cfg, const ParamSet& params, const std::string& source) {
  auto run = [&](const Param& p, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      throw SpecError(where(source, p.value) + fmt::format("{}: {}", p.key, e.what()));
    }
  };
  for (const Param& p : params) {
    if (p.key == "channel_profile") run(p, [&] { setters().at(p.key)(cfg, p.value, source); });
  }
  for (const Param& p : params) {
    if (p.key == "channel_profile" || kDeferred.count(p.key)) continue;
    const auto it = setters().find(p.key);
    if (it == setters().end()) throw SpecError(where(source, p.value) + fmt::format("unknown key '{}'", p.key));
    run(p, [&] { it->second(cfg, p.value, source); });
  }
  for (const char* k : {"window_len_s", "run_duration_s"}) {
    for (const Param& p : params) {
      if (p.key == k) run(p, [&] { apply_deferred(cfg, p, source); });
    }
  }
}

std::size_t ExperimentSpec::point_count() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

ExperimentSpec parse_spec(const YAML::Node& root, const std::string& source) {
  if (!root.IsMap()) throw SpecError(where(source, root) + "spec must be a mapping");
  static const std::set<std::string> top = {"name",    "description", "desk_preset", "base",  "sweep",
                                            "repetitions", "sweep_cap", "output_dir", "bch", "plot"};
  for (const auto& kv : root) {
    const auto k = kv.first.as<std::string>();
    if (!top.count(k)) throw SpecError(where(source, kv.first) + fmt::format("unknown top-level key '{}'", k));
  }
  ExperimentSpec spec;
  spec.source = source;
  if (!root["name"]) throw SpecError(source + ": missing 'name'");
  spec.name = scalar<std::string>(root["name"], "name", source);
  if (root["description"]) spec.description = scalar<std::string>(root["description"], "description", source);
  if (root["desk_preset"]) spec.desk_preset = scalar<std::string>(root["desk_preset"], "desk_preset", source);
  if (root["base"]) spec.base = read_params(root["base"], source, false);
  if (root["repetitions"]) {
    spec.repetitions = scalar<int>(root["repetitions"], "repetitions", source);
    if (spec.repetitions < 1) throw SpecError(where(source, root["repetitions"]) + "repetitions must be >= 1");
  }
  if (root["sweep_cap"]) {
    const long long cap = scalar<long long>(root["sweep_cap"], "sweep_cap", source);
    if (cap < 1) throw SpecError(where(source, root["sweep_cap"]) + "sweep_cap must be >= 1");
    spec.sweep_cap = static_cast<std::size_t>(cap);
  }
  if (root["output_dir"]) spec.output_dir = scalar<std::string>(root["output_dir"], "output_dir", source);
  if (const YAML::Node bch = root["bch"]) {
    if (!bch.IsMap()) throw SpecError(where(source, bch) + "'bch' must be a mapping");
    for (const auto& kv : bch) {
      const auto k = kv.first.as<std::string>();
      if (k == "code_rate") {
        spec.metrics.bch_rate = scalar<double>(kv.second, k, source);
      } else if (k == "frame_is_payload") {
        spec.metrics.bch_frame_is_payload = scalar<bool>(kv.second, k, source);
      } else if (k == "frame_sizes_bits") {
        if (!kv.second.IsSequence()) throw SpecError(where(source, kv.second) + "frame_sizes_bits must be a list");
        spec.metrics.bch_frame_sizes.clear();
        for (const auto& v : kv.second) spec.metrics.bch_frame_sizes.push_back(scalar<int>(v, k, source));
      } else {
        throw SpecError(where(source, kv.first) + fmt::format("unknown bch key '{}'", k));
      }
    }
    try {
      for (int n : spec.metrics.bch_frame_sizes) bch_model(n, spec.metrics.bch_rate, spec.metrics.bch_frame_is_payload);
    } catch (const ConfigError& e) {
      throw SpecError(where(source, bch) + e.what());
    }
  }
  if (const YAML::Node sweep = root["sweep"]) {
    if (!sweep.IsMap() && !sweep.IsNull()) throw SpecError(where(source, sweep) + "'sweep' must be a mapping");
    for (const auto& kv : sweep) {
      SweepAxis axis;
      axis.name = kv.first.as<std::string>();
      const YAML::Node& vals = kv.second;
      if (!vals.IsSequence() || vals.size() == 0) {
        throw SpecError(where(source, vals) + fmt::format("sweep axis '{}' needs a non-empty list", axis.name));
      }
      const bool compound = vals[0].IsMap();
      if (!compound && !setters().count(axis.name) && !kDeferred.count(axis.name)) {
        throw SpecError(where(source, kv.first) + fmt::format("unknown sweep axis '{}'", axis.name));
      }
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const YAML::Node v = vals[i];
        if (compound) {
          axis.values.push_back(read_params(v, source, true));
          axis.labels.push_back(v["label"] ? value_label(v["label"]) : std::to_string(i));
        } else {
          if (!v.IsScalar()) {
            throw SpecError(where(source, v) + fmt::format("sweep axis '{}' mixes scalars and mappings", axis.name));
          }
          axis.values.push_back({{axis.name, v}});
          axis.labels.push_back(value_label(v));
        }
      }
      spec.axes.push_back(std::move(axis));
    }
  }
  if (const YAML::Node plot = root["plot"]) {
    PlotSpec p;
    if (!plot["x"] || !plot["y"]) throw SpecError(where(source, plot) + "plot needs 'x' and 'y'");
    p.x = scalar<std::string>(plot["x"], "x", source);
    p.y = scalar<std::string>(plot["y"], "y", source);
    if (plot["series"]) p.series = scalar<std::string>(plot["series"], "series", source);
    if (plot["log_x"]) p.log_x = scalar<bool>(plot["log_x"], "log_x", source);
    if (plot["log_y"]) p.log_y = scalar<bool>(plot["log_y"], "log_y", source);
    spec.plot = p;
  }
  if (spec.point_count() > spec.sweep_cap) {
    throw SpecError(fmt::format("{}: sweep has {} points, above the cap of {}", source, spec.point_count(),
                                spec.sweep_cap));
  }
  // Validate the base on its own so errors point at the base block.
  SimConfig probe;
  apply_params(probe, spec.base, source);
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw SpecError(fmt::format("{}: cannot open spec file", path.string()));
  } catch (const YAML::ParserException& e) {
    throw SpecError(fmt::format("{}:{}:{}: {}", path.string(), e.mark.line + 1, e.mark.column + 1, e.msg));
  }
  return parse_spec(root, path.string());
}

std::vector<SweepPoint> expand(const ExperimentSpec& spec) {
  const std::size_t total = spec.point_count();
  if (total > spec.sweep_cap) {
    throw SpecError(fmt::format("{}: sweep has {} points, above the cap of {}", spec.source.string(), total,
                                spec.sweep_cap));
  }
  std::vector<SweepPoint> out;
  out.reserve(total);
  const std::string src = spec.source.string();
  for (std::size_t idx = 0; idx < total; ++idx) {
    SweepPoint p;
    p.index = idx;
    ParamSet params = spec.base;
    // Last axis varies fastest.
    std::size_t rem = idx;
    std::vector<std::size_t> pick(spec.axes.size());
    for (std::size_t a = spec.axes.size(); a-- > 0;) {
      pick[a] = rem % spec.axes[a].values.size();
      rem /= spec.axes[a].values.size();
    }
    for (std::size_t a = 0; a < spec.axes.size(); ++a) {
      const SweepAxis& axis = spec.axes[a];
      const ParamSet& chosen = axis.values[pick[a]];
      const bool compound = chosen.size() != 1 || chosen[0].key != axis.name;
      if (compound) {
        p.labels.emplace_back(axis.name, axis.labels[pick[a]]);
        for (const Param& q : chosen) p.labels.emplace_back(q.key, value_label(q.value));
      } else {
        p.labels.emplace_back(axis.name, axis.labels[pick[a]]);
      }
      params.insert(params.end(), chosen.begin(), chosen.end());
    }
    apply_params(p.config, params, src);
    if (spec.seed_override) p.config.root_seed = *spec.seed_override;
    try {
      p.config.validate();
      build_grid(p.config.grid_rows, p.config.grid_cols, p.config.grid_distance_m, p.config.max_range_m,
                 p.config.source_corner);
    } catch (const std::exception& e) {
      std::string where_point;
      for (const auto& [k, v] : p.labels) where_point += fmt::format(" {}={}", k, v);
      throw SpecError(fmt::format("{}: sweep point {} ({}): {}", src, idx, where_point.empty() ? " base" : where_point,
                                  e.what()));
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PointResult> run_points(const ExperimentSpec& spec, unsigned workers) {
  const std::vector<SweepPoint> points = expand(spec);
  const std::size_t reps = static_cast<std::size_t>(spec.repetitions);
  std::vector<PointResult> results(points.size() * reps);
  for (std::size_t i = 0; i < results.size(); ++i) {
    results[i].point = points[i / reps];
    results[i].repetition = static_cast<int>(i % reps);
    results[i].seed = points[i / reps].config.root_seed + static_cast<std::uint64_t>(i % reps);
    results[i].point.config.root_seed = results[i].seed;
  }
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, results.size())));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= results.size()) return;
      try {
        results[i].metrics = run_flood(results[i].point.config, spec.metrics).metrics;
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(results.size());
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

std::string results_csv(const ExperimentSpec& spec, const std::vector<PointResult>& results) {
  (void)spec;
  std::string out;
  if (results.empty()) return out;
  const auto& first = results.front();
  out += "point,repetition,seed";
  for (const auto& [k, _] : first.point.labels) out += "," + csv_field(k);
  for (const auto& [k, _] : first.metrics.columns()) out += "," + k;
  out += "\n";
  for (const PointResult& r : results) {
    out += fmt::format("{},{},{}", r.point.index, r.repetition, r.seed);
    for (const auto& [_, v] : r.point.labels) out += "," + csv_field(v);
    for (const auto& [_, v] : r.metrics.columns()) out += "," + format_float(v);
    out += "\n";
  }
  return out;
}

std::string nodes_csv(const ExperimentSpec& spec, const std::vector<PointResult>& results) {
  (void)spec;
  std::string out = "point,repetition,node,hop,payload_bits,bit_errors,ber,ser1,ser0,frames_synced,frames_timeout\n";
  for (const PointResult& r : results) {
    for (const NodeMetrics& n : r.metrics.nodes) {
      const double ser1 = n.ones ? static_cast<double>(n.ones_missed) / static_cast<double>(n.ones) : 0.0;
      const double ser0 = n.zeros ? static_cast<double>(n.zeros_flipped) / static_cast<double>(n.zeros) : 0.0;
      out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.point.index, r.repetition, n.node, n.hop, n.bits,
                         n.errors, format_float(n.ber()), format_float(ser1), format_float(ser0), n.frames_synced,
                         n.frames_timeout);
    }
  }
  return out;
}

std::string meta_yaml(const ExperimentSpec& spec, const std::vector<PointResult>& results) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << spec.name;
  e << YAML::Key << "description" << YAML::Value << spec.description;
  e << YAML::Key << "desk_preset" << YAML::Value << spec.desk_preset;
  e << YAML::Key << "spec" << YAML::Value << spec.source.filename().string();
  e << YAML::Key << "points" << YAML::Value << spec.point_count();
  e << YAML::Key << "repetitions" << YAML::Value << spec.repetitions;
  e << YAML::Key << "rows" << YAML::Value << results.size();
  e << YAML::Key << "seeds" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  std::set<std::uint64_t> seeds;
  for (const auto& r : results) seeds.insert(r.seed);
  for (auto s : seeds) e << s;
  e << YAML::EndSeq;
  e << YAML::Key << "axes" << YAML::Value << YAML::BeginMap;
  for (const auto& a : spec.axes) {
    e << YAML::Key << a.name << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& l : a.labels) e << l;
    e << YAML::EndSeq;
  }
  e << YAML::EndMap;
  if (!results.empty()) {
    e << YAML::Key << "base_config" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : results.front().metrics.config) e << YAML::Key << k << YAML::Value << v;
    e << YAML::EndMap;
  }
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

namespace {

double column_value(const PointResult& r, const std::string& name) {
  for (const auto& [k, v] : r.point.labels) {
    if (k == name) {
      try {
        return std::stod(v);
      } catch (const std::exception&) {
        return std::nan("");
      }
    }
  }
  for (const auto& [k, v] : r.metrics.columns()) {
    if (k == name) return v;
  }
  throw SpecError(fmt::format("plot column '{}' not found", name));
}

std::string label_value(const PointResult& r, const std::string& name) {
  for (const auto& [k, v] : r.point.labels) {
    if (k == name) return v;
  }
  return {};
}

}  // namespace

std::string plot_svg(const ExperimentSpec& spec, const std::vector<PointResult>& results) {
  if (!spec.plot || results.empty()) return {};
  const PlotSpec& p = *spec.plot;
  // series label -> x -> (sum, count); repetitions are averaged.
  std::map<std::string, std::map<double, std::pair<double, int>>> series;
  std::vector<std::string> order;
  for (const auto& r : results) {
    const std::string s = p.series.empty() ? p.y : label_value(r, p.series);
    const double x = column_value(r, p.x);
    const double y = column_value(r, p.y);
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    if ((p.log_x && x <= 0) || (p.log_y && y <= 0)) continue;
    if (!series.count(s)) order.push_back(s);
    auto& cell = series[s][x];
    cell.first += y;
    cell.second += 1;
  }
  auto tx = [&](double v, bool lg) { return lg ? std::log10(v) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& [_, pts] : series) {
    for (const auto& [x, c] : pts) {
      const double y = c.first / c.second;
      x0 = std::min(x0, tx(x, p.log_x));
      x1 = std::max(x1, tx(x, p.log_x));
      y0 = std::min(y0, tx(y, p.log_y));
      y1 = std::max(y1, tx(y, p.log_y));
    }
  }
  if (!std::isfinite(x0)) return {};
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double W = 640, H = 420, L = 80, R = 170, T = 30, B = 60;
  auto px = [&](double x) { return L + (tx(x, p.log_x) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (tx(y, p.log_y) - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      W, H);
  s += fmt::format("<text x=\"{}\" y=\"18\" font-size=\"13\">{}</text>\n", L, spec.name);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", L, H - B, W - R);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", L, T, H - B);
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    const double vx = p.log_x ? std::pow(10.0, fx) : fx, vy = p.log_y ? std::pow(10.0, fy) : fy;
    s += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{:.4g}</text>\n", px(vx), H - B + 16, vx);
    s += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.4g}</text>\n", L - 6, py(vy) + 4, vy);
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (L + W - R) / 2, H - 16, p.x);
  s += fmt::format("<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{}</text>\n",
                   (T + H - B) / 2, (T + H - B) / 2, p.y);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const char* c = colors[i % 7];
    std::string pts;
    for (const auto& [x, cell] : series[order[i]]) pts += fmt::format("{:.1f},{:.1f} ", px(x), py(cell.first / cell.second));
    s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", c, pts);
    const double ly = T + 14 * static_cast<double>(i);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                     W - R + 10, ly, W - R + 30, c);
    s += fmt::format("<text x=\"{}\" y=\"{}\">{}{}</text>\n", W - R + 34, ly + 4,
                     p.series.empty() ? "" : p.series + "=", order[i]);
  }
  s += "</svg>\n";
  return s;
}

std::filesystem::path run_experiment(const ExperimentSpec& spec, const RunOptions& opts) {
  namespace fs = std::filesystem;
  fs::path dir;
  if (opts.output_dir) {
    dir = *opts.output_dir;
  } else if (const char* env = std::getenv("RFZW_OUTPUT_DIR"); env && *env) {
    dir = fs::path(env) / spec.name;
  } else if (!spec.output_dir.empty()) {
    dir = spec.output_dir;
  } else {
    dir = fs::path("out") / spec.name;
  }
  const auto results = run_points(spec, opts.workers);
  fs::create_directories(dir);
  auto write = [&](const char* name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error(fmt::format("cannot write {}", (dir / name).string()));
    f << body;
  };
  write("results.csv", results_csv(spec, results));
  write("nodes.csv", nodes_csv(spec, results));
  write("meta.yaml", meta_yaml(spec, results));
  if (opts.svg && spec.plot) write("plot.svg", plot_svg(spec, results));
  return dir;
}

}  // namespace rfzw
