// Experiment specs: a base SimConfig, sweep axes and repetitions read from a
// YAML file whose keys carry their units. Sweep points run in a small worker
// pool; results are written in sweep order as CSV (plus optional SVG).
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "rfzw/analysis.hpp"

namespace rfzw {

/// Spec problem, already prefixed with "file:line:col: ".
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One assignment of a configuration key, e.g. grid_distance_m = 7.
struct Param {
  std::string key;
  YAML::Node value;
};
using ParamSet = std::vector<Param>;

struct SweepAxis {
  std::string name;
  /// Each value is a full set of assignments; scalar axes have one per value.
  std::vector<ParamSet> values;
  std::vector<std::string> labels;
};

struct PlotSpec {
  std::string x;
  std::string y;
  std::string series;  // optional second axis name
  bool log_x = false;
  bool log_y = false;
};

struct ExperimentSpec {
  std::string name;
  std::string description;
  std::string desk_preset;  // how this spec was scaled down
  std::filesystem::path source;
  ParamSet base;
  std::vector<SweepAxis> axes;
  int repetitions = 1;
  std::size_t sweep_cap = 1000;
  std::string output_dir;
  MetricsOptions metrics;
  std::optional<PlotSpec> plot;
  std::optional<std::uint64_t> seed_override;

  std::size_t point_count() const;
};

/// Keys accepted in `base` and as sweep axis names.
const std::vector<std::string>& config_keys();

/// Applies a parameter set to cfg (channel_profile first, run_duration_s last).
void apply_params(SimConfig& cfg, const ParamSet& params, const std::string& source = {});

ExperimentSpec parse_spec(const YAML::Node& root, const std::string& source = "<spec>");
ExperimentSpec load_spec(const std::filesystem::path& path);

struct SweepPoint {
  std::size_t index = 0;
  std::vector<std::pair<std::string, std::string>> labels;  // axis name -> value label
  SimConfig config;
};

/// Cartesian product of the axes over the base config; validates every
/// point. Throws SpecError when the product exceeds the cap.
std::vector<SweepPoint> expand(const ExperimentSpec& spec);

struct PointResult {
  SweepPoint point;
  int repetition = 0;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

struct RunOptions {
  unsigned workers = 0;  // 0: hardware concurrency
  bool svg = false;
  std::optional<std::filesystem::path> output_dir;
};

/// Runs every point and repetition. Results are in (point, repetition) order
/// regardless of the worker count.
std::vector<PointResult> run_points(const ExperimentSpec& spec, unsigned workers = 0);

std::string format_float(double v);

std::string results_csv(const ExperimentSpec& spec, const std::vector<PointResult>& results);
std::string nodes_csv(const ExperimentSpec& spec, const std::vector<PointResult>& results);
std::string meta_yaml(const ExperimentSpec& spec, const std::vector<PointResult>& results);
std::string plot_svg(const ExperimentSpec& spec, const std::vector<PointResult>& results);

/// Runs the spec and writes results.csv, nodes.csv, meta.yaml (and plot.svg)
/// into the output directory, which is returned.
std::filesystem::path run_experiment(const ExperimentSpec& spec, const RunOptions& opts = {});

}  // namespace rfzw
