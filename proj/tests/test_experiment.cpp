#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rfzw/experiment.hpp"

using namespace rfzw;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(name: small
description: two nodes, two rates
base:
  grid_rows: 1
  grid_cols: 2
  grid_distance_m: 5
  frame_size_bits: 24
  num_frames: 2
  cfo_range_hz: 1000
  root_seed: 3
sweep:
  data_rate_bps: [100000, 50000]
repetitions: 2
bch:
  code_rate: 0.8
  frame_sizes_bits: [64, 128]
plot:
  x: data_rate_bps
  y: ber_mean
)";

ExperimentSpec parse(const std::string& text, const std::string& name = "test.yaml") {
  return parse_spec(YAML::Load(text), name);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const SpecError& e) {
    return e.what();
  }
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rfzw_exp_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("spec parsing") {
  const ExperimentSpec s = parse(kSmall);
  CHECK(s.name == "small");
  CHECK(s.point_count() == 2);
  CHECK(s.repetitions == 2);
  CHECK(s.metrics.bch_frame_sizes == std::vector<int>{64, 128});
  const auto pts = expand(s);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].config.data_rate() == doctest::Approx(100000));
  CHECK(pts[1].config.data_rate() == doctest::Approx(50000));
  CHECK(pts[0].config.grid_cols == 2);
  CHECK(pts[0].config.cfo_range_hz == 1000.0);
}

TEST_CASE("spec errors point at the offending line") {
  const std::string bad_key = error_of("name: x\nbase:\n  grid_size: 4\n  grid_distnce_m: 5\n");
  CHECK(bad_key.find("test.yaml:4:") == 0);
  CHECK(bad_key.find("grid_distnce_m") != std::string::npos);

  const std::string bad_value = error_of("name: x\nbase:\n  data_rate_bps: fast\n");
  CHECK(bad_value.find("test.yaml:3:") == 0);

  const std::string bad_axis = error_of("name: x\nsweep:\n  frame_size_bits: []\n");
  CHECK(bad_axis.find("test.yaml:3:") == 0);

  CHECK(error_of("name: x\nbogus: 1\n").find("test.yaml:2:") == 0);
  CHECK(error_of("description: no name\n").find("missing 'name'") != std::string::npos);
  CHECK(error_of("name: x\nrepetitions: 0\n").find("test.yaml:2:") == 0);

  const fs::path p = scratch("broken.yaml");
  {
    std::ofstream f(p);
    f << "name: x\nbase: [unclosed\n";
  }
  try {
    load_spec(p);
    FAIL("expected a parse error");
  } catch (const SpecError& e) {
    CHECK(std::string(e.what()).find(p.string() + ":") == 0);
  }
  fs::remove(p);
  CHECK_THROWS_AS(load_spec(scratch("absent.yaml")), SpecError);
}

TEST_CASE("invalid sweep points are rejected before running") {
  const ExperimentSpec s = parse("name: x\nbase:\n  grid_size: 3\nsweep:\n  grid_distance_m: [5, 12]\n");
  try {
    expand(s);
    FAIL("expected a topology error");
  } catch (const SpecError& e) {
    CHECK(std::string(e.what()).find("grid_distance_m=12") != std::string::npos);
  }
}

TEST_CASE("sweep cap") {
  const std::string text = "name: x\nsweep_cap: 5\nsweep:\n  frame_size_bits: [8, 16, 32]\n  grid_size: [2, 3]\n";
  CHECK_THROWS_AS(expand(parse_spec(YAML::Load(text), "t")), SpecError);
}

TEST_CASE("empty sweep is a single point") {
  const ExperimentSpec s = parse("name: x\nbase:\n  grid_size: 2\n  frame_size_bits: 8\n  num_frames: 1\n");
  CHECK(s.point_count() == 1);
  const auto res = run_points(s, 1);
  REQUIRE(res.size() == 1);
  const std::string csv = results_csv(s, res);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("compound axes and ordering") {
  const ExperimentSpec s = parse(
      "name: x\nsweep:\n  a:\n    - {label: small, grid_size: 2, grid_distance_m: 5}\n"
      "    - {label: big, grid_size: 3, grid_distance_m: 4}\n  frame_size_bits: [8, 16, 32]\n");
  const auto pts = expand(s);
  REQUIRE(pts.size() == 6);
  CHECK(pts[0].config.frame_size_bits == 8);
  CHECK(pts[1].config.frame_size_bits == 16);  // last axis fastest
  CHECK(pts[3].config.grid_rows == 3);
  CHECK(pts[3].config.grid_distance_m == 4.0);
  CHECK(pts[3].labels.front() == std::pair<std::string, std::string>{"a", "big"});
}

TEST_CASE("duration and window keys") {
  const ExperimentSpec s = parse(
      "name: x\nbase:\n  data_rate_bps: 40000\n  frame_size_bits: 100\n  inter_frame_gap_symbols: 20\n"
      "  run_duration_s: 0.03\n  window_len_s: 10e-6\n");
  const auto p = expand(s).front();
  CHECK(p.config.num_frames == 10);  // 120 symbols of 25 us per frame
  CHECK(p.config.detector.window_len == 200);
}

TEST_CASE("seed override and repetition seeds") {
  ExperimentSpec s = parse(kSmall);
  s.seed_override = 100;
  const auto res = run_points(s, 1);
  REQUIRE(res.size() == 4);
  CHECK(res[0].seed == 100);
  CHECK(res[1].seed == 101);
  CHECK(res[2].seed == 100);
  CHECK(res[1].repetition == 1);
}

TEST_CASE("CSV output is byte-identical across reruns and worker counts") {
  const ExperimentSpec s = parse(kSmall);
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  RunOptions o1;
  o1.output_dir = a;
  o1.workers = 1;
  o1.svg = true;
  RunOptions o2;
  o2.output_dir = b;
  o2.workers = 3;
  run_experiment(s, o1);
  run_experiment(s, o2);
  for (const char* f : {"results.csv", "nodes.csv", "meta.yaml"}) {
    const std::string x = slurp(a / f);
    CHECK(!x.empty());
    CHECK(x == slurp(b / f));
  }
  CHECK(fs::exists(a / "plot.svg"));
  const std::string csv = slurp(a / "results.csv");
  CHECK(csv.rfind("point,repetition,seed,data_rate_bps,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("output directory from the environment") {
  const fs::path root = scratch("env");
  ::setenv("RFZW_OUTPUT_DIR", root.c_str(), 1);
  ExperimentSpec s = parse("name: envcheck\nbase:\n  grid_size: 2\n  frame_size_bits: 8\n  num_frames: 1\n");
  const fs::path dir = run_experiment(s, RunOptions{1, false, std::nullopt});
  ::unsetenv("RFZW_OUTPUT_DIR");
  CHECK(dir == root / "envcheck");
  CHECK(fs::exists(root / "envcheck" / "results.csv"));
  fs::remove_all(root);
}

TEST_CASE("float formatting") {
  CHECK(format_float(0.0) == "0");
  CHECK(format_float(1.0 / 3.0) == "0.333333333");
  CHECK(format_float(5.1245e-3) == "0.0051245");
  CHECK(format_float(123456789012.0) == "1.23456789e+11");
}

TEST_CASE("bundled specs") {
  const fs::path dir = RFZW_SPEC_DIR;
  int count = 0;
  for (const char* name : {"fig13", "fig14", "fig15", "fig17", "fig18", "fig19", "fig20", "fig21", "fig22", "fig23",
                           "fig24"}) {
    const ExperimentSpec s = load_spec(dir / (std::string(name) + ".yaml"));
    CHECK(s.name == name);
    CHECK(!s.desk_preset.empty());
    CHECK_NOTHROW(expand(s));
    ++count;
  }
  CHECK(count == 11);
  const ExperimentSpec f13 = load_spec(dir / "fig13.yaml");
  CHECK(f13.point_count() == 40);
  const auto pts = expand(f13);
  CHECK(pts.front().config.grid_rows * pts.front().config.grid_cols == 25);
  const ExperimentSpec f22 = load_spec(dir / "fig22.yaml");
  CHECK(expand(f22).front().config.grid_rows * expand(f22).front().config.grid_cols == 100);
  CHECK(expand(f22).front().config.cfo_range_hz == 10000.0);
}
