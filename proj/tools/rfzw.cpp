#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rfzw/analysis.hpp"
#include "rfzw/experiment.hpp"
#include "rfzw/iq_trace.hpp"

#ifndef RFZW_SPEC_DIR
#define RFZW_SPEC_DIR "specs"
#endif

namespace fs = std::filesystem;

namespace {

fs::path spec_dir() {
  if (const char* env = std::getenv("RFZW_SPEC_DIR"); env && *env) return env;
  return RFZW_SPEC_DIR;
}

fs::path resolve_spec(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  const fs::path bundled = spec_dir() / (arg + ".yaml");
  if (fs::exists(bundled)) return bundled;
  throw rfzw::SpecError(fmt::format("{}: no such spec file or bundled spec", arg));
}

int list_specs() {
  std::vector<fs::path> files;
  if (fs::is_directory(spec_dir())) {
    for (const auto& e : fs::directory_iterator(spec_dir())) {
      if (e.path().extension() == ".yaml") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const rfzw::ExperimentSpec s = rfzw::load_spec(f);
    fmt::print("{:<8} {:>4} points  {}\n", s.name, s.point_count() * static_cast<std::size_t>(s.repetitions),
               s.description);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample-level simulator for symbol-synchronous RF flooding"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment spec (file path or bundled name)");
  std::string spec_arg;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  unsigned workers = 0;
  bool svg = false;
  run->add_option("spec", spec_arg, "Spec file or bundled spec name")->required();
  run->add_option("--seed", seed, "Override the spec's root seed");
  run->add_option("--out", out_dir, "Output directory (overrides RFZW_OUTPUT_DIR)");
  run->add_option("--workers", workers, "Worker threads (default: all cores)");
  run->add_flag("--svg", svg, "Also write plot.svg");

  auto* trace = app.add_subcommand("detect-trace", "Detect back-to-back pulses in a recorded IQ trace");
  std::string trace_file, format;
  rfzw::IqTraceHeader header;
  rfzw::TraceOptions topts;
  trace->add_option("file", trace_file, "Headerless interleaved I/Q file")->required();
  trace->add_option("--format", format, "int16 or f32")->required()->check(CLI::IsMember({"int16", "f32"}));
  trace->add_option("--rate", header.sample_rate, "Sample rate in Hz")->required();
  trace->add_option("--scale", header.scale, "Amplitude per LSB (int16)");
  trace->add_option("--calib-seconds", topts.calibration_seconds, "Leading noise-calibration segment")->capture_default_str();
  trace->add_option("--pulse-spacing", topts.pulse_spacing_s, "Pulse spacing in seconds")->capture_default_str();
  trace->add_option("--margin-db", topts.margin_db, "Threshold margin above the floor")->capture_default_str();

  auto* lat = app.add_subcommand("latency", "Latency bounds of symbol-synchronous vs store-and-forward relaying");
  int n = 0, hops = 1;
  double rate = 0.0, relay = 5e-6, tacc = 0.0;
  lat->add_option("n", n, "Frame size in bits")->required()->check(CLI::PositiveNumber);
  lat->add_option("rate", rate, "Data rate in bit/s")->required()->check(CLI::PositiveNumber);
  lat->add_option("--r", relay, "Relay time in seconds")->capture_default_str();
  lat->add_option("--hops", hops, "Network diameter in hops")->capture_default_str()->check(CLI::NonNegativeNumber);
  lat->add_option("--tacc", tacc, "Channel access wait per hop (store-and-forward)")->capture_default_str();

  auto* list = app.add_subcommand("list-specs", "List bundled experiment specs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      rfzw::ExperimentSpec spec = rfzw::load_spec(resolve_spec(spec_arg));
      spec.seed_override = seed;
      rfzw::RunOptions ro;
      ro.workers = workers;
      ro.svg = svg;
      if (!out_dir.empty()) ro.output_dir = out_dir;
      const fs::path dir = rfzw::run_experiment(spec, ro);
      fmt::print("{}: {} rows written to {}\n", spec.name,
                 spec.point_count() * static_cast<std::size_t>(spec.repetitions), dir.string());
      return 0;
    }
    if (*trace) {
      header.format = rfzw::sample_format_from_string(format);
      const rfzw::TraceReport r = rfzw::detect_trace(trace_file, header, topts);
      fmt::print("samples           {}\n", r.total_samples);
      fmt::print("calibration       {} samples\n", r.calibration_samples);
      fmt::print("noise floor       {:.3f} dBm\n", r.floor_dbm);
      fmt::print("threshold         {:.6g} (amplitude)\n", r.threshold_amplitude);
      fmt::print("slot              {} samples\n", r.slot_samples);
      fmt::print("expected pulses   {}\n", r.expected_pulses);
      fmt::print("detected pulses   {}\n", r.detected_pulses);
      fmt::print("SER               {}\n", rfzw::format_float(r.ser()));
      return 0;
    }
    if (*lat) {
      const double ts = 1.0 / rate;
      const rfzw::LatencyBounds b = rfzw::latency_bounds(n, ts, relay, hops);
      const double sf = rfzw::sf_latency(n, ts, tacc, hops);
      fmt::print("symbol-synchronous bounds  [{:.6g}, {:.6g}] ms\n", b.lower * 1e3, b.upper * 1e3);
      fmt::print("store-and-forward          {:.6g} ms\n", sf * 1e3);
      if (b.upper > 0.0) fmt::print("ratio (s&f / upper bound)  {:.6g}\n", sf / b.upper);
      return 0;
    }
    if (*list) return list_specs();
  } catch (const rfzw::SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
