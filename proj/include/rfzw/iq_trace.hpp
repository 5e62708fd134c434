// Offline detection over recorded IQ traces: headerless interleaved I/Q in
// int16 or float32 little-endian. The leading segment calibrates the noise
// floor, the remainder is cut into back-to-back pulse slots (window = buffer
// = one pulse spacing) and each slot is voted on.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "rfzw/detector.hpp"
#include "rfzw/phy.hpp"
#include "rfzw/signal.hpp"

namespace rfzw {

enum class SampleFormat { Int16, Float32 };

SampleFormat sample_format_from_string(const std::string& s);
std::string to_string(SampleFormat f);

struct IqTraceHeader {
  SampleFormat format = SampleFormat::Int16;
  double sample_rate = 2.0e7;
  double scale = 1.0;  // amplitude per LSB, int16 only

  void validate() const;
  std::size_t bytes_per_value() const { return format == SampleFormat::Int16 ? 2 : 4; }
  std::size_t bytes_per_sample() const { return 2 * bytes_per_value(); }
};

struct TraceOptions {
  double calibration_seconds = 1.0;
  double pulse_spacing_s = 3.0e-6;
  Eigen::Index group_size = 10;
  double margin_db = 9.0;
};

struct TraceReport {
  std::int64_t total_samples = 0;
  std::int64_t calibration_samples = 0;
  std::int64_t slot_samples = 0;
  double floor_dbm = 0.0;
  double threshold_amplitude = 0.0;
  std::int64_t expected_pulses = 0;
  std::int64_t detected_pulses = 0;

  double ser() const {
    return expected_pulses ? static_cast<double>(expected_pulses - detected_pulses) / static_cast<double>(expected_pulses)
                           : 0.0;
  }
};

/// Number of complex samples in a trace file; throws when the size is not a
/// whole number of I/Q pairs.
std::int64_t trace_sample_count(const std::filesystem::path& path, const IqTraceHeader& header);

/// Reads `count` samples starting at sample `first` (scaled to amplitude).
Samples read_iq_samples(const std::filesystem::path& path, const IqTraceHeader& header, std::int64_t first = 0,
                        std::int64_t count = -1);

/// Writes samples in the header's format (int16 values are rounded and
/// clamped after dividing by scale).
void write_iq_trace(const std::filesystem::path& path, const Samples& samples, const IqTraceHeader& header);

/// Detection over an in-memory trace.
TraceReport detect_trace(const Samples& trace, double sample_rate, const TraceOptions& opts = {});

/// Detection over a trace file, read in chunks.
TraceReport detect_trace(const std::filesystem::path& path, const IqTraceHeader& header,
                         const TraceOptions& opts = {});

}  // namespace rfzw
