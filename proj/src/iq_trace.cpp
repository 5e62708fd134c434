#include "rfzw/iq_trace.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <vector>

#include <fmt/format.h>

namespace rfzw {

static_assert(std::endian::native == std::endian::little, "trace I/O assumes a little-endian host");

SampleFormat sample_format_from_string(const std::string& s) {
  if (s == "int16" || s == "i16") return SampleFormat::Int16;
  if (s == "f32" || s == "float32") return SampleFormat::Float32;
  throw ConfigError(fmt::format("unknown sample format '{}' (expected int16 or f32)", s));
}

std::string to_string(SampleFormat f) { return f == SampleFormat::Int16 ? "int16" : "f32"; }

void IqTraceHeader::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("trace sample rate must be positive");
  if (!(scale > 0.0)) throw ConfigError("trace scale must be positive");
}

std::int64_t trace_sample_count(const std::filesystem::path& path, const IqTraceHeader& header) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec) throw ConfigError(fmt::format("cannot read trace '{}': {}", path.string(), ec.message()));
  if (bytes % header.bytes_per_sample() != 0) {
    throw ConfigError(fmt::format("trace '{}' is truncated: {} bytes is not a whole number of {}-byte I/Q pairs",
                                  path.string(), bytes, header.bytes_per_sample()));
  }
  return static_cast<std::int64_t>(bytes / header.bytes_per_sample());
}

namespace {

void decode(const std::vector<char>& raw, const IqTraceHeader& h, Samples& out, Eigen::Index offset,
            Eigen::Index count) {
  for (Eigen::Index k = 0; k < count; ++k) {
    const char* p = raw.data() + static_cast<std::size_t>(k) * h.bytes_per_sample();
    if (h.format == SampleFormat::Int16) {
      std::int16_t iq[2];
      std::memcpy(iq, p, sizeof iq);
      out[offset + k] = Complex(iq[0] * h.scale, iq[1] * h.scale);
    } else {
      float iq[2];
      std::memcpy(iq, p, sizeof iq);
      out[offset + k] = Complex(iq[0], iq[1]);
    }
  }
}

// Calls fn(chunk) over consecutive chunks of [first, first + count).
void for_chunks(const std::filesystem::path& path, const IqTraceHeader& h, std::int64_t first, std::int64_t count,
                const std::function<void(const Samples&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open trace '{}'", path.string()));
  in.seekg(static_cast<std::streamoff>(first) * static_cast<std::streamoff>(h.bytes_per_sample()));
  constexpr std::int64_t kChunk = 1 << 20;
  std::vector<char> raw;
  Samples buf;
  while (count > 0) {
    const std::int64_t n = std::min(count, kChunk);
    raw.resize(static_cast<std::size_t>(n) * h.bytes_per_sample());
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
      throw ConfigError(fmt::format("trace '{}' ended early", path.string()));
    }
    buf.resize(n);
    decode(raw, h, buf, 0, n);
    fn(buf);
    count -= n;
  }
}

struct SlotPlan {
  std::int64_t calib = 0;
  std::int64_t slot = 0;
  std::int64_t slots = 0;
};

SlotPlan plan(std::int64_t total, double rate, const TraceOptions& opts) {
  if (!(opts.calibration_seconds > 0.0)) throw ConfigError("calibration segment must be longer than zero");
  SlotPlan p;
  p.calib = std::llround(opts.calibration_seconds * rate);
  if (p.calib < 1) throw ConfigError("calibration segment is shorter than one sample");
  if (p.calib > total) {
    throw ConfigError(fmt::format("calibration segment ({} samples) is longer than the trace ({} samples)", p.calib,
                                  total));
  }
  p.slot = whole_samples(opts.pulse_spacing_s, rate, "pulse spacing");
  DetectorConfig cfg;
  cfg.window_len = cfg.buffer_size = p.slot;
  cfg.group_size = opts.group_size;
  cfg.validate();
  p.slots = (total - p.calib) / p.slot;
  return p;
}

DetectorConfig slot_detector(const SlotPlan& p, const TraceOptions& opts, double threshold) {
  DetectorConfig cfg;
  cfg.window_len = cfg.buffer_size = p.slot;
  cfg.group_size = opts.group_size;
  cfg.margin_db = opts.margin_db;
  cfg.threshold_amplitude = threshold;
  return cfg;
}

}  // namespace

Samples read_iq_samples(const std::filesystem::path& path, const IqTraceHeader& header, std::int64_t first,
                        std::int64_t count) {
  header.validate();
  const std::int64_t total = trace_sample_count(path, header);
  if (first < 0 || first > total) throw ConfigError("trace read starts outside the file");
  if (count < 0) count = total - first;
  if (first + count > total) throw ConfigError("trace read runs past the end of the file");
  Samples out(count);
  Eigen::Index at = 0;
  for_chunks(path, header, first, count, [&](const Samples& c) {
    out.segment(at, c.size()) = c;
    at += c.size();
  });
  return out;
}

void write_iq_trace(const std::filesystem::path& path, const Samples& samples, const IqTraceHeader& header) {
  header.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write trace '{}'", path.string()));
  for (Eigen::Index k = 0; k < samples.size(); ++k) {
    if (header.format == SampleFormat::Int16) {
      auto q = [&](double v) {
        return static_cast<std::int16_t>(std::clamp(std::round(v / header.scale), -32768.0, 32767.0));
      };
      const std::int16_t iq[2] = {q(samples[k].real()), q(samples[k].imag())};
      out.write(reinterpret_cast<const char*>(iq), sizeof iq);
    } else {
      const float iq[2] = {static_cast<float>(samples[k].real()), static_cast<float>(samples[k].imag())};
      out.write(reinterpret_cast<const char*>(iq), sizeof iq);
    }
  }
}

TraceReport detect_trace(const Samples& trace, double sample_rate, const TraceOptions& opts) {
  if (!(sample_rate > 0.0)) throw ConfigError("trace sample rate must be positive");
  const SlotPlan p = plan(trace.size(), sample_rate, opts);
  TraceReport r;
  r.total_samples = trace.size();
  r.calibration_samples = p.calib;
  r.slot_samples = p.slot;
  Waveform amb;
  amb.samples = trace.head(p.calib);
  amb.sample_rate = sample_rate;
  const NoiseFloor nf = measure_noise_floor(amb, opts.margin_db);
  r.floor_dbm = nf.floor_dbm;
  r.threshold_amplitude = nf.threshold_amplitude;
  const DetectorConfig cfg = slot_detector(p, opts, nf.threshold_amplitude);
  Waveform w = Waveform::zeros(p.slot, sample_rate);
  for (std::int64_t s = 0; s < p.slots; ++s) {
    w.samples = trace.segment(p.calib + s * p.slot, p.slot);
    r.detected_pulses += detect_window(w, cfg).bit;
  }
  r.expected_pulses = p.slots;
  return r;
}

TraceReport detect_trace(const std::filesystem::path& path, const IqTraceHeader& header, const TraceOptions& opts) {
  header.validate();
  const std::int64_t total = trace_sample_count(path, header);
  const SlotPlan p = plan(total, header.sample_rate, opts);
  TraceReport r;
  r.total_samples = total;
  r.calibration_samples = p.calib;
  r.slot_samples = p.slot;

  double power = 0.0;
  for_chunks(path, header, 0, p.calib, [&](const Samples& c) { power += c.abs2().sum(); });
  r.floor_dbm = mw_to_dbm(power / static_cast<double>(p.calib));
  r.threshold_amplitude = dbm_to_amplitude(r.floor_dbm + opts.margin_db);

  const DetectorConfig cfg = slot_detector(p, opts, r.threshold_amplitude);
  Waveform w = Waveform::zeros(p.slot, header.sample_rate);
  Eigen::Index fill = 0;
  for_chunks(path, header, p.calib, p.slots * p.slot, [&](const Samples& c) {
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      w.samples[fill++] = c[k];
      if (fill == p.slot) {
        r.detected_pulses += detect_window(w, cfg).bit;
        fill = 0;
      }
    }
  });
  r.expected_pulses = p.slots;
  return r;
}

}  // namespace rfzw
