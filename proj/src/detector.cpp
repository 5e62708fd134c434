#include "rfzw/detector.hpp"

#include <fmt/format.h>

namespace rfzw {

void DetectorConfig::validate() const {
  if (group_size <= 0 || buffer_size <= 0 || window_len <= 0) {
    throw ConfigError("detector sizes must be positive");
  }
  if (buffer_size % group_size != 0) {
    throw ConfigError(fmt::format("buffer size {} is not a multiple of group size {}", buffer_size,
                                  group_size));
  }
  if (window_len % buffer_size != 0) {
    throw ConfigError(fmt::format("window length {} is not a multiple of buffer size {}",
                                  window_len, buffer_size));
  }
  if (!(threshold_amplitude >= 0.0)) throw ConfigError("threshold must be non-negative");
}

void DetectorConfig::validate_for_symbol(Eigen::Index pulse_samples,
                                         Eigen::Index symbol_samples) const {
  validate();
  if (!(pulse_samples < window_len && window_len <= symbol_samples)) {
    throw ConfigError(fmt::format("window length {} must exceed the pulse ({}) and fit in "
                                  "the symbol slot ({})",
                                  window_len, pulse_samples, symbol_samples));
  }
}

double window_start(double t_n, double relay, double tau) {
  if (t_n < relay + tau) {
    throw ConfigError(fmt::format("preamble at {:g} s is earlier than r + tau", t_n));
  }
  return t_n - relay - tau;
}

double relay_time(Eigen::Index buffer_size, double sample_rate) {
  return static_cast<double>(buffer_size) / sample_rate;
}

}  // namespace rfzw
