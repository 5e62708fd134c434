#include "rfzw/signal.hpp"

namespace rfzw {

RngStream::RngStream(std::uint64_t root_seed, std::string_view label)
    : seed_(root_seed), label_(label) {
  if (label.empty()) throw ConfigError("random stream label must not be empty");
  key_ = mix64(mix64(root_seed ^ 0x5851f42d4c957f2dULL) ^ fnv1a64(label));
}

RngStream RngStream::child(std::string_view sub) const {
  std::string path = label_;
  path += '/';
  path += sub;
  return RngStream(seed_, path);
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(th);
  has_spare_ = true;
  return r * std::cos(th);
}

Complex RngStream::complex_normal(double variance) {
  const double s = std::sqrt(variance / 2.0);
  const double re = normal();
  const double im = normal();
  return {s * re, s * im};
}

}  // namespace rfzw
