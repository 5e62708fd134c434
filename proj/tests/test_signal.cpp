#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "rfzw/signal.hpp"

using namespace rfzw;

TEST_CASE("dBm conversions") {
  CHECK(dbm_to_amplitude(0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dbm_to_amplitude(-60.0) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(dbm_to_amplitude(10.0) == doctest::Approx(3.16228).epsilon(1e-5));
  CHECK(dbm_to_mw(-60.0) == doctest::Approx(1e-6).epsilon(1e-12));
}

TEST_CASE("dBm round trip over the working range") {
  for (double p = -120.0; p <= 30.0; p += 0.37) {
    CHECK(std::abs(amplitude_to_dbm(dbm_to_amplitude(p)) - p) < 1e-9);
    CHECK(std::abs(mw_to_dbm(dbm_to_mw(p)) - p) < 1e-9);
  }
}

TEST_CASE("waveform power two ways") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd(0.0, 0.3);
  Samples s(4096);
  for (auto& x : s) x = {nd(gen), nd(gen)};
  const Waveform w(s, 2e7);
  double sum = 0.0;
  for (const auto& x : s) sum += x.real() * x.real() + x.imag() * x.imag();
  CHECK(w.total_power() == doctest::Approx(sum).epsilon(1e-12));
  CHECK(w.mean_power() * static_cast<double>(w.size()) == doctest::Approx(w.total_power()).epsilon(1e-12));
  CHECK(w.energy() == doctest::Approx(sum / 2e7).epsilon(1e-12));
}

TEST_CASE("waveform rejects non-positive rate") {
  CHECK_THROWS_AS(Waveform(Samples::Zero(4), 0.0), ConfigError);
}

TEST_CASE("rng streams") {
  SUBCASE("deterministic for equal keys") {
    RngStream a(42, "node/3/fading"), b(42, "node/3/fading");
    for (int i = 0; i < 1000; ++i) REQUIRE(a() == b());
  }
  SUBCASE("random access matches sequential draws") {
    RngStream a(5, "x");
    const RngStream b(5, "x");
    for (std::uint64_t i = 0; i < 100; ++i) REQUIRE(a() == b.at(i));
  }
  SUBCASE("different labels are uncorrelated") {
    RngStream a(42, "node/1"), b(42, "node/2");
    const int n = 100000;
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < n; ++i) {
      const double x = a.uniform(), y = b.uniform();
      sa += x, sb += y, sab += x * y, saa += x * x, sbb += y * y;
    }
    const double cov = sab / n - (sa / n) * (sb / n);
    const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
    CHECK(std::abs(corr) < 0.02);
  }
  SUBCASE("different seeds give different streams") {
    int differ = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      if (RngStream(s, "a").at(0) != RngStream(s + 1, "a").at(0)) ++differ;
    }
    CHECK(differ >= 99);
  }
  SUBCASE("child equals explicit path") {
    const RngStream a = RngStream(9, "node/4").child("cfo");
    const RngStream b(9, "node/4/cfo");
    CHECK(a.key() == b.key());
  }
  SUBCASE("empty label rejected") { CHECK_THROWS_AS(RngStream(1, ""), ConfigError); }
}

TEST_CASE("rng normal moments") {
  RngStream r(3, "normal");
  const int n = 200000;
  double s = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    ss += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(ss / n == doctest::Approx(1.0).epsilon(0.01));
  Complex acc{};
  double p = 0;
  for (int i = 0; i < n; ++i) {
    const Complex z = r.complex_normal(2.0);
    acc += z;
    p += std::norm(z);
  }
  CHECK(p / n == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("noise field power and exceed path") {
  const double p = dbm_to_mw(-60.0);
  const NoiseField nf(RngStream(11, "noise/0"), p);
  double sum = 0.0;
  const int n = 1000000;
  for (int k = 0; k < n; ++k) sum += std::norm(nf.sample(k));
  CHECK(std::abs(mw_to_dbm(sum / n) - (-60.0)) < 0.5);

  const double thr = dbm_to_amplitude(-51.0);
  const double pe = nf.exceed_probability(thr);
  int above = 0;
  for (int k = 0; k < 200000; ++k) {
    const bool direct = std::norm(nf.sample(k)) > thr * thr;
    // the two forms may only disagree on rounding at the boundary
    if (direct != nf.exceeds(k, pe)) {
      CHECK(std::abs(std::norm(nf.sample(k)) - thr * thr) < 1e-12 * thr * thr);
    }
    above += direct;
  }
  CHECK(static_cast<double>(above) / 200000.0 == doctest::Approx(pe).epsilon(0.1));
}

TEST_CASE("noise field with zero power is silent") {
  const NoiseField nf(RngStream(1, "n"), 0.0);
  CHECK(nf.sample(5) == Complex(0.0, 0.0));
  CHECK(nf.exceed_probability(1e-3) == 0.0);
}
