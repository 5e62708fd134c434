#include <doctest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "rfzw/detector.hpp"

using namespace rfzw;

namespace {

constexpr double kThr = 1.0;

DetectorConfig config(Eigen::Index window = 200) {
  DetectorConfig c;
  c.window_len = window;
  c.threshold_amplitude = kThr;
  return c;
}

Waveform make_window(Eigen::Index n, Eigen::Index pulse_from, Eigen::Index pulse_len, double pulse_amp,
                     double noise_amp, std::mt19937_64& gen) {
  std::normal_distribution<double> nd(0.0, noise_amp / std::sqrt(2.0));
  Samples s(n);
  for (auto& x : s) x = {nd(gen), nd(gen)};
  for (Eigen::Index k = pulse_from; k < std::min(n, pulse_from + pulse_len); ++k) s[k] += pulse_amp;
  return Waveform(s, 2e7);
}

oracle::Decision reference(const Waveform& w, const DetectorConfig& c) {
  std::vector<std::complex<double>> v(w.samples.begin(), w.samples.end());
  return oracle::detect(v, c.window_len, c.buffer_size, c.group_size, c.threshold_amplitude);
}

}  // namespace

TEST_CASE("group vote needs a strict majority") {
  Eigen::ArrayXcd g = Eigen::ArrayXcd::Constant(10, 2.0 * kThr);
  CHECK(vote_group(g, kThr, 10));
  g.head(5) = 0.5 * kThr;
  CHECK_FALSE(vote_group(g, kThr, 10));
  g[0] = 2.0 * kThr;
  CHECK(vote_group(g, kThr, 10));
  // exactly at threshold does not count as above
  CHECK_FALSE(vote_group(Eigen::ArrayXcd::Constant(10, kThr), kThr, 10));
  CHECK_THROWS_AS(vote_group(Eigen::ArrayXcd::Zero(9), kThr, 10), ConfigError);
}

TEST_CASE("window decisions") {
  std::mt19937_64 gen(5);
  const DetectorConfig c = config();
  const Waveform early = make_window(200, 0, 60, 3.0 * kThr, 0.1 * kThr, gen);
  CHECK(detect_window(early, c) == SymbolDecision{1, 100});
  const Waveform late = make_window(200, 120, 60, 3.0 * kThr, 0.1 * kThr, gen);
  CHECK(detect_window(late, c) == SymbolDecision{1, 200});
  const Waveform quiet = make_window(200, 0, 0, 0.0, 0.1 * kThr, gen);
  CHECK(detect_window(quiet, c) == SymbolDecision{0, 200});
  CHECK_THROWS_AS(detect_window(Waveform(Samples::Zero(150), 2e7), c), ConfigError);
}

TEST_CASE("config validation") {
  DetectorConfig c = config();
  CHECK_NOTHROW(c.validate());
  CHECK(c.attempts_per_window() == 2);
  c.buffer_size = 95;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = config(250);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = config(200);
  CHECK_NOTHROW(c.validate_for_symbol(60, 200));
  CHECK_NOTHROW(c.validate_for_symbol(60, 500));
  CHECK_THROWS_AS(c.validate_for_symbol(60, 100), ConfigError);
  c = config(100);
  CHECK_THROWS_AS(c.validate_for_symbol(100, 200), ConfigError);
}

TEST_CASE("agrees with the brute-force reference on random windows") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> pos(-60, 200), len(1, 80), win(1, 5);
  std::uniform_real_distribution<double> amp(0.0, 3.0), noise(0.0, 1.5);
  int ones = 0;
  for (int i = 0; i < 20000; ++i) {
    const DetectorConfig c = config(100 * win(gen));
    const int from = pos(gen);
    const int l = len(gen);
    const Waveform w = make_window(c.window_len, std::max(0, from), from < 0 ? l + from : l, amp(gen),
                                   noise(gen), gen);
    const SymbolDecision d = detect_window(w, c);
    const oracle::Decision o = reference(w, c);
    REQUIRE(d.bit == o.bit);
    REQUIRE(d.decided_at == o.decided_at);
    if (d.bit == 1) {
      ++ones;
      CHECK(d.decided_at % c.buffer_size == 0);
      CHECK(d.decided_at <= c.window_len);
    } else {
      CHECK(d.decided_at == c.window_len);
    }
  }
  CHECK(ones > 1000);
  CHECK(ones < 19000);
}

TEST_CASE("streaming accumulator matches the batch detector") {
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<int> pos(0, 199);
  std::uniform_real_distribution<double> amp(0.5, 2.0);
  const DetectorConfig c = config();
  for (int i = 0; i < 2000; ++i) {
    const Waveform w = make_window(200, pos(gen), 30, amp(gen), 0.8, gen);
    VoteAccumulator acc(c.buffer_size, c.group_size);
    SymbolDecision streamed{0, 200};
    for (Eigen::Index k = 0; k < 200; ++k) {
      const auto ev = acc.feed(std::abs(w.samples[k]) > c.threshold_amplitude);
      if (ev == VoteAccumulator::Event::BufferHit) {
        streamed = {1, k + 1};
        break;
      }
      if (ev != VoteAccumulator::Event::None) CHECK(acc.position() == 0);
    }
    REQUIRE(streamed == detect_window(w, c));
  }
}

TEST_CASE("raising the threshold never creates a 1-decision") {
  std::mt19937_64 gen(31);
  std::uniform_int_distribution<int> pos(0, 199);
  std::uniform_real_distribution<double> amp(0.0, 3.0), scale(1.0, 3.0);
  for (int i = 0; i < 5000; ++i) {
    const Waveform w = make_window(200, pos(gen), 60, amp(gen), 1.0, gen);
    DetectorConfig lo = config();
    DetectorConfig hi = lo;
    hi.threshold_amplitude *= scale(gen);
    if (detect_window(w, lo).bit == 0) REQUIRE(detect_window(w, hi).bit == 0);
  }
}

TEST_CASE("window length trade-off over a fixed corpus") {
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> start(0, 40);
  std::uniform_real_distribution<double> amp(0.2, 2.0);
  const int n = 3000;
  const Eigen::Index longest = 500;
  std::vector<Waveform> ones, zeros;
  for (int i = 0; i < n; ++i) {
    ones.push_back(make_window(longest, start(gen), 60, amp(gen), 0.7, gen));
    zeros.push_back(make_window(longest, 0, 0, 0.0, 0.7, gen));
  }
  double prev_ser1 = 2.0, prev_ser0 = -1.0, t1_min = 1e9, t1_max = 0.0;
  for (Eigen::Index l = 100; l <= longest; l += 100) {
    const DetectorConfig c = config(l);
    int miss = 0, false_alarm = 0, hits = 0;
    double t0 = 0.0, t1 = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto d1 = detect_window(Waveform(ones[i].samples.head(l), 2e7), c);
      const auto d0 = detect_window(Waveform(zeros[i].samples.head(l), 2e7), c);
      if (d1.bit == 0) ++miss;
      else {
        ++hits;
        t1 += static_cast<double>(d1.decided_at);
      }
      if (d0.bit == 1) ++false_alarm;
      else t0 += static_cast<double>(d0.decided_at);
    }
    const double ser1 = static_cast<double>(miss) / n, ser0 = static_cast<double>(false_alarm) / n;
    CHECK(ser1 <= prev_ser1);
    CHECK(ser0 >= prev_ser0);
    CHECK(t0 / (n - false_alarm) == doctest::Approx(static_cast<double>(l)));
    t1_min = std::min(t1_min, t1 / hits);
    t1_max = std::max(t1_max, t1 / hits);
    prev_ser1 = ser1;
    prev_ser0 = ser0;
  }
  CHECK(t1_max - t1_min <= 100.0);
}

TEST_CASE("window start and relay time") {
  CHECK(window_start(100e-6, 5e-6, 0.5e-6) == doctest::Approx(94.5e-6));
  CHECK(window_start(3e-3, 0.0, 0.0) == 3e-3);
  CHECK_THROWS_AS(window_start(4e-6, 5e-6, 0.5e-6), ConfigError);
  CHECK(relay_time(100, 2e7) == doctest::Approx(5e-6));
  CHECK(relay_time(60, 2e7) == doctest::Approx(3e-6));
  CHECK(relay_time(0, 2e7) == 0.0);
}
