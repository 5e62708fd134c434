#include <doctest.h>

#include <map>
#include <vector>

#include "rfzw/analysis.hpp"
#include "rfzw/netsim.hpp"

using namespace rfzw;

namespace {

SimConfig pair_config(int bits = 32) {
  SimConfig c;
  c.grid_rows = 1;
  c.grid_cols = 2;
  c.grid_distance_m = 5.0;
  c.frame_size_bits = bits;
  c.num_frames = 3;
  c.noise_power_dbm = -120.0;
  c.cfo_range_hz = 0.0;
  c.root_seed = 5;
  return c;
}

std::int64_t zero_to_one(const FloodRun& run) {
  std::int64_t n = 0;
  for (const auto& fr : run.frames) {
    for (const auto& r : fr.nodes) {
      for (std::size_t j = 0; j < r.payload.size(); ++j) n += fr.truth[j + 1] == 0 && r.payload[j] == 1;
    }
  }
  return n;
}

}  // namespace

TEST_CASE("node machine: preamble, relay and silent symbols") {
  SimConfig c = pair_config(4);
  const ProtocolTiming tm = ProtocolTiming::from(c);
  NodeMachine m(tm, 1.0);
  std::optional<std::int64_t> tx;
  std::int64_t k = 0;
  for (; k < 1000 && !tx; ++k) {
    m.poll(k);
    tx = m.step(k >= 300 && k < 360 ? Complex(3.0, 0.0) : Complex(0.01, 0.0), k);
  }
  REQUIRE(tx);
  CHECK(*tx == 400);  // end of the buffer holding the pulse
  CHECK(*tx - 300 <= tm.relay_samples);
  CHECK(m.mode(*tx) == NodeMachine::Mode::Transmitting);
  const std::int64_t origin = 400 - tm.relay_samples - tm.tau_samples;
  CHECK(m.frames().back().window_origin == origin);
  CHECK(m.window_start() == origin + tm.symbol_samples);

  // a quiet window decides 0 at its end and moves on by one symbol
  const std::int64_t w = m.window_start();
  for (k = *tx; k < w + tm.window_len; ++k) {
    m.poll(k);
    CHECK_FALSE(m.step(Complex(0.0, 0.0), k));
  }
  const SyncedFrame& f = m.frames().back();
  REQUIRE(f.bits.size() == 1);
  CHECK(f.bits[0] == 0);
  CHECK(f.decided_at[0] == tm.window_len);
  CHECK(m.window_start() == w + tm.symbol_samples);
}

TEST_CASE("node machine: blanked while transmitting") {
  const ProtocolTiming tm = ProtocolTiming::from(pair_config());
  NodeMachine m(tm, 1.0);
  for (std::int64_t k = 0; k < 100; ++k) {
    m.poll(k);
    m.step(Complex(3.0, 0.0), k);
  }
  CHECK(m.transmitting_until() == 100 + tm.pulse_len);
  CHECK(m.poll(150) == NodeMachine::Input::None);  // before its first window
  CHECK(m.poll(m.window_start()) != NodeMachine::Input::None);
}

TEST_CASE("two-node link decodes exactly within the latency bound") {
  SimConfig c = pair_config();
  std::vector<std::uint8_t> payload(31);
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = (i * 7 + 3) % 5 < 2;
  payload.back() = 1;
  c.fixed_payload = payload;
  const FloodResult res = run_flood(c);
  const double ts = c.phy.symbol_period, r = 5e-6;
  REQUIRE(res.metrics.frames_complete == 3);
  CHECK(res.metrics.errors == 0);
  for (const auto& fr : res.run.frames) {
    const auto& node = fr.nodes[0];  // the source is the right-hand node
    REQUIRE(node.complete);
    CHECK(std::equal(node.payload.begin(), node.payload.end(), fr.truth.begin() + 1));
    CHECK(node.sync_time - fr.source_start <= 100);
    const auto lat = e2e_latency(fr, res.run.topology.source, c.phy.sample_rate);
    REQUIRE(lat);
    CHECK(*lat >= 31 * ts - 1e-12);
    CHECK(*lat <= 31 * ts + r + 1e-12);
  }
}

TEST_CASE("a trailing 0 completes at the end of its window") {
  SimConfig c = pair_config();
  c.fixed_payload = std::vector<std::uint8_t>(31, 0);
  const FloodResult res = run_flood(c);
  const ProtocolTiming& tm = res.run.timing;
  for (const auto& fr : res.run.frames) {
    const auto lat = e2e_latency(fr, res.run.topology.source, c.phy.sample_rate);
    REQUIRE(lat);
    // window origin t_n - r - tau with t_n one buffer after the preamble
    const auto expected = 31 * tm.symbol_samples + tm.window_len - tm.tau_samples;
    CHECK(*lat * c.phy.sample_rate == doctest::Approx(static_cast<double>(expected)));
  }
}

TEST_CASE("echo immunity and the latency lower bound") {
  SimConfig c = pair_config(64);
  c.grid_rows = 4;
  c.grid_cols = 4;
  c.set_data_rate(40000);
  c.noise_power_dbm = -60.0;
  const FloodRun run = simulate_flood(c);
  const auto lower = static_cast<std::int64_t>(c.frame_size_bits - 1) * run.timing.symbol_samples;
  for (const auto& fr : run.frames) {
    for (int i = 0; i < run.topology.size(); ++i) {
      const auto& r = fr.nodes[i];
      CHECK(r.payload.size() <= static_cast<std::size_t>(c.frame_size_bits - 1));
      if (r.complete && r.sync_time - fr.source_start <= preamble_deadline(run.timing, run.topology.h_max)) {
        CHECK(r.payload.size() == static_cast<std::size_t>(c.frame_size_bits - 1));
        CHECK(r.completion - fr.source_start >= lower);
      }
    }
  }
}

TEST_CASE("no 0-to-1 errors without relays") {
  const FloodRun run = simulate_flood(pair_config(128));
  CHECK(zero_to_one(run) == 0);
}

TEST_CASE("no 0-to-1 errors when relays finish inside a symbol") {
  SimConfig c = pair_config(64);
  c.grid_rows = 4;
  c.grid_cols = 4;
  c.set_data_rate(40000);  // Ts / r = 5 > h_max + 1
  const FloodRun run = simulate_flood(c);
  REQUIRE(run.topology.h_max <= 3);
  CHECK(zero_to_one(run) == 0);
}

TEST_CASE("engine samples match the channel superposition") {
  SimConfig c = pair_config(16);
  c.noise_enabled = false;
  c.detector.threshold_amplitude = dbm_to_amplitude(-51.0);
  c.channel.rician_k_db = 300.0;
  c.num_frames = 1;
  std::vector<std::pair<int, std::int64_t>> txs;
  std::map<std::int64_t, Complex> rx1;
  SimHooks hooks;
  hooks.on_transmit = [&](int node, std::int64_t start) { txs.emplace_back(node, start); };
  hooks.on_sample = [&](int node, std::int64_t k, Complex y) {
    if (node == 0) rx1[k] = y;
  };
  const FloodRun run = simulate_flood(c, hooks);
  REQUIRE(run.topology.source == 1);
  REQUIRE(!rx1.empty());

  const LinkState link = make_link(1, 0, 5.0, c.channel, c.phy, Complex(1.0, 0.0));
  std::vector<Transmission> from_source;
  for (const auto& [node, start] : txs) {
    if (node != 1) continue;
    from_source.push_back({Waveform(pulse_support(c.phy), c.phy.sample_rate, start),
                           Complex(std::abs(link.gain), 0.0), link.delay_samples, 0.0, 0.0});
  }
  CHECK(static_cast<int>(from_source.size()) ==
        std::count(run.frames[0].truth.begin(), run.frames[0].truth.end(), 1));
  const std::int64_t first = rx1.begin()->first, last = rx1.rbegin()->first;
  ReceiverWindow win{first, static_cast<Eigen::Index>(last - first + 1), c.phy.sample_rate};
  const Waveform ref = superpose_at_receiver(from_source, win, NoiseField{});
  for (const auto& [k, y] : rx1) {
    REQUIRE(std::abs(std::abs(y) - std::abs(ref.samples[k - first])) < 1e-12);
  }
}

TEST_CASE("same seed, same report") {
  SimConfig c = pair_config(48);
  c.grid_rows = 3;
  c.grid_cols = 3;
  c.cfo_range_hz = 1000.0;
  c.noise_power_dbm = -60.0;
  const std::string a = run_flood(c).metrics.to_text();
  const std::string b = run_flood(c).metrics.to_text();
  CHECK(a == b);
  c.root_seed = 6;
  CHECK(run_flood(c).metrics.to_text() != a);
}

TEST_CASE("frame schedule and payloads") {
  SimConfig c = pair_config(20);
  const ProtocolTiming tm = ProtocolTiming::from(c);
  for (int f = 0; f < 5; ++f) {
    CHECK(frame_start(tm, f) % tm.buffer_size == 0);
    if (f) CHECK(frame_start(tm, f) - frame_start(tm, f - 1) >= tm.frame_span());
  }
  const auto bits = frame_bits(c, 2);
  CHECK(bits.size() == 20);
  CHECK(bits[0] == 1);
  CHECK(bits == frame_bits(c, 2));
  CHECK(bits != frame_bits(c, 3));
  c.fixed_payload = std::vector<std::uint8_t>(19, 0);
  const auto quiet = frame_bits(c, 0);
  CHECK(std::count(quiet.begin(), quiet.end(), 1) == 1);
  c.fixed_payload = std::vector<std::uint8_t>(5, 0);
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
