#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "anchorsim/bench/bench.hpp"

using namespace anchorsim;
using namespace anchorsim::bench;
using namespace std::chrono_literals;
using io::Json;

namespace {

ExperimentConfig short_overload(std::uint64_t seed = 1) {
  auto c = reference_config(3, Scale::Desk, seed);
  c.load_duration = 3min;
  c.auditing = false;
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("reference caps") {
  CHECK(reference_config(1, Scale::Desk).cap_tps() == doctest::Approx(7.0));
  CHECK(reference_config(1, Scale::Desk).batches_per_block() == 7);
  CHECK(reference_config(1, Scale::Paper).cap_tps() == doctest::Approx(15.2));
  CHECK(reference_config(1, Scale::Paper).batches_per_block() == 76);
  CHECK(reference_config(4, Scale::Paper).tenants.size() == 3);
  CHECK(reference_config(2, Scale::Paper).load_duration == 59min);
}

TEST_CASE("load profiles") {
  auto t1 = reference_config(1, Scale::Paper);
  CHECK(t1.tenants[0].profile.rate_at(30min) == doctest::Approx(12.16));

  auto t2 = reference_config(2, Scale::Paper).tenants[0].profile;
  CHECK(t2.rate_at(0min) == doctest::Approx(18.0));
  CHECK(t2.rate_at(59min) == doctest::Approx(15.2));
  CHECK(t2.rate_at(Duration(59min) / 2) == doctest::Approx(16.6));
  CHECK(t2.rate_at(90min) == doctest::Approx(15.2));

  auto t3 = reference_config(3, Scale::Paper).tenants[0].profile;
  CHECK(t3.rate_at(4min) == doctest::Approx(18.0));
  CHECK(t3.rate_at(5min) == doctest::Approx(25.0));
  CHECK(t3.rate_at(5min + 42s) == doctest::Approx(25.0));
  CHECK(t3.rate_at(5min + 43s) == doctest::Approx(18.0));
  CHECK(t3.rate_at(15min + 10s) == doctest::Approx(25.0));
  CHECK(t3.peak() == doctest::Approx(25.0));

  LoadProfile none;
  CHECK(none.rate_at(1min) == 0);
  CHECK(none.peak() == 0);
}

TEST_CASE("invalid configs are rejected") {
  auto expect_invalid = [](ExperimentConfig c) { CHECK_THROWS_AS(run_experiment(c), io::ConfigInvalid); };
  auto c = short_overload();
  c.load_duration = 0s;
  expect_invalid(c);
  c = short_overload();
  c.tenants[0].profile = LoadProfile::constant(-1);
  expect_invalid(c);
  c = short_overload();
  c.batch_size = 21;
  expect_invalid(c);
  c = short_overload();
  c.tenants.push_back(c.tenants[0]);
  expect_invalid(c);
  c = short_overload();
  c.tenants.clear();
  expect_invalid(c);
  c = short_overload();
  c.tenant_chain.gas_limit = 1'000'000;
  expect_invalid(c);
  c = short_overload();
  c.tenants[0].profile.burst = Burst{10, 2min, 1min, 0s};
  expect_invalid(c);
  CHECK_THROWS_AS(reference_config(5, Scale::Desk), io::ConfigInvalid);
}

TEST_CASE("config documents override every parameter") {
  auto doc = Json::parse(R"({
    "test": 1, "scale": "paper", "seed": 9, "batch_size": 10,
    "load_duration_ms": 120000, "drain_limit_ms": 60000, "first_tick_ms": 15000,
    "anchoring": true, "auditing": false,
    "tenant_chain": {"gas_limit": 4200000, "inter_block_time_ms": 2000},
    "public_chain": {"confirmations_required": 3},
    "engine": {"anchor_interval_ms": 30000, "prioritize_anchor": false},
    "tenants": [{"name": "x", "points": [[0, 1.5], [60000, 3]], "burst": {"tps": 4, "length_ms": 1000, "period_ms": 10000}}]
  })");
  auto c = load_config(doc, 3, Scale::Desk);
  CHECK(c.scale == Scale::Paper);
  CHECK_FALSE(c.test_id.has_value());
  CHECK(c.seed == 9);
  CHECK(c.batch_size == 10);
  CHECK(c.load_duration == 2min);
  CHECK(c.drain_limit == 1min);
  CHECK(c.first_tick == VirtualTime(15s));
  CHECK_FALSE(c.auditing);
  CHECK(c.cap_tps() == doctest::Approx(2.0));
  CHECK(c.public_chain.confirmations_required == 3);
  CHECK(c.engine.anchor_interval == 30s);
  CHECK_FALSE(c.engine.prioritize_anchor);
  REQUIRE(c.tenants.size() == 1);
  CHECK(c.tenants[0].profile.rate_at(35s) == doctest::Approx(2.375));
  CHECK(c.tenants[0].profile.rate_at(20s) == doctest::Approx(4));

  CHECK(load_config(Json::object(), 2, Scale::Desk, 42).seed == 42);
  CHECK_THROWS_AS(load_config(Json{{"bogus", 1}}, 1, Scale::Desk), io::ConfigInvalid);
  CHECK_THROWS_AS(load_config(Json{{"scale", "huge"}}, 1, Scale::Desk), io::ConfigInvalid);
  CHECK_THROWS_AS(load_config(Json{{"engine", {{"anchor_interval_ms", "soon"}}}}, 1, Scale::Desk),
                  io::ConfigInvalid);

  auto round_trip = load_config(to_json(c), 3, Scale::Desk);
  CHECK(to_json(round_trip).dump() == to_json(c).dump());
}

TEST_CASE("overload plateaus at the cap and drains") {
  auto series = run_experiment(short_overload());
  auto s = summarize(series);
  REQUIRE(s.tenants.size() == 1);
  CHECK(s.plateau_tps == doctest::Approx(7.0));
  CHECK(s.id_rate == doctest::Approx(140.0));
  CHECK(s.tenants[0].max_block_load == 7);
  CHECK(s.tenants[0].final_backlog == 0);
  CHECK(s.errors == 0);
  CHECK(s.sent == s.included);
  CHECK(series.finished.count() % 60000 == 0);
  CHECK(series.finished > series.load_end);

  const auto& t = series.tenants[0];
  std::uint64_t sent = 0, included = 0;
  for (std::size_t m = 0; m < series.minutes(); ++m) {
    sent += m < t.sent.size() ? t.sent[m] : 0;
    included += m < t.included.size() ? t.included[m] : 0;
    CHECK(included <= sent);
  }
  for (const auto& b : t.blocks) CHECK(b.load_txs <= 7);
  CHECK(t.backlog().back() == 0);
  CHECK(t.latencies_ms.size() == s.included);
}

TEST_CASE("same config and seed give identical exports; another seed does not") {
  auto a = run_experiment(short_overload(7));
  auto b = run_experiment(short_overload(7));
  auto c = run_experiment(short_overload(8));
  CHECK(format_csv(a.rows()) == format_csv(b.rows()));
  CHECK(format_rounds(a.rounds) == format_rounds(b.rounds));
  CHECK(a.tenants[0].latencies_ms == b.tenants[0].latencies_ms);
  CHECK(format_csv(a.rows()) != format_csv(c.rows()));
}

TEST_CASE("csv export") {
  auto series = run_experiment(short_overload());
  auto rows = series.rows();
  CHECK(rows.size() == series.minutes());

  auto text = format_csv(rows);
  CHECK(text.rfind("minute,sent_tps,included_tps,errors\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == rows.size() + 1);
  CHECK(parse_csv(text) == rows);

  auto dir = std::filesystem::temp_directory_path() / "anchorsim-bench-test";
  std::filesystem::create_directories(dir);
  auto path = (dir / "series.csv").string();
  export_csv(rows, path);
  auto first = slurp(path);
  export_csv(rows, path);
  CHECK(slurp(path) == first);
  CHECK(read_csv(path) == rows);
  std::filesystem::remove_all(dir);

  CHECK_THROWS_AS(export_csv(rows, "/nonexistent-dir/x.csv"), IoError);
  CHECK_THROWS_AS(parse_csv("minute,sent\n"), io::ConfigInvalid);
  CHECK_THROWS_AS(parse_csv("minute,sent_tps,included_tps,errors\n0,1.5,x,0\n"), io::ConfigInvalid);
}

TEST_CASE("a sixty minute run has sixty rows") {
  MetricsSeries series;
  series.tenants.push_back({"t", {}, {}, {}, {}, {}});
  series.finished = VirtualTime(60min);
  auto rows = series.rows();
  CHECK(rows.size() == 60);
  auto text = format_csv(rows);
  CHECK(std::count(text.begin(), text.end(), '\n') == 61);
}

TEST_CASE("idle run: no plateau, no skips with a 10 minute interval") {
  auto c = reference_config(1, Scale::Desk);
  c.tenants[0].profile = LoadProfile::constant(0);
  c.load_duration = 30min;
  c.engine.anchor_interval = 10min;
  c.auditing = false;
  auto s = summarize(run_experiment(c));
  CHECK(s.plateau_tps == 0);
  CHECK(s.sent == 0);
  CHECK(s.rounds_skipped == 0);
  CHECK(s.rounds_succeeded == 2);
}

TEST_CASE("summary over a hand-made series") {
  MetricsSeries series;
  series.batch_size = 20;
  TenantSeries t{"t", {10, 10, 10, 10}, {6, 8, 9, 7}, {0, 0, 1, 0}, {}, {}};
  for (int m = 0; m < 4; ++m) {
    for (int k = 0; k < 2; ++k) {
      BlockSample b;
      b.timestamp = VirtualTime(Duration(m * 60000 + k * 30000 + 1000));
      b.full = m != 0;
      b.load_txs = 3;
      t.blocks.push_back(b);
    }
  }
  series.tenants.push_back(t);
  series.finished = VirtualTime(4min);

  auto add = [&](anchor::RoundOutcome o, int seconds) {
    anchor::RoundReport r;
    r.outcome = o;
    r.finished = VirtualTime(Duration(seconds * 1000));
    series.rounds.push_back(r);
  };
  add(anchor::RoundOutcome::Success, 20);
  add(anchor::RoundOutcome::Skipped, 0);
  add(anchor::RoundOutcome::Skipped, 0);
  add(anchor::RoundOutcome::Success, 35);
  add(anchor::RoundOutcome::Skipped, 0);
  add(anchor::RoundOutcome::Failed, 60);

  auto s = summarize(series);
  CHECK(s.tenants[0].saturated_minutes == 3);
  CHECK(s.plateau_tps == doctest::Approx(8.0 / 60));
  CHECK(s.id_rate == doctest::Approx(8.0 / 3));
  CHECK(s.sent == 40);
  CHECK(s.errors == 1);
  CHECK(s.tenants[0].final_backlog == 9);
  CHECK(s.rounds_succeeded == 2);
  CHECK(s.rounds_failed == 1);
  CHECK(s.rounds_skipped == 3);
  CHECK(s.max_consecutive_skips == 2);
  CHECK(s.min_round == 20s);
  CHECK(s.max_round == 35s);
  CHECK(t.backlog() == std::vector<std::int64_t>{4, 6, 6, 9});
}

TEST_CASE("series documents summarize the same as the series") {
  auto c = short_overload();
  c.auditing = true;
  auto series = run_experiment(c);
  auto back = series_from_json(Json::parse(to_json(series).dump()));
  CHECK(to_json(summarize(back)).dump() == to_json(summarize(series)).dump());
  CHECK(format_csv(back.rows()) == format_csv(series.rows()));
  CHECK(to_json(back).dump() != "");
  CHECK_THROWS_AS(series_from_json(Json{{"tenants", 3}}), io::ConfigInvalid);
}

TEST_CASE("each injected fault fails the audit") {
  CHECK(parse_fault("tree") == Fault::StoredTree);
  CHECK_FALSE(parse_fault("meteor").has_value());
  for (auto fault : {Fault::None, Fault::TenantState, Fault::StoredTree, Fault::FabricatedRoot}) {
    CAPTURE(fault_name(fault));
    auto c = reference_config(1, Scale::Desk);
    c.load_duration = 3min;
    c.tenants.push_back({"tenant-b", c.tenants[0].profile});
    Experiment e(c);
    e.run();
    inject(e.platform(), fault, 0);
    auto& p = e.platform();
    auto victim = audit::audit_tenant(*p.tenant(0).node, p.public_node());
    auto other = audit::audit_tenant(*p.tenant(1).node, p.public_node());
    CHECK(victim.pass == (fault == Fault::None));
    CHECK(other.pass == (fault != Fault::FabricatedRoot));
  }
}
