// End-to-end acceptance checks. One PASS/FAIL line per criterion; exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "anchorsim/bench/bench.hpp"
#include "anchorsim/roots/merkle_map.hpp"

using namespace anchorsim;
using namespace std::chrono_literals;
using bench::ExperimentConfig;
using bench::Scale;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double wall_seconds(const std::function<void()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double secs(sim::Duration d) { return std::chrono::duration<double>(d).count(); }

bool within(double value, double target, double tolerance) { return std::abs(value - target) <= tolerance * target; }

std::string fmt(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Full-scale parameters, overloaded long enough for a ten-minute saturated window.
ExperimentConfig paper_overload() {
  auto c = bench::reference_config(3, Scale::Paper);
  c.load_duration = 11min;
  c.auditing = false;
  return c;
}

// The minutes in which every block of the tenant was full.
std::vector<std::size_t> saturated_minutes(const bench::TenantSeries& t) {
  std::map<std::size_t, bool> full;
  for (const auto& b : t.blocks) {
    auto m = static_cast<std::size_t>(b.timestamp / 1min);
    auto [it, fresh] = full.try_emplace(m, b.full);
    if (!fresh) it->second = it->second && b.full;
  }
  std::vector<std::size_t> out;
  for (const auto& [m, f] : full) {
    if (f) out.push_back(m);
  }
  return out;
}

Outcome throughput_cap(bench::MetricsSeries& series, double& wall) {
  Outcome o;
  // Independent oracle: integer division of the block gas by the batch gas.
  constexpr std::uint64_t kPerBlock = 80'000'000 / 1'050'000;
  constexpr double kCap = static_cast<double>(kPerBlock) / 5.0;
  wall = wall_seconds([&] { series = bench::run_experiment(paper_overload()); });
  auto s = bench::summarize(series);
  const auto& t = series.tenants.at(0);
  auto window = saturated_minutes(t);
  std::size_t exact = 0, in_window = 0;
  for (const auto& b : t.blocks) {
    auto m = static_cast<std::size_t>(b.timestamp / 1min);
    if (!std::binary_search(window.begin(), window.end(), m)) continue;
    ++in_window;
    exact += b.load_txs == kPerBlock ? 1 : 0;
  }
  o.expect(kPerBlock == 76, "76 batches per block");
  o.expect(window.size() >= 10, "ten saturated minutes");
  o.expect(within(s.plateau_tps, kCap, 0.02), "plateau within 2% of 15.2");
  o.expect(in_window > 0 && exact == in_window, "every saturated block holds 76 batches");
  o.expect(s.tenants[0].max_block_load == kPerBlock, "no block above 76");
  o.expect(wall < 30.0, "under 30 s wall time");
  o.detail << "plateau " << fmt(s.plateau_tps) << " tx/s over " << window.size() << " saturated min, " << exact << "/"
           << in_window << " blocks with 76 txs, " << fmt(wall, 1) << " s wall";
  return o;
}

Outcome id_rate(const bench::MetricsSeries& series) {
  Outcome o;
  const auto& t = series.tenants.at(0);
  auto window = saturated_minutes(t);
  // Count ids straight from the blocks rather than from the summary.
  std::uint64_t ids = 0;
  for (const auto& b : t.blocks) {
    if (std::binary_search(window.begin(), window.end(), static_cast<std::size_t>(b.timestamp / 1min))) {
      ids += b.load_txs * series.batch_size;
    }
  }
  double rate = window.empty() ? 0 : static_cast<double>(ids) / (60.0 * static_cast<double>(window.size()));
  auto s = bench::summarize(series);
  o.expect(within(rate, 304.0, 0.02), "block id rate within 2% of 304");
  o.expect(within(s.id_rate, 304.0, 0.02), "summary id rate within 2% of 304");
  o.detail << fmt(rate) << " ids/s from blocks, " << fmt(s.id_rate) << " ids/s from the plateau";
  return o;
}

Outcome backlog_drain() {
  Outcome o;
  auto c = bench::reference_config(3, Scale::Desk);
  c.auditing = false;
  auto series = bench::run_experiment(c);
  auto s = bench::summarize(series);
  const auto& t = series.tenants.at(0);
  auto backlog = t.backlog();
  auto load_minutes = static_cast<std::size_t>(c.load_duration / 1min);
  std::int64_t at_load_end = load_minutes - 1 < backlog.size() ? backlog[load_minutes - 1] : 0;
  double error_share = s.sent ? static_cast<double>(s.errors) / static_cast<double>(s.sent) : 0;
  o.expect(at_load_end > 0, "overloaded while the load ran");
  o.expect(backlog.back() == 0 && s.tenants[0].final_backlog == 0, "final backlog 0");
  o.expect(error_share <= 0.0001, "errors at most 0.01%");
  o.expect(series.finished > series.load_end, "drained after the load stopped");
  o.detail << "backlog " << at_load_end << " at load end, 0 after " << series.minutes() << " min; " << s.errors
           << " errors in " << s.sent;
  return o;
}

Outcome isolation() {
  Outcome o;
  auto shared = bench::reference_config(4, Scale::Desk);
  shared.auditing = false;
  auto together = bench::summarize(bench::run_experiment(shared));
  for (std::size_t i = 0; i < shared.tenants.size(); ++i) {
    auto solo = bench::reference_config(3, Scale::Desk);
    solo.auditing = false;
    solo.tenants = {shared.tenants[i]};
    auto alone = bench::summarize(bench::run_experiment(solo));
    double mine = together.tenants[i].plateau_tps;
    o.expect(mine > 0 && within(mine, alone.plateau_tps, 0.01), shared.tenants[i].name + " plateau within 1% of solo");
    o.detail << shared.tenants[i].name << " " << fmt(mine) << " vs " << fmt(alone.plateau_tps) << " solo; ";
  }

  // Tenant B under normal load, with and without tenant A overloaded.
  auto with_a = bench::reference_config(3, Scale::Desk);
  with_a.auditing = false;
  auto b_load = bench::reference_config(1, Scale::Desk).tenants[0].profile;
  with_a.tenants = {{"tenant-a", with_a.tenants[0].profile}, {"tenant-b", b_load}};
  auto without_a = with_a;
  without_a.tenants = {{"tenant-b", b_load}};
  auto x = bench::run_experiment(with_a);
  auto y = bench::run_experiment(without_a);
  const auto& bx = x.tenants[1].latencies_ms;
  const auto& by = y.tenants[0].latencies_ms;
  o.expect(x.tenants[0].backlog().at(8) > 0, "tenant A overloaded");
  o.expect(!bx.empty() && bx == by, "B latencies identical to solo");
  o.expect(x.tenants[1].sent == y.tenants[0].sent, "B sent series identical");
  o.detail << "B: " << bx.size() << " latencies, identical=" << (bx == by ? "yes" : "no");
  return o;
}

std::optional<sim::Duration> max_round(const ExperimentConfig& c, std::size_t& failed) {
  auto s = bench::summarize(bench::run_experiment(c));
  failed = s.rounds_failed;
  return s.max_round;
}

Outcome anchor_independence() {
  Outcome o;
  auto base = bench::reference_config(3, Scale::Desk);
  base.auditing = false;
  // With the default schedule a tree store fits into the gas a full block of
  // batches leaves over, so it never waits in the pool whatever its price.
  // The heavy variant makes the store compete with the batches for space.
  const auto slack = base.tenant_chain.gas_limit - base.batches_per_block() * base.tenant_chain.gas.register_batch;
  for (bool heavy : {false, true}) {
    auto loaded = base;
    if (heavy) loaded.tenant_chain.gas.store_trie = slack + 50'000;
    auto idle = loaded;
    idle.tenants[0].profile = bench::LoadProfile::constant(0);
    auto unprioritized = loaded;
    unprioritized.engine.prioritize_anchor = false;

    std::size_t idle_failed = 0, loaded_failed = 0, control_failed = 0;
    auto idle_max = max_round(idle, idle_failed);
    auto loaded_max = max_round(loaded, loaded_failed);
    auto control_max = max_round(unprioritized, control_failed);
    const std::string label = heavy ? "store above slack" : "default store";
    o.expect(idle_max && loaded_max, label + ": rounds completed");
    if (!idle_max || !loaded_max) return o;
    const double bound = 1.25 * secs(*idle_max);
    o.expect(secs(*loaded_max) <= bound, label + ": overload max within 1.25x idle");
    o.expect(idle_failed == 0 && loaded_failed == 0, label + ": no failed rounds with prioritization");
    if (heavy) {
      bool delayed = control_failed > 0 || (control_max && secs(*control_max) > bound);
      o.expect(delayed, label + ": unprioritized rounds delayed by queuing");
    }
    o.detail << label << ": idle max " << fmt(secs(*idle_max), 1) << " s, overload max "
             << fmt(secs(*loaded_max), 1) << " s, unprioritized max "
             << (control_max ? fmt(secs(*control_max), 1) : std::string("-")) << " s (" << control_failed
             << " failed); ";
  }
  return o;
}

Outcome anchoring_cost() {
  Outcome o;
  for (int n : {1, 3, 10}) {
    auto c = bench::reference_config(1, Scale::Desk);
    c.load_duration = 5min;
    c.auditing = false;
    auto profile = c.tenants[0].profile;
    c.tenants.clear();
    for (int i = 0; i < n; ++i) c.tenants.push_back({"t" + std::to_string(i), profile});
    auto series = bench::run_experiment(c);
    std::map<std::uint64_t, int> per_round;
    for (auto r : series.public_anchor_txs) ++per_round[r];
    std::size_t ok = 0;
    bool one_each = true;
    for (const auto& r : series.rounds) {
      if (r.outcome != anchor::RoundOutcome::Success) continue;
      ++ok;
      one_each = one_each && r.round_id && per_round[*r.round_id] == 1 && r.public_transactions() == 1;
    }
    o.expect(ok > 0 && one_each, "one public tx per round for N=" + std::to_string(n));
    o.expect(series.public_anchor_txs.size() == ok, "no extra public txs for N=" + std::to_string(n));
    o.detail << "N=" << n << ": " << series.public_anchor_txs.size() << " txs / " << ok << " rounds; ";
  }
  return o;
}

Outcome skip_semantics() {
  Outcome o;
  auto c = bench::reference_config(1, Scale::Desk);
  c.load_duration = 3min;
  c.auditing = false;
  c.engine.anchor_interval = 5s;
  auto series = bench::run_experiment(c);
  std::vector<const anchor::RoundReport*> started;
  std::vector<std::size_t> gaps;
  std::size_t run = 0;
  for (const auto& r : series.rounds) {
    if (r.outcome == anchor::RoundOutcome::Skipped) {
      ++run;
      continue;
    }
    if (!started.empty()) gaps.push_back(run);
    started.push_back(&r);
    run = 0;
  }
  bool overlap = false;
  for (std::size_t i = 1; i < started.size(); ++i) overlap = overlap || started[i]->started < started[i - 1]->finished;
  auto fewest = gaps.empty() ? 0 : *std::min_element(gaps.begin(), gaps.end());
  o.expect(started.size() >= 3, "several rounds ran");
  o.expect(fewest >= 4, "at least 4 consecutive skips between rounds");
  o.expect(!overlap, "no overlapping rounds");
  o.detail << started.size() << " rounds, at least " << fewest << " skips between each, overlap="
           << (overlap ? "yes" : "no");
  return o;
}

Outcome audit_soundness() {
  Outcome o;
  std::size_t honest = 0, honest_pass = 0;
  for (int test = 1; test <= 4; ++test) {
    bench::Experiment e(bench::reference_config(test, Scale::Desk));
    e.run();
    for (const auto& r : e.series().audits) {
      ++honest;
      honest_pass += r.pass ? 1 : 0;
    }
    auto& p = e.platform();
    for (std::size_t i = 0; i < p.tenant_count(); ++i) {
      ++honest;
      honest_pass += audit::audit_tenant(*p.tenant(i).node, p.public_node()).pass ? 1 : 0;
    }
  }
  o.expect(honest > 0 && honest == honest_pass, "honest runs all pass");
  o.detail << honest_pass << "/" << honest << " honest audits pass; ";

  std::size_t injected = 0, caught = 0;
  for (auto fault : {bench::Fault::TenantState, bench::Fault::StoredTree, bench::Fault::FabricatedRoot}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      auto c = bench::reference_config(4, Scale::Desk, seed);
      c.load_duration = 3min;
      bench::Experiment e(c);
      e.run();
      auto& p = e.platform();
      std::size_t victim = seed % p.tenant_count();
      bench::inject(p, fault, victim);
      ++injected;
      bool failed = !audit::audit_tenant(*p.tenant(victim).node, p.public_node()).pass;
      caught += failed ? 1 : 0;
      o.expect(failed, std::string(bench::fault_name(fault)) + " fault detected");
    }
  }
  o.detail << caught << "/" << injected << " injected faults fail the audit";
  return o;
}

// Brute-force root straight from the node preimages.
roots::Digest oracle_root(const std::map<Bytes, Bytes>& entries) {
  auto u32 = [](Bytes& out, std::size_t n) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(n >> s));
  };
  if (entries.empty()) return roots::sha256(Bytes{0x02});
  std::vector<roots::Digest> level;
  for (const auto& [k, v] : entries) {
    Bytes pre{0x00};
    u32(pre, k.size());
    pre.insert(pre.end(), k.begin(), k.end());
    u32(pre, v.size());
    pre.insert(pre.end(), v.begin(), v.end());
    level.push_back(roots::sha256(pre));
  }
  while (level.size() > 1) {
    std::vector<roots::Digest> next;
    for (std::size_t i = 0; i < level.size(); i += 2) {
      if (i + 1 == level.size()) {
        next.push_back(level[i]);
        break;
      }
      Bytes pre{0x01};
      pre.insert(pre.end(), level[i].bytes().begin(), level[i].bytes().end());
      pre.insert(pre.end(), level[i + 1].bytes().begin(), level[i + 1].bytes().end());
      next.push_back(roots::sha256(pre));
    }
    level = std::move(next);
  }
  return level.front();
}

Outcome merkle_properties() {
  Outcome o;
  std::mt19937_64 rng(20240611);
  auto random_bytes = [&](std::size_t max_len) {
    Bytes out(rng() % (max_len + 1));
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
  };
  std::size_t order_ok = 0, proofs_ok = 0, serial_ok = 0, mutation_ok = 0, mutations = 0;
  constexpr int kCases = 1000;
  for (int c = 0; c < kCases; ++c) {
    std::map<Bytes, Bytes> entries;
    for (auto n = rng() % 33; n > 0; --n) entries[random_bytes(16)] = random_bytes(24);
    std::vector<std::pair<Bytes, Bytes>> order(entries.begin(), entries.end());
    std::shuffle(order.begin(), order.end(), rng);
    roots::MerkleMap a, b;
    for (const auto& [k, v] : order) a.insert(k, v);
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto& [k, v] : order) b.insert(k, v);
    const auto root = a.root();
    order_ok += root == b.root() && root == oracle_root(entries) ? 1 : 0;

    bool all_verify = true;
    for (const auto& [k, v] : entries) all_verify = all_verify && roots::verify_proof(a.prove(k), root);
    proofs_ok += all_verify ? 1 : 0;

    auto bytes = a.serialize();
    auto back = roots::MerkleMap::deserialize(bytes);
    serial_ok += back == a && back.serialize() == bytes && back.root() == root ? 1 : 0;

    if (entries.empty()) {
      ++mutation_ok;
      continue;
    }
    // One byte of a proof, then one byte of the encoding.
    auto it = std::next(entries.begin(), static_cast<long>(rng() % entries.size()));
    auto proof = a.prove(it->first);
    std::vector<std::uint8_t*> spots;
    for (auto& x : proof.key) spots.push_back(&x);
    for (auto& x : proof.value) spots.push_back(&x);
    for (auto& step : proof.path) {
      for (auto& x : step.sibling.mutable_bytes()) spots.push_back(&x);
    }
    bool detected = true;
    if (!spots.empty()) {
      *spots[rng() % spots.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      detected = !roots::verify_proof(proof, root);
      ++mutations;
    }
    Bytes bad = bytes;
    bad[rng() % bad.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    ++mutations;
    try {
      detected = detected && roots::MerkleMap::deserialize(bad).root() != root;
    } catch (const roots::MerkleError&) {
    }
    mutation_ok += detected ? 1 : 0;
  }
  o.expect(order_ok == kCases, "insertion order invariance");
  o.expect(proofs_ok == kCases, "proofs verify");
  o.expect(serial_ok == kCases, "serialization round trip");
  o.expect(mutation_ok == kCases, "single-byte mutations detected");
  o.detail << kCases << " cases: order " << order_ok << ", proofs " << proofs_ok << ", round trip " << serial_ok
           << ", mutations " << mutation_ok << " (" << mutations << " mutated)";
  return o;
}

Outcome timeout_semantics() {
  Outcome o;
  auto c = bench::reference_config(1, Scale::Desk);
  c.load_duration = 4min;
  auto profile = c.tenants[0].profile;
  c.tenants = {{"tenant-a", profile}, {"tenant-b", profile}, {"tenant-c", profile}};
  bench::Experiment e(c);
  auto& p = e.platform();
  auto& stale = p.tenant(2);
  // Round 2 starts at 120 s; tenant-c is down across its head query.
  p.simulator().schedule_at(sim::VirtualTime(110s), sim::Phase::Load,
                            [&] { stale.node->fail_over(chain::Availability::Unreachable); });
  p.simulator().schedule_at(sim::VirtualTime(130s), sim::Phase::Load,
                            [&] { stale.node->fail_over(chain::Availability::Restored); });
  p.run_until(sim::VirtualTime(170s));

  auto history = p.engine().round_history();
  const anchor::RoundReport* first = nullptr;
  const anchor::RoundReport* second = nullptr;
  for (const auto& r : history) {
    if (r.round_id == 1u) first = &r;
    if (r.round_id == 2u) second = &r;
  }
  o.expect(first && second, "rounds 1 and 2 finished");
  if (!first || !second) return o;
  const auto& id_c = stale.chain->chain_id();
  const auto& c2 = second->per_tenant.at(id_c);
  o.expect(second->outcome == anchor::RoundOutcome::Success, "round still Success");
  o.expect(c2.change == anchor::LeafChange::TimedOut, "stale tenant timed out");
  o.expect(c2.leaf && first->per_tenant.at(id_c).leaf && *c2.leaf == *first->per_tenant.at(id_c).leaf,
           "stale leaf unchanged");
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& r = second->per_tenant.at(p.tenant(i).chain->chain_id());
    o.expect(r.change == anchor::LeafChange::Updated, p.tenant(i).name + " updated");
  }
  auto audit = audit::audit_tenant(*stale.node, p.public_node());
  o.expect(audit.pass, "stale tenant audit passes");
  o.expect(audit.anchor_round == 2 && audit.verified_round == 1, "verified against its last stored tree");
  o.detail << "round 2 " << anchor::round_outcome_name(second->outcome) << ", tenant-c "
           << anchor::leaf_change_name(c2.change) << ", audit " << (audit.pass ? "Pass" : "Fail") << " (verified round "
           << audit.verified_round << ")";
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const char* name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " " << name << ": " << o.detail.str() << "\n"
              << std::flush;
    failures += o.pass ? 0 : 1;
  };

  bench::MetricsSeries full;
  double wall = 0;
  report(1, "throughput cap", throughput_cap(full, wall));
  report(2, "id creation rate", id_rate(full));
  report(3, "backlog drain", backlog_drain());
  report(4, "performance isolation", isolation());
  report(5, "anchor-load independence", anchor_independence());
  report(6, "anchoring cost", anchoring_cost());
  report(7, "lock and skip", skip_semantics());
  report(8, "audit soundness", audit_soundness());
  report(9, "merkle properties", merkle_properties());
  report(10, "timeout semantics", timeout_semantics());
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << "\n";
  return failures == 0 ? 0 : 1;
}
