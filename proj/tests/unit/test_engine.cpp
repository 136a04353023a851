#include <doctest.h>

#include <atomic>
#include <thread>

#include "anchorsim/platform/platform.hpp"

using namespace anchorsim;
using namespace anchorsim::anchor;
using namespace std::chrono_literals;
using platform::Platform;

namespace {

platform::PlatformConfig manual_config(int tenants) {
  platform::PlatformConfig cfg;
  for (int i = 0; i < tenants; ++i) cfg.tenants.push_back(platform::default_tenant_chain("t" + std::to_string(i)));
  // Ticks are driven by hand.
  cfg.engine.anchor_interval = std::chrono::hours(24);
  cfg.auditing = false;
  return cfg;
}

void tick_at(Platform& p, sim::VirtualTime at) {
  p.run_until(at);
  p.tick();
}

int ids_written = 0;

void write_batch(Platform& p, std::size_t tenant) {
  std::vector<Bytes> ids;
  for (int i = 0; i < 20; ++i) ids.push_back(to_bytes("engine-id-" + std::to_string(ids_written++)));
  p.gateway().create_unique_ids(platform::kWriterToken, p.tenant(tenant).name, ids);
}

std::size_t count_payloads(const chain::Chain& c, std::size_t variant_index) {
  std::size_t n = 0;
  for (std::uint64_t h = 1; h <= c.height(); ++h) {
    for (const auto& tx : c.get_block(h).transactions) n += tx.payload.index() == variant_index ? 1 : 0;
  }
  return n;
}

constexpr std::size_t kStoreTrie = 2;
constexpr std::size_t kPublicAnchor = 3;

}  // namespace

TEST_CASE("one round with three reachable tenants") {
  Platform p(manual_config(3));
  CHECK_FALSE(p.engine().latest_anchor().has_value());
  tick_at(p, 1s);
  CHECK(p.engine().round_in_progress());
  p.run_until(60s);

  auto history = p.engine().round_history();
  REQUIRE(history.size() == 1);
  const auto& r = history[0];
  CHECK(r.outcome == RoundOutcome::Success);
  CHECK(r.round_id == 1u);
  CHECK(r.public_transactions() == 1);
  REQUIRE(r.per_tenant.size() == 3);
  for (const auto& [id, t] : r.per_tenant) {
    CHECK(t.change == LeafChange::Added);
    CHECK(t.store_tx == chain::TxState::Committed);
  }

  auto latest = p.engine().latest_anchor();
  REQUIRE(latest);
  CHECK(latest->round_id == 1);
  CHECK(latest->previous_root == roots::empty_root());
  CHECK(latest->root == p.engine().tree().root());
  CHECK(p.engine().tree().size() == 3);
  CHECK(committed_anchor(p.public_node()) == latest);

  CHECK(count_payloads(p.public_chain(), kPublicAnchor) == 1);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& chain = *p.tenant(i).chain;
    CHECK(count_payloads(chain, kStoreTrie) == 1);
    auto stored = chain.read_state(chain::registry::trie_latest_key());
    REQUIRE(stored);
    CHECK(roots::MerkleMap::deserialize(*stored).root() == latest->root);
    CHECK(chain.read_state(chain::registry::trie_round_key(1)) == stored);
  }
}

TEST_CASE("anchor round reports are deterministic in virtual time") {
  Platform p(manual_config(2));
  tick_at(p, 1s);
  p.run_until(60s);
  auto r = p.engine().round_history().at(0);
  // Anchor query plus parallel head queries, then included at 15 s and
  // committed one public block later.
  CHECK(r.record->anchored_at == 1100ms);
  CHECK(r.finished == 30s);
  CHECK(r.duration() == 29s);
}

TEST_CASE("registration") {
  Platform p(manual_config(0));
  chain::Chain extra(platform::default_tenant_chain("late"));
  chain::ChainNode node(extra);

  SUBCASE("no tenants fails the round") {
    tick_at(p, 1s);
    auto h = p.engine().round_history();
    REQUIRE(h.size() == 1);
    CHECK(h[0].outcome == RoundOutcome::Failed);
    CHECK(h[0].reason == FailureReason::NoTenantsRegistered);
    CHECK(h[0].public_transactions() == 0);
    CHECK_FALSE(p.engine().round_in_progress());
  }
  SUBCASE("duplicate chain id is rejected") {
    p.engine().register_tenant({extra.chain_id(), &node, 0ms, "late"});
    CHECK(p.engine().tenant_count() == 1);
    CHECK_THROWS_AS(p.engine().register_tenant({extra.chain_id(), &node, 0ms, "again"}), DuplicateTenant);
    CHECK(p.engine().tenant_count() == 1);
  }
  SUBCASE("ten tenants give ten leaves") {
    std::vector<std::unique_ptr<chain::Chain>> chains;
    std::vector<std::unique_ptr<chain::ChainNode>> nodes;
    for (int i = 0; i < 10; ++i) {
      chains.push_back(std::make_unique<chain::Chain>(platform::default_tenant_chain("ten-" + std::to_string(i))));
      nodes.push_back(std::make_unique<chain::ChainNode>(*chains.back()));
      p.engine().register_tenant({chains.back()->chain_id(), nodes.back().get(), 0ms, chains.back()->config().name});
    }
    tick_at(p, 1s);
    // Stores land on chains the platform does not drive; produce them by hand.
    p.run_until(10s);
    for (auto& c : chains) c->produce_block(10s);
    p.run_until(60s);
    auto h = p.engine().round_history();
    REQUIRE(h.size() == 1);
    CHECK(h[0].outcome == RoundOutcome::Success);
    CHECK(h[0].per_tenant.size() == 10);
    CHECK(p.engine().tree().size() == 10);
  }
}

TEST_CASE("registration during a round takes effect at the next round") {
  Platform p(manual_config(1));
  chain::Chain extra(platform::default_tenant_chain("late"));
  chain::ChainNode node(extra);
  tick_at(p, 1s);
  p.run_until(2s);
  p.engine().register_tenant({extra.chain_id(), &node, 0ms, "late"});
  p.run_until(60s);
  CHECK(p.engine().round_history().at(0).per_tenant.size() == 1);
  tick_at(p, 61s);
  p.run_until(70s);
  extra.produce_block(70s);
  p.run_until(120s);
  auto r = p.engine().round_history().at(1);
  CHECK(r.outcome == RoundOutcome::Success);
  CHECK(r.per_tenant.at(extra.chain_id()).change == LeafChange::Added);
}

TEST_CASE("an unreachable tenant keeps its previous leaf") {
  Platform p(manual_config(3));
  tick_at(p, 1s);
  p.run_until(60s);
  auto first = p.engine().round_history().at(0);
  REQUIRE(first.outcome == RoundOutcome::Success);

  for (std::size_t i = 0; i < 3; ++i) write_batch(p, i);
  p.run_until(70s);
  auto& down = p.tenant(1);
  down.node->fail_over(chain::Availability::Unreachable);
  tick_at(p, 71s);
  p.run_until(130s);
  down.node->fail_over(chain::Availability::Restored);

  auto second = p.engine().round_history().at(1);
  CHECK(second.outcome == RoundOutcome::Success);
  auto down_id = down.chain->chain_id();
  const auto& stale = second.per_tenant.at(down_id);
  CHECK(stale.change == LeafChange::TimedOut);
  CHECK_FALSE(stale.store_tx.has_value());
  CHECK(stale.leaf == first.per_tenant.at(down_id).leaf);
  CHECK(*p.engine().tree().find(down_id.view()) == first.per_tenant.at(down_id).leaf->encode());
  for (std::size_t i : {0u, 2u}) {
    CHECK(second.per_tenant.at(p.tenant(i).chain->chain_id()).change == LeafChange::Updated);
  }
  // The unreachable tenant still holds round 1's tree.
  CHECK_FALSE(down.chain->read_state(chain::registry::trie_round_key(2)).has_value());
  CHECK(down.chain->read_state(chain::registry::trie_round_key(1)).has_value());
  // Submission waits out the query timeout.
  CHECK(second.record->anchored_at == 71s + 50ms + 5s);
}

TEST_CASE("a tampered engine tree diverges from the public anchor") {
  Platform p(manual_config(2));
  tick_at(p, 1s);
  p.run_until(60s);
  auto key = p.tenant(0).chain->chain_id();
  auto leaf = *p.engine().tree().find(key.view());
  leaf[0] ^= 0x01;
  p.engine().tamper_tree(key.view(), leaf);
  tick_at(p, 61s);
  auto h = p.engine().round_history();
  REQUIRE(h.size() == 2);
  CHECK(h[1].outcome == RoundOutcome::Failed);
  CHECK(h[1].reason == FailureReason::StateDiverged);
  CHECK(h[1].public_transactions() == 0);
  CHECK_FALSE(p.engine().round_in_progress());
}

TEST_CASE("unchanged tenant heads keep the root") {
  Platform p(manual_config(2));
  tick_at(p, 1s);
  p.run_until(60s);
  // Every reachable tenant's head moves with its StoreTrie, so identical
  // consecutive states only arise when no head can be read.
  for (std::size_t i = 0; i < 2; ++i) p.tenant(i).node->fail_over(chain::Availability::Unreachable);
  tick_at(p, 61s);
  p.run_until(120s);
  auto h = p.engine().round_history();
  REQUIRE(h.size() == 2);
  CHECK(h[1].outcome == RoundOutcome::Success);
  CHECK(h[1].record->root == h[0].record->root);
  CHECK(h[1].record->previous_root == h[1].record->root);
}

TEST_CASE("ticks during an active round are skipped") {
  auto cfg = manual_config(1);
  cfg.engine.anchor_interval = 5s;
  cfg.first_tick = 5s;
  Platform p(cfg);
  p.run_until(300s);

  auto h = p.engine().round_history();
  int max_run = 0, run = 0;
  std::uint64_t expected_round = 1;
  for (const auto& r : h) {
    if (r.outcome == RoundOutcome::Skipped) {
      CHECK_FALSE(r.round_id.has_value());
      CHECK(r.public_transactions() == 0);
      max_run = std::max(max_run, ++run);
    } else {
      run = 0;
      CHECK(r.outcome == RoundOutcome::Success);
      CHECK(r.round_id == expected_round++);
      CHECK(r.duration() >= 15s);
    }
  }
  CHECK(max_run >= 4);
  // Successful rounds never overlap.
  std::optional<sim::VirtualTime> prev_end;
  for (const auto& r : h) {
    if (r.outcome != RoundOutcome::Success) continue;
    if (prev_end) CHECK(r.started >= *prev_end);
    prev_end = r.finished;
  }
}

TEST_CASE("simultaneous ticks start exactly one round") {
  Platform p(manual_config(1));
  p.run_until(1s);
  auto a = p.tick();
  auto b = p.tick();
  CHECK(a.started);
  CHECK(a.round_id == 1u);
  CHECK_FALSE(b.started);
  CHECK_FALSE(b.round_id.has_value());
}

TEST_CASE("concurrent ticks from many threads") {
  Platform p(manual_config(2));
  p.run_until(1s);
  std::atomic<int> started{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      if (p.engine().schedule_tick(1s).started) ++started;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(started == 1);
  auto h = p.engine().round_history();
  CHECK(h.size() == 7);
  for (const auto& r : h) CHECK(r.outcome == RoundOutcome::Skipped);
}

TEST_CASE("history after success, skip, success") {
  Platform p(manual_config(1));
  tick_at(p, 1s);
  tick_at(p, 2s);
  p.run_until(60s);
  tick_at(p, 61s);
  p.run_until(120s);
  auto h = p.engine().round_history();
  REQUIRE(h.size() == 3);
  CHECK(h[0].outcome == RoundOutcome::Success);
  CHECK(h[1].outcome == RoundOutcome::Skipped);
  CHECK(h[2].outcome == RoundOutcome::Success);
  CHECK(p.engine().latest_anchor()->round_id == 2);
  CHECK(h[2].record->previous_root == h[0].record->root);
}

TEST_CASE("public commit timeout rolls back and a late commit is adopted") {
  auto cfg = manual_config(1);
  cfg.engine.public_commit_deadline = 20s;
  Platform p(cfg);
  tick_at(p, 1s);
  p.run_until(2s);
  p.public_node().fail_over(chain::Availability::Unreachable);
  p.run_until(40s);
  auto h = p.engine().round_history();
  REQUIRE(h.size() == 1);
  CHECK(h[0].outcome == RoundOutcome::Failed);
  CHECK(h[0].reason == FailureReason::PublicCommitTimeout);
  CHECK(h[0].finished == 21s);
  CHECK_FALSE(p.engine().latest_anchor().has_value());
  CHECK(p.engine().tree().size() == 0);
  CHECK_FALSE(p.engine().round_in_progress());

  // The anchor transaction still landed on the public chain.
  p.public_node().fail_over(chain::Availability::Restored);
  tick_at(p, 41s);
  p.run_until(100s);
  h = p.engine().round_history();
  REQUIRE(h.size() == 2);
  CHECK(h[1].outcome == RoundOutcome::Success);
  CHECK(h[1].round_id == 2u);
  CHECK(h[1].record->previous_root == h[0].record->root);
}

TEST_CASE("public node down at round start fails without sending") {
  Platform p(manual_config(1));
  p.public_node().fail_over(chain::Availability::Unreachable);
  tick_at(p, 1s);
  auto h = p.engine().round_history();
  REQUIRE(h.size() == 1);
  CHECK(h[0].reason == FailureReason::PublicUnavailable);
  CHECK(p.tenant(0).chain->pending_count() == 0);
}

TEST_CASE("anchor transactions outbid application writes") {
  auto cfg = manual_config(1);
  cfg.engine.app_max_gas_price = 7;
  Platform p(cfg);
  tick_at(p, 1s);
  p.run_until(20s);
  const auto& public_txs = p.public_chain().get_block(1).transactions;
  REQUIRE(public_txs.size() == 1);
  CHECK(public_txs[0].gas_price == 8);
  CHECK(public_txs[0].sender == cfg.engine.anchor_account);
  const auto& store_txs = p.tenant(0).chain->get_block(1).transactions;
  REQUIRE(store_txs.size() == 1);
  CHECK(store_txs[0].gas_price == 8);
}

TEST_CASE("the chain of previous roots is unbroken") {
  auto cfg = manual_config(2);
  cfg.engine.anchor_interval = 45s;
  cfg.first_tick = 1s;
  Platform p(cfg);
  for (int minute = 0; minute < 5; ++minute) {
    p.run_until(std::chrono::minutes(minute) + 3s);
    write_batch(p, static_cast<std::size_t>(minute % 2));
  }
  p.run_until(std::chrono::minutes(8));
  std::optional<AnchorRecord> prev;
  int successes = 0;
  for (const auto& r : p.engine().round_history()) {
    if (r.outcome != RoundOutcome::Success) continue;
    ++successes;
    auto on_chain = committed_anchor_round(p.public_node(), *r.round_id);
    REQUIRE(on_chain);
    CHECK(*on_chain == *r.record);
    CHECK(on_chain->previous_root == (prev ? prev->root : roots::empty_root()));
    prev = on_chain;
  }
  CHECK(successes >= 5);
}
