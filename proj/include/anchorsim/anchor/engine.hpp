#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "anchorsim/chain/chain.hpp"
#include "anchorsim/roots/leaf_record.hpp"
#include "anchorsim/roots/merkle_map.hpp"

namespace anchorsim::anchor {

using chain::AnchorRecord;
using roots::Digest;
using roots::LeafRecord;
using sim::Duration;
using sim::VirtualTime;

/// Latest AnchorRecord visible at the public chain's committed height.
std::optional<AnchorRecord> committed_anchor(const chain::ChainNode& public_node);
/// The committed AnchorRecord for a specific round, if any.
std::optional<AnchorRecord> committed_anchor_round(const chain::ChainNode& public_node, std::uint64_t round_id);

struct EngineConfig {
  Duration anchor_interval = std::chrono::minutes(10);
  /// Budget for one tenant head query; an unreachable node costs this much.
  Duration query_timeout = std::chrono::seconds(5);
  /// Round-trip time of a successful node query.
  Duration query_latency = std::chrono::milliseconds(50);
  /// Time from round start until an uncommitted public anchor fails the round.
  Duration public_commit_deadline = std::chrono::minutes(10);
  /// Highest gas price application writers use.
  std::uint64_t app_max_gas_price = 1;
  /// When set, anchor transactions bid app_max_gas_price + 1; otherwise they
  /// bid the application price and queue like any other write.
  bool prioritize_anchor = true;
  chain::AccountId anchor_account = chain::AccountId::derive("anchor", to_bytes("platform-owner"), 0);
};

struct TenantRegistration {
  Digest chain_id;
  chain::ChainNode* node = nullptr;
  /// Zero means "use the engine default".
  Duration query_timeout{0};
  std::string name;
};

class DuplicateTenant : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LeafChange { Added, Updated, Unchanged, TimedOut };
enum class RoundOutcome { InProgress, Success, Skipped, Failed };
enum class FailureReason {
  StateDiverged,
  PublicCommitTimeout,
  NoTenantsRegistered,
  PublicUnavailable,
  PublicTxRejected,
  TenantStoreRejected,
  TenantStoreTimeout,
};

const char* leaf_change_name(LeafChange c);
const char* round_outcome_name(RoundOutcome o);
const char* failure_reason_name(FailureReason r);

struct TenantRoundResult {
  std::string name;
  LeafChange change = LeafChange::Unchanged;
  /// The leaf in the round's tree (previous leaf when timed out, if any).
  std::optional<LeafRecord> leaf;
  /// Status of this round's StoreTrie write; empty if none was sent.
  std::optional<chain::TxState> store_tx;
};

struct RoundReport {
  /// Empty for skipped ticks; skips consume no round id.
  std::optional<std::uint64_t> round_id;
  VirtualTime started{0};
  VirtualTime finished{0};
  std::map<Digest, TenantRoundResult> per_tenant;
  std::optional<chain::TxState> public_tx;
  std::optional<AnchorRecord> record;
  RoundOutcome outcome = RoundOutcome::InProgress;
  std::optional<FailureReason> reason;

  Duration duration() const { return finished - started; }
  std::size_t public_transactions() const { return public_tx ? 1 : 0; }
};

struct TickResult {
  bool started = false;
  std::optional<std::uint64_t> round_id;
};

/// Runs anchoring rounds against one public chain and any number of tenant
/// chains.
///
/// A round: verify the latest committed public anchor against the maintained
/// tree; query every tenant head in parallel and upsert its leaf (unreachable
/// tenants keep their old leaf); publish the new root with the previous root
/// to the public chain and store the serialized tree on every reachable
/// tenant; finish when the public transaction commits and every store is
/// included. Rounds span virtual time, so the engine is a state machine:
/// `schedule_tick` starts a round and `advance` moves it along as blocks land.
///
/// The round lock is held from start until completion. A tick that finds it
/// held is recorded as Skipped and consumes no round id.
class AnchorEngine {
 public:
  AnchorEngine(EngineConfig config, chain::ChainNode& public_node);

  const EngineConfig& config() const { return config_; }

  /// Takes effect at the next round start. Throws DuplicateTenant.
  void register_tenant(TenantRegistration registration);
  std::size_t tenant_count() const;

  /// Attempts to take the round lock. Safe to call from several threads.
  TickResult schedule_tick(VirtualTime now);
  /// Progresses the in-flight round, if any, to `now`.
  void advance(VirtualTime now);
  /// Earliest time the in-flight round needs `advance` independent of
  /// block production (submission time or deadline).
  std::optional<VirtualTime> next_wakeup() const;
  bool round_in_progress() const { return lock_.load(); }

  /// Reflects committed public anchors only.
  std::optional<AnchorRecord> latest_anchor() const;
  /// Finished and skipped rounds in start order.
  std::vector<RoundReport> round_history() const;
  /// The tree of roots as of the last committed anchor.
  roots::MerkleMap tree() const;

  // Fault injection for audit and divergence tests.
  void tamper_tree(ByteView key, ByteView value);
  /// The next round publishes `root` instead of the real tree root.
  void fabricate_next_root(const Digest& root);

 private:
  struct InFlight {
    std::size_t report_index = 0;
    roots::MerkleMap tree;
    AnchorRecord record;
    VirtualTime submit_at{0};
    VirtualTime deadline{0};
    bool submitted = false;
    bool public_committed = false;
    std::optional<chain::TxHandle> public_handle;
    std::map<Digest, chain::TxHandle> store_handles;
  };
  struct Stash {
    AnchorRecord record;
    roots::MerkleMap tree;
  };

  void start_round(VirtualTime now);
  bool verify_public_state(RoundReport& report);
  void submit_round(VirtualTime now);
  void poll_round(VirtualTime now);
  void finish(VirtualTime now, RoundOutcome outcome, std::optional<FailureReason> reason);
  std::uint64_t take_nonce(const chain::ChainNode& node);
  std::uint64_t anchor_gas_price() const;

  EngineConfig config_;
  chain::ChainNode* public_node_;

  mutable std::mutex mu_;
  std::atomic<bool> lock_{false};
  std::vector<TenantRegistration> tenants_;
  std::vector<TenantRegistration> pending_tenants_;
  roots::MerkleMap committed_tree_;
  std::optional<AnchorRecord> committed_record_;
  std::optional<Stash> late_commit_;
  std::optional<Digest> fabricated_root_;
  std::map<Digest, std::uint64_t> nonces_;
  std::vector<RoundReport> history_;
  std::optional<InFlight> in_flight_;
};

}  // namespace anchorsim::anchor
