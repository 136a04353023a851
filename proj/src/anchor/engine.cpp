#include "anchorsim/anchor/engine.hpp"

#include <algorithm>
#include <future>

namespace anchorsim::anchor {

using chain::ChainError;
using chain::ChainErrc;
using chain::TxState;

std::optional<AnchorRecord> committed_anchor(const chain::ChainNode& public_node) {
  auto value = public_node.read_state(chain::registry::anchor_latest_key(), public_node.committed_height());
  if (!value) return std::nullopt;
  return AnchorRecord::decode(*value);
}

std::optional<AnchorRecord> committed_anchor_round(const chain::ChainNode& public_node, std::uint64_t round_id) {
  auto value = public_node.read_state(chain::registry::anchor_round_key(round_id), public_node.committed_height());
  if (!value) return std::nullopt;
  return AnchorRecord::decode(*value);
}

const char* leaf_change_name(LeafChange c) {
  switch (c) {
    case LeafChange::Added: return "Added";
    case LeafChange::Updated: return "Updated";
    case LeafChange::Unchanged: return "Unchanged";
    case LeafChange::TimedOut: return "TimedOut";
  }
  return "?";
}

const char* round_outcome_name(RoundOutcome o) {
  switch (o) {
    case RoundOutcome::InProgress: return "InProgress";
    case RoundOutcome::Success: return "Success";
    case RoundOutcome::Skipped: return "Skipped";
    case RoundOutcome::Failed: return "Failed";
  }
  return "?";
}

const char* failure_reason_name(FailureReason r) {
  switch (r) {
    case FailureReason::StateDiverged: return "StateDiverged";
    case FailureReason::PublicCommitTimeout: return "PublicCommitTimeout";
    case FailureReason::NoTenantsRegistered: return "NoTenantsRegistered";
    case FailureReason::PublicUnavailable: return "PublicUnavailable";
    case FailureReason::PublicTxRejected: return "PublicTxRejected";
    case FailureReason::TenantStoreRejected: return "TenantStoreRejected";
    case FailureReason::TenantStoreTimeout: return "TenantStoreTimeout";
  }
  return "?";
}

AnchorEngine::AnchorEngine(EngineConfig config, chain::ChainNode& public_node)
    : config_(std::move(config)), public_node_(&public_node) {}

void AnchorEngine::register_tenant(TenantRegistration registration) {
  if (registration.node == nullptr) throw std::invalid_argument("tenant registration without a node");
  std::lock_guard guard(mu_);
  auto same = [&](const TenantRegistration& t) { return t.chain_id == registration.chain_id; };
  if (std::any_of(tenants_.begin(), tenants_.end(), same) ||
      std::any_of(pending_tenants_.begin(), pending_tenants_.end(), same)) {
    throw DuplicateTenant("tenant chain " + registration.chain_id.hex() + " is already registered");
  }
  if (registration.query_timeout <= Duration::zero()) registration.query_timeout = config_.query_timeout;
  pending_tenants_.push_back(std::move(registration));
}

std::size_t AnchorEngine::tenant_count() const {
  std::lock_guard guard(mu_);
  return tenants_.size() + pending_tenants_.size();
}

TickResult AnchorEngine::schedule_tick(VirtualTime now) {
  bool expected = false;
  if (!lock_.compare_exchange_strong(expected, true)) {
    std::lock_guard guard(mu_);
    RoundReport skipped;
    skipped.started = now;
    skipped.finished = now;
    skipped.outcome = RoundOutcome::Skipped;
    history_.push_back(std::move(skipped));
    return TickResult{false, std::nullopt};
  }
  std::lock_guard guard(mu_);
  start_round(now);
  std::optional<std::uint64_t> id;
  if (!history_.empty()) id = history_.back().round_id;
  if (in_flight_) id = history_[in_flight_->report_index].round_id;
  return TickResult{true, id};
}

std::uint64_t AnchorEngine::anchor_gas_price() const {
  return config_.prioritize_anchor ? config_.app_max_gas_price + 1 : config_.app_max_gas_price;
}

// Step 1: the engine's view must match the latest committed public anchor.
// A public anchor from a round that previously timed out may have landed
// late; if it matches the stashed tree, adopt it.
bool AnchorEngine::verify_public_state(RoundReport& report) {
  std::optional<AnchorRecord> published;
  try {
    published = committed_anchor(*public_node_);
  } catch (const ChainError& e) {
    if (e.code() != ChainErrc::NodeUnavailable) throw;
    report.outcome = RoundOutcome::Failed;
    report.reason = FailureReason::PublicUnavailable;
    return false;
  }

  if (published && published != committed_record_ && late_commit_ && late_commit_->record == *published &&
      late_commit_->tree.root() == published->root) {
    committed_tree_ = std::move(late_commit_->tree);
    committed_record_ = published;
    late_commit_.reset();
  }

  const Digest expected = published ? published->root : roots::empty_root();
  if (published != committed_record_ || committed_tree_.root() != expected) {
    report.outcome = RoundOutcome::Failed;
    report.reason = FailureReason::StateDiverged;
    return false;
  }
  return true;
}

void AnchorEngine::start_round(VirtualTime now) {
  for (auto& t : pending_tenants_) tenants_.push_back(std::move(t));
  pending_tenants_.clear();

  RoundReport report;
  report.started = now;
  report.finished = now;
  report.round_id = committed_record_ ? committed_record_->round_id + 1 : 1;

  auto fail_now = [&](FailureReason reason) {
    report.outcome = RoundOutcome::Failed;
    report.reason = reason;
    history_.push_back(std::move(report));
    lock_.store(false);
  };

  if (tenants_.empty()) return fail_now(FailureReason::NoTenantsRegistered);
  if (!verify_public_state(report)) {
    history_.push_back(std::move(report));
    lock_.store(false);
    return;
  }
  // The adopted late commit may have advanced the round counter.
  report.round_id = committed_record_ ? committed_record_->round_id + 1 : 1;

  // Step 2: head queries run concurrently; each returns its header or times out.
  std::vector<std::future<std::optional<chain::BlockHeader>>> queries;
  queries.reserve(tenants_.size());
  for (const auto& t : tenants_) {
    queries.push_back(std::async(std::launch::async, [node = t.node]() -> std::optional<chain::BlockHeader> {
      try {
        return node->latest_block();
      } catch (const ChainError& e) {
        if (e.code() != ChainErrc::NodeUnavailable) throw;
        return std::nullopt;
      }
    }));
  }

  InFlight flight;
  flight.tree = committed_tree_;
  Duration slowest = Duration::zero();
  for (std::size_t i = 0; i < tenants_.size(); ++i) {
    const auto& t = tenants_[i];
    auto head = queries[i].get();
    TenantRoundResult result;
    result.name = t.name;
    const Bytes* existing = flight.tree.find(t.chain_id.view());
    if (!head) {
      slowest = std::max(slowest, t.query_timeout);
      result.change = LeafChange::TimedOut;
      if (existing) result.leaf = LeafRecord::decode(*existing);
    } else {
      slowest = std::max(slowest, config_.query_latency);
      LeafRecord leaf{head->state_root, head->height, head->hash()};
      auto encoded = leaf.encode();
      if (!existing) {
        result.change = LeafChange::Added;
      } else if (*existing != encoded) {
        result.change = LeafChange::Updated;
      } else {
        result.change = LeafChange::Unchanged;
      }
      flight.tree.insert(t.chain_id.view(), encoded);
      result.leaf = leaf;
    }
    report.per_tenant.emplace(t.chain_id, std::move(result));
  }

  // Step 3.
  flight.record.root = flight.tree.root();
  if (fabricated_root_) {
    flight.record.root = *fabricated_root_;
    fabricated_root_.reset();
  }
  flight.record.previous_root = committed_record_ ? committed_record_->root : roots::empty_root();
  flight.record.round_id = *report.round_id;
  flight.submit_at = now + config_.query_latency + slowest;
  flight.record.anchored_at = flight.submit_at;
  flight.deadline = now + config_.public_commit_deadline;
  report.record = flight.record;

  flight.report_index = history_.size();
  history_.push_back(std::move(report));
  in_flight_ = std::move(flight);
  if (now >= in_flight_->submit_at) submit_round(now);
}

std::uint64_t AnchorEngine::take_nonce(const chain::ChainNode& node) {
  auto it = nonces_.find(node.chain_id());
  if (it == nonces_.end()) it = nonces_.emplace(node.chain_id(), node.account_nonce(config_.anchor_account)).first;
  return it->second;
}

// Step 4: one public anchor, one StoreTrie per reachable tenant, sent together.
void AnchorEngine::submit_round(VirtualTime now) {
  auto& flight = *in_flight_;
  auto& report = history_[flight.report_index];
  flight.submitted = true;

  try {
    chain::Transaction tx;
    tx.sender = config_.anchor_account;
    tx.nonce = take_nonce(*public_node_);
    tx.gas_price = anchor_gas_price();
    tx.payload = chain::PublicAnchor{flight.record};
    tx.gas_cost = public_node_->config().gas.cost_of(tx.payload);
    tx.submitted_at = now;
    flight.public_handle = public_node_->submit(std::move(tx));
    ++nonces_[public_node_->chain_id()];
    report.public_tx = TxState::Pending;
  } catch (const ChainError& e) {
    if (e.code() != ChainErrc::NodeUnavailable) throw;
    return finish(now, RoundOutcome::Failed, FailureReason::PublicUnavailable);
  }

  const Bytes serialized = flight.tree.serialize();
  for (const auto& t : tenants_) {
    auto& result = report.per_tenant.at(t.chain_id);
    if (result.change == LeafChange::TimedOut) continue;
    try {
      chain::Transaction tx;
      tx.sender = config_.anchor_account;
      tx.nonce = take_nonce(*t.node);
      tx.gas_price = anchor_gas_price();
      tx.payload = chain::StoreTrie{flight.record.round_id, serialized};
      tx.gas_cost = t.node->config().gas.cost_of(tx.payload);
      tx.submitted_at = now;
      flight.store_handles.emplace(t.chain_id, t.node->submit(std::move(tx)));
      ++nonces_[t.chain_id];
      result.store_tx = TxState::Pending;
    } catch (const ChainError& e) {
      if (e.code() != ChainErrc::NodeUnavailable) throw;
      // Went away between query and write: treated like a timeout this round.
    }
  }
  poll_round(now);
}

void AnchorEngine::poll_round(VirtualTime now) {
  auto& flight = *in_flight_;
  auto& report = history_[flight.report_index];

  if (!flight.public_committed) {
    try {
      auto status = public_node_->commit_status(*flight.public_handle);
      report.public_tx = status.state;
      if (status.state == TxState::Failed) {
        return finish(now, RoundOutcome::Failed, FailureReason::PublicTxRejected);
      }
      if (status.state == TxState::Committed) {
        flight.public_committed = true;
        committed_tree_ = flight.tree;
        committed_record_ = flight.record;
        late_commit_.reset();
      }
    } catch (const ChainError& e) {
      if (e.code() != ChainErrc::NodeUnavailable) throw;
    }
  }

  bool stores_done = true;
  bool store_failed = false;
  for (const auto& t : tenants_) {
    auto it = flight.store_handles.find(t.chain_id);
    if (it == flight.store_handles.end()) continue;
    auto& result = report.per_tenant.at(t.chain_id);
    if (result.store_tx && *result.store_tx != TxState::Pending) {
      store_failed |= *result.store_tx == TxState::Failed;
      continue;
    }
    try {
      auto status = t.node->commit_status(it->second);
      result.store_tx = status.state;
      if (status.state == TxState::Pending) stores_done = false;
      store_failed |= status.state == TxState::Failed;
    } catch (const ChainError& e) {
      if (e.code() != ChainErrc::NodeUnavailable) throw;
      stores_done = false;
    }
  }

  if (flight.public_committed && stores_done) {
    if (store_failed) return finish(now, RoundOutcome::Failed, FailureReason::TenantStoreRejected);
    return finish(now, RoundOutcome::Success, std::nullopt);
  }
  if (now >= flight.deadline) {
    if (!flight.public_committed) {
      // Roll back: the committed tree never moved. Keep the attempt in case
      // the transaction still lands.
      late_commit_ = Stash{flight.record, flight.tree};
      return finish(now, RoundOutcome::Failed, FailureReason::PublicCommitTimeout);
    }
    return finish(now, RoundOutcome::Failed, FailureReason::TenantStoreTimeout);
  }
}

void AnchorEngine::finish(VirtualTime now, RoundOutcome outcome, std::optional<FailureReason> reason) {
  auto& report = history_[in_flight_->report_index];
  report.finished = now;
  report.outcome = outcome;
  report.reason = reason;
  in_flight_.reset();
  lock_.store(false);
}

void AnchorEngine::advance(VirtualTime now) {
  std::lock_guard guard(mu_);
  if (!in_flight_) return;
  if (!in_flight_->submitted) {
    if (now < in_flight_->submit_at) return;
    submit_round(now);
    return;
  }
  poll_round(now);
}

std::optional<VirtualTime> AnchorEngine::next_wakeup() const {
  std::lock_guard guard(mu_);
  if (!in_flight_) return std::nullopt;
  return in_flight_->submitted ? in_flight_->deadline : in_flight_->submit_at;
}

std::optional<AnchorRecord> AnchorEngine::latest_anchor() const {
  std::lock_guard guard(mu_);
  return committed_record_;
}

std::vector<RoundReport> AnchorEngine::round_history() const {
  std::lock_guard guard(mu_);
  std::vector<RoundReport> out;
  out.reserve(history_.size());
  for (const auto& r : history_) {
    if (r.outcome != RoundOutcome::InProgress) out.push_back(r);
  }
  return out;
}

roots::MerkleMap AnchorEngine::tree() const {
  std::lock_guard guard(mu_);
  return committed_tree_;
}

void AnchorEngine::tamper_tree(ByteView key, ByteView value) {
  std::lock_guard guard(mu_);
  committed_tree_.insert(key, value);
}

void AnchorEngine::fabricate_next_root(const Digest& root) {
  std::lock_guard guard(mu_);
  fabricated_root_ = root;
}

}  // namespace anchorsim::anchor
