#include "anchorsim/audit/auditor.hpp"

#include "anchorsim/anchor/engine.hpp"
#include "anchorsim/chain/registry.hpp"

namespace anchorsim::audit {

namespace {

constexpr std::string_view kTrieRoundPrefix = "trie/round/";

// Highest stored round not above `limit`.
std::optional<std::pair<std::uint64_t, Bytes>> stored_tree(const chain::ChainNode& tenant, std::uint64_t limit) {
  if (auto exact = tenant.read_state(chain::registry::trie_round_key(limit))) return std::pair{limit, *exact};
  std::optional<std::pair<std::uint64_t, Bytes>> best;
  for (auto& [key, value] : tenant.read_prefix(to_bytes(kTrieRoundPrefix))) {
    auto digits = to_string(key).substr(kTrieRoundPrefix.size());
    std::uint64_t round = std::stoull(digits);
    if (round <= limit && (!best || round > best->first)) best = std::pair{round, std::move(value)};
  }
  return best;
}

}  // namespace

const char* leaf_result_name(LeafResult r) {
  switch (r) {
    case LeafResult::Match: return "Match";
    case LeafResult::Mismatch: return "Mismatch";
    case LeafResult::LeafAbsent: return "LeafAbsent";
  }
  return "?";
}

const char* root_result_name(RootResult r) {
  switch (r) {
    case RootResult::Match: return "Match";
    case RootResult::Mismatch: return "Mismatch";
    case RootResult::TrieUnreadable: return "TrieUnreadable";
  }
  return "?";
}

const char* proof_result_name(ProofResult r) { return r == ProofResult::Valid ? "Valid" : "Invalid"; }

AuditReport audit_tenant(const chain::ChainNode& tenant, const chain::ChainNode& public_chain) {
  auto latest = anchor::committed_anchor(public_chain);
  if (!latest) throw NoAnchorYet("no anchor committed on the public chain");

  AuditReport report;
  report.tenant = tenant.chain_id();
  report.tenant_name = tenant.config().name;
  report.anchor_round = latest->round_id;

  auto fail = [&](std::string why) {
    report.pass = false;
    if (report.reason.empty()) report.reason = std::move(why);
  };

  // The published root and the tree this tenant holds for the same round.
  auto stored = stored_tree(tenant, latest->round_id);
  if (!stored) {
    fail("no tree of roots stored on tenant chain");
    return report;
  }
  report.verified_round = stored->first;
  auto published = stored->first == latest->round_id ? latest : anchor::committed_anchor_round(public_chain, stored->first);
  if (!published) {
    fail("stored round has no committed public anchor");
    return report;
  }
  report.root_check.expected = published->root;

  roots::MerkleMap tree;
  try {
    tree = roots::MerkleMap::deserialize(stored->second);
  } catch (const roots::MerkleError&) {
    report.root_check.result = RootResult::TrieUnreadable;
    fail("stored tree of roots is not decodable");
    return report;
  }
  report.root_check.found = tree.root();
  report.root_check.result = *report.root_check.found == published->root ? RootResult::Match : RootResult::Mismatch;

  // The anchored leaf against a replay of the tenant chain.
  const Bytes* encoded_leaf = tree.find(tenant.chain_id().view());
  if (encoded_leaf == nullptr) {
    report.leaf_check.result = LeafResult::LeafAbsent;
  } else {
    try {
      auto leaf = roots::LeafRecord::decode(*encoded_leaf);
      report.leaf = leaf;
      report.leaf_check.expected = leaf.state_root;
      if (leaf.block_number > tenant.latest_block().height) {
        report.leaf_check.result = LeafResult::Mismatch;
      } else {
        const auto& header = tenant.get_block(leaf.block_number).header;
        auto replayed = tenant.state_at(leaf.block_number).root();
        report.leaf_check.found = replayed;
        bool ok = replayed == leaf.state_root && header.state_root == leaf.state_root && header.hash() == leaf.block_hash;
        report.leaf_check.result = ok ? LeafResult::Match : LeafResult::Mismatch;
      }
    } catch (const DecodeError&) {
      report.leaf_check.result = LeafResult::Mismatch;
    }
    auto proof = tree.prove(tenant.chain_id().view());
    report.proof_check = roots::verify_proof(proof, published->root) ? ProofResult::Valid : ProofResult::Invalid;
  }

  report.pass = report.leaf_check.result == LeafResult::Match && report.root_check.result == RootResult::Match &&
                report.proof_check == ProofResult::Valid;
  if (!report.pass) {
    if (report.root_check.result != RootResult::Match) {
      fail(std::string("root check: ") + root_result_name(report.root_check.result));
    } else if (report.leaf_check.result != LeafResult::Match) {
      fail(std::string("leaf check: ") + leaf_result_name(report.leaf_check.result));
    } else {
      fail("inclusion proof invalid");
    }
  }
  return report;
}

std::optional<AuditReport> ContinuousAuditor::poll() {
  try {
    auto latest = anchor::committed_anchor(*public_);
    if (!latest || audited_.contains(latest->round_id)) return std::nullopt;
    auto report = audit_tenant(*tenant_, *public_);
    if (!name_.empty()) report.tenant_name = name_;
    if (last_verified_ && tenant_->latest_block().height >= last_verified_->block_number) {
      const auto& then = *last_verified_;
      report.history_consistent = tenant_->get_block(then.block_number).header.hash() == then.block_hash;
    } else if (last_verified_) {
      report.history_consistent = false;
    }
    if (!report.history_consistent && report.pass) {
      report.pass = false;
      report.reason = "block " + std::to_string(last_verified_->block_number) + " changed since it was anchored";
    }
    if (report.pass) last_verified_ = report.leaf;
    audited_.insert(latest->round_id);
    reports_.push_back(report);
    return report;
  } catch (const chain::ChainError& e) {
    if (e.code() == chain::ChainErrc::NodeUnavailable) return std::nullopt;
    throw;
  }
}

}  // namespace anchorsim::audit
