#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "anchorsim/chain/chain.hpp"
#include "anchorsim/roots/leaf_record.hpp"

namespace anchorsim::audit {

using roots::Digest;

class NoAnchorYet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LeafResult { Match, Mismatch, LeafAbsent };
enum class RootResult { Match, Mismatch, TrieUnreadable };
enum class ProofResult { Valid, Invalid };

const char* leaf_result_name(LeafResult r);
const char* root_result_name(RootResult r);
const char* proof_result_name(ProofResult r);

struct LeafCheck {
  LeafResult result = LeafResult::LeafAbsent;
  /// State root recorded in the anchored leaf.
  std::optional<Digest> expected;
  /// State root recomputed by replaying the tenant chain.
  std::optional<Digest> found;
};

struct RootCheck {
  RootResult result = RootResult::TrieUnreadable;
  /// Root published on the public chain.
  std::optional<Digest> expected;
  /// Root of the tree stored on the tenant chain.
  std::optional<Digest> found;
};

struct AuditReport {
  Digest tenant;
  std::string tenant_name;
  /// Latest committed public round at audit time.
  std::uint64_t anchor_round = 0;
  /// Round whose stored tree was checked. Lower than anchor_round when the
  /// tenant missed the latest round's store (it was unreachable).
  std::uint64_t verified_round = 0;
  std::optional<roots::LeafRecord> leaf;
  LeafCheck leaf_check;
  RootCheck root_check;
  ProofResult proof_check = ProofResult::Invalid;
  /// Continuous audits only: the block anchored in the last passing audit
  /// still has the hash it was anchored with.
  bool history_consistent = true;
  bool pass = false;
  std::string reason;
};

/// Audits one tenant chain against the public anchors.
///
/// Reads the latest committed public anchor, the tree of roots the tenant
/// chain stores for that round (or the latest earlier round it holds),
/// compares the tree's root with the published root, replays the tenant chain
/// up to the block referenced by its leaf and compares the recomputed state
/// root with the anchored one, and checks an inclusion proof of the leaf
/// against the published root. Issues reads only.
///
/// Throws NoAnchorYet if nothing is committed on the public chain, and
/// ChainError(NodeUnavailable) if either node is unreachable.
AuditReport audit_tenant(const chain::ChainNode& tenant, const chain::ChainNode& public_chain);

/// Audits once per committed public anchor.
class ContinuousAuditor {
 public:
  ContinuousAuditor(const chain::ChainNode& tenant, const chain::ChainNode& public_chain, std::string name = {})
      : tenant_(&tenant), public_(&public_chain), name_(std::move(name)) {}

  /// Audits the latest committed anchor if its round was not audited yet.
  /// Also fails if a block anchored earlier was rewritten since. Unreachable
  /// nodes defer the audit to a later poll.
  std::optional<AuditReport> poll();
  const std::vector<AuditReport>& reports() const { return reports_; }

 private:
  const chain::ChainNode* tenant_;
  const chain::ChainNode* public_;
  std::string name_;
  std::set<std::uint64_t> audited_;
  std::optional<roots::LeafRecord> last_verified_;
  std::vector<AuditReport> reports_;
};

}  // namespace anchorsim::audit
