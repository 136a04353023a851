#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "anchorsim/bytes.hpp"
#include "anchorsim/roots/digest.hpp"
#include "anchorsim/sim/simulator.hpp"

namespace anchorsim::chain {

using roots::Digest;
using sim::Duration;
using sim::VirtualTime;

/// 20-byte account identifier.
class AccountId {
 public:
  static constexpr std::size_t kSize = 20;

  constexpr AccountId() = default;
  explicit AccountId(const std::array<std::uint8_t, kSize>& b) : bytes_(b) {}

  /// First 20 bytes of H(label || seed || u32 index).
  static AccountId derive(std::string_view label, ByteView seed, std::uint32_t index);
  static AccountId from_hex(std::string_view hex);

  ByteView view() const { return ByteView(bytes_.data(), bytes_.size()); }
  std::string hex() const { return to_hex(view()); }

  friend auto operator<=>(const AccountId&, const AccountId&) = default;

 private:
  std::array<std::uint8_t, kSize> bytes_{};
};

/// The public-chain anchor payload. `previous_root` links each record to the
/// one before it; the first record links to the empty-map root.
struct AnchorRecord {
  Digest root;
  Digest previous_root;
  std::uint64_t round_id = 0;
  VirtualTime anchored_at{0};

  /// root || previous_root || u64 round_id || i64 anchored_at_ms (80 bytes).
  Bytes encode() const;
  static AnchorRecord decode(ByteView data);

  friend bool operator==(const AnchorRecord&, const AnchorRecord&) = default;
};

struct RegisterUniqueIds {
  std::vector<Bytes> ids;
  friend bool operator==(const RegisterUniqueIds&, const RegisterUniqueIds&) = default;
};

struct RecordScan {
  Bytes unique_id;
  VirtualTime scanned_at{0};
  Bytes meta;
  friend bool operator==(const RecordScan&, const RecordScan&) = default;
};

/// Writes a serialized tree of roots into the tenant chain's pre-deployed
/// storage slot for `round_id`.
struct StoreTrie {
  std::uint64_t round_id = 0;
  Bytes serialized;
  friend bool operator==(const StoreTrie&, const StoreTrie&) = default;
};

struct PublicAnchor {
  AnchorRecord record;
  friend bool operator==(const PublicAnchor&, const PublicAnchor&) = default;
};

using Payload = std::variant<RegisterUniqueIds, RecordScan, StoreTrie, PublicAnchor>;

const char* payload_name(const Payload& p);

struct Transaction {
  AccountId sender;
  std::uint64_t nonce = 0;
  std::uint64_t gas_price = 1;
  std::uint64_t gas_cost = 0;
  Payload payload;
  VirtualTime submitted_at{0};

  /// Canonical encoding used for the transaction root. Pool metadata
  /// (submitted_at) is not part of it.
  Bytes encode() const;
};

struct BlockHeader {
  std::uint64_t height = 0;
  Digest parent_hash;
  VirtualTime timestamp{0};
  Digest state_root;
  Digest tx_root;
  AccountId producer;

  /// u64 height || parent || i64 timestamp_ms || state_root || tx_root || producer (132 bytes).
  Bytes encode() const;
  Digest hash() const;

  friend bool operator==(const BlockHeader&, const BlockHeader&) = default;
};

struct Block {
  BlockHeader header;
  std::vector<Transaction> transactions;
  /// Pool sequence numbers, parallel to `transactions`.
  std::vector<std::uint64_t> tx_seqs;
  std::uint64_t gas_used = 0;
};

/// Per-payload gas charged by the writers that build transactions.
struct GasSchedule {
  std::uint64_t register_batch = 1'050'000;
  std::uint64_t record_scan = 50'000;
  std::uint64_t store_trie = 200'000;
  std::uint64_t public_anchor = 60'000;

  std::uint64_t cost_of(const Payload& p) const;
};

struct ChainConfig {
  std::string name = "chain";
  /// Seed for derived identities (authorities, writers). Different seeds give
  /// different genesis producers and therefore different chain ids.
  Bytes seed;
  VirtualTime genesis_time{0};
  Duration inter_block_time{5000};
  std::uint64_t gas_limit = 80'000'000;
  std::vector<AccountId> authorities;
  std::uint32_t confirmations_required = 1;
  /// Public chains keep producing blocks without pending transactions.
  bool produce_empty_blocks = false;
  GasSchedule gas;

  /// Fills `authorities` with `n` accounts derived from `seed`.
  ChainConfig& with_authorities(std::uint32_t n);
};

enum class TxState { Pending, Included, Committed, Failed };

const char* tx_state_name(TxState s);

struct TxStatus {
  TxState state = TxState::Pending;
  std::optional<std::uint64_t> height;
  std::optional<VirtualTime> included_at;
  VirtualTime submitted_at{0};
  std::string failure;
};

struct TxHandle {
  Digest chain_id;
  std::uint64_t seq = 0;

  friend bool operator==(const TxHandle&, const TxHandle&) = default;
};

}  // namespace anchorsim::chain
