#pragma once

#include <atomic>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "anchorsim/chain/registry.hpp"
#include "anchorsim/chain/types.hpp"
#include "anchorsim/roots/merkle_map.hpp"

namespace anchorsim::chain {

enum class ChainErrc {
  InvalidConfig,
  GasExceedsLimit,
  NonceConflict,
  UnknownHeight,
  UnknownHandle,
  NodeUnavailable,
};

const char* chain_errc_name(ChainErrc c);

class ChainError : public std::runtime_error {
 public:
  ChainError(ChainErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ChainErrc code() const { return code_; }

 private:
  ChainErrc code_;
};

/// A single permissioned or public chain as a sequential state machine.
///
/// Block production is PoA-style: authorities take turns by height and a
/// block is sealed instantly at its slot. Pending transactions are taken one
/// sender at a time in consecutive nonce order; across senders the ready
/// transaction with the highest gas price goes first, ties broken by earlier
/// submission and then by sender id. Packing is greedy up to the gas limit.
class Chain {
 public:
  /// Throws ChainError(InvalidConfig) for an empty authority set, zero gas
  /// limit, non-positive block interval or zero confirmations.
  explicit Chain(ChainConfig config);

  const Digest& chain_id() const { return chain_id_; }
  const ChainConfig& config() const { return config_; }

  /// Queues a transaction. Future nonces are held until their predecessors
  /// arrive. Throws GasExceedsLimit, or NonceConflict for a nonce already
  /// consumed or already pending for that sender.
  TxHandle submit(Transaction tx);

  /// Seals a block at `now` if the slot is open and there is something to
  /// include (or the chain produces empty blocks). Returns nullptr otherwise.
  const Block* produce_block(VirtualTime now);
  VirtualTime next_slot() const;

  std::uint64_t height() const;
  const BlockHeader& latest_block() const;
  /// Throws UnknownHeight.
  const Block& get_block(std::uint64_t height) const;
  /// Highest height whose transactions count as committed.
  std::uint64_t committed_height() const;

  /// Live state, unsynchronized; for single-threaded inspection.
  const roots::MerkleMap& state() const { return state_; }
  /// Registry state after `height`, recomputed by replaying from genesis.
  roots::MerkleMap state_at(std::uint64_t height) const;
  std::optional<Bytes> read_state(ByteView key, std::optional<std::uint64_t> height = std::nullopt) const;
  std::vector<std::pair<Bytes, Bytes>> read_prefix(ByteView prefix,
                                                   std::optional<std::uint64_t> height = std::nullopt) const;

  /// Throws UnknownHandle.
  TxStatus status(const TxHandle& handle) const;
  std::size_t pending_count() const;
  /// Next nonce the chain will accept for inclusion from `sender`.
  std::uint64_t account_nonce(const AccountId& sender) const;

  // Fault injection: a misbehaving operator rewriting history. With
  // `rehash_headers` every header from `height` on is rebuilt so the chain is
  // internally consistent again; without it only the block body changes.
  void rewrite_transaction(std::uint64_t height, std::size_t index, Payload payload, bool rehash_headers);
  // Fault injection: write contract storage directly, bypassing transactions.
  void overwrite_state(ByteView key, ByteView value);

 private:
  struct TxRecord {
    TxState state = TxState::Pending;
    std::optional<std::uint64_t> height;
    std::optional<VirtualTime> included_at;
    VirtualTime submitted_at{0};
    std::string failure;
  };
  struct Pending {
    Transaction tx;
    std::uint64_t seq;
  };

  static Digest transaction_root(const std::vector<Transaction>& txs);
  std::vector<Pending> select_transactions();
  void check_handle(const TxHandle& handle) const;

  ChainConfig config_;
  Digest chain_id_;
  // One lock serializes every command and read; blocks live in a deque so
  // references handed out stay valid while the chain grows.
  mutable std::recursive_mutex mu_;
  std::deque<Block> blocks_;
  roots::MerkleMap state_;
  roots::RootCache root_cache_;
  std::map<AccountId, std::uint64_t> nonces_;
  std::map<AccountId, std::map<std::uint64_t, Pending>> pool_;
  std::size_t pending_count_ = 0;
  std::deque<TxRecord> ledger_;
};

enum class Availability { Restored, Unreachable };

/// The RPC endpoint of a chain. Every read and submit goes through here and
/// raises NodeUnavailable while the node is failed over; the chain itself
/// keeps sealing blocks.
class ChainNode {
 public:
  explicit ChainNode(Chain& chain) : chain_(&chain) {}

  void fail_over(Availability mode) { availability_ = mode; }
  bool reachable() const { return availability_ == Availability::Restored; }

  /// Identity is static configuration and never requires a round trip.
  const Digest& chain_id() const { return chain_->chain_id(); }
  const ChainConfig& config() const { return chain_->config(); }

  TxHandle submit(Transaction tx);
  BlockHeader latest_block() const;
  const Block& get_block(std::uint64_t height) const;
  std::uint64_t committed_height() const;
  std::optional<Bytes> read_state(ByteView key, std::optional<std::uint64_t> height = std::nullopt) const;
  std::vector<std::pair<Bytes, Bytes>> read_prefix(ByteView prefix,
                                                   std::optional<std::uint64_t> height = std::nullopt) const;
  roots::MerkleMap state_at(std::uint64_t height) const;
  TxStatus commit_status(const TxHandle& handle) const;
  std::uint64_t account_nonce(const AccountId& sender) const;

 private:
  void ensure_reachable() const;

  Chain* chain_;
  std::atomic<Availability> availability_{Availability::Restored};
};

}  // namespace anchorsim::chain
