#include "anchorsim/chain/chain.hpp"

#include <queue>

namespace anchorsim::chain {

const char* chain_errc_name(ChainErrc c) {
  switch (c) {
    case ChainErrc::InvalidConfig: return "InvalidConfig";
    case ChainErrc::GasExceedsLimit: return "GasExceedsLimit";
    case ChainErrc::NonceConflict: return "NonceConflict";
    case ChainErrc::UnknownHeight: return "UnknownHeight";
    case ChainErrc::UnknownHandle: return "UnknownHandle";
    case ChainErrc::NodeUnavailable: return "NodeUnavailable";
  }
  return "?";
}

Chain::Chain(ChainConfig config) : config_(std::move(config)) {
  if (config_.authorities.empty()) throw ChainError(ChainErrc::InvalidConfig, "chain needs at least one authority");
  if (config_.gas_limit == 0) throw ChainError(ChainErrc::InvalidConfig, "gas limit must be positive");
  if (config_.inter_block_time <= Duration::zero()) {
    throw ChainError(ChainErrc::InvalidConfig, "inter-block time must be positive");
  }
  if (config_.confirmations_required == 0) {
    throw ChainError(ChainErrc::InvalidConfig, "confirmations_required must be positive");
  }

  Block genesis;
  genesis.header.height = 0;
  genesis.header.timestamp = config_.genesis_time;
  genesis.header.state_root = state_.root();
  genesis.header.tx_root = transaction_root({});
  genesis.header.producer = config_.authorities.front();
  chain_id_ = genesis.header.hash();
  blocks_.push_back(std::move(genesis));
}

VirtualTime Chain::next_slot() const {
  std::lock_guard guard(mu_);
  return blocks_.back().header.timestamp + config_.inter_block_time;
}

std::uint64_t Chain::height() const {
  std::lock_guard guard(mu_);
  return blocks_.back().header.height;
}

const BlockHeader& Chain::latest_block() const {
  std::lock_guard guard(mu_);
  return blocks_.back().header;
}

std::size_t Chain::pending_count() const {
  std::lock_guard guard(mu_);
  return pending_count_;
}

Digest Chain::transaction_root(const std::vector<Transaction>& txs) {
  roots::MerkleMap m;
  for (std::size_t i = 0; i < txs.size(); ++i) {
    Bytes key;
    put_u32(key, static_cast<std::uint32_t>(i));
    m.insert(key, txs[i].encode());
  }
  return m.root();
}

TxHandle Chain::submit(Transaction tx) {
  std::lock_guard guard(mu_);
  if (tx.gas_cost > config_.gas_limit) {
    throw ChainError(ChainErrc::GasExceedsLimit, "transaction gas exceeds the block gas limit");
  }
  if (tx.nonce < account_nonce(tx.sender)) throw ChainError(ChainErrc::NonceConflict, "nonce already used");
  auto& queue = pool_[tx.sender];
  if (queue.contains(tx.nonce)) throw ChainError(ChainErrc::NonceConflict, "nonce already pending");

  std::uint64_t seq = ledger_.size();
  ledger_.push_back(TxRecord{TxState::Pending, std::nullopt, std::nullopt, tx.submitted_at, {}});
  auto nonce = tx.nonce;
  queue.emplace(nonce, Pending{std::move(tx), seq});
  ++pending_count_;
  return TxHandle{chain_id_, seq};
}

std::uint64_t Chain::account_nonce(const AccountId& sender) const {
  std::lock_guard guard(mu_);
  auto it = nonces_.find(sender);
  return it == nonces_.end() ? 0 : it->second;
}

std::vector<Chain::Pending> Chain::select_transactions() {
  struct Ready {
    const Pending* p;
  };
  auto worse = [](const Ready& a, const Ready& b) {
    const auto& x = a.p->tx;
    const auto& y = b.p->tx;
    if (x.gas_price != y.gas_price) return x.gas_price < y.gas_price;
    if (x.submitted_at != y.submitted_at) return x.submitted_at > y.submitted_at;
    return x.sender > y.sender;
  };
  std::priority_queue<Ready, std::vector<Ready>, decltype(worse)> ready(worse);

  std::map<AccountId, std::uint64_t> next;
  for (const auto& [sender, queue] : pool_) {
    if (queue.empty()) continue;
    auto expected = account_nonce(sender);
    next[sender] = expected;
    if (queue.begin()->first == expected) ready.push({&queue.begin()->second});
  }

  std::vector<Pending> chosen;
  std::uint64_t gas = 0;
  while (!ready.empty()) {
    auto top = ready.top();
    ready.pop();
    const auto& tx = top.p->tx;
    // A sender whose next transaction does not fit is done for this block;
    // its later nonces cannot jump the queue.
    if (gas + tx.gas_cost > config_.gas_limit) continue;
    gas += tx.gas_cost;
    chosen.push_back(*top.p);
    auto& n = next[tx.sender];
    ++n;
    const auto& queue = pool_[tx.sender];
    if (auto it = queue.find(n); it != queue.end()) ready.push({&it->second});
  }

  for (const auto& c : chosen) {
    pool_[c.tx.sender].erase(c.tx.nonce);
    --pending_count_;
  }
  return chosen;
}

const Block* Chain::produce_block(VirtualTime now) {
  std::lock_guard guard(mu_);
  if (now < next_slot()) return nullptr;
  if (pending_count_ == 0 && !config_.produce_empty_blocks) return nullptr;

  auto chosen = select_transactions();
  if (chosen.empty() && !config_.produce_empty_blocks) return nullptr;

  Block block;
  block.header.height = height() + 1;
  block.header.parent_hash = blocks_.back().header.hash();
  block.header.timestamp = now;
  block.header.producer = config_.authorities[(block.header.height - 1) % config_.authorities.size()];

  for (auto& c : chosen) {
    auto result = registry::apply_transaction(state_, c.tx, block.header.height, now);
    nonces_[c.tx.sender] = c.tx.nonce + 1;
    auto& rec = ledger_[c.seq];
    rec.state = result.ok ? TxState::Included : TxState::Failed;
    rec.failure = result.error;
    rec.height = block.header.height;
    rec.included_at = now;
    block.gas_used += c.tx.gas_cost;
    block.tx_seqs.push_back(c.seq);
    block.transactions.push_back(std::move(c.tx));
  }
  block.header.state_root = root_cache_.root(state_);
  block.header.tx_root = transaction_root(block.transactions);
  blocks_.push_back(std::move(block));
  return &blocks_.back();
}

const Block& Chain::get_block(std::uint64_t h) const {
  std::lock_guard guard(mu_);
  if (h >= blocks_.size()) throw ChainError(ChainErrc::UnknownHeight, "no block at height " + std::to_string(h));
  return blocks_[h];
}

std::uint64_t Chain::committed_height() const {
  std::lock_guard guard(mu_);
  auto depth = config_.confirmations_required - 1;
  return height() >= depth ? height() - depth : 0;
}

roots::MerkleMap Chain::state_at(std::uint64_t h) const {
  std::lock_guard guard(mu_);
  if (h >= blocks_.size()) throw ChainError(ChainErrc::UnknownHeight, "no block at height " + std::to_string(h));
  roots::MerkleMap s;
  for (std::uint64_t i = 1; i <= h; ++i) {
    const auto& b = blocks_[i];
    for (const auto& tx : b.transactions) registry::apply_transaction(s, tx, i, b.header.timestamp);
  }
  return s;
}

std::optional<Bytes> Chain::read_state(ByteView key, std::optional<std::uint64_t> h) const {
  std::lock_guard guard(mu_);
  if (h && *h != height()) {
    auto s = state_at(*h);
    if (const Bytes* v = s.find(key)) return *v;
    return std::nullopt;
  }
  if (const Bytes* v = state_.find(key)) return *v;
  return std::nullopt;
}

std::vector<std::pair<Bytes, Bytes>> Chain::read_prefix(ByteView prefix, std::optional<std::uint64_t> h) const {
  std::lock_guard guard(mu_);
  if (h && *h != height()) return state_at(*h).with_prefix(prefix);
  return state_.with_prefix(prefix);
}

void Chain::check_handle(const TxHandle& handle) const {
  if (handle.chain_id != chain_id_ || handle.seq >= ledger_.size()) {
    throw ChainError(ChainErrc::UnknownHandle, "transaction handle does not belong to this chain");
  }
}

TxStatus Chain::status(const TxHandle& handle) const {
  std::lock_guard guard(mu_);
  check_handle(handle);
  const auto& rec = ledger_[handle.seq];
  TxStatus s{rec.state, rec.height, rec.included_at, rec.submitted_at, rec.failure};
  if (s.state == TxState::Included && *s.height + config_.confirmations_required - 1 <= height()) {
    s.state = TxState::Committed;
  }
  return s;
}

void Chain::rewrite_transaction(std::uint64_t h, std::size_t index, Payload payload, bool rehash_headers) {
  std::lock_guard guard(mu_);
  if (h == 0 || h >= blocks_.size()) throw ChainError(ChainErrc::UnknownHeight, "no block at height");
  auto& txs = blocks_[h].transactions;
  if (index >= txs.size()) throw std::out_of_range("transaction index out of range");
  txs[index].payload = std::move(payload);
  if (!rehash_headers) return;

  roots::MerkleMap s;
  for (std::uint64_t i = 1; i < blocks_.size(); ++i) {
    auto& b = blocks_[i];
    for (std::size_t j = 0; j < b.transactions.size(); ++j) {
      auto result = registry::apply_transaction(s, b.transactions[j], i, b.header.timestamp);
      auto& rec = ledger_[b.tx_seqs[j]];
      rec.state = result.ok ? TxState::Included : TxState::Failed;
      rec.failure = result.error;
    }
    if (i >= h) {
      b.header.parent_hash = blocks_[i - 1].header.hash();
      b.header.state_root = s.root();
      b.header.tx_root = transaction_root(b.transactions);
    }
  }
  state_ = std::move(s);
}

void Chain::overwrite_state(ByteView key, ByteView value) {
  std::lock_guard guard(mu_);
  state_.insert(key, value);
}

void ChainNode::ensure_reachable() const {
  if (!reachable()) throw ChainError(ChainErrc::NodeUnavailable, "node for chain " + chain_->config().name + " is unreachable");
}

TxHandle ChainNode::submit(Transaction tx) {
  ensure_reachable();
  return chain_->submit(std::move(tx));
}

BlockHeader ChainNode::latest_block() const {
  ensure_reachable();
  return chain_->latest_block();
}

const Block& ChainNode::get_block(std::uint64_t height) const {
  ensure_reachable();
  return chain_->get_block(height);
}

std::uint64_t ChainNode::committed_height() const {
  ensure_reachable();
  return chain_->committed_height();
}

std::optional<Bytes> ChainNode::read_state(ByteView key, std::optional<std::uint64_t> height) const {
  ensure_reachable();
  return chain_->read_state(key, height);
}

std::vector<std::pair<Bytes, Bytes>> ChainNode::read_prefix(ByteView prefix, std::optional<std::uint64_t> height) const {
  ensure_reachable();
  return chain_->read_prefix(prefix, height);
}

roots::MerkleMap ChainNode::state_at(std::uint64_t height) const {
  ensure_reachable();
  return chain_->state_at(height);
}

TxStatus ChainNode::commit_status(const TxHandle& handle) const {
  ensure_reachable();
  return chain_->status(handle);
}

std::uint64_t ChainNode::account_nonce(const AccountId& sender) const {
  ensure_reachable();
  return chain_->account_nonce(sender);
}

}  // namespace anchorsim::chain
