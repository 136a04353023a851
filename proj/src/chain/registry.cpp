#include "anchorsim/chain/registry.hpp"

#include <cstdio>
#include <set>

namespace anchorsim::chain::registry {

namespace {

std::string padded(std::uint64_t n) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%010llu", static_cast<unsigned long long>(n));
  return buf;
}

Bytes key_of(std::string_view s) { return to_bytes(s); }

TxResult fail(std::string why) { return TxResult{false, std::move(why)}; }

TxResult apply(roots::MerkleMap& state, const RegisterUniqueIds& p, const WriteStamp& stamp) {
  if (p.ids.empty()) return fail("EmptyBatch");
  std::set<Bytes> seen;
  for (const auto& id : p.ids) {
    if (id.empty() || id.size() > kMaxIdLength) return fail("InvalidId");
    if (!seen.insert(id).second || state.contains(uid_key(id))) return fail("DuplicateId");
  }
  auto value = encode_stamp(stamp);
  for (const auto& id : p.ids) state.insert(uid_key(id), value);
  return {};
}

TxResult apply(roots::MerkleMap& state, const RecordScan& p, const WriteStamp& stamp) {
  if (!state.contains(uid_key(p.unique_id))) return fail("UnknownUniqueId");
  auto seq = state.count_prefix(scan_prefix(p.unique_id));
  state.insert(scan_key(p.unique_id, seq), encode_scan(ScanEntry{stamp, p.scanned_at, p.meta}));
  return {};
}

TxResult apply(roots::MerkleMap& state, const StoreTrie& p, const WriteStamp&) {
  try {
    (void)roots::MerkleMap::deserialize(p.serialized);
  } catch (const roots::MerkleError&) {
    return fail("MalformedTrie");
  }
  state.insert(trie_latest_key(), p.serialized);
  state.insert(trie_round_key(p.round_id), p.serialized);
  return {};
}

// The public contract only accepts a record that extends the current chain
// of anchors: next round id, previous_root equal to the stored latest root.
TxResult apply(roots::MerkleMap& state, const PublicAnchor& p, const WriteStamp&) {
  Digest expected_previous = roots::empty_root();
  std::uint64_t expected_round = 1;
  if (const Bytes* latest = state.find(anchor_latest_key())) {
    auto current = AnchorRecord::decode(*latest);
    expected_previous = current.root;
    expected_round = current.round_id + 1;
  }
  if (p.record.round_id != expected_round) return fail("AnchorRoundOutOfSequence");
  if (p.record.previous_root != expected_previous) return fail("AnchorPreviousRootMismatch");
  auto encoded = p.record.encode();
  state.insert(anchor_latest_key(), encoded);
  state.insert(anchor_round_key(p.record.round_id), encoded);
  return {};
}

}  // namespace

Bytes uid_key(ByteView id) { return key_of("uid/" + to_hex(id)); }

Bytes scan_prefix(ByteView id) { return key_of("scan/" + to_hex(id) + "/"); }

Bytes scan_key(ByteView id, std::uint64_t seq) { return key_of("scan/" + to_hex(id) + "/" + padded(seq)); }

Bytes trie_latest_key() { return key_of("trie/latest"); }

Bytes trie_round_key(std::uint64_t round_id) { return key_of("trie/round/" + padded(round_id)); }

Bytes anchor_latest_key() { return key_of("anchor/latest"); }

Bytes anchor_round_key(std::uint64_t round_id) { return key_of("anchor/round/" + padded(round_id)); }

Bytes encode_stamp(const WriteStamp& s) {
  Bytes out;
  put_bytes(out, s.writer.view());
  put_u64(out, s.height);
  put_i64(out, s.timestamp.count());
  return out;
}

namespace {

WriteStamp read_stamp(Reader& r) {
  WriteStamp s;
  auto writer = r.take(AccountId::kSize);
  std::array<std::uint8_t, AccountId::kSize> raw{};
  std::copy(writer.begin(), writer.end(), raw.begin());
  s.writer = AccountId(raw);
  s.height = r.u64();
  s.timestamp = VirtualTime(r.i64());
  return s;
}

}  // namespace

WriteStamp decode_stamp(ByteView data) {
  Reader r(data);
  auto s = read_stamp(r);
  if (!r.done()) throw DecodeError("trailing bytes after write stamp");
  return s;
}

Bytes encode_scan(const ScanEntry& e) {
  Bytes out = encode_stamp(e.stamp);
  put_i64(out, e.scanned_at.count());
  put_var(out, e.meta);
  return out;
}

ScanEntry decode_scan(ByteView data) {
  Reader r(data);
  ScanEntry e;
  e.stamp = read_stamp(r);
  e.scanned_at = VirtualTime(r.i64());
  auto meta = r.var();
  e.meta.assign(meta.begin(), meta.end());
  if (!r.done()) throw DecodeError("trailing bytes after scan entry");
  return e;
}

TxResult apply_transaction(roots::MerkleMap& state, const Transaction& tx, std::uint64_t height,
                           VirtualTime timestamp) {
  WriteStamp stamp{tx.sender, height, timestamp};
  return std::visit([&](const auto& p) { return apply(state, p, stamp); }, tx.payload);
}

}  // namespace anchorsim::chain::registry
