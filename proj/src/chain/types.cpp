#include "anchorsim/chain/types.hpp"

#include <algorithm>

namespace anchorsim::chain {

namespace {

enum PayloadTag : std::uint8_t { kRegister = 1, kScan = 2, kStoreTrie = 3, kPublicAnchor = 4 };

struct PayloadEncoder {
  Bytes& out;

  void operator()(const RegisterUniqueIds& p) const {
    put_u8(out, kRegister);
    put_u32(out, static_cast<std::uint32_t>(p.ids.size()));
    for (const auto& id : p.ids) put_var(out, id);
  }
  void operator()(const RecordScan& p) const {
    put_u8(out, kScan);
    put_var(out, p.unique_id);
    put_i64(out, p.scanned_at.count());
    put_var(out, p.meta);
  }
  void operator()(const StoreTrie& p) const {
    put_u8(out, kStoreTrie);
    put_u64(out, p.round_id);
    put_var(out, p.serialized);
  }
  void operator()(const PublicAnchor& p) const {
    put_u8(out, kPublicAnchor);
    put_bytes(out, p.record.encode());
  }
};

}  // namespace

AccountId AccountId::derive(std::string_view label, ByteView seed, std::uint32_t index) {
  Bytes idx;
  put_u32(idx, index);
  auto d = roots::sha256({ByteView(reinterpret_cast<const std::uint8_t*>(label.data()), label.size()), seed, idx});
  std::array<std::uint8_t, kSize> raw{};
  std::copy_n(d.bytes().begin(), kSize, raw.begin());
  return AccountId(raw);
}

AccountId AccountId::from_hex(std::string_view hex) {
  auto b = anchorsim::from_hex(hex);
  if (b.size() != kSize) throw DecodeError("account id must be 20 bytes");
  std::array<std::uint8_t, kSize> raw{};
  std::copy(b.begin(), b.end(), raw.begin());
  return AccountId(raw);
}

Bytes AnchorRecord::encode() const {
  Bytes out;
  put_bytes(out, root.view());
  put_bytes(out, previous_root.view());
  put_u64(out, round_id);
  put_i64(out, anchored_at.count());
  return out;
}

AnchorRecord AnchorRecord::decode(ByteView data) {
  Reader r(data);
  AnchorRecord rec;
  rec.root = Digest::from_bytes(r.take(Digest::kSize));
  rec.previous_root = Digest::from_bytes(r.take(Digest::kSize));
  rec.round_id = r.u64();
  rec.anchored_at = VirtualTime(r.i64());
  if (!r.done()) throw DecodeError("trailing bytes after anchor record");
  return rec;
}

const char* payload_name(const Payload& p) {
  switch (p.index()) {
    case 0: return "RegisterUniqueIds";
    case 1: return "RecordScan";
    case 2: return "StoreTrie";
    default: return "PublicAnchor";
  }
}

Bytes Transaction::encode() const {
  Bytes out;
  put_bytes(out, sender.view());
  put_u64(out, nonce);
  put_u64(out, gas_price);
  put_u64(out, gas_cost);
  std::visit(PayloadEncoder{out}, payload);
  return out;
}

Bytes BlockHeader::encode() const {
  Bytes out;
  out.reserve(132);
  put_u64(out, height);
  put_bytes(out, parent_hash.view());
  put_i64(out, timestamp.count());
  put_bytes(out, state_root.view());
  put_bytes(out, tx_root.view());
  put_bytes(out, producer.view());
  return out;
}

Digest BlockHeader::hash() const { return roots::sha256(encode()); }

std::uint64_t GasSchedule::cost_of(const Payload& p) const {
  switch (p.index()) {
    case 0: return register_batch;
    case 1: return record_scan;
    case 2: return store_trie;
    default: return public_anchor;
  }
}

ChainConfig& ChainConfig::with_authorities(std::uint32_t n) {
  authorities.clear();
  for (std::uint32_t i = 0; i < n; ++i) authorities.push_back(AccountId::derive("authority", seed, i));
  return *this;
}

const char* tx_state_name(TxState s) {
  switch (s) {
    case TxState::Pending: return "Pending";
    case TxState::Included: return "Included";
    case TxState::Committed: return "Committed";
    case TxState::Failed: return "Failed";
  }
  return "?";
}

}  // namespace anchorsim::chain
