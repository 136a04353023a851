#include "anchorsim/roots/merkle_map.hpp"

#include <algorithm>

namespace anchorsim::roots {

namespace {

constexpr std::uint8_t kLeafTag = 0x00;
constexpr std::uint8_t kNodeTag = 0x01;
constexpr std::uint8_t kEmptyTag = 0x02;
constexpr std::size_t kMaxProofDepth = 64;

std::array<std::uint8_t, 4> be32(std::size_t n) {
  return {static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
          static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
}

std::vector<Digest> next_level(const std::vector<Digest>& level) {
  std::vector<Digest> next;
  next.reserve((level.size() + 1) / 2);
  std::size_t i = 0;
  for (; i + 1 < level.size(); i += 2) next.push_back(node_hash(level[i], level[i + 1]));
  if (i < level.size()) next.push_back(level[i]);
  return next;
}

}  // namespace

Digest leaf_hash(ByteView key, ByteView value) {
  const std::uint8_t tag = kLeafTag;
  auto klen = be32(key.size());
  auto vlen = be32(value.size());
  return sha256({ByteView(&tag, 1), ByteView(klen), key, ByteView(vlen), value});
}

Digest node_hash(const Digest& left, const Digest& right) {
  const std::uint8_t tag = kNodeTag;
  return sha256({ByteView(&tag, 1), left.view(), right.view()});
}

const Digest& empty_root() {
  static const Digest root = [] {
    const std::uint8_t tag = kEmptyTag;
    return sha256(ByteView(&tag, 1));
  }();
  return root;
}

bool verify_proof(const InclusionProof& proof, const Digest& root) {
  if (proof.path.size() > kMaxProofDepth) return false;
  Digest acc = leaf_hash(proof.key, proof.value);
  for (const auto& step : proof.path) {
    switch (step.side) {
      case Side::Left: acc = node_hash(step.sibling, acc); break;
      case Side::Right: acc = node_hash(acc, step.sibling); break;
      default: return false;
    }
  }
  return acc == root;
}

MerkleMap MerkleMap::inserted(ByteView key, ByteView value) const {
  MerkleMap copy = *this;
  copy.insert(key, value);
  return copy;
}

void MerkleMap::insert(ByteView key, ByteView value) {
  Entry e{Bytes(value.begin(), value.end()), leaf_hash(key, value)};
  auto it = entries_.find(key);
  if (it != entries_.end()) {
    it->second = std::move(e);
  } else {
    entries_.emplace(Bytes(key.begin(), key.end()), std::move(e));
  }
}

bool MerkleMap::erase(ByteView key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

const Bytes* MerkleMap::find(ByteView key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second.value;
}

std::vector<Digest> MerkleMap::leaves() const {
  std::vector<Digest> out;
  out.reserve(entries_.size());
  for (const auto& [k, e] : entries_) out.push_back(e.leaf);
  return out;
}

Digest MerkleMap::root() const {
  if (entries_.empty()) return empty_root();
  auto level = leaves();
  while (level.size() > 1) level = next_level(level);
  return level.front();
}

InclusionProof MerkleMap::prove(ByteView key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw MerkleError(MerkleErrc::KeyAbsent, "key not present in map");

  InclusionProof proof{it->first, it->second.value, {}};
  auto index = static_cast<std::size_t>(std::distance(entries_.begin(), it));
  auto level = leaves();
  while (level.size() > 1) {
    if (index % 2 == 1) {
      proof.path.push_back({level[index - 1], Side::Left});
    } else if (index + 1 < level.size()) {
      proof.path.push_back({level[index + 1], Side::Right});
    }
    // An unpaired trailing node is promoted without a step.
    level = next_level(level);
    index /= 2;
  }
  return proof;
}

std::vector<std::pair<Bytes, Bytes>> MerkleMap::with_prefix(ByteView prefix) const {
  std::vector<std::pair<Bytes, Bytes>> out;
  for (auto it = entries_.lower_bound(prefix); it != entries_.end(); ++it) {
    const auto& k = it->first;
    if (k.size() < prefix.size() || !std::equal(prefix.begin(), prefix.end(), k.begin())) break;
    out.emplace_back(k, it->second.value);
  }
  return out;
}

std::size_t MerkleMap::count_prefix(ByteView prefix) const {
  std::size_t n = 0;
  for (auto it = entries_.lower_bound(prefix); it != entries_.end(); ++it) {
    const auto& k = it->first;
    if (k.size() < prefix.size() || !std::equal(prefix.begin(), prefix.end(), k.begin())) break;
    ++n;
  }
  return n;
}

Bytes MerkleMap::serialize() const {
  Bytes out;
  put_u32(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [k, e] : entries_) {
    put_var(out, k);
    put_var(out, e.value);
  }
  return out;
}

MerkleMap MerkleMap::deserialize(ByteView data) {
  MerkleMap map;
  try {
    Reader r(data);
    auto count = r.u32();
    // Each entry needs at least 8 bytes of length prefixes.
    if (count > r.remaining() / 8) throw DecodeError("entry count exceeds input");
    const Bytes* prev = nullptr;
    for (std::uint32_t i = 0; i < count; ++i) {
      auto key = r.var();
      auto value = r.var();
      if (prev != nullptr && !BytesLess{}(*prev, key)) {
        throw MerkleError(MerkleErrc::MalformedEncoding, "keys not in strictly ascending order");
      }
      auto it = map.entries_.emplace_hint(map.entries_.end(), Bytes(key.begin(), key.end()),
                                                Entry{Bytes(value.begin(), value.end()), leaf_hash(key, value)});
      prev = &it->first;
    }
    if (!r.done()) throw MerkleError(MerkleErrc::MalformedEncoding, "trailing bytes after last entry");
  } catch (const DecodeError& e) {
    throw MerkleError(MerkleErrc::MalformedEncoding, e.what());
  }
  return map;
}

bool operator==(const MerkleMap& a, const MerkleMap& b) {
  return std::equal(a.entries_.begin(), a.entries_.end(), b.entries_.begin(), b.entries_.end(),
                    [](const auto& x, const auto& y) { return x.first == y.first && x.second.value == y.second.value; });
}

Digest RootCache::root(const MerkleMap& map) {
  if (map.empty()) {
    levels_.clear();
    return empty_root();
  }
  std::vector<std::vector<Digest>> fresh;
  fresh.push_back(map.leaves());
  for (std::size_t d = 0; fresh[d].size() > 1; ++d) {
    const auto& cur = fresh[d];
    const auto* old = d + 1 < levels_.size() ? &levels_[d] : nullptr;
    std::vector<Digest> next((cur.size() + 1) / 2);
    for (std::size_t i = 0; i < next.size(); ++i) {
      const std::size_t l = 2 * i, r = l + 1;
      if (r >= cur.size()) {
        next[i] = cur[l];
      } else if (old && r < old->size() && (*old)[l] == cur[l] && (*old)[r] == cur[r]) {
        next[i] = levels_[d + 1][i];
      } else {
        next[i] = node_hash(cur[l], cur[r]);
      }
    }
    fresh.push_back(std::move(next));
  }
  levels_ = std::move(fresh);
  return levels_.back().front();
}

}  // namespace anchorsim::roots
