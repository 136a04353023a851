#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "anchorsim/bytes.hpp"
#include "anchorsim/roots/digest.hpp"

namespace anchorsim::roots {

enum class MerkleErrc { KeyAbsent, MalformedEncoding };

class MerkleError : public std::runtime_error {
 public:
  MerkleError(MerkleErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  MerkleErrc code() const { return code_; }

 private:
  MerkleErrc code_;
};

// Domain-separated node hashing:
//   leaf     = H(0x00 || u32 len(key) || key || u32 len(value) || value)
//   internal = H(0x01 || left || right)
//   empty    = H(0x02)
Digest leaf_hash(ByteView key, ByteView value);
Digest node_hash(const Digest& left, const Digest& right);
const Digest& empty_root();

/// Which side of the running hash the sibling sits on.
enum class Side : std::uint8_t { Left = 0, Right = 1 };

struct ProofStep {
  Digest sibling;
  Side side = Side::Right;

  friend bool operator==(const ProofStep&, const ProofStep&) = default;
};

struct InclusionProof {
  Bytes key;
  Bytes value;
  std::vector<ProofStep> path;

  friend bool operator==(const InclusionProof&, const InclusionProof&) = default;
};

/// True iff folding `proof.path` from the leaf hash of (key, value) yields `root`.
bool verify_proof(const InclusionProof& proof, const Digest& root);

struct BytesLess {
  using is_transparent = void;
  bool operator()(ByteView a, ByteView b) const {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  }
};

/// Sorted key/value map with a canonical Merkle root.
///
/// The root is a balanced binary tree over the leaf hashes in ascending key
/// order, built level by level; an unpaired trailing node is promoted to the
/// next level unhashed. The root therefore depends only on the entry set.
///
/// Maps are plain values: copies are independent snapshots and a const map
/// can be read from any number of threads.
class MerkleMap {
  friend class RootCache;

 public:
  MerkleMap() = default;

  /// Snapshot-style insert: returns a new map, leaves *this untouched.
  [[nodiscard]] MerkleMap inserted(ByteView key, ByteView value) const;
  /// In-place insert or overwrite.
  void insert(ByteView key, ByteView value);
  bool erase(ByteView key);

  const Bytes* find(ByteView key) const;
  bool contains(ByteView key) const { return find(key) != nullptr; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  Digest root() const;
  /// Throws MerkleError(KeyAbsent) if the key is not present.
  InclusionProof prove(ByteView key) const;

  /// Entries whose key starts with `prefix`, in key order.
  std::vector<std::pair<Bytes, Bytes>> with_prefix(ByteView prefix) const;
  std::size_t count_prefix(ByteView prefix) const;

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [k, e] : entries_) fn(ByteView(k), ByteView(e.value));
  }

  /// u32 count, then per entry u32 key length, key, u32 value length, value,
  /// in ascending key order. All integers big-endian.
  Bytes serialize() const;
  /// Throws MerkleError(MalformedEncoding) on truncation, non-ascending keys
  /// or trailing bytes.
  static MerkleMap deserialize(ByteView data);

  friend bool operator==(const MerkleMap& a, const MerkleMap& b);

 private:
  struct Entry {
    Bytes value;
    Digest leaf;
  };
  std::map<Bytes, Entry, BytesLess> entries_;

  std::vector<Digest> leaves() const;
};

/// Keeps the levels of the last tree it built, so the next root only rehashes
/// nodes whose children changed. Same result as MerkleMap::root(). Meant for
/// a map that grows in place, e.g. a chain's live state.
class RootCache {
 public:
  Digest root(const MerkleMap& map);

 private:
  std::vector<std::vector<Digest>> levels_;
};

}  // namespace anchorsim::roots
