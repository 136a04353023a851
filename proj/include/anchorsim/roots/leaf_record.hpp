#pragma once

#include <cstdint>

#include "anchorsim/bytes.hpp"
#include "anchorsim/roots/digest.hpp"

namespace anchorsim::roots {

/// Value stored for one tenant chain in the tree of roots.
/// Encoding: state_root || u64 block_number || block_hash (72 bytes).
struct LeafRecord {
  Digest state_root;
  std::uint64_t block_number = 0;
  Digest block_hash;

  Bytes encode() const;
  /// Throws DecodeError unless `data` is exactly 72 well-formed bytes.
  static LeafRecord decode(ByteView data);

  friend bool operator==(const LeafRecord&, const LeafRecord&) = default;
};

}  // namespace anchorsim::roots
