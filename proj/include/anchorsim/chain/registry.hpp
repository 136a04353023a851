#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "anchorsim/chain/types.hpp"
#include "anchorsim/roots/merkle_map.hpp"

// Key layout and value codecs of the pre-deployed registry contract.
//
//   uid/<hex id>                    registration stamp
//   scan/<hex id>/<seq, 10 digits>  scan event
//   trie/latest                     most recent serialized tree of roots
//   trie/round/<round, 10 digits>   serialized tree of roots per round
//   anchor/latest                   public chain: latest AnchorRecord
//   anchor/round/<round, 10 digits> public chain: AnchorRecord per round
//
// Ids are hex-encoded in keys so that an id containing '/' cannot alias
// another id's scan range.
namespace anchorsim::chain::registry {

inline constexpr std::size_t kMaxIdLength = 64;

Bytes uid_key(ByteView id);
Bytes scan_prefix(ByteView id);
Bytes scan_key(ByteView id, std::uint64_t seq);
Bytes trie_latest_key();
Bytes trie_round_key(std::uint64_t round_id);
Bytes anchor_latest_key();
Bytes anchor_round_key(std::uint64_t round_id);

/// Who wrote an entry and in which block.
struct WriteStamp {
  AccountId writer;
  std::uint64_t height = 0;
  VirtualTime timestamp{0};

  friend bool operator==(const WriteStamp&, const WriteStamp&) = default;
};

struct ScanEntry {
  WriteStamp stamp;
  VirtualTime scanned_at{0};
  Bytes meta;

  friend bool operator==(const ScanEntry&, const ScanEntry&) = default;
};

Bytes encode_stamp(const WriteStamp& s);
WriteStamp decode_stamp(ByteView data);
Bytes encode_scan(const ScanEntry& e);
ScanEntry decode_scan(ByteView data);

/// Outcome of executing one transaction against a registry state.
struct TxResult {
  bool ok = true;
  std::string error;
};

/// Applies one transaction's payload. Failed payloads leave `state` unchanged.
TxResult apply_transaction(roots::MerkleMap& state, const Transaction& tx, std::uint64_t height,
                           VirtualTime timestamp);

}  // namespace anchorsim::chain::registry
