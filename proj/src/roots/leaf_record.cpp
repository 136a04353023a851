#include "anchorsim/roots/leaf_record.hpp"

namespace anchorsim::roots {

Bytes LeafRecord::encode() const {
  Bytes out;
  out.reserve(72);
  put_bytes(out, state_root.view());
  put_u64(out, block_number);
  put_bytes(out, block_hash.view());
  return out;
}

LeafRecord LeafRecord::decode(ByteView data) {
  Reader r(data);
  LeafRecord rec;
  rec.state_root = Digest::from_bytes(r.take(Digest::kSize));
  rec.block_number = r.u64();
  rec.block_hash = Digest::from_bytes(r.take(Digest::kSize));
  if (!r.done()) throw DecodeError("trailing bytes after leaf record");
  return rec;
}

}  // namespace anchorsim::roots
