#include "anchorsim/roots/digest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <memory>
#include <stdexcept>

namespace anchorsim::roots {

namespace {

struct CtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

// EVP context creation dominates the cost of hashing 65-byte inner nodes, so
// each thread keeps one context and re-initializes it per digest.
EVP_MD_CTX* thread_context() {
  thread_local std::unique_ptr<EVP_MD_CTX, CtxDeleter> ctx(EVP_MD_CTX_new());
  if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
  return ctx.get();
}

const EVP_MD* sha256_md() {
  static const EVP_MD* md = EVP_sha256();
  return md;
}

}  // namespace

Digest Digest::from_bytes(ByteView b) {
  if (b.size() != kSize) throw DecodeError("digest must be 32 bytes");
  Digest d;
  std::copy(b.begin(), b.end(), d.bytes_.begin());
  return d;
}

Digest Digest::from_hex(std::string_view hex) { return from_bytes(anchorsim::from_hex(hex)); }

bool Digest::is_zero() const {
  return std::all_of(bytes_.begin(), bytes_.end(), [](auto v) { return v == 0; });
}

Digest sha256(ByteView data) { return sha256({data}); }

Digest sha256(std::initializer_list<ByteView> parts) {
  EVP_MD_CTX* ctx = thread_context();
  if (EVP_DigestInit_ex(ctx, sha256_md(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  for (auto part : parts) {
    if (EVP_DigestUpdate(ctx, part.data(), part.size()) != 1) throw std::runtime_error("sha256 update failed");
  }
  std::array<std::uint8_t, Digest::kSize> out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != Digest::kSize) {
    throw std::runtime_error("sha256 final failed");
  }
  return Digest(out);
}

}  // namespace anchorsim::roots
