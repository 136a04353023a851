#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>

#include "anchorsim/bytes.hpp"

namespace anchorsim::roots {

/// A 32-byte SHA-256 digest. Equality and ordering are bytewise.
class Digest {
 public:
  static constexpr std::size_t kSize = 32;

  constexpr Digest() = default;
  explicit Digest(const std::array<std::uint8_t, kSize>& bytes) : bytes_(bytes) {}

  /// Throws DecodeError unless `b` is exactly 32 bytes.
  static Digest from_bytes(ByteView b);
  static Digest from_hex(std::string_view hex);

  const std::array<std::uint8_t, kSize>& bytes() const { return bytes_; }
  std::array<std::uint8_t, kSize>& mutable_bytes() { return bytes_; }
  ByteView view() const { return ByteView(bytes_.data(), bytes_.size()); }
  std::string hex() const { return to_hex(view()); }
  bool is_zero() const;

  friend auto operator<=>(const Digest&, const Digest&) = default;

 private:
  std::array<std::uint8_t, kSize> bytes_{};
};

Digest sha256(ByteView data);
/// Hash of the concatenation of `parts` without materializing it.
Digest sha256(std::initializer_list<ByteView> parts);

}  // namespace anchorsim::roots

template <>
struct std::hash<anchorsim::roots::Digest> {
  std::size_t operator()(const anchorsim::roots::Digest& d) const noexcept {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | d.bytes()[i];
    return h;
  }
};
