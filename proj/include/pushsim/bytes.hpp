// Byte buffers, hex text form and the length-prefixed binary codec shared by
// every serialized object in pushsim.
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pushsim {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Canonical lowercase hex.
std::string to_hex(ByteView data);
/// Accepts upper or lower case; throws CodecError on odd length or bad digit.
Bytes from_hex(std::string_view text);

inline Bytes to_bytes(std::string_view text) {
  return Bytes(text.begin(), text.end());
}

inline ByteView view(std::string_view text) {
  return {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()};
}

/// True when `needle` occurs anywhere in `haystack`. Empty needles never match.
bool contains(ByteView haystack, ByteView needle);

// Little-endian, u32 length prefix for variable-size fields.
class Writer {
 public:
  Writer& u8(std::uint8_t v);
  Writer& u32(std::uint32_t v);
  Writer& u64(std::uint64_t v);
  Writer& f64(double v);
  Writer& raw(ByteView data);
  Writer& bytes(ByteView data);
  Writer& str(std::string_view s) { return bytes(view(s)); }

  const Bytes& data() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  Bytes raw(std::size_t n);
  Bytes bytes();
  std::string str();

  bool done() const { return pos_ == in_.size(); }
  /// Throws CodecError if trailing bytes remain.
  void expect_end() const;

 private:
  ByteView take(std::size_t n);

  ByteView in_;
  std::size_t pos_ = 0;
};

}  // namespace pushsim
