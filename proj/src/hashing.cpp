#include "neuroute/hashing.hpp"

#include <bit>
#include <cstring>

#include <openssl/evp.h>

#include "neuroute/error.hpp"

namespace neuroute {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  raw(s.data(), s.size());
}

void ByteWriter::raw(const void* data, std::size_t n) {
  buf_.append(static_cast<const char*>(data), n);
}

void ByteReader::require(std::size_t n) const {
  if (remaining() < n) {
    throw FormatError("truncated content: need " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + ", " + std::to_string(remaining()) + " left");
  }
}

void ByteReader::raw(void* out, std::size_t n) {
  require(n);
  std::memcpy(out, data_.data() + pos_, n);
  pos_ += n;
}

std::uint8_t ByteReader::u8() {
  std::uint8_t v;
  raw(&v, sizeof v);
  return v;
}
std::uint16_t ByteReader::u16() {
  std::uint16_t v;
  raw(&v, sizeof v);
  return v;
}
std::uint32_t ByteReader::u32() {
  std::uint32_t v;
  raw(&v, sizeof v);
  return v;
}
std::uint64_t ByteReader::u64() {
  std::uint64_t v;
  raw(&v, sizeof v);
  return v;
}
std::int64_t ByteReader::i64() {
  std::int64_t v;
  raw(&v, sizeof v);
  return v;
}
double ByteReader::f64() {
  double v;
  raw(&v, sizeof v);
  return v;
}

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  require(n);
  std::string s(data_.substr(pos_, n));
  pos_ += n;
  return s;
}

}  // namespace neuroute
