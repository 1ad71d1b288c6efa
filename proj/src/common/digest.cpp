#include "nlekit/digest.hpp"

#include <openssl/evp.h>

#include "nlekit/binio.hpp"

namespace nlekit {

Sha256 sha256(std::span<const std::uint8_t> bytes) {
  Sha256 out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
    fail(ErrorKind::dependency, "OpenSSL SHA-256 failed");
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

std::string file_sha256(const std::string& path) { return sha256_hex(binio::read_file(path)); }

}  // namespace nlekit
