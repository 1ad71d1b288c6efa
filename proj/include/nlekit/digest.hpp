#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

namespace nlekit {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::span<const std::uint8_t> bytes);
std::string to_hex(std::span<const std::uint8_t> bytes);
inline std::string sha256_hex(std::span<const std::uint8_t> bytes) { return to_hex(sha256(bytes)); }
/// SHA-256 of a file's contents as hex; I/O error when unreadable.
std::string file_sha256(const std::string& path);

}  // namespace nlekit
