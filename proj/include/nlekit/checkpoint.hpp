#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlekit/binio.hpp"

/// "NLEK" container shared by model and NLE checkpoints:
///   magic "NLEK" | u16 version | u32 length + JSON config (carries "kind")
///   | u32 record count | records | 32-byte SHA-256 of everything before it.
/// A record is u16 name length + name | u8 dtype (1 f32, 2 f64) | u8 ndim
/// | u32 dims | little-endian payload.
namespace nlekit::checkpoint {

inline constexpr std::uint16_t kVersion = 1;

struct Record {
  std::string name;
  std::vector<std::uint32_t> dims;
  bool f64 = false;
  std::vector<float> f32_data;
  std::vector<double> f64_data;

  std::size_t count() const;
};

struct Container {
  nlohmann::json config;  // must hold a string "kind"
  std::vector<Record> records;

  const Record& find(const std::string& name) const;
};

binio::Bytes serialize(const Container& c);
/// Persistence error on bad magic, newer version, truncation or digest
/// mismatch; `what` names the source in messages.
Container parse(const binio::Bytes& bytes, const std::string& what);

/// Returns the hex digest of the written bytes.
std::string save(const Container& c, const std::string& path);
Container load(const std::string& path);
/// Digest a container would have on disk, without writing it.
std::string digest(const Container& c);

}  // namespace nlekit::checkpoint
