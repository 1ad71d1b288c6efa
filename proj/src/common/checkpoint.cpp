#include "nlekit/checkpoint.hpp"

#include <algorithm>
#include <cstring>

#include "nlekit/digest.hpp"

namespace nlekit::checkpoint {

std::size_t Record::count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

const Record& Container::find(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return r;
  fail(ErrorKind::persistence, "checkpoint has no record '" + name + "'");
}

binio::Bytes serialize(const Container& c) {
  require(c.config.contains("kind") && c.config["kind"].is_string(), ErrorKind::state,
          "checkpoint config must carry a kind tag");
  binio::Bytes b;
  binio::put_bytes(b, "NLEK");
  binio::put_uint<std::uint16_t>(b, kVersion);
  const std::string cfg = c.config.dump();
  binio::put_uint<std::uint32_t>(b, static_cast<std::uint32_t>(cfg.size()));
  binio::put_bytes(b, cfg);
  binio::put_uint<std::uint32_t>(b, static_cast<std::uint32_t>(c.records.size()));
  for (const auto& r : c.records) {
    require(r.name.size() < 65536 && r.dims.size() < 256, ErrorKind::state, "checkpoint record header too large");
    require((r.f64 ? r.f64_data.size() : r.f32_data.size()) == r.count(), ErrorKind::state,
            "checkpoint record '" + r.name + "' payload does not match its shape");
    binio::put_uint<std::uint16_t>(b, static_cast<std::uint16_t>(r.name.size()));
    binio::put_bytes(b, r.name);
    binio::put_uint<std::uint8_t>(b, r.f64 ? 2 : 1);
    binio::put_uint<std::uint8_t>(b, static_cast<std::uint8_t>(r.dims.size()));
    for (auto d : r.dims) binio::put_uint<std::uint32_t>(b, d);
    if (r.f64)
      for (double v : r.f64_data) binio::put_f64(b, v);
    else
      for (float v : r.f32_data) binio::put_f32(b, v);
  }
  const Sha256 h = sha256(b);
  b.insert(b.end(), h.begin(), h.end());
  return b;
}

Container parse(const binio::Bytes& bytes, const std::string& what) {
  auto bad = [&](const std::string& why) { fail(ErrorKind::persistence, what + ": " + why); };
  if (bytes.size() < 4 + 2 + 32) bad("truncated file");
  if (std::memcmp(bytes.data(), "NLEK", 4) != 0) bad("bad magic (expected NLEK)");
  binio::Reader hdr(bytes.data() + 4, 2, what);
  const auto version = hdr.uint<std::uint16_t>();
  if (version > kVersion)
    bad("format version " + std::to_string(version) + " is newer than supported version " + std::to_string(kVersion));
  if (version == 0) bad("invalid format version 0");

  const std::size_t body = bytes.size() - 32;
  const Sha256 h = sha256({bytes.data(), body});
  if (!std::equal(h.begin(), h.end(), bytes.begin() + static_cast<std::ptrdiff_t>(body)))
    bad("digest mismatch (file corrupted or truncated)");

  binio::Reader r(bytes.data() + 6, body - 6, what);
  Container c;
  const auto cfg_len = r.uint<std::uint32_t>();
  try {
    c.config = nlohmann::json::parse(r.str(cfg_len));
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("config blob is not valid JSON: ") + e.what());
  }
  const auto n = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    Record rec;
    rec.name = r.str(r.uint<std::uint16_t>());
    const auto dtype = r.uint<std::uint8_t>();
    if (dtype != 1 && dtype != 2) bad("record '" + rec.name + "' has unknown dtype " + std::to_string(dtype));
    rec.f64 = dtype == 2;
    const auto ndim = r.uint<std::uint8_t>();
    for (std::uint8_t d = 0; d < ndim; ++d) rec.dims.push_back(r.uint<std::uint32_t>());
    const std::size_t count = rec.count();
    if (r.remaining() < count * (rec.f64 ? 8 : 4)) bad("truncated file");
    if (rec.f64) {
      rec.f64_data.resize(count);
      for (auto& v : rec.f64_data) v = r.f64();
    } else {
      rec.f32_data.resize(count);
      for (auto& v : rec.f32_data) v = r.f32();
    }
    c.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) bad("trailing bytes after records");
  return c;
}

std::string save(const Container& c, const std::string& path) {
  const binio::Bytes b = serialize(c);
  binio::write_file(path, b);
  return to_hex({b.data() + b.size() - 32, 32});
}

Container load(const std::string& path) { return parse(binio::read_file(path), "checkpoint '" + path + "'"); }

std::string digest(const Container& c) {
  const binio::Bytes b = serialize(c);
  return to_hex({b.data() + b.size() - 32, 32});
}

}  // namespace nlekit::checkpoint
