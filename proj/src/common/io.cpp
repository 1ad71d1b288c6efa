#include <filesystem>
#include <fstream>
#include <mutex>

#include "nlekit/binio.hpp"
#include "nlekit/io_audit.hpp"

namespace nlekit {

namespace io_audit {
namespace {
std::mutex mu;
std::vector<std::string> log;
}  // namespace

void record_open(const std::string& path) {
  std::lock_guard lock(mu);
  log.push_back(path);
}

std::vector<std::string> opened() {
  std::lock_guard lock(mu);
  return log;
}

void reset() {
  std::lock_guard lock(mu);
  log.clear();
}
}  // namespace io_audit

namespace binio {

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "' for reading");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  Bytes bytes(size);
  if (size && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
    fail(ErrorKind::io, "failed reading '" + path + "'");
  return bytes;
}

void write_file(const std::string& path, const Bytes& bytes) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  // Write to a sibling temp file, then rename, so readers never see a torn file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::io, "failed writing '" + path + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::io, "cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

}  // namespace binio
}  // namespace nlekit
