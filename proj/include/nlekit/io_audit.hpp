#pragma once

#include <string>
#include <vector>

/// Process-wide record of every feature file opened for reading. Tests use it
/// to prove that unpaired adaptation never touches source-device data.
namespace nlekit::io_audit {

void record_open(const std::string& path);
std::vector<std::string> opened();
void reset();

}  // namespace nlekit::io_audit
