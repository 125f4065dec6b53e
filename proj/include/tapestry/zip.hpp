#pragma once

#include <string>
#include <vector>

namespace tapestry {

struct ZipEntry {
  std::string name;
  std::string data;
};

/// Stored (uncompressed) archive with fixed timestamps; identical entries give
/// identical bytes.
std::string make_zip(const std::vector<ZipEntry>& entries);

/// Reads stored and deflated entries. Directory entries are skipped.
std::vector<ZipEntry> read_zip(const std::string& archive);

} // namespace tapestry
