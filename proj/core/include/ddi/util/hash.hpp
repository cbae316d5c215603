#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "ddi/errors.hpp"

namespace ddi::util {

// FNV-1a 64-bit. Used for input provenance checksums in manifests/reports.
inline std::uint64_t fnv1a(const std::string &data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_file(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_file(const std::string &path, const std::string &data) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!os) throw IoError("short write to " + path);
}

inline std::string checksum_hex(const std::string &data) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(data)));
  return std::string(buf);
}

inline std::string file_checksum(const std::string &path) {
  return checksum_hex(read_file(path));
}

}  // namespace ddi::util
