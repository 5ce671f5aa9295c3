#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace test {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Checksum over relative paths and contents of every regular file under `dir`,
/// in sorted path order, skipping the names in `skip`.
inline std::uint64_t directory_checksum(const std::filesystem::path& dir,
                                        const std::vector<std::string>& skip = {}) {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = std::filesystem::relative(e.path(), dir).generic_string();
    if (std::find(skip.begin(), skip.end(), rel) == skip.end()) files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& f : files) {
    h = fnv1a(f + '\0', h);
    h = fnv1a(slurp(dir / f), h);
  }
  return h;
}

}  // namespace test
