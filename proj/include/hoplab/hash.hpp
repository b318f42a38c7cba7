#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace hoplab {

/// SHA-256 digest as a lowercase hex string.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a whole file. Throws IoError if the file cannot be read.
std::string sha256_file_hex(const std::string& path);

/// FNV-1a 64-bit, used to seed deterministic per-text generators.
std::uint64_t fnv1a64(std::string_view data);

} // namespace hoplab
