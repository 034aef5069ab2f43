#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dmfuse {

/// SHA-256 as a lowercase hex string.
std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_hex(const std::vector<uint8_t>& bytes);

/// Digest of a file's raw bytes; throws if the file cannot be read.
std::string sha256_file(const std::string& path);

}  // namespace dmfuse
