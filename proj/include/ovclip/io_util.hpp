#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ovclip {

// Small filesystem helpers shared by every writer in the project. All writes
// are atomic: content goes to "<path>.tmp" in full, then a rename publishes
// it, so a crash or error mid-write never leaves a torn file at the final
// path.

std::vector<unsigned char> read_file_bytes(const std::string& path);
std::string read_file_text(const std::string& path);
void write_file_atomic(const std::string& path, const void* data, std::size_t n);
void write_file_atomic(const std::string& path, const std::string& text);
bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);

// CRC-32 (polynomial 0xEDB88320, the widespread zip/png variant).
std::uint32_t crc32(const void* data, std::size_t n, std::uint32_t seed = 0);

}  // namespace ovclip
