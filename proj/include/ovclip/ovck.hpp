#pragma once

#include <string>

#include "ovclip/checkpoint.hpp"

namespace ovclip {

// OVCK1: the on-disk checkpoint container. Little-endian binary layout:
//
//   magic   6 bytes  "OVCK1\0"
//   version u16      currently 1
//   meta    u32 count, then per entry: u16 key length, key bytes (UTF-8),
//                                      u32 value length, value bytes
//   tensors u32 count, then per tensor: u16 name length, name bytes,
//                                       u8 rank, u32 dims[rank],
//                                       u8 dtype (0 = float32),
//                                       payload (row-major, little-endian)
//   crc     u32      CRC-32 of every preceding byte
//
// Tensors are stored sorted by name and names are unique; the loader rejects
// files violating that. Corruption surfaces as three distinguishable errors:
// BadMagicError (wrong leading bytes), TruncatedError (file ends inside a
// field), ChecksumError (CRC mismatch). Writes are atomic (tmp + rename).

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Serialized image of the checkpoint, exactly what save_checkpoint writes.
std::string encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(const void* data, std::size_t n,
                             const std::string& origin = "<memory>");

}  // namespace ovclip
