#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dytok/attention.hpp"

namespace dytok::atnd {

// ATND attention dump layout (all integers and floats little-endian):
//
//   offset  size   field
//   0       4      magic "ATND"
//   4       2      version (u16) = 1
//   6       2      flags (u16); bit 0 set = all_query_tokens, other bits zero
//   8       4      L, decoder layers (u32)
//   12      4      H, heads (u32)
//   16      4      Q, query tokens (u32); must be 1 unless bit 0 is set
//   20      4      F, frames (u32)
//   24      4*F    tokens per frame (u32 each, >= 1); V = sum
//   ...     4*LHQV payload, f32 logits, layer-major, then head, then query
//                  token, then visual token
//
// Nothing may follow the payload.

inline constexpr char kMagic[4] = {'A', 'T', 'N', 'D'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::uint16_t kFlagAllQueryTokens = 0x1;
inline constexpr std::size_t kFixedHeaderSize = 24;

/// Serializes a dump. Logits are narrowed to f32.
std::vector<std::byte> encode(const AttentionDump& dump);

/// Parses and validates a buffer. Structural problems throw a format error
/// naming the failing header field; non-finite payload values throw
/// data-corruption.
AttentionDump decode(std::span<const std::byte> bytes);

void write_file(const std::filesystem::path& path, const AttentionDump& dump);
AttentionDump read_file(const std::filesystem::path& path);

}  // namespace dytok::atnd
