#include "dytok/atnd.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "dytok/error.hpp"
#include "dytok/io.hpp"

namespace dytok::atnd {

namespace {

__extension__ typedef unsigned __int128 u128;

void put_u16(std::vector<std::byte>& out, std::uint16_t v) {
  out.push_back(static_cast<std::byte>(v & 0xFF));
  out.push_back(static_cast<std::byte>(v >> 8));
}

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::byte>((v >> s) & 0xFF));
}

std::uint16_t get_u16(std::span<const std::byte> b, std::size_t at) {
  return static_cast<std::uint16_t>(std::to_integer<unsigned>(b[at]) |
                                    (std::to_integer<unsigned>(b[at + 1]) << 8));
}

std::uint32_t get_u32(std::span<const std::byte> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) {
    v = (v << 8) | std::to_integer<std::uint32_t>(b[at + static_cast<std::size_t>(i)]);
  }
  return v;
}

[[noreturn]] void bad_field(const std::string& field, const std::string& detail) {
  fail(ErrorCode::kFormat, "ATND " + field + ": " + detail);
}

}  // namespace

std::vector<std::byte> encode(const AttentionDump& dump) {
  std::vector<std::byte> out;
  out.reserve(kFixedHeaderSize + 4 * dump.num_frames() + 4 * dump.logits().size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_u16(out, kVersion);
  put_u16(out, dump.query_mode() == QueryMode::kAllQueryTokens ? kFlagAllQueryTokens : 0);
  put_u32(out, dump.num_layers());
  put_u32(out, dump.num_heads());
  put_u32(out, dump.num_query_tokens());
  put_u32(out, dump.num_frames());
  for (auto n : dump.tokens_per_frame()) put_u32(out, n);
  for (double v : dump.logits()) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

AttentionDump decode(std::span<const std::byte> bytes) {
  if (bytes.size() < kFixedHeaderSize) {
    bad_field("header", "truncated (" + std::to_string(bytes.size()) + " of " +
                            std::to_string(kFixedHeaderSize) + " bytes)");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) bad_field("magic", "expected \"ATND\"");
  if (const auto version = get_u16(bytes, 4); version != kVersion) {
    bad_field("version", "unsupported version " + std::to_string(version));
  }
  const auto flags = get_u16(bytes, 6);
  if ((flags & ~kFlagAllQueryTokens) != 0) {
    char hex[8];
    std::snprintf(hex, sizeof hex, "0x%04x", flags);
    bad_field("flags", std::string("unknown bits set in ") + hex);
  }
  const QueryMode mode =
      (flags & kFlagAllQueryTokens) ? QueryMode::kAllQueryTokens : QueryMode::kLastToken;
  const auto layers = get_u32(bytes, 8);
  const auto heads = get_u32(bytes, 12);
  const auto queries = get_u32(bytes, 16);
  const auto frames = get_u32(bytes, 20);
  if (layers == 0) bad_field("num_layers", "must be >= 1");
  if (heads == 0) bad_field("num_heads", "must be >= 1");
  if (queries == 0) bad_field("num_query_tokens", "must be >= 1");
  if (mode == QueryMode::kLastToken && queries != 1) {
    bad_field("num_query_tokens", "must be 1 in last_token mode, got " +
                                      std::to_string(queries));
  }
  if (frames == 0) bad_field("num_frames", "must be >= 1");

  const std::size_t table_end = kFixedHeaderSize + 4 * std::size_t{frames};
  if (bytes.size() < table_end) bad_field("tokens_per_frame", "table truncated");
  std::vector<std::uint32_t> tpf(frames);
  u128 visual = 0;
  for (std::uint32_t f = 0; f < frames; ++f) {
    tpf[f] = get_u32(bytes, kFixedHeaderSize + 4 * std::size_t{f});
    if (tpf[f] == 0) {
      bad_field("tokens_per_frame", "frame " + std::to_string(f) + " has zero tokens");
    }
    visual += tpf[f];
  }

  const u128 count = visual * layers * heads * queries;
  const u128 expected = count * 4;
  const std::size_t available = bytes.size() - table_end;
  if (expected != available) {
    bad_field("payload", "expected " + std::to_string(static_cast<unsigned long long>(
                                           expected > ~0ULL ? ~0ULL : expected)) +
                             " bytes, found " + std::to_string(available) +
                             (expected > available ? " (truncated)" : " (trailing data)"));
  }

  std::vector<double> logits(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const float v = std::bit_cast<float>(get_u32(bytes, table_end + 4 * i));
    if (!std::isfinite(v)) {
      fail(ErrorCode::kDataCorruption,
           "ATND payload: non-finite value at index " + std::to_string(i));
    }
    logits[i] = v;
  }
  return AttentionDump(layers, heads, queries, mode, std::move(tpf), std::move(logits));
}

void write_file(const std::filesystem::path& path, const AttentionDump& dump) {
  const auto bytes = encode(dump);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                           bytes.size()));
}

AttentionDump read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kInvalidArgument, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  return decode(std::as_bytes(std::span<const char>(raw)));
}

}  // namespace dytok::atnd
