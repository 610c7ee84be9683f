#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "daibc/common.hpp"

namespace daibc {

using ordered_json = nlohmann::ordered_json;

// Container for every binary artifact: a JSON header followed by a flat
// little-endian float32 payload.
//
//   bytes 0..7   magic "DAIBCBIN"
//   bytes 8..11  u32 LE header length
//   ...          header JSON (UTF-8)
//   ...          u64 LE payload element count
//   ...          payload float32 LE
//
// Writing the parsed header back out reproduces the original bytes, which is
// what the byte-exact round-trip contract rests on.
struct Blob {
  ordered_json header;
  std::vector<float> payload;
};

namespace detail {
inline void put_u32(std::ofstream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u64(std::ofstream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline uint32_t get_u32(std::ifstream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
inline uint64_t get_u64(std::ifstream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}
}  // namespace detail

inline constexpr char kBlobMagic[8] = {'D', 'A', 'I', 'B', 'C', 'B', 'I', 'N'};

inline void write_blob(const std::filesystem::path& path, const ordered_json& header,
                       std::span<const float> payload) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), "write_blob: cannot open " + path.string());
  os.write(kBlobMagic, 8);
  const std::string h = header.dump();
  detail::put_u32(os, static_cast<uint32_t>(h.size()));
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  detail::put_u64(os, payload.size());
  static_assert(sizeof(float) == 4);
  // float32 bytes are written verbatim; this code targets little-endian hosts
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * 4));
  require(os.good(), "write_blob: write failed for " + path.string());
}

inline Blob read_blob(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "read_blob: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  require(is.good() && std::memcmp(magic, kBlobMagic, 8) == 0,
          "read_blob: bad magic in " + path.string());
  const uint32_t hlen = detail::get_u32(is);
  std::string h(hlen, '\0');
  is.read(h.data(), hlen);
  require(is.good(), "read_blob: truncated header in " + path.string());
  Blob blob;
  try {
    blob.header = ordered_json::parse(h);
  } catch (const std::exception& e) {
    throw InputError("read_blob: invalid header JSON in " + path.string() + ": " + e.what());
  }
  const uint64_t n = detail::get_u64(is);
  blob.payload.resize(n);
  is.read(reinterpret_cast<char*>(blob.payload.data()), static_cast<std::streamsize>(n * 4));
  require(is.good(), "read_blob: truncated payload in " + path.string());
  return blob;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), "cannot open " + path.string() + " for writing");
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(os.good(), "write failed for " + path.string());
}

inline uint64_t file_hash(const std::filesystem::path& path) {
  return fnv1a64(read_text_file(path));
}

}  // namespace daibc
