#pragma once

// Versioned binary snapshots of the ingested corpus and its segments.
//
// Layout: 8-byte magic, u32 format version, u64 config hash, u64 record
// count, then records. Integers are little-endian; strings are u64 length
// followed by bytes. Readers reject a mismatched magic or version, and a
// mismatched config hash when one is expected.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "newslens/corpus.hpp"

namespace newslens {

inline constexpr std::uint32_t kSnapshotFormatVersion = 1;

class BinaryWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void str(std::string_view s);
    const std::string& bytes() const { return buf_; }

  private:
    std::string buf_;
};

class BinaryReader {
  public:
    explicit BinaryReader(std::string_view data) : data_(data) {}
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    std::string str();
    bool done() const { return pos_ == data_.size(); }

  private:
    void need(std::size_t n) const;
    std::string_view data_;
    std::size_t pos_ = 0;
};

struct SnapshotHeader {
    std::uint32_t format_version = kSnapshotFormatVersion;
    std::uint64_t config_hash = 0;
};

std::string encode_episodes(const std::vector<Episode>& episodes, std::uint64_t config_hash);
std::vector<Episode> decode_episodes(std::string_view bytes, std::optional<std::uint64_t> expect_hash,
                                     SnapshotHeader* header = nullptr);

std::string encode_segments(const std::vector<Segment>& segments, std::uint64_t config_hash);
std::vector<Segment> decode_segments(std::string_view bytes, std::optional<std::uint64_t> expect_hash,
                                     SnapshotHeader* header = nullptr);

}  // namespace newslens
