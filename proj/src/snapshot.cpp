#include "newslens/snapshot.hpp"

namespace newslens {

namespace {

constexpr std::string_view kEpisodeMagic = "NLEPISOD";
constexpr std::string_view kSegmentMagic = "NLSEGMNT";

void write_header(BinaryWriter& w, std::string_view magic, std::uint64_t hash, std::uint64_t n) {
    for (char c : magic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(kSnapshotFormatVersion);
    w.u64(hash);
    w.u64(n);
}

std::uint64_t read_header(BinaryReader& r, std::string_view magic,
                          std::optional<std::uint64_t> expect_hash, SnapshotHeader* out) {
    for (char c : magic)
        if (r.u8() != static_cast<std::uint8_t>(c)) throw ValidationError("snapshot: bad magic");
    SnapshotHeader h;
    h.format_version = r.u32();
    if (h.format_version != kSnapshotFormatVersion)
        throw ValidationError("snapshot: unsupported format version " + std::to_string(h.format_version));
    h.config_hash = r.u64();
    if (expect_hash && *expect_hash != h.config_hash)
        throw DependencyError("snapshot: config hash " + hex64(h.config_hash) + " does not match " +
                              hex64(*expect_hash));
    if (out) *out = h;
    return r.u64();
}

void write_date(BinaryWriter& w, const Date& d) { w.i64(d.days()); }
Date read_date(BinaryReader& r) { return Date::from_days(r.i64()); }

}  // namespace

void BinaryWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void BinaryWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void BinaryWriter::str(std::string_view s) {
    u64(s.size());
    buf_.append(s);
}

void BinaryReader::need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ValidationError("snapshot: truncated");
}

std::uint8_t BinaryReader::u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t BinaryReader::u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
}

std::uint64_t BinaryReader::u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
}

std::string BinaryReader::str() {
    std::uint64_t n = u64();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
}

std::string encode_episodes(const std::vector<Episode>& episodes, std::uint64_t config_hash) {
    BinaryWriter w;
    write_header(w, kEpisodeMagic, config_hash, episodes.size());
    for (const auto& e : episodes) {
        w.str(e.id);
        w.str(e.station.code);
        w.str(e.program_title);
        w.str(to_string(e.category));
        write_date(w, e.air_date);
        w.u32(static_cast<std::uint32_t>(e.air_time.hour * 60 + e.air_time.minute));
        w.u32(static_cast<std::uint32_t>(e.duration_min));
        w.str(e.text);
        w.u64(e.ad_spans.size());
        for (const auto& s : e.ad_spans) {
            w.u64(s.begin);
            w.u64(s.end);
        }
    }
    return w.bytes();
}

std::vector<Episode> decode_episodes(std::string_view bytes, std::optional<std::uint64_t> expect_hash,
                                     SnapshotHeader* header) {
    BinaryReader r(bytes);
    std::uint64_t n = read_header(r, kEpisodeMagic, expect_hash, header);
    std::vector<Episode> out;
    out.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        Episode e;
        e.id = r.str();
        e.station = StationId{r.str()};
        e.program_title = r.str();
        e.category = parse_category(r.str());
        e.air_date = read_date(r);
        auto minutes = r.u32();
        e.air_time = TimeOfDay{static_cast<int>(minutes / 60), static_cast<int>(minutes % 60)};
        e.duration_min = static_cast<int>(r.u32());
        e.text = r.str();
        auto spans = r.u64();
        for (std::uint64_t k = 0; k < spans; ++k) {
            CharSpan s;
            s.begin = r.u64();
            s.end = r.u64();
            e.ad_spans.push_back(s);
        }
        out.push_back(std::move(e));
    }
    if (!r.done()) throw ValidationError("snapshot: trailing bytes");
    return out;
}

std::string encode_segments(const std::vector<Segment>& segments, std::uint64_t config_hash) {
    BinaryWriter w;
    write_header(w, kSegmentMagic, config_hash, segments.size());
    for (const auto& s : segments) {
        w.str(s.episode_id);
        w.u32(s.index);
        w.str(s.text);
        w.u32(s.word_count);
        w.str(s.station.code);
        w.str(to_string(s.category));
        write_date(w, s.air_date);
    }
    return w.bytes();
}

std::vector<Segment> decode_segments(std::string_view bytes, std::optional<std::uint64_t> expect_hash,
                                     SnapshotHeader* header) {
    BinaryReader r(bytes);
    std::uint64_t n = read_header(r, kSegmentMagic, expect_hash, header);
    std::vector<Segment> out;
    out.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        Segment s;
        s.episode_id = r.str();
        s.index = r.u32();
        s.text = r.str();
        s.word_count = r.u32();
        s.station = StationId{r.str()};
        s.category = parse_category(r.str());
        s.air_date = read_date(r);
        out.push_back(std::move(s));
    }
    if (!r.done()) throw ValidationError("snapshot: trailing bytes");
    return out;
}

}  // namespace newslens
