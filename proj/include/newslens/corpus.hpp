#pragma once

// Episode ingestion, ad stripping, segmentation and phrase counting.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "newslens/common.hpp"

namespace newslens {

struct StationId {
    std::string code;

    auto operator<=>(const StationId&) const = default;
};

// Registered station codes. Unknown codes are rejected at ingestion.
class StationRegistry {
  public:
    StationRegistry() = default;
    explicit StationRegistry(std::vector<std::string> codes);

    // ABC, CBS, NBC, CNN, FNC, MSNBC
    static StationRegistry defaults();

    bool contains(std::string_view code) const;
    StationId get(std::string_view code) const;  // throws ValidationError
    const std::vector<std::string>& codes() const { return codes_; }

  private:
    std::vector<std::string> codes_;
};

enum class ProgramCategory { hard_news, talk_show, partisan_opinion, soft_news, local_news, other };

std::string_view to_string(ProgramCategory c);
ProgramCategory parse_category(std::string_view s);  // throws ValidationError

// Half-open range of character (code point) offsets.
struct CharSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    auto operator<=>(const CharSpan&) const = default;
};

struct Episode {
    std::string id;
    StationId station;
    std::string program_title;
    ProgramCategory category = ProgramCategory::other;
    Date air_date;
    TimeOfDay air_time;
    int duration_min = 0;
    std::string text;
    std::vector<CharSpan> ad_spans;
};

struct Segment {
    std::string episode_id;
    std::uint32_t index = 0;
    std::string text;
    std::uint32_t word_count = 0;
    StationId station;
    ProgramCategory category = ProgramCategory::other;
    Date air_date;

    // Stable identifier "<episode_id>#<index>".
    std::string id() const { return episode_id + "#" + std::to_string(index); }
};

// Throws ValidationError naming the first violated invariant.
void validate_episode(const Episode& ep, const StationRegistry& stations);

struct IngestIssue {
    std::size_t line = 0;  // 1-based
    std::string record_id;
    std::string message;
};

struct IngestResult {
    std::vector<Episode> episodes;  // sorted by id
    std::vector<IngestIssue> issues;
};

IngestResult parse_episodes(std::string_view jsonl, const StationRegistry& stations);
IngestResult ingest_episodes(const std::string& path, const StationRegistry& stations);
std::string episode_to_json_line(const Episode& ep);

std::string strip_ads(const Episode& ep);

// Greedy sentence packing. A sentence ends at a word whose last character is
// '.', '!' or '?'. Whole sentences are accumulated until the next one would
// push the segment past max_words; a sentence longer than max_words is cut
// every max_words words and its tail keeps accumulating. Words are
// whitespace-delimited; each returned segment is its words joined by a
// single space.
std::vector<std::string> pack_segments(std::string_view text, std::size_t max_words = 150);

// Ad-free text of the episode, packed into segments carrying its metadata.
std::vector<Segment> segment_episode(const Episode& ep, std::size_t max_words = 150);

std::vector<Segment> segment_corpus(const std::vector<Episode>& episodes, std::size_t max_words,
                                    unsigned jobs = 1);

// The rejoin policy: whitespace runs collapse to a single space and the ends
// are trimmed. Joining an episode's segments with " " gives exactly this.
std::string normalize_whitespace(std::string_view text);

// Lowercased tokens: maximal runs of letters/digits, with apostrophes kept
// only between two such characters. Bytes >= 0x80 count as letters.
std::vector<std::string> tokenize(std::string_view text);

class PhraseFilter {
  public:
    PhraseFilter() = default;
    PhraseFilter(const std::vector<std::string>& stopwords,
                 const std::vector<std::string>& confounders);

    bool is_stopword(const std::string& w) const { return stopwords_.count(w) > 0; }
    const std::vector<std::vector<std::string>>& confounders() const { return confounders_; }

    // Removes every token inside a confounder match; remaining tokens keep
    // their order and become adjacent.
    std::vector<std::string> excise_confounders(std::vector<std::string> tokens) const;

  private:
    std::unordered_set<std::string> stopwords_;
    std::vector<std::vector<std::string>> confounders_;
};

using PhraseCounts = std::map<std::string, std::uint32_t>;

// Unigrams and adjacent bigrams (space-joined). Confounder matches are cut
// out first; phrases made only of stopwords are dropped.
PhraseCounts count_phrases(const std::vector<std::string>& tokens, const PhraseFilter& filter);
PhraseCounts phrase_counts(const Segment& seg, const PhraseFilter& filter);

using PhraseId = std::uint32_t;

// Sparse counts over interned phrase ids, sorted by id, zero counts absent.
struct PhraseVector {
    std::vector<std::pair<PhraseId, std::uint32_t>> entries;
    std::uint64_t total = 0;

    bool empty() const { return total == 0; }
};

// Interns phrase strings to dense ids in first-seen order.
class PhraseTable {
  public:
    PhraseId intern(const std::string& phrase);
    std::optional<PhraseId> find(const std::string& phrase) const;
    const std::string& phrase(PhraseId id) const { return phrases_[id]; }
    std::size_t size() const { return phrases_.size(); }

    PhraseVector vectorize(const PhraseCounts& counts);

  private:
    std::unordered_map<std::string, PhraseId> ids_;
    std::vector<std::string> phrases_;
};

}  // namespace newslens
