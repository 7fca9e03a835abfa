#pragma once

// Layer-1 weak supervision: expanded dictionaries built from masked-slot
// replacement predictions, and high-recall multilabel topic assignment.

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "newslens/common.hpp"

namespace newslens {

struct TopicLabel {
    std::string id;
    std::vector<std::string> label_words;  // each may be multiword, e.g. "climate change"
};

// Throws ValidationError on duplicate/empty ids or topics without label words.
void validate_topics(const std::vector<TopicLabel>& topics);

struct TokenizedSegment {
    std::string id;
    std::vector<std::string> tokens;
};

// A masked slot [begin, end) inside a token sequence.
struct MaskedSlot {
    std::string_view segment_id;
    std::span<const std::string> tokens;
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct Prediction {
    std::string_view word;  // owned by the oracle; valid for the oracle's lifetime
    double score = 0.0;
};

/// Predicts which words could fill a masked slot. Implementations return at
/// most k duplicate-free normalized words, best first, and must be
/// deterministic and safe for concurrent const calls.
class ReplacementOracle {
  public:
    virtual ~ReplacementOracle() = default;
    virtual std::vector<Prediction> predict(const MaskedSlot& slot, std::size_t k) const = 0;
};

/// Oracle backed by a file of precomputed predictions, one JSON object per
/// line: {"segment_id": ..., "position": <token index>, "top_k": [...]}.
/// top_k entries are words (scored by rank) or [word, score] pairs. Lets an
/// external masked language model be used offline.
class PrecomputedOracle : public ReplacementOracle {
  public:
    static PrecomputedOracle parse(std::string_view jsonl);
    static PrecomputedOracle load(const std::string& path);

    void add(std::string segment_id, std::size_t position, std::vector<std::pair<std::string, double>> top);
    std::vector<Prediction> predict(const MaskedSlot& slot, std::size_t k) const override;

  private:
    // segment id -> position -> predictions
    std::map<std::string, std::map<std::size_t, std::vector<std::pair<std::string, double>>>, std::less<>> table_;
};

/// Native stand-in for a masked language model.
///
/// Word-context co-occurrences are counted in a symmetric window and weighted
/// by positive pointwise mutual information. Each word keeps its strongest
/// max_contexts contexts. A masked slot is described by the words around it
/// (same window); every vocabulary word is scored by cosine similarity between
/// its PPMI row and that context profile. Words under similarity_floor are
/// never returned; ties are broken lexicographically.
class DistributionalOracle : public ReplacementOracle {
  public:
    struct Options {
        std::size_t window = 2;
        std::size_t max_contexts = 200;
        double similarity_floor = 0.05;
    };

    static DistributionalOracle build(std::span<const TokenizedSegment> corpus, const Options& opts);

    DistributionalOracle(DistributionalOracle&&) = default;
    DistributionalOracle& operator=(DistributionalOracle&&) = default;
    DistributionalOracle(const DistributionalOracle&) = delete;
    DistributionalOracle& operator=(const DistributionalOracle&) = delete;

    std::vector<Prediction> predict(const MaskedSlot& slot, std::size_t k) const override;

    std::size_t vocabulary_size() const { return words_.size(); }
    const Options& options() const { return opts_; }

  private:
    DistributionalOracle() = default;

    Options opts_;
    std::vector<std::string> words_;  // sorted, so id order is lexicographic
    std::unordered_map<std::string_view, std::uint32_t> ids_;  // views into words_
    // For each context word: (word id, ppmi / ||row||).
    std::vector<std::vector<std::pair<std::uint32_t, double>>> postings_;
};

struct ReplacementLists {
    std::vector<std::vector<std::string>> lists;  // one per label-word occurrence
    std::vector<std::string> warnings;
};

// Masks every occurrence of each of the topic's label words and stores the
// oracle's top-k replacements for each.
ReplacementLists collect_replacements(std::span<const TokenizedSegment> corpus, const TopicLabel& topic,
                                      const ReplacementOracle& oracle, std::size_t k = 50);

struct RankedWord {
    std::string word;
    std::uint32_t count = 0;

    bool operator==(const RankedWord&) const = default;
};

struct ClassVocabulary {
    std::string topic_id;
    std::vector<RankedWord> ranked_words;  // count desc, then word asc
};

// Ranks words by the number of lists containing them; keeps the first cap.
// Throws Error when every list is empty.
ClassVocabulary build_class_vocabulary(std::string topic_id,
                                       const std::vector<std::vector<std::string>>& lists,
                                       std::size_t cap = 100);

struct ExpandedDictionary {
    std::string topic_id;
    std::vector<std::string> words;  // sorted
};

struct ReviewResult {
    ExpandedDictionary dictionary;
    std::vector<std::string> removed;   // audit log
    std::vector<std::string> warnings;  // removals that were not in the vocabulary
};

// Throws Error when nothing is left (topic unusable).
ReviewResult review_vocabulary(const ClassVocabulary& vocab, const std::vector<std::string>& removals);

// One record of the dictionary file.
struct DictionaryRecord {
    std::string topic_id;
    std::vector<RankedWord> ranked_words;
    std::vector<std::string> removals;
    std::vector<std::string> final_words;
};

std::string dictionary_to_json_line(const DictionaryRecord& rec);
std::vector<DictionaryRecord> parse_dictionary_file(std::string_view jsonl);
// Validates final_words ⊆ ranked_words.
ExpandedDictionary to_expanded(const DictionaryRecord& rec);

struct WeakLabel {
    std::string segment_id;
    std::vector<double> scores;          // aligned with the dictionary order
    std::vector<std::uint32_t> assigned;  // indices with score >= threshold
};

/// Scores a segment against all dictionaries. Every token position is masked
/// in turn; overlap = |top-k ∩ dictionary| / k, a topic's score is the
/// maximum overlap over positions, and it is assigned when score >= threshold.
class WeakClassifier {
  public:
    WeakClassifier(std::vector<ExpandedDictionary> dictionaries, const ReplacementOracle& oracle,
                   std::size_t k = 50, double threshold = 0.20);
    WeakClassifier(const WeakClassifier&) = delete;
    WeakClassifier& operator=(const WeakClassifier&) = delete;

    WeakLabel classify(const TokenizedSegment& seg) const;
    std::vector<WeakLabel> classify_all(std::span<const TokenizedSegment> segs, unsigned jobs = 1) const;

    const std::vector<ExpandedDictionary>& dictionaries() const { return dicts_; }
    double threshold() const { return threshold_; }
    std::size_t k() const { return k_; }

  private:
    std::vector<ExpandedDictionary> dicts_;
    const ReplacementOracle& oracle_;
    std::size_t k_;
    double threshold_;
    std::unordered_map<std::string_view, std::vector<std::uint32_t>> word_topics_;  // views into dicts_
};

WeakLabel weak_classify(const TokenizedSegment& seg, const std::vector<ExpandedDictionary>& dictionaries,
                        const ReplacementOracle& oracle, std::size_t k = 50, double threshold = 0.20);

// Re-applies a threshold to stored scores.
std::vector<std::uint32_t> assign_topics(std::span<const double> scores, double threshold);

std::string weak_label_to_json_line(const WeakLabel& label, const std::vector<std::string>& topic_ids);
WeakLabel weak_label_from_json_line(std::string_view line, const std::vector<std::string>& topic_ids,
                                    double threshold);

}  // namespace newslens
