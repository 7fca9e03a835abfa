#pragma once

// Synthetic data with known ground truth: planted-topic segments, episodes
// from two-dialect stations, and a viewing panel.

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "newslens/annotation.hpp"
#include "newslens/corpus.hpp"
#include "newslens/metrics.hpp"
#include "newslens/weaksup.hpp"

namespace newslens {

// Deterministic pronounceable pseudo-word for an index (three syllables).
std::string pseudo_word(std::uint64_t index);

struct PlantedOptions {
    std::size_t topics = 24;
    std::vector<std::string> stations = {"ABC", "CBS", "NBC", "CNN", "FNC", "MSNBC"};
    std::size_t words_per_topic = 30;
    std::size_t general_vocabulary = 2000;
    double topic_fraction = 0.55;        // segments drawn from at least one topic
    double multilabel_fraction = 0.10;   // of those, drawn from two topics
    double topic_word_rate = 0.35;       // share of a topic segment's words from its topics
    double mention_fraction = 0.30;      // segments with a passing mention of an unrelated topic
    std::size_t mention_min = 2, mention_max = 3;
    std::size_t min_words = 40, max_words = 60;
    std::uint64_t seed = 7;
};

struct PlantedTopic {
    std::string id;
    std::string label_word;          // also words[0]
    std::vector<std::string> words;  // planted vocabulary
};

struct PlantedSegment {
    std::string id;
    std::string station;
    std::vector<std::string> tokens;
    std::vector<std::size_t> topics;  // ground truth, sorted
};

class PlantedGenerator {
  public:
    explicit PlantedGenerator(PlantedOptions opts);

    const PlantedOptions& options() const { return opts_; }
    const std::vector<PlantedTopic>& topics() const { return topics_; }
    const std::vector<std::string>& general_words() const { return general_; }
    std::vector<TopicLabel> topic_labels() const;

    // Tokens of one segment. `substitute`, when set, sees every
    // general-vocabulary draw and may replace the word (returning true).
    using Substitute = std::function<bool(std::mt19937_64&, std::string&)>;
    std::vector<std::string> make_tokens(const std::vector<std::size_t>& truth, std::size_t length,
                                         std::mt19937_64& rng, const Substitute& substitute = {}) const;
    std::vector<std::size_t> draw_truth(std::mt19937_64& rng) const;

    // n segments, ids "seg000001"..., stations round-robin.
    std::vector<PlantedSegment> generate(std::size_t n) const;

    // What a reviewer would strike from topic t's vocabulary: every word not
    // planted for it.
    std::vector<std::string> review_removals(std::size_t topic) const;

  private:
    std::string general_word(std::mt19937_64& rng) const;
    std::string topic_word(std::size_t topic, std::mt19937_64& rng) const;

    PlantedOptions opts_;
    std::vector<PlantedTopic> topics_;
    std::vector<std::string> general_;
    std::vector<double> general_cdf_;
    std::vector<double> topic_cdf_;
};

struct FixtureOptions {
    PlantedOptions planted{};
    int first_year = 2014;
    int last_year = 2021;
    std::size_t stories_per_episode = 6;
    std::size_t story_words = 60;        // also the configured max segment length
    std::size_t dialect_pairs = 120;
    double dialect_rate = 0.10;          // share of general draws replaced by a dialect word
    double drift_per_year = 0.04;        // lean growth of partisan stations per year
    std::size_t panelists = 200;
    std::uint64_t seed = 11;
};

struct StoryTruth {
    std::string segment_id;  // "<episode>#<story index>", one story per segment
    std::string station;
    std::vector<std::string> topics;
};

struct Fixture {
    std::vector<Episode> episodes;
    std::vector<StoryTruth> truth;
    std::vector<PanelRecord> panel;
    std::vector<TopicLabel> topics;
    std::vector<std::string> global_removals;        // general and dialect vocabulary
    std::vector<std::vector<std::string>> removals;  // per topic: other topics' words
    std::vector<std::string> confounders;
    std::map<std::string, std::vector<std::string>> station_confounders;
};

// Episodes whose stories are exactly story_words words long, so each story
// becomes one segment. FNC leans toward one dialect, CNN and MSNBC toward
// the other, broadcast stations stay mixed; the lean grows every year.
Fixture make_fixture(const FixtureOptions& opts);

struct SimulatedAnnotators {
    std::size_t annotators = 4;
    double accuracy = 0.85;  // chance of the correct choice, else a uniform wrong one
    std::uint64_t seed = 3;
    AggregationPolicy policy{};
};

/// Records for every task. The correct choice is the first candidate that is
/// a true topic of the segment, else "none". Annotators are added one at a
/// time past the first `annotators` until the task resolves or is dropped.
std::vector<AnnotationRecord> simulate_annotations(std::span<const AnnotationTask> tasks,
                                                   const std::map<std::string, std::vector<std::string>>& truth,
                                                   const SimulatedAnnotators& opts);

}  // namespace newslens
