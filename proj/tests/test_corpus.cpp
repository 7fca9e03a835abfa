#include <gtest/gtest.h>

#include <random>

#include "newslens/corpus.hpp"
#include "newslens/snapshot.hpp"

using namespace newslens;

namespace {

std::string record(const std::string& id, const std::string& station, const std::string& text,
                   const std::string& spans = "[]") {
    return R"({"id":")" + id + R"(","station":")" + station +
           R"(","program_title":"Evening","category":"hard_news","air_date":"2016-05-01","air_time":"18:30",)" +
           R"("duration_min":30,"text":")" + text + R"(","ad_spans":)" + spans + "}";
}

Episode episode(std::string text, std::vector<CharSpan> ads = {}) {
    Episode e;
    e.id = "E1";
    e.station = {"CNN"};
    e.program_title = "Evening";
    e.category = ProgramCategory::hard_news;
    e.air_date = Date::parse("2016-05-01");
    e.duration_min = 30;
    e.text = std::move(text);
    e.ad_spans = std::move(ads);
    return e;
}

std::string sentence(std::size_t words, const std::string& w = "word") {
    std::string s;
    for (std::size_t i = 0; i < words; ++i) s += (i ? " " : "") + w;
    return s + ".";
}

std::vector<std::size_t> word_counts(const std::vector<std::string>& segs) {
    std::vector<std::size_t> out;
    for (const auto& s : segs) out.push_back(split_ws(s).size());
    return out;
}

}  // namespace

TEST(Ingest, ValidRecords) {
    auto res = parse_episodes(record("a", "CNN", "hello there.") + "\n" + record("b", "FNC", "second one."),
                              StationRegistry::defaults());
    EXPECT_EQ(res.episodes.size(), 2u);
    EXPECT_TRUE(res.issues.empty());
}

TEST(Ingest, OverlappingAdSpansRejected) {
    auto res = parse_episodes(record("a", "CNN", "abcdefgh", "[[1,4],[3,6]]"), StationRegistry::defaults());
    EXPECT_TRUE(res.episodes.empty());
    ASSERT_EQ(res.issues.size(), 1u);
    EXPECT_EQ(res.issues[0].line, 1u);
    EXPECT_NE(res.issues[0].message.find("overlap"), std::string::npos);
}

TEST(Ingest, UnknownStationRejected) {
    auto res = parse_episodes(record("a", "QVC", "text."), StationRegistry::defaults());
    EXPECT_TRUE(res.episodes.empty());
    EXPECT_EQ(res.issues.size(), 1u);
}

TEST(Ingest, MalformedAndEmptyRecordsReportLine) {
    auto res = parse_episodes(record("a", "CNN", "ok.") + "\n{not json\n" + record("c", "CNN", ""),
                              StationRegistry::defaults());
    EXPECT_EQ(res.episodes.size(), 1u);
    ASSERT_EQ(res.issues.size(), 2u);
    EXPECT_EQ(res.issues[0].line, 2u);
    EXPECT_EQ(res.issues[1].line, 3u);
}

TEST(Ingest, RoundTripThroughJson) {
    auto ep = episode("Some text here.", {{0, 5}});
    auto res = parse_episodes(episode_to_json_line(ep), StationRegistry::defaults());
    ASSERT_EQ(res.episodes.size(), 1u);
    EXPECT_EQ(res.episodes[0].text, ep.text);
    EXPECT_EQ(res.episodes[0].ad_spans, ep.ad_spans);
    EXPECT_EQ(episode_to_json_line(res.episodes[0]), episode_to_json_line(ep));
}

TEST(StripAds, Examples) {
    EXPECT_EQ(strip_ads(episode("abcdef", {{2, 4}})), "abef");
    EXPECT_EQ(strip_ads(episode("abcdef")), "abcdef");
    auto all = episode("abcdef", {{0, 6}});
    EXPECT_EQ(strip_ads(all), "");
    EXPECT_TRUE(segment_episode(all).empty());
}

TEST(StripAds, CodePointOffsets) {
    // "é" is two bytes but one character.
    EXPECT_EQ(strip_ads(episode("caf\xC3\xA9 ad!", {{4, 8}})), "caf\xC3\xA9");
}

TEST(Segmenter, TenFortyWordSentences) {
    std::string text;
    for (int i = 0; i < 10; ++i) text += (i ? " " : "") + sentence(40);
    auto segs = pack_segments(text);
    EXPECT_EQ(word_counts(segs), (std::vector<std::size_t>{120, 120, 120, 40}));
    EXPECT_EQ(join(segs, " "), normalize_whitespace(text));
}

TEST(Segmenter, SentenceAtAndOverCap) {
    EXPECT_EQ(word_counts(pack_segments(sentence(150))), (std::vector<std::size_t>{150}));
    EXPECT_EQ(word_counts(pack_segments(sentence(151))), (std::vector<std::size_t>{150, 1}));
}

TEST(Segmenter, UnpunctuatedTextFallsBackToHardSplits) {
    std::string text = sentence(320);
    text.pop_back();
    EXPECT_EQ(word_counts(pack_segments(text)), (std::vector<std::size_t>{150, 150, 20}));
}

TEST(Segmenter, EmptyText) {
    EXPECT_TRUE(pack_segments("").empty());
    EXPECT_TRUE(pack_segments("   \n\t ").empty());
}

TEST(Segmenter, SegmentMetadataAndIds) {
    auto segs = segment_episode(episode(sentence(100) + " " + sentence(100)));
    ASSERT_EQ(segs.size(), 2u);
    EXPECT_EQ(segs[1].id(), "E1#1");
    EXPECT_EQ(segs[1].station.code, "CNN");
    EXPECT_EQ(segs[0].word_count, 100u);
}

TEST(Segmenter, FuzzedEpisodesRoundTrip) {
    std::mt19937_64 rng(17);
    const char* words[] = {"the", "border", "wall.", "Why?", "yes!", "ok", "x", "...", "a.b", "end."};
    for (int trial = 0; trial < 300; ++trial) {
        std::string text;
        std::size_t n = uniform_index(rng, 600);
        for (std::size_t i = 0; i < n; ++i) {
            text += words[uniform_index(rng, 10)];
            text += uniform_index(rng, 8) == 0 ? "\n  " : " ";
        }
        std::size_t cap = 1 + uniform_index(rng, 160);
        auto segs = pack_segments(text, cap);
        for (auto c : word_counts(segs)) {
            EXPECT_GE(c, 1u);
            EXPECT_LE(c, cap);
        }
        EXPECT_EQ(join(segs, " "), normalize_whitespace(text));
    }
}

TEST(Tokenize, Rules) {
    EXPECT_EQ(tokenize("Don't STOP--the U.S. border's wall'"),
              (std::vector<std::string>{"don't", "stop", "the", "u", "s", "border's", "wall"}));
    EXPECT_TRUE(tokenize("... --- !!!").empty());
}

TEST(Phrases, EmptyFilters) {
    auto c = count_phrases(tokenize("the border patrol"), {});
    EXPECT_EQ(c, (PhraseCounts{{"the", 1}, {"border", 1}, {"patrol", 1}, {"the border", 1}, {"border patrol", 1}}));
}

TEST(Phrases, StopwordsDropOnlyAllStopwordPhrases) {
    PhraseFilter f({"the"}, {});
    auto c = count_phrases(tokenize("the border patrol"), f);
    EXPECT_EQ(c, (PhraseCounts{{"border", 1}, {"patrol", 1}, {"the border", 1}, {"border patrol", 1}}));
    auto c2 = count_phrases(tokenize("of the wall"), PhraseFilter({"of", "the"}, {}));
    EXPECT_EQ(c2, (PhraseCounts{{"wall", 1}, {"the wall", 1}}));
}

TEST(Phrases, ConfoundersAreExcised) {
    PhraseFilter f({}, {"tucker carlson"});
    auto c = count_phrases(tokenize("tucker carlson tonight"), f);
    EXPECT_EQ(c, (PhraseCounts{{"tonight", 1}}));
    // Words outside a match survive and the remaining tokens become adjacent.
    auto c2 = count_phrases(tokenize("tucker said tucker carlson wins"), f);
    EXPECT_EQ(c2, (PhraseCounts{{"tucker", 1}, {"said", 1}, {"wins", 1}, {"tucker said", 1}, {"said wins", 1}}));
}

TEST(Phrases, FullyFilteredIsEmpty) {
    auto c = count_phrases(tokenize("the the"), PhraseFilter({"the"}, {}));
    EXPECT_TRUE(c.empty());
}

TEST(Phrases, TwoNMinusOne) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> toks;
        std::size_t n = 1 + uniform_index(rng, 40);
        for (std::size_t i = 0; i < n; ++i) toks.push_back("w" + std::to_string(uniform_index(rng, 6)));
        std::uint64_t total = 0;
        for (const auto& [_, k] : count_phrases(toks, {})) total += k;
        EXPECT_EQ(total, 2 * n - 1);
    }
}

TEST(Snapshot, DeterministicAndHashChecked) {
    std::string jsonl = record("b", "CNN", sentence(200)) + "\n" + record("a", "FNC", sentence(30));
    auto r1 = parse_episodes(jsonl, StationRegistry::defaults());
    auto r2 = parse_episodes(jsonl, StationRegistry::defaults());
    EXPECT_EQ(r1.episodes[0].id, "a");  // sorted by id
    auto b1 = encode_episodes(r1.episodes, 77), b2 = encode_episodes(r2.episodes, 77);
    EXPECT_EQ(b1, b2);
    auto segs = segment_corpus(r1.episodes, 150);
    auto s1 = encode_segments(segs, 5);
    EXPECT_EQ(s1, encode_segments(segment_corpus(r2.episodes, 150, 3), 5));
    auto back = decode_segments(s1, 5);
    ASSERT_EQ(back.size(), segs.size());
    EXPECT_EQ(back[1].text, segs[1].text);
    EXPECT_THROW(decode_segments(s1, 6), Error);
    EXPECT_EQ(decode_episodes(b1, 77)[1].text, r1.episodes[1].text);
}
