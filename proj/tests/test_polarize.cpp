#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "newslens/polarize.hpp"
#include "oracles.hpp"

using namespace newslens;
using oracle::Bag;

namespace {

std::vector<Bag> identical(std::size_t n, const Bag& bag) { return std::vector<Bag>(n, bag); }

double closed_form(double n) { return (n - 1) / (2 * n - 1); }

}  // namespace

TEST(Rho, PhraseOnlyInSourceIsOne) {
    auto s = oracle::make_group("s", {{{0, 3}}, {{0, 1}, {1, 1}}});
    auto t = oracle::make_group("t", {{{1, 2}}, {{1, 1}}});
    auto r = rho(s, t);
    EXPECT_DOUBLE_EQ(r.at(0), 1.0);
}

TEST(Rho, EqualFrequencyIsHalf) {
    auto s = oracle::make_group("s", {{{0, 2}, {1, 2}}, {{0, 1}}});
    auto t = oracle::make_group("t", {{{0, 3}, {1, 2}}, {{2, 1}}});
    EXPECT_DOUBLE_EQ(rho(s, t).at(0), 0.5);
}

TEST(Rho, FrequencyBasisHandExample) {
    // q_s = 1/10, q_t = 3/10 -> 0.25
    auto s = oracle::make_group("s", {{{0, 1}, {1, 4}}, {{1, 5}}});
    auto t = oracle::make_group("t", {{{0, 3}, {2, 2}}, {{2, 5}}});
    EXPECT_NEAR(rho(s, t, RhoBasis::frequencies).at(0), 0.25, 1e-15);
}

TEST(LeaveOut, ClosedFormForIdenticalSegments) {
    const Bag bag = {{0, 2}, {1, 1}, {2, 4}};
    for (std::size_t n : {2, 3, 5, 10}) {
        auto s = oracle::make_group("s", identical(n, bag));
        auto t = oracle::make_group("t", identical(n, bag));
        EXPECT_NEAR(leave_out_estimate(s, t).value, closed_form(static_cast<double>(n)), 1e-12) << n;
    }
    auto s = oracle::make_group("s", identical(5, bag));
    EXPECT_NEAR(leave_out_estimate(s, s).value, 4.0 / 9.0, 1e-15);
}

TEST(LeaveOut, DisjointVocabulariesGiveOne) {
    auto s = oracle::make_group("s", {{{0, 1}, {1, 2}}, {{0, 3}, {1, 1}}, {{0, 1}, {1, 1}}});
    auto t = oracle::make_group("t", {{{5, 2}}, {{5, 1}, {6, 1}}, {{6, 4}}});
    EXPECT_DOUBLE_EQ(leave_out_estimate(s, t).value, 1.0);
    EXPECT_DOUBLE_EQ(plug_in_estimate(s, t).value, 1.0);
}

TEST(LeaveOut, MatchesBruteForceOnRandomCorpora) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = oracle::random_bags(rng, 2 + trial * 3, 80, 30, true);
        auto b = oracle::random_bags(rng, 3 + trial * 2, 80, 30, true);
        if (std::count_if(a.begin(), a.end(), [](const Bag& x) { return !x.empty(); }) < 2) continue;
        if (std::count_if(b.begin(), b.end(), [](const Bag& x) { return !x.empty(); }) < 2) continue;
        auto s = oracle::make_group("s", a), t = oracle::make_group("t", b);
        for (bool freq : {false, true})
            for (bool drop : {false, true}) {
                EstimatorOptions opts{freq ? RhoBasis::frequencies : RhoBasis::counts,
                                      drop ? ZeroPolicy::drop : ZeroPolicy::neutral};
                auto fast = leave_out_estimate(s, t, opts);
                auto slow = oracle::brute_force(a, b, freq, drop);
                EXPECT_NEAR(fast.value, slow.value, 1e-12) << trial << freq << drop;
                auto fast_plug = plug_in_estimate(s, t, opts);
                EXPECT_NEAR(fast_plug.value, oracle::brute_force(a, b, freq, drop, true).value, 1e-12);
            }
    }
}

TEST(LeaveOut, SwappingGroupsKeepsValue) {
    std::mt19937_64 rng(5);
    auto a = oracle::random_bags(rng, 40, 60, 25), b = oracle::random_bags(rng, 30, 60, 25);
    auto s = oracle::make_group("s", a), t = oracle::make_group("t", b);
    EXPECT_NEAR(leave_out_estimate(s, t).value, leave_out_estimate(t, s).value, 1e-12);
}

TEST(LeaveOut, InputOrderDoesNotMatter) {
    std::mt19937_64 rng(6);
    auto a = oracle::random_bags(rng, 50, 60, 25), b = oracle::random_bags(rng, 50, 60, 25);
    auto v1 = leave_out_estimate(oracle::make_group("s", a), oracle::make_group("t", b)).value;
    std::vector<std::string> ids;
    std::vector<PhraseVector> vecs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%05zu", i);
        ids.push_back(buf);
        vecs.push_back(oracle::to_vector(a[i]));
    }
    std::reverse(ids.begin(), ids.end());
    std::reverse(vecs.begin(), vecs.end());
    GroupCorpus reversed("s", ids, vecs);
    EXPECT_EQ(v1, leave_out_estimate(reversed, oracle::make_group("t", b)).value);
}

TEST(LeaveOut, EmptySegmentsAreSkipped) {
    auto s = oracle::make_group("s", {{{0, 1}}, {}, {{0, 2}}});
    auto t = oracle::make_group("t", {{{1, 1}}, {{1, 1}}, {}});
    auto e = leave_out_estimate(s, t);
    EXPECT_EQ(e.n_source, 2u);
    EXPECT_EQ(e.n_target, 2u);
    EXPECT_DOUBLE_EQ(e.value, 1.0);
}

TEST(LeaveOut, RejectsGroupsTooSmall) {
    auto one = oracle::make_group("s", {{{0, 1}}});
    auto two = oracle::make_group("t", {{{0, 1}}, {{1, 1}}});
    auto empty = oracle::make_group("e", {{}, {}});
    EXPECT_THROW(leave_out_estimate(one, two), ValidationError);
    EXPECT_THROW(leave_out_estimate(two, empty), ValidationError);
}

TEST(LeaveOut, UnseenPhrasePolicies) {
    // Phrase 9 occurs only in the first source segment.
    auto s = oracle::make_group("s", {{{0, 1}, {9, 1}}, {{0, 1}}});
    auto t = oracle::make_group("t", {{{1, 1}}, {{1, 1}}});
    // neutral: first segment scores (1 + 0.5)/2
    EXPECT_NEAR(leave_out_estimate(s, t).source_mean, (0.75 + 1.0) / 2, 1e-15);
    EXPECT_NEAR(leave_out_estimate(s, t, {RhoBasis::counts, ZeroPolicy::drop}).source_mean, 1.0, 1e-15);
}

TEST(PlugIn, IdenticalCorporaGiveHalf) {
    const Bag bag = {{0, 1}, {1, 2}};
    auto s = oracle::make_group("s", identical(5, bag));
    EXPECT_DOUBLE_EQ(plug_in_estimate(s, oracle::make_group("t", identical(5, bag))).value, 0.5);
}

TEST(PlugIn, NotBelowLeaveOutOnPlaceboSplit) {
    std::mt19937_64 rng(8);
    auto all = oracle::random_bags(rng, 200, 300, 40);
    std::vector<Bag> a(all.begin(), all.begin() + 100), b(all.begin() + 100, all.end());
    auto s = oracle::make_group("s", a), t = oracle::make_group("t", b);
    EXPECT_GE(plug_in_estimate(s, t).value, leave_out_estimate(s, t).value);
}

TEST(PartisanScores, AnalyticCases) {
    auto s = oracle::make_group("s", {{{0, 1}}, {{0, 2}}});
    auto t = oracle::make_group("t", {{{1, 1}}, {{1, 3}}});
    for (const auto& sc : partisan_scores(s, t)) {
        EXPECT_DOUBLE_EQ(sc.own_group, 1.0);
        EXPECT_DOUBLE_EQ(sc.toward_source, sc.in_source ? 1.0 : 0.0);
    }
}

TEST(PartisanScores, EvenSplitScoresHalf) {
    // Each source segment's phrase has one other source and one target occurrence.
    auto s = oracle::make_group("s", {{{0, 1}}, {{0, 1}}});
    auto t = oracle::make_group("t", {{{0, 1}}, {{1, 1}}, {{1, 1}}});
    auto sc = partisan_scores(s, t);
    ASSERT_EQ(sc.size(), 5u);
    EXPECT_DOUBLE_EQ(sc[0].toward_source, 0.5);
    EXPECT_DOUBLE_EQ(sc[1].toward_source, 0.5);
    // Target segment {0}: two source occurrences, none left in the target.
    EXPECT_DOUBLE_EQ(sc[2].toward_source, 1.0);
    EXPECT_DOUBLE_EQ(sc[2].own_group, 0.0);
}

TEST(PartisanScores, MatchBruteForce) {
    std::mt19937_64 rng(12);
    auto a = oracle::random_bags(rng, 25, 40, 15), b = oracle::random_bags(rng, 20, 40, 15);
    auto scores = partisan_scores(oracle::make_group("s", a), oracle::make_group("t", b));
    auto brute = oracle::brute_force(a, b, false, false);
    ASSERT_EQ(scores.size(), a.size() + b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(scores[i].own_group, brute.source_scores[i], 1e-12);
    for (std::size_t i = 0; i < b.size(); ++i) {
        EXPECT_NEAR(scores[a.size() + i].own_group, brute.target_scores[i], 1e-12);
        EXPECT_NEAR(scores[a.size() + i].toward_source, 1.0 - brute.target_scores[i], 1e-12);
    }
}

TEST(Windows, CalendarWindows) {
    auto d = Date::parse("2017-08-15");
    EXPECT_EQ(window_of(d, {WindowKind::monthly, {}}).start, Date::parse("2017-08-01"));
    EXPECT_EQ(window_of(d, {WindowKind::monthly, {}}).end, Date::parse("2017-09-01"));
    EXPECT_EQ(window_of(d, {WindowKind::quarterly, {}}).start, Date::parse("2017-07-01"));
    EXPECT_EQ(window_of(d, {WindowKind::yearly, {}}).end, Date::parse("2018-01-01"));
    WindowSpec eras{WindowKind::era, {Date::parse("2016-01-01"), Date::parse("2020-01-01")}};
    EXPECT_EQ(window_of(d, eras).start, Date::parse("2016-01-01"));
    EXPECT_EQ(window_of(d, eras).end, Date::parse("2020-01-01"));
    EXPECT_EQ(window_of(Date::parse("2015-12-31"), eras).start, Date::parse("0001-01-01"));
    EXPECT_EQ(window_of(Date::parse("2020-01-01"), eras).end, Date::parse("9999-12-31"));
    EXPECT_THROW(parse_window_kind("weekly"), ValidationError);
}

namespace {

SeriesSegment seg(const std::string& id, const std::string& station, const std::string& date, ProgramCategory cat,
                  std::set<std::string> topics, const Bag& bag) {
    SeriesSegment s;
    s.id = id;
    s.station = station;
    s.air_date = Date::parse(date);
    s.category = cat;
    s.topics = std::move(topics);
    s.phrases = oracle::to_vector(bag);
    return s;
}

}  // namespace

TEST(Series, OneEstimatePerYearAndFilterEqualsPrefilter) {
    std::mt19937_64 rng(21);
    std::vector<SeriesSegment> segs;
    const char* stations[] = {"FNC", "ABC", "CBS", "NBC"};
    int k = 0;
    for (int year : {2015, 2016, 2017})
        for (int i = 0; i < 40; ++i) {
            auto bag = oracle::random_bags(rng, 1, 50, 20)[0];
            auto cat = i % 3 == 0 ? ProgramCategory::partisan_opinion : ProgramCategory::hard_news;
            std::set<std::string> topics;
            if (i % 2 == 0) topics.insert("russia");
            segs.push_back(seg("x" + std::to_string(k++), stations[i % 4], std::to_string(year) + "-03-0" + std::to_string(1 + i % 9),
                               cat, topics, bag));
        }
    PairSpec pair{"FNC", {"FNC"}, "broadcast", {"ABC", "CBS", "NBC"}};
    auto all = polarization_series(segs, pair, {WindowKind::yearly, {}}, {});
    ASSERT_EQ(all.size(), 3u);
    for (const auto& p : all) EXPECT_TRUE(p.estimate.has_value());

    SeriesFilter f{{ProgramCategory::hard_news}, std::string("russia")};
    auto filtered = polarization_series(segs, pair, {WindowKind::yearly, {}}, f);
    std::vector<SeriesSegment> pre;
    for (const auto& s : segs)
        if (s.category == ProgramCategory::hard_news && s.topics.count("russia")) pre.push_back(s);
    auto expected = polarization_series(pre, pair, {WindowKind::yearly, {}}, {});
    ASSERT_EQ(filtered.size(), expected.size());
    for (std::size_t i = 0; i < filtered.size(); ++i) {
        EXPECT_EQ(filtered[i].n_source, expected[i].n_source);
        ASSERT_EQ(filtered[i].estimate.has_value(), expected[i].estimate.has_value());
        if (filtered[i].estimate) {
            EXPECT_EQ(filtered[i].estimate->value, expected[i].estimate->value);
        }
    }
}

TEST(Series, SparseWindowIsFlagged) {
    std::vector<SeriesSegment> segs = {
        seg("a", "FNC", "2015-01-02", ProgramCategory::hard_news, {}, {{0, 1}}),
        seg("b", "FNC", "2015-01-03", ProgramCategory::hard_news, {}, {{0, 1}}),
        seg("c", "ABC", "2015-01-02", ProgramCategory::hard_news, {}, {{1, 1}}),
    };
    auto pts = polarization_series(segs, {"FNC", {"FNC"}, "ABC", {"ABC"}}, {WindowKind::yearly, {}}, {});
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_FALSE(pts[0].estimate.has_value());
    EXPECT_EQ(pts[0].n_target, 1u);
}
