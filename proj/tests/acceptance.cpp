// Acceptance checks. Each criterion prints one PASS/FAIL line; the exit
// status is non-zero when any selected criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "newslens/annotation.hpp"
#include "newslens/classify.hpp"
#include "newslens/fixture.hpp"
#include "newslens/metrics.hpp"
#include "newslens/pipeline.hpp"
#include "newslens/polarize.hpp"
#include "oracles.hpp"

using namespace newslens;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(line);
    return out;
}

std::vector<oracle::Bag> identical(std::size_t n, const oracle::Bag& bag) { return std::vector<oracle::Bag>(n, bag); }

// --- estimator ----------------------------------------------------------------

Outcome leave_out_closed_form() {
    auto t0 = Clock::now();
    double worst = 0;
    for (std::size_t n : {2, 3, 5, 10}) {
        const oracle::Bag bag = {{0, 2}, {1, 1}, {2, 4}};
        auto s = oracle::make_group("s", identical(n, bag));
        auto t = oracle::make_group("t", identical(n, bag));
        const double expect = static_cast<double>(n - 1) / static_cast<double>(2 * n - 1);
        worst = std::max(worst, std::abs(leave_out_estimate(s, t).value - expect));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 1.0, "max |err| " + num(worst) + ", " + num(secs, 3) + " s"};
}

Outcome leave_out_oracle() {
    auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t ns = 2 + uniform_index(rng, 99), nt = 2 + uniform_index(rng, 99);  // <= 200 total
        std::uint32_t vocab = 2 + static_cast<std::uint32_t>(uniform_index(rng, 499));
        auto a = oracle::random_bags(rng, ns, vocab, 30), b = oracle::random_bags(rng, nt, vocab, 30);
        auto s = oracle::make_group("s", a), t = oracle::make_group("t", b);
        for (bool freq : {false, true})
            for (bool drop : {false, true}) {
                EstimatorOptions o;
                o.basis = freq ? RhoBasis::frequencies : RhoBasis::counts;
                o.zero = drop ? ZeroPolicy::drop : ZeroPolicy::neutral;
                double fast = leave_out_estimate(s, t, o).value;
                worst = std::max(worst, std::abs(fast - oracle::brute_force(a, b, freq, drop).value));
            }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 30.0, "max |fast - brute| " + num(worst) + ", " + num(secs, 3) + " s"};
}

Outcome bounds_symmetry() {
    std::mt19937_64 rng(202);
    double worst_swap = 0;
    std::size_t out_of_range = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::uint32_t vocab = 1 + static_cast<std::uint32_t>(uniform_index(rng, 200));
        auto a = oracle::random_bags(rng, 2 + uniform_index(rng, 40), vocab, 20, true);
        auto b = oracle::random_bags(rng, 2 + uniform_index(rng, 40), vocab, 20, true);
        // Keep at least two non-empty segments per group.
        a[0][0] += 1, a[1][0] += 1, b[0][0] += 1, b[1][0] += 1;
        auto s = oracle::make_group("s", a), t = oracle::make_group("t", b);
        double v = leave_out_estimate(s, t).value;
        if (!(v >= 0.0 && v <= 1.0)) ++out_of_range;
        worst_swap = std::max(worst_swap, std::abs(v - leave_out_estimate(t, s).value));
    }
    // Disjoint vocabularies, every phrase in at least two same-group segments.
    double disjoint_min = 1.0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<oracle::Bag> a, b;
        std::size_t n = 2 + uniform_index(rng, 20);
        for (std::size_t i = 0; i < n; ++i) {
            a.push_back({{0, 1 + static_cast<std::uint32_t>(uniform_index(rng, 3))}, {1, 1}});
            b.push_back({{100, 1}, {101, 1 + static_cast<std::uint32_t>(uniform_index(rng, 3))}});
        }
        disjoint_min = std::min(disjoint_min, leave_out_estimate(oracle::make_group("s", a), oracle::make_group("t", b)).value);
    }
    bool ok = out_of_range == 0 && worst_swap < 1e-12 && disjoint_min == 1.0;
    return {ok, std::to_string(out_of_range) + " out of [0,1], max swap diff " + num(worst_swap) + ", disjoint min " +
                    num(disjoint_min, 17)};
}

Outcome placebo() {
    auto t0 = Clock::now();
    std::mt19937_64 rng(303);
    // One homogeneous corpus: every segment drawn from the same Zipf-like law.
    const std::size_t n = 600;
    const std::uint32_t vocab = 3000;
    std::vector<double> cdf(vocab);
    double acc = 0;
    for (std::uint32_t k = 0; k < vocab; ++k) cdf[k] = acc += 1.0 / (k + 1.0);
    std::vector<oracle::Bag> corpus(n);
    for (auto& bag : corpus) {
        std::size_t len = 30 + uniform_index(rng, 60);
        for (std::size_t k = 0; k < len; ++k) {
            double u = uniform_unit(rng) * acc;
            ++bag[static_cast<std::uint32_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin())];
        }
    }
    double sum = 0;
    int plug_ge = 0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        portable_shuffle(idx, rng);
        std::vector<oracle::Bag> a, b;
        for (std::size_t i = 0; i < n; ++i) (i < n / 2 ? a : b).push_back(corpus[idx[i]]);
        auto s = oracle::make_group("s", a), t = oracle::make_group("t", b);
        double lo = leave_out_estimate(s, t).value;
        sum += lo;
        if (plug_in_estimate(s, t).value >= lo) ++plug_ge;
    }
    const double mean = sum / 50, secs = seconds_since(t0);
    bool ok = mean >= 0.49 && mean <= 0.51 && plug_ge >= 48 && secs < 60.0;
    return {ok, "mean " + num(mean) + ", plug-in >= leave-out in " + std::to_string(plug_ge) + "/50, " +
                    num(secs, 3) + " s"};
}

// --- divergence -------------------------------------------------------------

Outcome divergence_properties() {
    std::mt19937_64 rng(404);
    std::size_t bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t k = 1 + uniform_index(rng, 30);
        std::vector<double> a(k), b(k);
        for (auto& v : a) v = uniform_unit(rng);
        for (auto& v : b) v = uniform_unit(rng);
        double ab = divergence(a, b), ba = divergence(b, a);
        if (divergence(a, a) != 0.0 || ab != ba || ab < 0.0 || ab > 1.0) ++bad;
    }
    std::vector<double> x = {0.2, 0.1}, y = {0.1, 0.3};
    const double hand = divergence(x, y);
    // (|0.2-0.1| + |0.1-0.3|) / 2 in the same floating-point order.
    const double expect = (std::abs(0.2 - 0.1) + std::abs(0.1 - 0.3)) / 2;
    bool ok = bad == 0 && hand == expect && std::abs(hand - 0.15) < 1e-15;
    return {ok, std::to_string(bad) + " property violations, hand example " + num(hand, 17)};
}

// --- segmenter --------------------------------------------------------------

Outcome segmenter() {
    std::mt19937_64 rng(505);
    const char* words[] = {"the", "border", "wall.", "Why?", "yes!", "ok", "x", "...", "a.b", "end.", "U.S.", "don't"};
    std::size_t over = 0, roundtrip = 0, phrase = 0, segments = 0;
    for (int ep = 0; ep < 10000; ++ep) {
        std::string text;
        std::size_t n = uniform_index(rng, 800);
        for (std::size_t i = 0; i < n; ++i) {
            text += words[uniform_index(rng, 12)];
            text += uniform_index(rng, 10) == 0 ? "\n " : " ";
        }
        auto segs = pack_segments(text, 150);
        segments += segs.size();
        for (const auto& s : segs) {
            if (split_ws(s).size() > 150) ++over;
            auto toks = tokenize(s);
            if (toks.empty()) continue;
            std::uint64_t total = 0;
            for (const auto& [_, c] : count_phrases(toks, {})) total += c;
            if (total != 2 * toks.size() - 1) ++phrase;
        }
        if (join(segs, " ") != normalize_whitespace(text)) ++roundtrip;
    }
    bool ok = over == 0 && roundtrip == 0 && phrase == 0;
    return {ok, std::to_string(segments) + " segments; " + std::to_string(over) + " over 150 words, " +
                    std::to_string(roundtrip) + " round-trip failures, " + std::to_string(phrase) +
                    " phrase-total mismatches"};
}

// --- weak supervision ---------------------------------------------------------

Outcome weak_layer(const std::string& work_dir) {
    auto t0 = Clock::now();
    PlantedOptions po;
    po.topics = 24;
    PlantedGenerator gen(po);
    auto planted = gen.generate(50000);
    const auto topics = gen.topic_labels();
    std::vector<std::string> ids;
    for (const auto& t : topics) ids.push_back(t.id);

    fs::remove_all(work_dir);
    fs::create_directories(work_dir);
    // Each planted segment becomes a one-segment episode.
    std::string eps;
    std::map<std::string, std::vector<std::string>> truth;
    std::map<std::string, std::vector<std::size_t>> truth_idx;
    for (std::size_t i = 0; i < planted.size(); ++i) {
        const auto& p = planted[i];
        Episode e;
        e.id = p.id;
        e.station = {p.station};
        e.program_title = "Planted";
        e.category = ProgramCategory::hard_news;
        e.air_date = Date::parse("2016-01-01").add_days(static_cast<std::int64_t>(i % 365));
        e.duration_min = 30;
        e.text = join(p.tokens, " ");
        eps += episode_to_json_line(e) + "\n";
        const std::string sid = p.id + "#0";
        for (auto z : p.topics) truth[sid].push_back(ids[z]);
        truth_idx[sid] = p.topics;
    }
    write_file(work_dir + "/episodes.jsonl", eps);

    json per_topic = json::object();
    for (std::size_t z = 0; z < ids.size(); ++z) per_topic[ids[z]] = gen.review_removals(z);
    json jt = json::array();
    for (const auto& t : topics) jt.push_back({{"id", t.id}, {"label_words", t.label_words}});
    json cfgj = {{"topics", jt},
                 {"dictionary", {{"removals", {{"per_topic", per_topic}}}}},
                 {"paths", {{"episodes", "episodes.jsonl"}, {"records", "records.jsonl"}, {"work", "work"}}}};
    auto cfg = parse_config(cfgj.dump(), work_dir);
    Pipeline p(cfg);
    p.run_through(Stage::sample_annotation);
    auto tasks = load_tasks(p.work_path("tasks.jsonl"));
    SimulatedAnnotators sim;
    std::string recs;
    for (const auto& r : simulate_annotations(tasks, truth, sim)) recs += record_to_json_line(r) + "\n";
    write_file(cfg.paths.records, recs);
    p.run_through(Stage::refine);

    // Layer-1 assignments and refined memberships against the generator's truth.
    std::vector<std::size_t> l1_tp(ids.size()), l1_n(ids.size()), l2_tp(ids.size()), l2_n(ids.size()),
        pos(ids.size());
    std::size_t recall_hit = 0, recall_all = 0;
    for (const auto& line : split_lines(read_file(p.work_path("weak_labels.jsonl")))) {
        auto w = weak_label_from_json_line(line, ids, cfg.weak.threshold);
        const auto& t = truth_idx.at(w.segment_id);
        std::set<std::size_t> assigned(w.assigned.begin(), w.assigned.end());
        for (auto z : t) {
            ++pos[z];
            ++recall_all;
            if (assigned.count(z)) ++recall_hit;
        }
        for (auto z : assigned) {
            ++l1_n[z];
            if (std::find(t.begin(), t.end(), z) != t.end()) ++l1_tp[z];
        }
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t z = 0; z < ids.size(); ++z) index[ids[z]] = z;
    for (const auto& line : split_lines(read_file(p.work_path("refined.jsonl")))) {
        auto j = json::parse(line);
        const auto& t = truth_idx.at(j.at("segment_id").get<std::string>());
        for (const auto& id : j.at("topics")) {
            auto z = index.at(id.get<std::string>());
            ++l2_n[z];
            if (std::find(t.begin(), t.end(), z) != t.end()) ++l2_tp[z];
        }
    }
    std::size_t improved = 0;
    double min_recall = 1.0, mean_p1 = 0, mean_p2 = 0;
    for (std::size_t z = 0; z < ids.size(); ++z) {
        double p1 = l1_n[z] ? static_cast<double>(l1_tp[z]) / l1_n[z] : 0.0;
        double p2 = l2_n[z] ? static_cast<double>(l2_tp[z]) / l2_n[z] : 0.0;
        mean_p1 += p1 / ids.size();
        mean_p2 += p2 / ids.size();
        if (p2 > p1) ++improved;
        min_recall = std::min(min_recall, pos[z] ? static_cast<double>(l1_tp[z]) / pos[z] : 1.0);
    }
    const double recall = static_cast<double>(recall_hit) / static_cast<double>(recall_all);
    const double secs = seconds_since(t0);
    bool ok = recall >= 0.90 && improved >= 20 && secs < 600.0;
    return {ok, std::to_string(planted.size()) + " segments; layer-1 recall " + num(recall) + " (lowest topic " +
                    num(min_recall) + "), mean precision " + num(mean_p1, 4) + " -> " + num(mean_p2, 4) +
                    ", improved in " + std::to_string(improved) + "/24 topics, " +
                    num(secs, 4) + " s"};
}

// --- classifier ----------------------------------------------------------------

Outcome logistic_gradient_folds() {
    std::mt19937_64 rng(606);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const std::uint32_t dims = 2 + static_cast<std::uint32_t>(uniform_index(rng, 15));
        std::vector<Example> data(5 + uniform_index(rng, 40));
        for (auto& e : data) {
            for (std::uint32_t d = 0; d < dims; ++d)
                if (uniform_unit(rng) < 0.5) e.x.entries.emplace_back(d, g(rng));
            e.y = uniform_unit(rng) < 0.5;
        }
        std::vector<double> w(dims);
        for (auto& v : w) v = g(rng);
        const double b = g(rng), lambda = std::pow(10.0, -4 + 5 * uniform_unit(rng));
        std::vector<double> gw;
        double gb = 0;
        regularized_logistic_loss(data, w, b, lambda, &gw, &gb);
        const double h = 1e-5;
        double num2 = 0, den = 0;
        for (std::uint32_t d = 0; d <= dims; ++d) {
            double plus, minus;
            if (d < dims) {
                auto wp = w, wm = w;
                wp[d] += h;
                wm[d] -= h;
                plus = regularized_logistic_loss(data, wp, b, lambda);
                minus = regularized_logistic_loss(data, wm, b, lambda);
            } else {
                plus = regularized_logistic_loss(data, w, b + h, lambda);
                minus = regularized_logistic_loss(data, w, b - h, lambda);
            }
            const double fd = (plus - minus) / (2 * h), an = d < dims ? gw[d] : gb;
            num2 += (an - fd) * (an - fd);
            den += an * an;
        }
        worst = std::max(worst, std::sqrt(num2 / den));
    }
    std::size_t fold_errors = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 5 + uniform_index(rng, 300);
        std::vector<int> y(n);
        for (auto& v : y) v = uniform_unit(rng) < 0.4;
        auto folds = stratified_folds(y, 5, trial);
        std::vector<std::size_t> size(5, 0);
        bool ok = folds.size() == n;
        for (auto f : folds) {
            if (f >= 5) ok = false;
            else ++size[f];
        }
        auto [lo, hi] = std::minmax_element(size.begin(), size.end());
        if (!ok || *hi - *lo > 1) ++fold_errors;
    }
    return {worst <= 1e-6 && fold_errors == 0,
            "max relative gradient error " + num(worst) + ", " + std::to_string(fold_errors) + " bad fold partitions"};
}

// --- annotation -------------------------------------------------------------

Outcome annotation_aggregation() {
    struct Row {
        std::vector<std::string> choices;
        LabelStatus status;
        std::string choice;
    };
    const std::vector<Row> table = {
        {{"A", "A", "A", "none"}, LabelStatus::resolved, "A"},
        {{"A", "A", "B", "B"}, LabelStatus::needs_more, ""},
        {{"A", "A", "B", "B", "A"}, LabelStatus::resolved, "A"},
        {{"A", "A", "A"}, LabelStatus::needs_more, ""},
        {{"A", "B", "B", "B"}, LabelStatus::resolved, "B"},
        {{"A", "A", "B", "C"}, LabelStatus::needs_more, ""},
        {{"A", "A", "A", "B", "B", "B", "C"}, LabelStatus::dropped, ""},
    };
    std::size_t wrong = 0;
    for (const auto& r : table) {
        auto g = aggregate_choices(r.choices);
        if (g.status != r.status || (r.status == LabelStatus::resolved && g.choice != r.choice)) ++wrong;
    }
    std::mt19937_64 rng(707);
    std::vector<AnnotationTask> tasks;
    std::vector<AnnotationRecord> records;
    const char* opts[] = {"a", "b", "c", "none"};
    for (int t = 0; t < 60; ++t) {
        AnnotationTask task;
        task.task_id = "t" + std::to_string(t);
        task.segment_id = "s" + std::to_string(t);
        task.station = "CNN";
        task.topic_id = "a";
        task.candidates = {"a", "b", "c"};
        tasks.push_back(task);
        int n = 3 + static_cast<int>(uniform_index(rng, 6));
        for (int k = 0; k < n; ++k)
            records.push_back({task.task_id, "u" + std::to_string(uniform_index(rng, 9)),
                               opts[uniform_index(rng, 4)], "2024-01-0" + std::to_string(1 + uniform_index(rng, 9))});
    }
    const auto base = aggregate(records, tasks, {}).labels;
    std::size_t differing = 0;
    for (int p = 0; p < 100; ++p) {
        portable_shuffle(records, rng);
        if (aggregate(records, tasks, {}).labels != base) ++differing;
    }
    return {wrong == 0 && differing == 0, std::to_string(table.size() - wrong) + "/" + std::to_string(table.size()) +
                                              " truth-table rows, " + std::to_string(differing) +
                                              "/100 permutations changed the result"};
}

// --- consumption ---------------------------------------------------------------

Outcome consumption() {
    struct Hand {
        const char* id;
        double weight, total;
        std::map<std::string, double> minutes;
        const char* flags;  // A active, F/f FNC >= .5/.75, C/c cable, B/b broadcast
    };
    // Flags worked out by hand from the minutes.
    const std::vector<Hand> hand = {
        {"p01", 1, 0, {}, ""},
        {"p02", 1, 30, {{"FNC", 30}}, "AFfCc"},
        {"p03", 2, 29, {{"FNC", 29}}, ""},
        {"p04", 1, 60, {{"FNC", 30}, {"CNN", 30}}, "AFCc"},
        {"p05", 1, 100, {{"FNC", 74}}, "AFC"},
        {"p06", 2, 100, {{"FNC", 75}}, "AFfCc"},
        {"p07", 1, 40, {{"CNN", 40}}, "ACc"},
        {"p08", 1, 90, {{"ABC", 30}, {"CBS", 30}, {"NBC", 30}}, "ABb"},
        {"p09", 2, 45, {{"MSNBC", 20}, {"CNN", 10}}, "AC"},
        {"p10", 1, 200, {}, "A"},
        {"p11", 1, 30, {{"FNC", 14}, {"CNN", 16}}, "ACc"},
        {"p12", 2, 31, {{"FNC", 16}}, "AFC"},
        {"p13", 1, 10, {{"FNC", 10}}, ""},
        {"p14", 1, 120, {{"FNC", 60}, {"ABC", 60}}, "AFCB"},
        {"p15", 2, 50, {{"NBC", 40}}, "ABb"},
        {"p16", 1, 80, {{"FNC", 20}, {"MSNBC", 20}, {"CNN", 20}}, "ACc"},
        {"p17", 1, 35, {{"CBS", 17.5}}, "AB"},
        {"p18", 2, 300, {{"FNC", 225}}, "AFfCc"},
        {"p19", 1, 29.99, {{"CNN", 29.99}}, ""},
        {"p20", 1, 70, {{"ABC", 10}, {"CBS", 10}, {"NBC", 10}, {"FNC", 40}}, "AFC"},
    };
    const YearMonth month = YearMonth::parse("2018-06");
    std::vector<PanelRecord> panel;
    double wsum = 0;
    for (const auto& h : hand) {
        PanelRecord r;
        r.panelist_id = h.id;
        r.month = month;
        r.minutes = h.minutes;
        r.total_news_minutes = h.total;
        r.total_tv_minutes = h.total + 60;
        r.weight = h.weight;
        validate_panel_record(r);
        panel.push_back(r);
        wsum += h.weight;
    }
    auto expected = [&](char flag) {
        double s = 0;
        for (const auto& h : hand)
            if (std::string(h.flags).find(flag) != std::string::npos) s += h.weight;
        return s / wsum;
    };
    const std::set<std::string> fnc = {"FNC"}, cable = {"CNN", "FNC", "MSNBC"}, broadcast = {"ABC", "CBS", "NBC"};
    std::size_t hand_bad = 0;
    auto check = [&](double got, double want) { hand_bad += std::abs(got - want) > 1e-12; };
    check(active_consumers(panel, month).share, expected('A'));
    check(majority_share(panel, month, fnc, 0.5).share, expected('F'));
    check(majority_share(panel, month, fnc, 0.75).share, expected('f'));
    check(majority_share(panel, month, cable, 0.5).share, expected('C'));
    check(majority_share(panel, month, cable, 0.75).share, expected('c'));
    check(majority_share(panel, month, broadcast, 0.5).share, expected('B'));
    check(majority_share(panel, month, broadcast, 0.75).share, expected('b'));

    // The panelist at exactly 30 minutes is active; 29.99 is not.
    std::vector<PanelRecord> edge(panel.begin() + 1, panel.begin() + 2);
    edge.push_back(panel[18]);
    const bool boundary = active_consumers(edge, month).numerator == 1.0;

    std::mt19937_64 rng(808);
    const std::vector<std::string> stations = {"ABC", "CBS", "NBC", "CNN", "FNC", "MSNBC"};
    std::size_t mono_bad = 0, pool_bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<PanelRecord> fz;
        std::size_t n = 1 + uniform_index(rng, 40);
        for (std::size_t i = 0; i < n; ++i) {
            PanelRecord r;
            r.panelist_id = "z" + std::to_string(i);
            r.month = month;
            double sum = 0;
            for (const auto& st : stations)
                if (uniform_unit(rng) < 0.5) sum += r.minutes[st] = std::floor(uniform_unit(rng) * 90);
            r.total_news_minutes = sum + std::floor(uniform_unit(rng) * 30);
            r.total_tv_minutes = r.total_news_minutes + 10;
            r.weight = 0.1 + uniform_unit(rng);
            fz.push_back(r);
        }
        // A random set and a random superset of it.
        std::set<std::string> small, big;
        for (const auto& st : stations) {
            double u = uniform_unit(rng);
            if (u < 0.3) small.insert(st);
            if (u < 0.7) big.insert(st);
        }
        for (const auto& set : {small, big}) {
            if (majority_share(fz, month, set, 0.75).share > majority_share(fz, month, set, 0.5).share) ++mono_bad;
        }
        for (double th : {0.5, 0.75})
            if (majority_share(fz, month, small, th).share > majority_share(fz, month, big, th).share) ++pool_bad;
    }
    bool ok = hand_bad == 0 && boundary && mono_bad == 0 && pool_bad == 0;
    return {ok, std::to_string(7 - hand_bad) + "/7 hand shares, 30-minute boundary " +
                    (boundary ? "counted" : "missed") + ", " + std::to_string(mono_bad) + " monotonicity and " +
                    std::to_string(pool_bad) + " pool-dominance violations over 1000 panels"};
}

// --- end to end -----------------------------------------------------------------

int sh(const std::string& cmd) {
    int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome e2e_determinism(const std::string& cli, const std::string& work_dir) {
    if (cli.empty()) return {false, "no CLI path given (--cli)"};
    auto t0 = Clock::now();
    std::vector<fs::path> dirs = {fs::path(work_dir) / "run_a", fs::path(work_dir) / "run_b"};
    for (const auto& d : dirs) {
        fs::remove_all(d);
        const std::string c = " -c " + (d / "newslens.json").string();
        if (sh(cli + " fixture --out " + d.string()) != 0 || sh(cli + " run --through sample-annotation" + c) != 0 ||
            sh(cli + " simulate-annotations --truth " + (d / "truth.jsonl").string() + c) != 0 ||
            sh(cli + " run" + c) != 0)
            return {false, "pipeline failed in " + d.string()};
    }
    std::size_t files = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(dirs[0] / "exports")) {
        ++files;
        auto other = dirs[1] / "exports" / entry.path().filename();
        if (!fs::exists(other) || read_file(entry.path().string()) != read_file(other.string())) ++differing;
    }
    std::size_t files_b = std::distance(fs::directory_iterator(dirs[1] / "exports"), fs::directory_iterator());
    bool ok = files > 0 && differing == 0 && files == files_b;
    return {ok, std::to_string(files) + " export files, " + std::to_string(differing) + " differ, " +
                    num(seconds_since(t0), 4) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"newslens acceptance checks"};
    std::vector<std::string> only;
    std::string cli, work = (fs::temp_directory_path() / "newslens_acceptance").string();
    app.add_option("--only", only, "Run just these criteria");
    app.add_option("--cli", cli, "Path to the newslens executable");
    app.add_option("--work", work, "Scratch directory")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"leave_out_closed_form", leave_out_closed_form},
        {"leave_out_oracle", leave_out_oracle},
        {"bounds_symmetry", bounds_symmetry},
        {"placebo", placebo},
        {"divergence_properties", divergence_properties},
        {"segmenter", segmenter},
        {"weak_layer", [&] { return weak_layer(work + "/weak_layer"); }},
        {"logistic_gradient_folds", logistic_gradient_folds},
        {"annotation_aggregation", annotation_aggregation},
        {"consumption", consumption},
        {"e2e_determinism", [&] { return e2e_determinism(cli, work + "/e2e"); }},
    };
    for (const auto& name : only) {
        bool known = false;
        for (const auto& [n, _] : criteria) known |= n == name;
        if (!known) {
            std::cerr << "unknown criterion '" << name << "'\n";
            return 2;
        }
    }
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
