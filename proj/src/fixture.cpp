#include "newslens/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace newslens {

namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "h", "k", "l", "m", "n", "p",
                                   "r", "s", "t", "v", "z", "br", "dr", "gr", "tr", "st"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};

std::vector<double> zipf_cdf(std::size_t n, double s) {
    std::vector<double> cdf(n);
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += 1.0 / std::pow(static_cast<double>(i + 1), s);
        cdf[i] = acc;
    }
    for (double& c : cdf) c /= acc;
    return cdf;
}

std::size_t draw_cdf(const std::vector<double>& cdf, std::mt19937_64& rng) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), uniform_unit(rng));
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

// Index ranges keep the vocabularies disjoint.
constexpr std::uint64_t kTopicBase = 200000;
constexpr std::uint64_t kDialectBase = 400000;
constexpr std::uint64_t kNameBase = 600000;

}  // namespace

std::string pseudo_word(std::uint64_t index) {
    std::string w;
    for (int i = 0; i < 3; ++i) {
        std::uint64_t syl = index % 100;
        index /= 100;
        w += kOnsets[syl / 5];
        w += kVowels[syl % 5];
    }
    // Larger indices get extra syllables so words stay unique.
    while (index > 0) {
        std::uint64_t syl = index % 100;
        index /= 100;
        w += kOnsets[syl / 5];
        w += kVowels[syl % 5];
    }
    return w;
}

PlantedGenerator::PlantedGenerator(PlantedOptions opts) : opts_(std::move(opts)) {
    if (opts_.topics == 0 || opts_.words_per_topic == 0 || opts_.general_vocabulary == 0)
        throw Error("planted generator needs topics and vocabularies");
    if (opts_.stations.empty()) throw Error("planted generator needs stations");
    if (opts_.min_words == 0 || opts_.min_words > opts_.max_words) throw Error("bad segment length range");
    for (std::size_t i = 0; i < opts_.general_vocabulary; ++i) general_.push_back(pseudo_word(i));
    for (std::size_t t = 0; t < opts_.topics; ++t) {
        PlantedTopic topic;
        char id[16];
        std::snprintf(id, sizeof id, "topic%02zu", t + 1);
        topic.id = id;
        for (std::size_t j = 0; j < opts_.words_per_topic; ++j)
            topic.words.push_back(pseudo_word(kTopicBase + t * 1000 + j));
        topic.label_word = topic.words.front();
        topics_.push_back(std::move(topic));
    }
    general_cdf_ = zipf_cdf(general_.size(), 1.0);
    topic_cdf_ = zipf_cdf(opts_.words_per_topic, 0.6);
}

std::vector<TopicLabel> PlantedGenerator::topic_labels() const {
    std::vector<TopicLabel> out;
    for (const auto& t : topics_) out.push_back({t.id, {t.label_word}});
    return out;
}

std::string PlantedGenerator::general_word(std::mt19937_64& rng) const {
    return general_[draw_cdf(general_cdf_, rng)];
}

std::string PlantedGenerator::topic_word(std::size_t topic, std::mt19937_64& rng) const {
    return topics_[topic].words[draw_cdf(topic_cdf_, rng)];
}

std::vector<std::size_t> PlantedGenerator::draw_truth(std::mt19937_64& rng) const {
    std::vector<std::size_t> truth;
    if (uniform_unit(rng) >= opts_.topic_fraction) return truth;
    truth.push_back(uniform_index(rng, opts_.topics));
    if (opts_.topics > 1 && uniform_unit(rng) < opts_.multilabel_fraction) {
        std::size_t second = uniform_index(rng, opts_.topics - 1);
        if (second >= truth[0]) ++second;
        truth.push_back(second);
    }
    std::sort(truth.begin(), truth.end());
    return truth;
}

std::vector<std::string> PlantedGenerator::make_tokens(const std::vector<std::size_t>& truth, std::size_t length,
                                                       std::mt19937_64& rng, const Substitute& substitute) const {
    std::vector<std::string> tokens;
    tokens.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
        if (!truth.empty() && uniform_unit(rng) < opts_.topic_word_rate) {
            tokens.push_back(topic_word(truth[uniform_index(rng, truth.size())], rng));
            continue;
        }
        std::string w = general_word(rng);
        if (substitute) substitute(rng, w);
        tokens.push_back(std::move(w));
    }
    // A passing mention: a short run of words from a topic the segment is not about.
    if (opts_.topics > truth.size() && uniform_unit(rng) < opts_.mention_fraction) {
        std::size_t topic;
        do topic = uniform_index(rng, opts_.topics);
        while (std::find(truth.begin(), truth.end(), topic) != truth.end());
        std::size_t run = opts_.mention_min + uniform_index(rng, opts_.mention_max - opts_.mention_min + 1);
        run = std::min(run, length);
        std::size_t at = uniform_index(rng, length - run + 1);
        for (std::size_t i = 0; i < run; ++i) tokens[at + i] = topic_word(topic, rng);
    }
    return tokens;
}

std::vector<PlantedSegment> PlantedGenerator::generate(std::size_t n) const {
    std::vector<PlantedSegment> out;
    out.reserve(n);
    std::mt19937_64 rng(opts_.seed);
    const std::size_t span = opts_.max_words - opts_.min_words + 1;
    for (std::size_t i = 0; i < n; ++i) {
        PlantedSegment s;
        char id[32];
        std::snprintf(id, sizeof id, "seg%07zu", i + 1);
        s.id = id;
        s.station = opts_.stations[i % opts_.stations.size()];
        s.topics = draw_truth(rng);
        s.tokens = make_tokens(s.topics, opts_.min_words + uniform_index(rng, span), rng);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::string> PlantedGenerator::review_removals(std::size_t topic) const {
    std::vector<std::string> out = general_;
    for (std::size_t t = 0; t < topics_.size(); ++t)
        if (t != topic) out.insert(out.end(), topics_[t].words.begin(), topics_[t].words.end());
    return out;
}

// --- episode fixture ---------------------------------------------------------

namespace {

struct StationStyle {
    std::string code;
    double lean_sign;  // +1 toward the "right" variants, -1 toward the "left", 0 mixed
    std::vector<std::pair<std::string, ProgramCategory>> programs;
};

std::vector<StationStyle> station_styles(const std::vector<std::string>& stations) {
    std::vector<StationStyle> out;
    for (const auto& code : stations) {
        StationStyle s{code, 0.0, {}};
        if (code == "FNC") s.lean_sign = 1.0;
        if (code == "CNN" || code == "MSNBC") s.lean_sign = -1.0;
        const bool cable = s.lean_sign != 0.0;
        s.programs.push_back({code + " Evening Report", ProgramCategory::hard_news});
        s.programs.push_back(
            {code + (cable ? " Tonight" : " Sunday Morning"),
             cable ? ProgramCategory::partisan_opinion : ProgramCategory::talk_show});
        out.push_back(std::move(s));
    }
    return out;
}

// Sentences of 6..14 words, first letter capitalized, period at the end.
std::string render_story(const std::vector<std::string>& tokens, std::mt19937_64& rng) {
    std::string text;
    std::size_t i = 0;
    while (i < tokens.size()) {
        std::size_t len = std::min<std::size_t>(6 + uniform_index(rng, 9), tokens.size() - i);
        for (std::size_t j = 0; j < len; ++j) {
            std::string w = tokens[i + j];
            if (j == 0 && !w.empty()) w[0] = static_cast<char>(w[0] - 'a' + 'A');
            if (j + 1 == len) w += '.';
            if (!text.empty()) text += ' ';
            text += w;
        }
        i += len;
    }
    return text;
}

std::size_t code_points(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

}  // namespace

Fixture make_fixture(const FixtureOptions& opts) {
    PlantedOptions popts = opts.planted;
    popts.min_words = popts.max_words = opts.story_words;
    PlantedGenerator gen(popts);
    Fixture fx;
    fx.topics = gen.topic_labels();

    std::vector<std::pair<std::string, std::string>> dialect;
    for (std::size_t i = 0; i < opts.dialect_pairs; ++i)
        dialect.push_back({pseudo_word(kDialectBase + 2 * i), pseudo_word(kDialectBase + 2 * i + 1)});

    fx.global_removals = gen.general_words();
    for (const auto& [l, r] : dialect) {
        fx.global_removals.push_back(l);
        fx.global_removals.push_back(r);
    }
    for (std::size_t t = 0; t < gen.topics().size(); ++t) {
        std::vector<std::string> other;
        for (std::size_t u = 0; u < gen.topics().size(); ++u)
            if (u != t) other.insert(other.end(), gen.topics()[u].words.begin(), gen.topics()[u].words.end());
        fx.removals.push_back(std::move(other));
    }

    auto styles = station_styles(popts.stations);
    std::map<std::string, std::string> host;
    for (std::size_t s = 0; s < styles.size(); ++s) {
        const auto& code = styles[s].code;
        std::string name = pseudo_word(kNameBase + 2 * s) + " " + pseudo_word(kNameBase + 2 * s + 1);
        host[code] = name;
        fx.station_confounders[code] = {name};
        fx.confounders.push_back(to_lower_ascii(code));
        fx.global_removals.push_back(to_lower_ascii(code));
        fx.global_removals.push_back(pseudo_word(kNameBase + 2 * s));
        fx.global_removals.push_back(pseudo_word(kNameBase + 2 * s + 1));
    }
    std::sort(fx.global_removals.begin(), fx.global_removals.end());

    std::mt19937_64 rng(opts.seed);
    const std::string ad = "Call now and save on brand new cars today.";
    for (int year = opts.first_year; year <= opts.last_year; ++year) {
        const double lean = std::min(0.45, opts.drift_per_year * (year - opts.first_year + 1));
        for (int month = 1; month <= 12; ++month) {
            for (const auto& style : styles) {
                const double p_right = 0.5 + style.lean_sign * lean;
                auto substitute = [&](std::mt19937_64& r, std::string& w) {
                    if (uniform_unit(r) >= opts.dialect_rate) return false;
                    const auto& pair = dialect[uniform_index(r, dialect.size())];
                    w = uniform_unit(r) < p_right ? pair.second : pair.first;
                    return true;
                };
                const auto& program = style.programs[static_cast<std::size_t>(month) % style.programs.size()];
                Episode ep;
                char id[64];
                std::snprintf(id, sizeof id, "%s-%04d-%02d", style.code.c_str(), year, month);
                ep.id = id;
                ep.station = StationId{style.code};
                ep.program_title = program.first;
                ep.category = program.second;
                ep.air_date = Date{year, month, 1 + static_cast<int>(uniform_index(rng, 28))};
                ep.air_time = TimeOfDay{18 + static_cast<int>(uniform_index(rng, 5)), 0};
                ep.duration_min = 30;

                std::string text;
                for (std::size_t story = 0; story < opts.stories_per_episode; ++story) {
                    auto truth = gen.draw_truth(rng);
                    auto tokens = gen.make_tokens(truth, opts.story_words, rng, substitute);
                    if (tokens.size() >= 4 && uniform_unit(rng) < 0.3) {
                        auto name = split_ws(host[style.code]);
                        std::size_t at = uniform_index(rng, tokens.size() - 1);
                        tokens[at] = name[0];
                        tokens[at + 1] = name[1];
                    }
                    if (uniform_unit(rng) < 0.2) tokens[uniform_index(rng, tokens.size())] = to_lower_ascii(style.code);
                    if (story > 0 && uniform_unit(rng) < 0.25) {
                        std::size_t begin = code_points(text) + 1;
                        text += ' ' + ad;
                        ep.ad_spans.push_back({begin, begin + code_points(ad)});
                    }
                    if (!text.empty()) text += ' ';
                    text += render_story(tokens, rng);

                    StoryTruth st;
                    st.segment_id = ep.id + "#" + std::to_string(story);
                    st.station = style.code;
                    for (auto t : truth) st.topics.push_back(gen.topics()[t].id);
                    fx.truth.push_back(std::move(st));
                }
                ep.text = std::move(text);
                fx.episodes.push_back(std::move(ep));
            }
        }
    }

    // Panel: each panelist has a fixed lean and engagement level.
    std::vector<std::string> broadcast, left = {"CNN", "MSNBC"}, right = {"FNC"};
    for (const auto& s : styles)
        if (s.lean_sign == 0.0) broadcast.push_back(s.code);
    struct Panelist {
        std::string id;
        int lean;  // -1, 0, +1
        double engagement;
        double weight;
    };
    std::vector<Panelist> people;
    for (std::size_t p = 0; p < opts.panelists; ++p) {
        char id[16];
        std::snprintf(id, sizeof id, "P%05zu", p + 1);
        people.push_back({id, static_cast<int>(uniform_index(rng, 3)) - 1, uniform_unit(rng),
                          static_cast<double>(1000 + uniform_index(rng, 49000))});
    }
    for (int year = opts.first_year; year <= opts.last_year; ++year)
        for (int month = 1; month <= 12; ++month)
            for (const auto& person : people) {
                PanelRecord r;
                r.panelist_id = person.id;
                r.month = YearMonth{year, month};
                r.weight = person.weight;
                const double news = std::floor(person.engagement * person.engagement * 600.0 * uniform_unit(rng));
                r.total_news_minutes = news;
                r.total_tv_minutes = news + static_cast<double>(200 + uniform_index(rng, 3000));
                double budget = std::floor(news * (0.5 + 0.4 * uniform_unit(rng)));
                const auto& favored = person.lean > 0 ? right : person.lean < 0 ? left : broadcast;
                const double favored_part = 0.6 + 0.35 * uniform_unit(rng);
                std::map<std::string, double> minutes;
                for (const auto& s : styles) minutes[s.code] = 0;
                double fav_total = std::floor(budget * favored_part);
                for (std::size_t i = 0; i < favored.size(); ++i)
                    minutes[favored[i]] += std::floor(fav_total / static_cast<double>(favored.size()));
                double rest = budget - fav_total;
                for (std::size_t i = 0; i < styles.size(); ++i)
                    minutes[styles[i].code] += std::floor(rest / static_cast<double>(styles.size()));
                r.minutes = std::move(minutes);
                fx.panel.push_back(std::move(r));
            }
    return fx;
}

std::vector<AnnotationRecord> simulate_annotations(std::span<const AnnotationTask> tasks,
                                                   const std::map<std::string, std::vector<std::string>>& truth,
                                                   const SimulatedAnnotators& opts) {
    std::vector<AnnotationRecord> out;
    for (const auto& task : tasks) {
        auto it = truth.find(task.segment_id);
        std::string correct(kNoneChoice);
        if (it != truth.end())
            for (const auto& c : task.candidates)
                if (std::find(it->second.begin(), it->second.end(), c) != it->second.end()) {
                    correct = c;
                    break;
                }
        std::vector<std::string> options(task.candidates.begin(), task.candidates.end());
        options.emplace_back(kNoneChoice);
        options.erase(std::remove(options.begin(), options.end(), correct), options.end());

        std::vector<std::string> choices;
        for (std::size_t a = 0;; ++a) {
            if (a >= opts.annotators) {
                auto status = aggregate_choices(choices, opts.policy).status;
                if (status != LabelStatus::needs_more) break;
            }
            char annotator[16];
            std::snprintf(annotator, sizeof annotator, "ann%02zu", a + 1);
            std::mt19937_64 rng(splitmix64(opts.seed ^ fnv1a(task.task_id + "|" + annotator)));
            std::string choice = correct;
            if (uniform_unit(rng) >= opts.accuracy && !options.empty())
                choice = options[uniform_index(rng, options.size())];
            char ts[32];
            std::snprintf(ts, sizeof ts, "2024-01-01T00:%02zu:00Z", a);
            out.push_back({task.task_id, annotator, choice, ts});
            choices.push_back(std::move(choice));
        }
    }
    return out;
}

}  // namespace newslens
