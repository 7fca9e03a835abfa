#include "newslens/corpus.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace newslens {

using nlohmann::json;

StationRegistry::StationRegistry(std::vector<std::string> codes) : codes_(std::move(codes)) {
    std::set<std::string> seen;
    for (const auto& c : codes_) {
        if (c.empty()) throw ValidationError("empty station code");
        if (!seen.insert(c).second) throw ValidationError("duplicate station code " + c);
    }
}

StationRegistry StationRegistry::defaults() {
    return StationRegistry({"ABC", "CBS", "NBC", "CNN", "FNC", "MSNBC"});
}

bool StationRegistry::contains(std::string_view code) const {
    return std::find(codes_.begin(), codes_.end(), code) != codes_.end();
}

StationId StationRegistry::get(std::string_view code) const {
    if (!contains(code)) throw ValidationError("unknown station '" + std::string(code) + "'");
    return StationId{std::string(code)};
}

namespace {

constexpr std::pair<ProgramCategory, std::string_view> kCategories[] = {
    {ProgramCategory::hard_news, "hard_news"},
    {ProgramCategory::talk_show, "talk_show"},
    {ProgramCategory::partisan_opinion, "partisan_opinion"},
    {ProgramCategory::soft_news, "soft_news"},
    {ProgramCategory::local_news, "local_news"},
    {ProgramCategory::other, "other"},
};

// Byte offset of each code point boundary; result.size() == code points + 1.
std::vector<std::size_t> code_point_offsets(std::string_view s) {
    std::vector<std::size_t> offs;
    offs.reserve(s.size() + 1);
    for (std::size_t i = 0; i < s.size(); ++i)
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) offs.push_back(i);
    offs.push_back(s.size());
    return offs;
}

bool is_word_char(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool ends_sentence(std::string_view word) {
    while (!word.empty() && (word.back() == '"' || word.back() == '\'' || word.back() == ')' ||
                             word.back() == ']'))
        word.remove_suffix(1);
    return !word.empty() && (word.back() == '.' || word.back() == '!' || word.back() == '?');
}

const std::set<std::string> kEpisodeFields = {"id",        "station",  "program_title",
                                              "category",  "air_date", "air_time",
                                              "duration_min", "text",  "ad_spans"};

Episode episode_from_json(const json& j, const StationRegistry& stations) {
    if (!j.is_object()) throw ValidationError("record is not an object");
    for (const auto& [key, _] : j.items())
        if (!kEpisodeFields.count(key)) throw ValidationError("unknown field '" + key + "'");
    for (const auto& f : kEpisodeFields)
        if (!j.contains(f)) throw ValidationError("missing field '" + f + "'");

    auto str_field = [&](const char* name) {
        if (!j[name].is_string()) throw ValidationError(std::string("field '") + name + "' must be a string");
        return j[name].get<std::string>();
    };

    Episode ep;
    ep.id = str_field("id");
    ep.station = stations.get(str_field("station"));
    ep.program_title = str_field("program_title");
    ep.category = parse_category(str_field("category"));
    ep.air_date = Date::parse(str_field("air_date"));
    ep.air_time = TimeOfDay::parse(str_field("air_time"));
    if (!j["duration_min"].is_number_integer())
        throw ValidationError("field 'duration_min' must be an integer");
    ep.duration_min = j["duration_min"].get<int>();
    ep.text = str_field("text");
    if (!j["ad_spans"].is_array()) throw ValidationError("field 'ad_spans' must be an array");
    for (const auto& span : j["ad_spans"]) {
        if (!span.is_array() || span.size() != 2 || !span[0].is_number_integer() ||
            !span[1].is_number_integer())
            throw ValidationError("ad span must be a [start, end) integer pair");
        auto b = span[0].get<long long>(), e = span[1].get<long long>();
        if (b < 0 || e < 0) throw ValidationError("ad span offsets must be non-negative");
        ep.ad_spans.push_back({static_cast<std::size_t>(b), static_cast<std::size_t>(e)});
    }
    validate_episode(ep, stations);
    return ep;
}

}  // namespace

std::string_view to_string(ProgramCategory c) {
    for (const auto& [cat, name] : kCategories)
        if (cat == c) return name;
    return "other";
}

ProgramCategory parse_category(std::string_view s) {
    for (const auto& [cat, name] : kCategories)
        if (name == s) return cat;
    throw ValidationError("unknown program category '" + std::string(s) + "'");
}

void validate_episode(const Episode& ep, const StationRegistry& stations) {
    if (ep.id.empty()) throw ValidationError("empty episode id");
    if (!stations.contains(ep.station.code))
        throw ValidationError("unknown station '" + ep.station.code + "'");
    if (ep.duration_min <= 0) throw ValidationError("duration_min must be positive");
    if (ep.text.empty()) throw ValidationError("empty transcript text");
    const std::size_t n_chars = code_point_offsets(ep.text).size() - 1;
    std::size_t prev_end = 0;
    for (std::size_t i = 0; i < ep.ad_spans.size(); ++i) {
        const auto& s = ep.ad_spans[i];
        if (s.begin >= s.end)
            throw ValidationError("ad span [" + std::to_string(s.begin) + "," + std::to_string(s.end) +
                                  ") is empty or reversed");
        if (s.end > n_chars) throw ValidationError("ad span exceeds text bounds");
        if (i > 0 && s.begin < prev_end) throw ValidationError("ad spans overlap or are unsorted");
        prev_end = s.end;
    }
}

IngestResult parse_episodes(std::string_view jsonl, const StationRegistry& stations) {
    IngestResult result;
    std::set<std::string> ids;
    std::size_t line_no = 0, pos = 0;
    while (pos < jsonl.size()) {
        std::size_t nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos) nl = jsonl.size();
        std::string_view line = jsonl.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

        std::string record_id;
        try {
            json j = json::parse(line);
            if (j.is_object() && j.contains("id") && j["id"].is_string()) record_id = j["id"];
            Episode ep = episode_from_json(j, stations);
            if (!ids.insert(ep.id).second) throw ValidationError("duplicate episode id");
            result.episodes.push_back(std::move(ep));
        } catch (const json::exception& e) {
            result.issues.push_back({line_no, record_id, std::string("malformed record: ") + e.what()});
        } catch (const ValidationError& e) {
            result.issues.push_back({line_no, record_id, e.what()});
        }
    }
    std::sort(result.episodes.begin(), result.episodes.end(),
              [](const Episode& a, const Episode& b) { return a.id < b.id; });
    return result;
}

IngestResult ingest_episodes(const std::string& path, const StationRegistry& stations) {
    return parse_episodes(read_file(path), stations);
}

std::string episode_to_json_line(const Episode& ep) {
    json spans = json::array();
    for (const auto& s : ep.ad_spans) spans.push_back({s.begin, s.end});
    json j = {{"id", ep.id},
              {"station", ep.station.code},
              {"program_title", ep.program_title},
              {"category", std::string(to_string(ep.category))},
              {"air_date", ep.air_date.str()},
              {"air_time", ep.air_time.str()},
              {"duration_min", ep.duration_min},
              {"text", ep.text},
              {"ad_spans", spans}};
    return j.dump();
}

std::string strip_ads(const Episode& ep) {
    if (ep.ad_spans.empty()) return ep.text;
    const auto offs = code_point_offsets(ep.text);
    std::string out;
    out.reserve(ep.text.size());
    std::size_t cursor = 0;  // byte offset
    for (const auto& s : ep.ad_spans) {
        std::size_t b = offs[s.begin], e = offs[s.end];
        out.append(ep.text, cursor, b - cursor);
        cursor = e;
    }
    out.append(ep.text, cursor, std::string::npos);
    return out;
}

std::vector<std::string> pack_segments(std::string_view text, std::size_t max_words) {
    if (max_words == 0) throw Error("max_words must be at least 1");
    const auto words = split_ws(text);
    std::vector<std::string> segments;
    std::vector<std::string> current;

    auto flush = [&] {
        if (!current.empty()) segments.push_back(join(current, " "));
        current.clear();
    };

    std::size_t i = 0;
    while (i < words.size()) {
        std::size_t j = i;
        while (j < words.size() && !ends_sentence(words[j])) ++j;
        std::size_t end = std::min(j + 1, words.size());
        std::size_t len = end - i;

        if (current.size() + len <= max_words) {
            current.insert(current.end(), words.begin() + i, words.begin() + end);
        } else if (len <= max_words) {
            flush();
            current.assign(words.begin() + i, words.begin() + end);
        } else {
            flush();
            std::size_t k = i;
            for (; k + max_words <= end; k += max_words) {
                current.assign(words.begin() + k, words.begin() + k + max_words);
                flush();
            }
            current.assign(words.begin() + k, words.begin() + end);
        }
        i = end;
    }
    flush();
    return segments;
}

std::vector<Segment> segment_episode(const Episode& ep, std::size_t max_words) {
    std::vector<Segment> out;
    auto texts = pack_segments(strip_ads(ep), max_words);
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        Segment s;
        s.episode_id = ep.id;
        s.index = static_cast<std::uint32_t>(i);
        s.word_count = static_cast<std::uint32_t>(split_ws(texts[i]).size());
        s.text = std::move(texts[i]);
        s.station = ep.station;
        s.category = ep.category;
        s.air_date = ep.air_date;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Segment> segment_corpus(const std::vector<Episode>& episodes, std::size_t max_words,
                                    unsigned jobs) {
    std::vector<const Episode*> order;
    for (const auto& e : episodes) order.push_back(&e);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });

    std::vector<std::vector<Segment>> per_episode(order.size());
    parallel_for(order.size(), jobs,
                 [&](std::size_t i) { per_episode[i] = segment_episode(*order[i], max_words); });
    std::vector<Segment> all;
    for (auto& v : per_episode)
        for (auto& s : v) all.push_back(std::move(s));
    return all;
}

std::string normalize_whitespace(std::string_view text) {
    const auto words = split_ws(text);
    return join(words, " ");
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_word_char(c)) {
            cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
        } else if (c == '\'' && !cur.empty() && i + 1 < text.size() &&
                   is_word_char(static_cast<unsigned char>(text[i + 1]))) {
            cur += '\'';
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

PhraseFilter::PhraseFilter(const std::vector<std::string>& stopwords,
                           const std::vector<std::string>& confounders) {
    for (const auto& w : stopwords)
        for (auto& t : tokenize(w)) stopwords_.insert(std::move(t));
    std::set<std::vector<std::string>> seen;
    for (const auto& c : confounders) {
        auto toks = tokenize(c);
        if (!toks.empty() && seen.insert(toks).second) confounders_.push_back(std::move(toks));
    }
}

std::vector<std::string> PhraseFilter::excise_confounders(std::vector<std::string> tokens) const {
    if (confounders_.empty() || tokens.empty()) return tokens;
    std::vector<char> marked(tokens.size(), 0);
    for (const auto& conf : confounders_) {
        if (conf.size() > tokens.size()) continue;
        for (std::size_t i = 0; i + conf.size() <= tokens.size(); ++i) {
            if (std::equal(conf.begin(), conf.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i)))
                std::fill(marked.begin() + static_cast<std::ptrdiff_t>(i),
                          marked.begin() + static_cast<std::ptrdiff_t>(i + conf.size()), 1);
        }
    }
    std::vector<std::string> kept;
    kept.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (!marked[i]) kept.push_back(std::move(tokens[i]));
    return kept;
}

PhraseCounts count_phrases(const std::vector<std::string>& raw_tokens, const PhraseFilter& filter) {
    const auto tokens = filter.excise_confounders(raw_tokens);
    PhraseCounts counts;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!filter.is_stopword(tokens[i])) ++counts[tokens[i]];
        if (i + 1 < tokens.size() &&
            !(filter.is_stopword(tokens[i]) && filter.is_stopword(tokens[i + 1])))
            ++counts[tokens[i] + " " + tokens[i + 1]];
    }
    return counts;
}

PhraseCounts phrase_counts(const Segment& seg, const PhraseFilter& filter) {
    return count_phrases(tokenize(seg.text), filter);
}

PhraseId PhraseTable::intern(const std::string& phrase) {
    auto [it, inserted] = ids_.try_emplace(phrase, static_cast<PhraseId>(phrases_.size()));
    if (inserted) phrases_.push_back(phrase);
    return it->second;
}

std::optional<PhraseId> PhraseTable::find(const std::string& phrase) const {
    auto it = ids_.find(phrase);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

PhraseVector PhraseTable::vectorize(const PhraseCounts& counts) {
    PhraseVector v;
    v.entries.reserve(counts.size());
    for (const auto& [phrase, n] : counts) {
        if (n == 0) continue;
        v.entries.emplace_back(intern(phrase), n);
        v.total += n;
    }
    std::sort(v.entries.begin(), v.entries.end());
    return v;
}

}  // namespace newslens
