#include "newslens/weaksup.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "newslens/corpus.hpp"

namespace newslens {

using nlohmann::json;

namespace {

constexpr double kThresholdSlack = 1e-12;

std::vector<std::size_t> find_occurrences(const std::vector<std::string>& tokens,
                                          const std::vector<std::string>& phrase) {
    std::vector<std::size_t> at;
    if (phrase.empty() || phrase.size() > tokens.size()) return at;
    for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i)
        if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i)))
            at.push_back(i);
    return at;
}

}  // namespace

void validate_topics(const std::vector<TopicLabel>& topics) {
    std::set<std::string> ids;
    for (const auto& t : topics) {
        if (t.id.empty()) throw ValidationError("topic with empty id");
        if (t.id == "none") throw ValidationError("'none' is reserved and cannot be a topic id");
        if (!ids.insert(t.id).second) throw ValidationError("duplicate topic id " + t.id);
        if (t.label_words.empty()) throw ValidationError("topic " + t.id + " has no label words");
        for (const auto& w : t.label_words)
            if (tokenize(w).empty()) throw ValidationError("topic " + t.id + " has an empty label word");
    }
}

// --- PrecomputedOracle -----------------------------------------------------

void PrecomputedOracle::add(std::string segment_id, std::size_t position,
                            std::vector<std::pair<std::string, double>> top) {
    std::vector<std::pair<std::string, double>> dedup;
    std::set<std::string> seen;
    for (auto& [w, s] : top) {
        auto toks = tokenize(w);
        if (toks.size() != 1) continue;
        if (seen.insert(toks[0]).second) dedup.emplace_back(std::move(toks[0]), s);
    }
    table_[std::move(segment_id)][position] = std::move(dedup);
}

PrecomputedOracle PrecomputedOracle::parse(std::string_view jsonl) {
    PrecomputedOracle oracle;
    std::size_t pos = 0, line_no = 0;
    while (pos < jsonl.size()) {
        std::size_t nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos) nl = jsonl.size();
        auto line = jsonl.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            json j = json::parse(line);
            auto top = j.at("top_k");
            std::vector<std::pair<std::string, double>> entries;
            for (std::size_t r = 0; r < top.size(); ++r) {
                if (top[r].is_string())
                    entries.emplace_back(top[r].get<std::string>(), static_cast<double>(top.size() - r));
                else
                    entries.emplace_back(top[r].at(0).get<std::string>(), top[r].at(1).get<double>());
            }
            oracle.add(j.at("segment_id").get<std::string>(), j.at("position").get<std::size_t>(),
                       std::move(entries));
        } catch (const json::exception& e) {
            throw ValidationError("predictions line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return oracle;
}

PrecomputedOracle PrecomputedOracle::load(const std::string& path) { return parse(read_file(path)); }

std::vector<Prediction> PrecomputedOracle::predict(const MaskedSlot& slot, std::size_t k) const {
    std::vector<Prediction> out;
    auto seg = table_.find(slot.segment_id);
    if (seg == table_.end()) return out;
    auto it = seg->second.find(slot.begin);
    if (it == seg->second.end()) return out;
    for (const auto& [w, s] : it->second) {
        if (out.size() == k) break;
        out.push_back({w, s});
    }
    return out;
}

// --- DistributionalOracle --------------------------------------------------

DistributionalOracle DistributionalOracle::build(std::span<const TokenizedSegment> corpus,
                                                 const Options& opts) {
    if (opts.window == 0) throw Error("oracle window must be at least 1");
    DistributionalOracle o;
    o.opts_ = opts;

    std::set<std::string> vocab;
    for (const auto& seg : corpus) vocab.insert(seg.tokens.begin(), seg.tokens.end());
    o.words_.assign(vocab.begin(), vocab.end());
    for (std::uint32_t i = 0; i < o.words_.size(); ++i) o.ids_.emplace(o.words_[i], i);
    const std::size_t V = o.words_.size();

    std::unordered_map<std::uint64_t, std::uint32_t> pairs;
    std::vector<std::uint64_t> marginal(V, 0);
    std::uint64_t total = 0;
    std::vector<std::uint32_t> ids;
    for (const auto& seg : corpus) {
        ids.clear();
        for (const auto& t : seg.tokens) ids.push_back(o.ids_.at(t));
        for (std::size_t i = 0; i < ids.size(); ++i) {
            std::size_t lo = i >= opts.window ? i - opts.window : 0;
            std::size_t hi = std::min(ids.size(), i + opts.window + 1);
            for (std::size_t j = lo; j < hi; ++j) {
                if (j == i) continue;
                ++pairs[(static_cast<std::uint64_t>(ids[i]) << 32) | ids[j]];
                ++marginal[ids[i]];
                ++total;
            }
        }
    }

    // rows[w] = (context, ppmi)
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(V);
    for (const auto& [key, n] : pairs) {
        auto w = static_cast<std::uint32_t>(key >> 32), c = static_cast<std::uint32_t>(key & 0xffffffffu);
        double pmi = std::log(static_cast<double>(n) * static_cast<double>(total) /
                              (static_cast<double>(marginal[w]) * static_cast<double>(marginal[c])));
        if (pmi > 0) rows[w].emplace_back(c, pmi);
    }

    o.postings_.assign(V, {});
    for (std::uint32_t w = 0; w < V; ++w) {
        auto& row = rows[w];
        std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        if (row.size() > opts.max_contexts) row.resize(opts.max_contexts);
        double norm = 0;
        for (const auto& [c, v] : row) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0) continue;
        for (const auto& [c, v] : row) o.postings_[c].emplace_back(w, v / norm);
    }
    for (auto& p : o.postings_) std::sort(p.begin(), p.end());
    return o;
}

std::vector<Prediction> DistributionalOracle::predict(const MaskedSlot& slot, std::size_t k) const {
    std::vector<Prediction> out;
    if (k == 0) return out;

    std::vector<std::pair<std::uint32_t, double>> profile;
    auto add_context = [&](std::size_t pos) {
        auto it = ids_.find(slot.tokens[pos]);
        if (it == ids_.end()) return;
        for (auto& [c, n] : profile)
            if (c == it->second) {
                n += 1;
                return;
            }
        profile.emplace_back(it->second, 1.0);
    };
    std::size_t lo = slot.begin >= opts_.window ? slot.begin - opts_.window : 0;
    for (std::size_t p = lo; p < slot.begin; ++p) add_context(p);
    std::size_t hi = std::min(slot.tokens.size(), slot.end + opts_.window);
    for (std::size_t p = slot.end; p < hi; ++p) add_context(p);
    if (profile.empty()) return out;

    double pnorm = 0;
    for (const auto& [c, n] : profile) pnorm += n * n;
    pnorm = std::sqrt(pnorm);

    thread_local std::vector<double> acc;
    thread_local std::vector<std::uint32_t> touched;
    if (acc.size() < words_.size()) acc.assign(words_.size(), 0.0);
    touched.clear();
    for (const auto& [c, n] : profile) {
        for (const auto& [w, v] : postings_[c]) {
            if (acc[w] == 0.0) touched.push_back(w);
            acc[w] += n * v;
        }
    }

    std::vector<std::pair<double, std::uint32_t>> scored;
    scored.reserve(touched.size());
    for (auto w : touched) {
        double s = acc[w] / pnorm;
        acc[w] = 0.0;
        if (s >= opts_.similarity_floor && s > 0) scored.emplace_back(s, w);
    }
    auto better = [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    };
    std::size_t n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({words_[scored[i].second], scored[i].first});
    return out;
}

// --- dictionaries ----------------------------------------------------------

ReplacementLists collect_replacements(std::span<const TokenizedSegment> corpus, const TopicLabel& topic,
                                      const ReplacementOracle& oracle, std::size_t k) {
    ReplacementLists out;
    for (const auto& label : topic.label_words) {
        const auto phrase = tokenize(label);
        std::size_t found = 0;
        for (const auto& seg : corpus) {
            for (std::size_t at : find_occurrences(seg.tokens, phrase)) {
                ++found;
                MaskedSlot slot{seg.id, seg.tokens, at, at + phrase.size()};
                std::vector<std::string> list;
                for (const auto& p : oracle.predict(slot, k)) list.emplace_back(p.word);
                out.lists.push_back(std::move(list));
            }
        }
        if (found == 0)
            out.warnings.push_back("topic " + topic.id + ": label word '" + label +
                                   "' does not occur in the corpus");
    }
    return out;
}

ClassVocabulary build_class_vocabulary(std::string topic_id,
                                       const std::vector<std::vector<std::string>>& lists,
                                       std::size_t cap) {
    std::map<std::string, std::uint32_t> counts;
    for (const auto& list : lists) {
        std::set<std::string> uniq(list.begin(), list.end());
        for (const auto& w : uniq) ++counts[w];
    }
    if (counts.empty())
        throw Error("topic " + topic_id + ": no replacement candidates, class vocabulary is empty");
    ClassVocabulary vocab{std::move(topic_id), {}};
    for (const auto& [w, n] : counts) vocab.ranked_words.push_back({w, n});
    std::stable_sort(vocab.ranked_words.begin(), vocab.ranked_words.end(),
                     [](const RankedWord& a, const RankedWord& b) { return a.count > b.count; });
    if (vocab.ranked_words.size() > cap) vocab.ranked_words.resize(cap);
    return vocab;
}

ReviewResult review_vocabulary(const ClassVocabulary& vocab, const std::vector<std::string>& removals) {
    ReviewResult r;
    r.dictionary.topic_id = vocab.topic_id;
    std::set<std::string> remove(removals.begin(), removals.end());
    std::set<std::string> present;
    for (const auto& rw : vocab.ranked_words) {
        present.insert(rw.word);
        if (remove.count(rw.word))
            r.removed.push_back(rw.word);
        else
            r.dictionary.words.push_back(rw.word);
    }
    for (const auto& w : remove)
        if (!present.count(w))
            r.warnings.push_back("topic " + vocab.topic_id + ": removal '" + w + "' is not in the vocabulary");
    std::sort(r.dictionary.words.begin(), r.dictionary.words.end());
    if (r.dictionary.words.empty())
        throw Error("topic " + vocab.topic_id + ": review removed every word, dictionary is empty");
    return r;
}

std::string dictionary_to_json_line(const DictionaryRecord& rec) {
    json ranked = json::array();
    for (const auto& rw : rec.ranked_words) ranked.push_back({{"word", rw.word}, {"count", rw.count}});
    json j = {{"topic_id", rec.topic_id},
              {"ranked_words", ranked},
              {"removals", rec.removals},
              {"final_words", rec.final_words}};
    return j.dump();
}

std::vector<DictionaryRecord> parse_dictionary_file(std::string_view jsonl) {
    std::vector<DictionaryRecord> out;
    std::size_t pos = 0, line_no = 0;
    while (pos < jsonl.size()) {
        std::size_t nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos) nl = jsonl.size();
        auto line = jsonl.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            json j = json::parse(line);
            DictionaryRecord rec;
            rec.topic_id = j.at("topic_id").get<std::string>();
            for (const auto& rw : j.at("ranked_words"))
                rec.ranked_words.push_back({rw.at("word").get<std::string>(), rw.at("count").get<std::uint32_t>()});
            rec.removals = j.at("removals").get<std::vector<std::string>>();
            rec.final_words = j.at("final_words").get<std::vector<std::string>>();
            out.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw ValidationError("dictionary line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

ExpandedDictionary to_expanded(const DictionaryRecord& rec) {
    std::set<std::string> ranked;
    for (const auto& rw : rec.ranked_words) ranked.insert(rw.word);
    ExpandedDictionary d{rec.topic_id, {}};
    for (const auto& w : rec.final_words) {
        if (!ranked.count(w))
            throw ValidationError("topic " + rec.topic_id + ": final word '" + w + "' is not a ranked word");
        d.words.push_back(w);
    }
    std::sort(d.words.begin(), d.words.end());
    d.words.erase(std::unique(d.words.begin(), d.words.end()), d.words.end());
    if (d.words.empty()) throw ValidationError("topic " + rec.topic_id + ": empty dictionary");
    return d;
}

// --- layer-1 classification ------------------------------------------------

std::vector<std::uint32_t> assign_topics(std::span<const double> scores, double threshold) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t z = 0; z < scores.size(); ++z)
        if (scores[z] > 0 && scores[z] >= threshold - kThresholdSlack) out.push_back(z);
    return out;
}

WeakClassifier::WeakClassifier(std::vector<ExpandedDictionary> dictionaries, const ReplacementOracle& oracle,
                               std::size_t k, double threshold)
    : dicts_(std::move(dictionaries)), oracle_(oracle), k_(k), threshold_(threshold) {
    if (dicts_.empty()) throw Error("weak classification needs at least one dictionary");
    if (k_ == 0) throw Error("k must be positive");
    for (std::uint32_t z = 0; z < dicts_.size(); ++z) {
        if (dicts_[z].words.empty()) throw Error("dictionary for " + dicts_[z].topic_id + " is empty");
        for (const auto& w : dicts_[z].words) {
            auto& v = word_topics_[w];
            if (v.empty() || v.back() != z) v.push_back(z);
        }
    }
}

WeakLabel WeakClassifier::classify(const TokenizedSegment& seg) const {
    WeakLabel label;
    label.segment_id = seg.id;
    label.scores.assign(dicts_.size(), 0.0);
    std::vector<std::uint32_t> overlap(dicts_.size(), 0);
    for (std::size_t pos = 0; pos < seg.tokens.size(); ++pos) {
        std::fill(overlap.begin(), overlap.end(), 0);
        auto preds = oracle_.predict(MaskedSlot{seg.id, seg.tokens, pos, pos + 1}, k_);
        for (const auto& p : preds) {
            auto it = word_topics_.find(p.word);
            if (it == word_topics_.end()) continue;
            for (auto z : it->second) ++overlap[z];
        }
        for (std::size_t z = 0; z < dicts_.size(); ++z) {
            double frac = static_cast<double>(overlap[z]) / static_cast<double>(k_);
            label.scores[z] = std::max(label.scores[z], frac);
        }
    }
    label.assigned = assign_topics(label.scores, threshold_);
    return label;
}

std::vector<WeakLabel> WeakClassifier::classify_all(std::span<const TokenizedSegment> segs,
                                                    unsigned jobs) const {
    std::vector<WeakLabel> out(segs.size());
    parallel_for(segs.size(), jobs, [&](std::size_t i) { out[i] = classify(segs[i]); });
    return out;
}

WeakLabel weak_classify(const TokenizedSegment& seg, const std::vector<ExpandedDictionary>& dictionaries,
                        const ReplacementOracle& oracle, std::size_t k, double threshold) {
    return WeakClassifier(dictionaries, oracle, k, threshold).classify(seg);
}

std::string weak_label_to_json_line(const WeakLabel& label, const std::vector<std::string>& topic_ids) {
    json topics = json::array();
    for (auto z : label.assigned) topics.push_back(topic_ids.at(z));
    json scores = json::object();
    for (std::size_t z = 0; z < label.scores.size(); ++z)
        if (label.scores[z] > 0) scores[topic_ids.at(z)] = label.scores[z];
    return json{{"segment_id", label.segment_id}, {"topics", topics}, {"scores", scores}}.dump();
}

WeakLabel weak_label_from_json_line(std::string_view line, const std::vector<std::string>& topic_ids,
                                    double threshold) {
    json j = json::parse(line);
    WeakLabel label;
    label.segment_id = j.at("segment_id").get<std::string>();
    label.scores.assign(topic_ids.size(), 0.0);
    for (const auto& [id, s] : j.at("scores").items()) {
        auto it = std::find(topic_ids.begin(), topic_ids.end(), id);
        if (it == topic_ids.end()) throw ValidationError("weak label references unknown topic " + id);
        label.scores[static_cast<std::size_t>(it - topic_ids.begin())] = s.get<double>();
    }
    label.assigned = assign_topics(label.scores, threshold);
    return label;
}

}  // namespace newslens
