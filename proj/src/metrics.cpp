#include "newslens/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace newslens {

using nlohmann::json;

std::optional<double> topic_share(std::span<const ShareSegment> segments, const std::string& station,
                                  const std::string& topic, const Date& day) {
    std::uint64_t all = 0, on_topic = 0;
    for (const auto& s : segments) {
        if (s.station != station || s.air_date != day) continue;
        all += s.word_count;
        if (s.topics.count(topic)) on_topic += s.word_count;
    }
    if (all == 0) return std::nullopt;
    return static_cast<double>(on_topic) / static_cast<double>(all);
}

std::map<std::string, DailyShares> daily_topic_shares(std::span<const ShareSegment> segments,
                                                      const std::vector<std::string>& topic_ids) {
    struct Acc {
        std::uint64_t all = 0;
        std::vector<std::uint64_t> per_topic;
    };
    std::map<std::string, std::map<Date, Acc>> acc;
    for (const auto& s : segments) {
        auto& a = acc[s.station][s.air_date];
        if (a.per_topic.empty()) a.per_topic.assign(topic_ids.size(), 0);
        a.all += s.word_count;
        for (std::size_t z = 0; z < topic_ids.size(); ++z)
            if (s.topics.count(topic_ids[z])) a.per_topic[z] += s.word_count;
    }
    std::map<std::string, DailyShares> out;
    for (const auto& [station, days] : acc)
        for (const auto& [day, a] : days) {
            if (a.all == 0) continue;
            std::vector<double> y(topic_ids.size());
            for (std::size_t z = 0; z < y.size(); ++z)
                y[z] = static_cast<double>(a.per_topic[z]) / static_cast<double>(a.all);
            out[station][day] = std::move(y);
        }
    return out;
}

double divergence(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("divergence: share vectors differ in length");
    if (a.empty()) throw Error("divergence: no topics");
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
    return s / static_cast<double>(a.size());
}

std::map<Window, std::vector<double>> window_shares(const DailyShares& daily, const WindowSpec& spec,
                                                    ShareAggregation agg, const std::map<Date, double>* words) {
    std::map<Window, std::pair<std::vector<double>, double>> acc;
    for (const auto& [day, y] : daily) {
        double w = 1.0;
        if (agg == ShareAggregation::word_weighted) {
            if (!words) throw Error("word-weighted aggregation needs daily word totals");
            auto it = words->find(day);
            w = it == words->end() ? 0.0 : it->second;
        }
        auto& [sum, wsum] = acc[window_of(day, spec)];
        if (sum.empty()) sum.assign(y.size(), 0.0);
        for (std::size_t k = 0; k < y.size(); ++k) sum[k] += w * y[k];
        wsum += w;
    }
    std::map<Window, std::vector<double>> out;
    for (auto& [win, p] : acc) {
        if (p.second <= 0) continue;
        for (double& v : p.first) v /= p.second;
        out[win] = std::move(p.first);
    }
    return out;
}

std::vector<DivergencePoint> divergence_series(const DailyShares& a, const DailyShares& b, const WindowSpec& window,
                                               ShareAggregation agg, const std::map<Date, double>* words_a,
                                               const std::map<Date, double>* words_b) {
    auto ma = window_shares(a, window, agg, words_a);
    auto mb = window_shares(b, window, agg, words_b);
    std::set<Window> windows;
    for (const auto& [w, _] : ma) windows.insert(w);
    for (const auto& [w, _] : mb) windows.insert(w);
    std::vector<DivergencePoint> out;
    for (const auto& w : windows) {
        DivergencePoint p{w, std::nullopt};
        auto ia = ma.find(w), ib = mb.find(w);
        if (ia != ma.end() && ib != mb.end()) p.delta = divergence(ia->second, ib->second);
        out.push_back(p);
    }
    return out;
}

void validate_panel_record(const PanelRecord& r) {
    if (r.panelist_id.empty()) throw ValidationError("empty panelist_id");
    if (!(r.weight > 0)) throw ValidationError("panelist " + r.panelist_id + ": weight must be positive");
    double tracked = 0;
    for (const auto& [station, m] : r.minutes) {
        if (m < 0) throw ValidationError("panelist " + r.panelist_id + ": negative minutes for " + station);
        tracked += m;
    }
    if (r.total_news_minutes < 0 || r.total_tv_minutes < 0)
        throw ValidationError("panelist " + r.panelist_id + ": negative totals");
    if (tracked > r.total_news_minutes)
        throw ValidationError("panelist " + r.panelist_id + ": tracked minutes exceed total news minutes");
    if (r.total_news_minutes > r.total_tv_minutes)
        throw ValidationError("panelist " + r.panelist_id + ": news minutes exceed television minutes");
}

PanelParse parse_panel(std::string_view jsonl) {
    static const std::set<std::string> kFields = {"panelist_id",        "month",            "minutes",
                                                  "total_news_minutes", "total_tv_minutes", "weight"};
    PanelParse out;
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
            if (!j.is_object()) throw ValidationError("record is not an object");
            for (const auto& [k, _] : j.items())
                if (!kFields.count(k)) throw ValidationError("unknown field '" + k + "'");
            PanelRecord r;
            r.panelist_id = j.at("panelist_id").get<std::string>();
            r.month = YearMonth::parse(j.at("month").get<std::string>());
            for (const auto& [station, m] : j.at("minutes").items()) r.minutes[station] = m.get<double>();
            r.total_news_minutes = j.at("total_news_minutes").get<double>();
            r.total_tv_minutes = j.at("total_tv_minutes").get<double>();
            r.weight = j.at("weight").get<double>();
            validate_panel_record(r);
            out.records.push_back(std::move(r));
        } catch (const json::exception& e) {
            out.issues.push_back({line_no, std::string("malformed record: ") + e.what()});
        } catch (const ValidationError& e) {
            out.issues.push_back({line_no, e.what()});
        }
    }
    return out;
}

std::string panel_record_to_json_line(const PanelRecord& r) {
    json j = {{"panelist_id", r.panelist_id},
              {"month", r.month.str()},
              {"minutes", r.minutes},
              {"total_news_minutes", r.total_news_minutes},
              {"total_tv_minutes", r.total_tv_minutes},
              {"weight", r.weight}};
    return j.dump();
}

namespace {

// Weighted sums use a fixed order (panelist id) so permuting the input
// cannot change the floating-point result.
std::vector<const PanelRecord*> month_records(std::span<const PanelRecord> panel, const YearMonth& month) {
    std::vector<const PanelRecord*> out;
    for (const auto& r : panel)
        if (r.month == month) out.push_back(&r);
    if (out.empty()) throw Error("no panel records for " + month.str());
    std::sort(out.begin(), out.end(), [](const PanelRecord* a, const PanelRecord* b) {
        return std::tie(a->panelist_id, a->weight, a->total_news_minutes) <
               std::tie(b->panelist_id, b->weight, b->total_news_minutes);
    });
    return out;
}

}  // namespace

AudienceShare active_consumers(std::span<const PanelRecord> panel, const YearMonth& month, double min_minutes) {
    AudienceShare s{month};
    for (const auto* r : month_records(panel, month)) {
        s.denominator += r->weight;
        if (r->total_news_minutes >= min_minutes) s.numerator += r->weight;
    }
    s.share = s.numerator / s.denominator;
    return s;
}

AudienceShare majority_share(std::span<const PanelRecord> panel, const YearMonth& month,
                             const std::set<std::string>& station_set, double threshold, double min_minutes) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw Error("majority threshold must lie in (0, 1]");
    AudienceShare s{month};
    for (const auto* r : month_records(panel, month)) {
        s.denominator += r->weight;
        if (r->total_news_minutes < min_minutes || r->total_news_minutes <= 0) continue;
        double in_set = 0;
        for (const auto& [station, m] : r->minutes)
            if (station_set.count(station)) in_set += m;
        if (in_set >= threshold * r->total_news_minutes) s.numerator += r->weight;
    }
    s.share = s.numerator / s.denominator;
    return s;
}

DatedSeries smooth(const DatedSeries& series, std::size_t window_days) {
    if (window_days == 0) throw Error("smoothing window must be at least 1");
    const auto back = static_cast<std::int64_t>((window_days - 1) / 2);
    const auto fwd = static_cast<std::int64_t>(window_days / 2);
    DatedSeries out;
    for (const auto& [d, _] : series) {
        auto lo = series.lower_bound(d.add_days(-back));
        auto hi = series.upper_bound(d.add_days(fwd));
        double sum = 0;
        std::size_t n = 0;
        for (auto it = lo; it != hi; ++it) {
            sum += it->second;
            ++n;
        }
        out[d] = sum / static_cast<double>(n);
    }
    return out;
}

}  // namespace newslens
