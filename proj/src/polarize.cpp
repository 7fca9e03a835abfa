#include "newslens/polarize.hpp"

#include <algorithm>
#include <map>

namespace newslens {

GroupCorpus::GroupCorpus(std::string label, std::vector<std::string> ids, std::vector<PhraseVector> segments)
    : label_(std::move(label)), ids_(std::move(ids)), segments_(std::move(segments)) {
    if (ids_.size() != segments_.size()) throw Error("group " + label_ + ": ids and segments differ in length");
    PhraseId max_id = 0;
    bool any = false;
    for (const auto& s : segments_)
        for (const auto& [id, _] : s.entries) {
            max_id = std::max(max_id, id);
            any = true;
        }
    totals_.assign(any ? max_id + 1 : 0, 0);
    for (const auto& s : segments_) {
        for (const auto& [id, n] : s.entries) totals_[id] += n;
        total_m_ += s.total;
        if (!s.empty()) ++nonempty_;
    }
}

RhoVector rho(const GroupCorpus& source, const GroupCorpus& target, RhoBasis basis) {
    RhoVector out;
    const double ms = basis == RhoBasis::frequencies ? static_cast<double>(source.total_m()) : 1.0;
    const double mt = basis == RhoBasis::frequencies ? static_cast<double>(target.total_m()) : 1.0;
    const std::size_t space = std::max(source.phrase_space(), target.phrase_space());
    for (PhraseId j = 0; j < space; ++j) {
        const auto s = source.count(j), t = target.count(j);
        if (s + t == 0) continue;
        const double a = static_cast<double>(s) / ms, b = static_cast<double>(t) / mt;
        out[j] = a / (a + b);
    }
    return out;
}

namespace {

enum class Mode { leave_out, plug_in };

// Scores one segment: returns q_i . share_own, where share_own is the
// segment's own group's share of each phrase. own/other are the group
// totals; own_m/other_m the group phrase totals.
std::optional<double> score_segment(const PhraseVector& seg, const GroupCorpus& own, const GroupCorpus& other,
                                    Mode mode, const EstimatorOptions& opts) {
    if (seg.empty()) return std::nullopt;
    const bool freq = opts.basis == RhoBasis::frequencies;
    const std::uint64_t own_m = mode == Mode::leave_out ? own.total_m() - seg.total : own.total_m();
    const double own_norm = freq ? static_cast<double>(own_m) : 1.0;
    const double other_norm = freq ? static_cast<double>(other.total_m()) : 1.0;

    double acc = 0.0;
    std::uint64_t kept_mass = 0;
    for (const auto& [j, c] : seg.entries) {
        const std::uint64_t own_count = mode == Mode::leave_out ? own.count(j) - c : own.count(j);
        const std::uint64_t other_count = other.count(j);
        double share;
        if (own_count + other_count == 0) {
            if (opts.zero == ZeroPolicy::drop) continue;
            share = 0.5;
        } else {
            const double a = own_norm > 0 ? static_cast<double>(own_count) / own_norm : 0.0;
            const double b = other_norm > 0 ? static_cast<double>(other_count) / other_norm : 0.0;
            share = a / (a + b);
        }
        acc += static_cast<double>(c) * share;
        kept_mass += c;
    }
    if (kept_mass == 0) return std::nullopt;
    return acc / static_cast<double>(kept_mass);
}

void require_groups(const GroupCorpus& source, const GroupCorpus& target) {
    for (const auto* g : {&source, &target}) {
        if (g->segment_count() == 0)
            throw ValidationError("group " + g->label() + " has no segments with phrases");
        if (g->segment_count() < 2)
            throw ValidationError("group " + g->label() + " needs at least 2 non-empty segments for leave-out");
    }
}

// Per-segment own-group scores in stored order; nullopt for skipped segments.
std::vector<std::optional<double>> own_scores(const GroupCorpus& own, const GroupCorpus& other, Mode mode,
                                              const EstimatorOptions& opts) {
    std::vector<std::optional<double>> out(own.segments().size());
    parallel_for(out.size(), opts.jobs,
                 [&](std::size_t i) { out[i] = score_segment(own.segments()[i], own, other, mode, opts); });
    return out;
}

PolarizationEstimate estimate(const GroupCorpus& source, const GroupCorpus& target, Mode mode,
                              const EstimatorOptions& opts) {
    require_groups(source, target);
    PolarizationEstimate e;
    e.source = source.label();
    e.target = target.label();
    // Summed in segment-id order so the value does not depend on input order.
    auto mean_of = [](const GroupCorpus& g, const std::vector<std::optional<double>>& v, std::size_t& n) {
        std::vector<std::size_t> order(v.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return g.ids()[a] < g.ids()[b]; });
        double sum = 0;
        n = 0;
        for (std::size_t i : order)
            if (v[i]) {
                sum += *v[i];
                ++n;
            }
        if (n == 0) throw ValidationError("group has no scorable segments");
        return sum / static_cast<double>(n);
    };
    e.source_mean = mean_of(source, own_scores(source, target, mode, opts), e.n_source);
    e.target_mean = mean_of(target, own_scores(target, source, mode, opts), e.n_target);
    e.value = 0.5 * e.source_mean + 0.5 * e.target_mean;
    return e;
}

}  // namespace

PolarizationEstimate leave_out_estimate(const GroupCorpus& source, const GroupCorpus& target,
                                        const EstimatorOptions& opts) {
    return estimate(source, target, Mode::leave_out, opts);
}

PolarizationEstimate plug_in_estimate(const GroupCorpus& source, const GroupCorpus& target,
                                      const EstimatorOptions& opts) {
    return estimate(source, target, Mode::plug_in, opts);
}

std::vector<PartisanScore> partisan_scores(const GroupCorpus& source, const GroupCorpus& target,
                                           const EstimatorOptions& opts) {
    require_groups(source, target);
    std::vector<PartisanScore> out;
    auto emit = [&](const GroupCorpus& own, const GroupCorpus& other, bool is_source) {
        auto scores = own_scores(own, other, Mode::leave_out, opts);
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (!scores[i]) continue;
            PartisanScore p;
            p.segment_id = own.ids()[i];
            p.group = own.label();
            p.in_source = is_source;
            p.own_group = *scores[i];
            p.toward_source = is_source ? *scores[i] : 1.0 - *scores[i];
            out.push_back(std::move(p));
        }
    };
    emit(source, target, true);
    emit(target, source, false);
    return out;
}

// --- windows ---------------------------------------------------------------

WindowKind parse_window_kind(std::string_view s) {
    if (s == "monthly") return WindowKind::monthly;
    if (s == "quarterly") return WindowKind::quarterly;
    if (s == "yearly") return WindowKind::yearly;
    if (s == "era") return WindowKind::era;
    throw ValidationError("unknown window '" + std::string(s) + "'");
}

std::string_view to_string(WindowKind k) {
    switch (k) {
        case WindowKind::monthly: return "monthly";
        case WindowKind::quarterly: return "quarterly";
        case WindowKind::yearly: return "yearly";
        case WindowKind::era: return "era";
    }
    return "yearly";
}

Window window_of(const Date& d, const WindowSpec& spec) {
    switch (spec.kind) {
        case WindowKind::monthly: {
            Date start{d.year, d.month, 1};
            Date end = d.month == 12 ? Date{d.year + 1, 1, 1} : Date{d.year, d.month + 1, 1};
            return {start, end};
        }
        case WindowKind::quarterly: {
            int q0 = (d.month - 1) / 3 * 3 + 1;
            Date start{d.year, q0, 1};
            Date end = q0 == 10 ? Date{d.year + 1, 1, 1} : Date{d.year, q0 + 3, 1};
            return {start, end};
        }
        case WindowKind::yearly: return {Date{d.year, 1, 1}, Date{d.year + 1, 1, 1}};
        case WindowKind::era: {
            Date start{1, 1, 1}, end{9999, 12, 31};
            for (const auto& b : spec.era_boundaries) {
                if (b <= d) start = std::max(start, b);
                else end = std::min(end, b);
            }
            return {start, end};
        }
    }
    throw Error("bad window kind");
}

std::vector<SeriesPoint> polarization_series(std::span<const SeriesSegment> segments, const PairSpec& pair,
                                             const WindowSpec& window, const SeriesFilter& filter,
                                             const EstimatorOptions& opts) {
    struct Bucket {
        std::vector<std::string> s_ids, t_ids;
        std::vector<PhraseVector> s_vecs, t_vecs;
    };
    std::map<Window, Bucket> buckets;
    for (const auto& seg : segments) {
        if (!filter.categories.empty() && !filter.categories.count(seg.category)) continue;
        if (filter.topic && !seg.topics.count(*filter.topic)) continue;
        const bool in_s = pair.source_stations.count(seg.station) > 0;
        const bool in_t = pair.target_stations.count(seg.station) > 0;
        if (!in_s && !in_t) continue;
        auto& b = buckets[window_of(seg.air_date, window)];
        if (in_s) {
            b.s_ids.push_back(seg.id);
            b.s_vecs.push_back(seg.phrases);
        }
        if (in_t) {
            b.t_ids.push_back(seg.id);
            b.t_vecs.push_back(seg.phrases);
        }
    }
    std::vector<SeriesPoint> out;
    for (auto& [w, b] : buckets) {
        GroupCorpus s(pair.source_label, std::move(b.s_ids), std::move(b.s_vecs));
        GroupCorpus t(pair.target_label, std::move(b.t_ids), std::move(b.t_vecs));
        SeriesPoint p;
        p.window = w;
        p.n_source = s.segment_count();
        p.n_target = t.segment_count();
        if (p.n_source >= 2 && p.n_target >= 2) p.estimate = leave_out_estimate(s, t, opts);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace newslens
