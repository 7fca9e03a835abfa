#pragma once

// Leave-out partisanship estimator between two groups of segments.
//
// For a source segment i the leave-out share of phrase j is
//     rho_{-i,j} = a / (a + b),  a = source mass of j without segment i,
//                                b = target mass of j,
// and symmetrically for target segments. With the default count basis the
// masses are pooled phrase counts; the frequency basis divides each group's
// counts by its total phrase count first. The estimate is
//     pi = 1/2 mean_{i in S} q_i . rho_{-i}  +  1/2 mean_{i in T} q_i . (1 - rho_{-i})
// where q_i = c_i / m_i. Segments with no phrases are skipped and not counted.

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "newslens/corpus.hpp"

namespace newslens {

enum class RhoBasis { counts, frequencies };
enum class ZeroPolicy {
    neutral,  // a phrase seen only in segment i gets rho_{-i} = 0.5
    drop,     // such phrases are removed and q_i renormalized over the rest
};

struct EstimatorOptions {
    RhoBasis basis = RhoBasis::counts;
    ZeroPolicy zero = ZeroPolicy::neutral;
    unsigned jobs = 1;
};

class GroupCorpus {
  public:
    GroupCorpus(std::string label, std::vector<std::string> ids, std::vector<PhraseVector> segments);

    const std::string& label() const { return label_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<PhraseVector>& segments() const { return segments_; }
    std::uint64_t count(PhraseId id) const { return id < totals_.size() ? totals_[id] : 0; }
    std::uint64_t total_m() const { return total_m_; }
    std::size_t segment_count() const { return nonempty_; }  // N
    std::size_t phrase_space() const { return totals_.size(); }

  private:
    std::string label_;
    std::vector<std::string> ids_;
    std::vector<PhraseVector> segments_;
    std::vector<std::uint64_t> totals_;  // dense by phrase id
    std::uint64_t total_m_ = 0;
    std::size_t nonempty_ = 0;
};

using RhoVector = std::unordered_map<PhraseId, double>;

// rho over every phrase present in either group (no segment left out).
RhoVector rho(const GroupCorpus& source, const GroupCorpus& target, RhoBasis basis = RhoBasis::counts);

struct PolarizationEstimate {
    double value = 0.0;
    double source_mean = 0.0;
    double target_mean = 0.0;
    std::string source;
    std::string target;
    std::size_t n_source = 0;
    std::size_t n_target = 0;
};

// Throws ValidationError when a group has fewer than 2 non-empty segments.
PolarizationEstimate leave_out_estimate(const GroupCorpus& source, const GroupCorpus& target,
                                        const EstimatorOptions& opts = {});

// Same formula with segment i kept in its own group's totals (biased upward).
PolarizationEstimate plug_in_estimate(const GroupCorpus& source, const GroupCorpus& target,
                                      const EstimatorOptions& opts = {});

struct PartisanScore {
    std::string segment_id;
    std::string group;
    bool in_source = true;
    double toward_source = 0.0;  // q_i . rho_{-i}
    double own_group = 0.0;      // q_i . rho_{-i} for source, q_i . (1 - rho_{-i}) for target
};

// One score per non-empty segment of both groups, source first.
std::vector<PartisanScore> partisan_scores(const GroupCorpus& source, const GroupCorpus& target,
                                           const EstimatorOptions& opts = {});

// --- aggregation regimes ----------------------------------------------------

enum class WindowKind { monthly, quarterly, yearly, era };

struct WindowSpec {
    WindowKind kind = WindowKind::yearly;
    std::vector<Date> era_boundaries;  // for era: windows split at each boundary
};

WindowKind parse_window_kind(std::string_view s);
std::string_view to_string(WindowKind k);

struct Window {
    Date start;  // inclusive
    Date end;    // exclusive; open-ended eras use 0001-01-01 / 9999-12-31
    auto operator<=>(const Window&) const = default;
};

Window window_of(const Date& d, const WindowSpec& spec);

struct SeriesSegment {
    std::string id;
    std::string station;
    ProgramCategory category = ProgramCategory::other;
    Date air_date;
    std::set<std::string> topics;  // supervised topic memberships
    PhraseVector phrases;
};

struct PairSpec {
    std::string source_label;
    std::set<std::string> source_stations;
    std::string target_label;
    std::set<std::string> target_stations;
};

struct SeriesFilter {
    std::set<ProgramCategory> categories;  // empty = all
    std::optional<std::string> topic;
};

struct SeriesPoint {
    Window window;
    std::size_t n_source = 0;
    std::size_t n_target = 0;
    std::optional<PolarizationEstimate> estimate;  // empty = flagged insufficient
};

std::vector<SeriesPoint> polarization_series(std::span<const SeriesSegment> segments, const PairSpec& pair,
                                             const WindowSpec& window, const SeriesFilter& filter,
                                             const EstimatorOptions& opts = {});

}  // namespace newslens
