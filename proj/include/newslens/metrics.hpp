#pragma once

// Production side: per-day topic airtime shares and the topic-selection
// divergence between stations. Consumption side: panel-based audience shares.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "newslens/common.hpp"
#include "newslens/polarize.hpp"

namespace newslens {

struct ShareSegment {
    std::string station;
    Date air_date;
    std::uint32_t word_count = 0;
    std::set<std::string> topics;  // supervised topic memberships
};

// Words in topic segments / all words, for one station and day. nullopt when
// the station has no words that day.
std::optional<double> topic_share(std::span<const ShareSegment> segments, const std::string& station,
                                  const std::string& topic, const Date& day);

// station -> day -> share per topic (aligned with topic_ids). Days without
// coverage are absent.
using DailyShares = std::map<Date, std::vector<double>>;
std::map<std::string, DailyShares> daily_topic_shares(std::span<const ShareSegment> segments,
                                                      const std::vector<std::string>& topic_ids);

// sum_k |a_k - b_k| / K with K = a.size().
double divergence(std::span<const double> a, std::span<const double> b);

enum class ShareAggregation {
    mean_of_days,   // mean of the daily shares in the window
    word_weighted,  // each day weighted by its total words
};

struct DivergencePoint {
    Window window;
    std::optional<double> delta;  // nullopt when either station has no data in the window
};

// Per-window share vectors: mean of the daily vectors, or their mean weighted
// by daily words. Windows whose total weight is zero are absent.
std::map<Window, std::vector<double>> window_shares(const DailyShares& daily, const WindowSpec& spec,
                                                    ShareAggregation agg = ShareAggregation::mean_of_days,
                                                    const std::map<Date, double>* words = nullptr);

// Aggregates daily shares within each window, then applies divergence().
// For word_weighted, words_a/words_b give each station's total words per day.
std::vector<DivergencePoint> divergence_series(const DailyShares& a, const DailyShares& b, const WindowSpec& window,
                                               ShareAggregation agg = ShareAggregation::mean_of_days,
                                               const std::map<Date, double>* words_a = nullptr,
                                               const std::map<Date, double>* words_b = nullptr);

// --- panel -------------------------------------------------------------------

struct PanelRecord {
    std::string panelist_id;
    YearMonth month;
    std::map<std::string, double> minutes;  // tracked station -> minutes
    double total_news_minutes = 0;
    double total_tv_minutes = 0;
    double weight = 0;
};

// Throws ValidationError on a broken invariant.
void validate_panel_record(const PanelRecord& r);

struct PanelIssue {
    std::size_t line = 0;
    std::string message;
};

struct PanelParse {
    std::vector<PanelRecord> records;
    std::vector<PanelIssue> issues;
};

PanelParse parse_panel(std::string_view jsonl);
std::string panel_record_to_json_line(const PanelRecord& r);

struct AudienceShare {
    YearMonth month;
    double numerator = 0;    // weighted persons
    double denominator = 0;  // weighted television audience
    double share = 0;
};

// Panelists with total_news_minutes >= min_minutes, against the whole
// weighted panel of that month. Throws Error for an empty month.
AudienceShare active_consumers(std::span<const PanelRecord> panel, const YearMonth& month,
                               double min_minutes = 30.0);

// Active consumers whose minutes in station_set are at least `threshold` of
// their total news minutes. threshold must lie in (0, 1].
AudienceShare majority_share(std::span<const PanelRecord> panel, const YearMonth& month,
                             const std::set<std::string>& station_set, double threshold,
                             double min_minutes = 30.0);

// --- smoothing -----------------------------------------------------------------

using DatedSeries = std::map<Date, double>;

// Centered rolling mean over the values present in
// [d - (window-1)/2, d + window/2]; output keeps the input dates.
DatedSeries smooth(const DatedSeries& series, std::size_t window_days);

}  // namespace newslens
