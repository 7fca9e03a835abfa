#pragma once

// Batch orchestration: configuration, stage graph, cached artifacts with
// manifests, and figure-data exports.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "newslens/annotation.hpp"
#include "newslens/metrics.hpp"
#include "newslens/polarize.hpp"
#include "newslens/weaksup.hpp"

namespace newslens {

inline constexpr int kPipelineFormatVersion = 1;

struct PipelineConfig {
    std::vector<std::string> stations;
    std::vector<TopicLabel> topics;
    std::vector<std::string> stopwords;
    std::vector<std::string> confounders;  // global
    std::map<std::string, std::vector<std::string>> station_confounders;
    std::size_t max_words = 150;

    struct Oracle {
        std::string kind = "distributional";  // or "precomputed"
        DistributionalOracle::Options options;
        std::string predictions;  // precomputed prediction file
    } oracle;

    struct Dictionary {
        std::size_t k = 50;
        std::size_t vocab_cap = 100;
        std::vector<std::string> global_removals;
        std::map<std::string, std::vector<std::string>> removals;  // per topic
    } dictionary;

    struct Weak {
        std::size_t k = 50;
        double threshold = 0.20;
    } weak;

    struct Annotation {
        std::size_t n_per_cell = 50;
        AggregationPolicy policy;
    } annotation;

    struct Train {
        std::size_t folds = 5;
        std::vector<double> grid;
        std::size_t max_iter = 300;
        double tolerance = 1e-7;
        std::size_t min_df = 2;
        std::size_t min_per_class = 2;
        std::string insufficient_cell = "error";  // or "keep_weak"
    } train;

    struct Polarization {
        EstimatorOptions estimator;
        WindowKind window = WindowKind::yearly;
        std::vector<Date> eras;
        std::map<std::string, std::set<std::string>> station_sets;
        std::vector<std::pair<std::string, std::string>> pairs;  // (source, target) set names
        std::vector<std::set<ProgramCategory>> category_filters;
    } polarization;

    struct Divergence {
        WindowKind window = WindowKind::monthly;
        ShareAggregation aggregation = ShareAggregation::mean_of_days;
        std::size_t smoothing_days = 1;
        std::vector<std::pair<std::string, std::string>> pairs;  // empty = every station pair
    } divergence;

    struct Consumption {
        double min_minutes = 30.0;
        std::vector<double> thresholds = {0.50, 0.75};
        std::map<std::string, std::set<std::string>> station_sets;
        std::string big_six;  // name of the set used for the inset fraction
    } consumption;

    std::uint64_t seed = 42;
    unsigned jobs = 1;

    struct Paths {
        std::string episodes, panel, records, work, exports, static_dir;
    } paths;

    nlohmann::json resolved;  // defaults merged with the file, after overrides
};

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::optional<std::string> window;  // polarization and divergence windows
    std::optional<double> threshold;    // layer-1 overlap threshold
};

nlohmann::json default_config();

// Unknown keys are rejected with ValidationError. Relative paths are resolved
// against base_dir.
PipelineConfig parse_config(std::string_view text, const std::string& base_dir, const ConfigOverrides& overrides = {});
PipelineConfig load_config(const std::string& path, const ConfigOverrides& overrides = {});

// Hash of the resolved config without paths and jobs, which never change results.
std::uint64_t config_hash(const PipelineConfig& cfg);

enum class Stage {
    ingest,
    segment,
    expand_dict,
    weak_classify,
    sample_annotation,
    import_annotations,
    train,
    refine,
    polarization,
    divergence,
    consumption,
    export_figures,
};

const std::vector<Stage>& all_stages();
std::string_view stage_name(Stage s);
std::optional<Stage> parse_stage(std::string_view name);
const std::vector<Stage>& stage_dependencies(Stage s);

// Covers the config sections a stage reads plus those of its upstream stages.
std::uint64_t stage_config_hash(const PipelineConfig& cfg, Stage s);

struct Manifest {
    std::string stage;
    int format_version = kPipelineFormatVersion;
    std::string config_hash;
    std::map<std::string, std::string> inputs;   // name -> content hash
    std::map<std::string, std::string> outputs;  // file name -> content hash
};

struct StageResult {
    Stage stage;
    bool cache_hit = false;
    std::vector<std::string> notes;
};

class Pipeline {
  public:
    explicit Pipeline(PipelineConfig cfg, std::ostream* log = nullptr);

    // Throws DependencyError when an upstream artifact is missing or stale.
    StageResult run(Stage s);
    // Every stage up to and including `last`, in graph order.
    std::vector<StageResult> run_through(Stage last);

    // Throws DependencyError unless the stage's artifacts are present and
    // match the current config.
    void require(Stage s) const;
    std::optional<Manifest> manifest(Stage s) const;

    const PipelineConfig& config() const { return cfg_; }
    std::string work_path(const std::string& name) const;
    std::string export_path(const std::string& name) const;

  private:
    std::map<std::string, std::string> run_stage(Stage s, const std::map<std::string, std::string>& inputs,
                                                  std::vector<std::string>& notes);
    std::map<std::string, std::string> external_inputs(Stage s) const;

    PipelineConfig cfg_;
    std::ostream* log_;
};

}  // namespace newslens
