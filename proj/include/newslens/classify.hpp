#pragma once

// Layer-2 supervised refinement: one L2-regularized logistic regression per
// (station, topic) cell, selected by cross-validated F1.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "newslens/corpus.hpp"

namespace newslens {

// Frozen phrase vocabulary that defines the feature indices.
class FeatureSpace {
  public:
    FeatureSpace() = default;
    explicit FeatureSpace(std::vector<std::string> phrases);  // sorted + deduplicated internally

    std::optional<std::uint32_t> index(const std::string& phrase) const;
    const std::string& phrase(std::uint32_t i) const { return phrases_[i]; }
    std::size_t size() const { return phrases_.size(); }
    std::uint64_t hash() const { return hash_; }

  private:
    std::vector<std::string> phrases_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::uint64_t hash_ = 0;
};

// Sparse, sorted by index. Values are count / m where m counts every phrase
// of the segment, so dropping out-of-vocabulary phrases lowers the L1 norm.
struct FeatureVector {
    std::vector<std::pair<std::uint32_t, double>> entries;

    bool operator==(const FeatureVector&) const = default;
};

FeatureVector featurize(const PhraseCounts& counts, const FeatureSpace& space);

struct Example {
    FeatureVector x;
    int y = 0;  // 1 positive, 0 negative
};

/// Mean logistic loss plus (lambda/2)·||w||², bias unregularized. When
/// grad_w/grad_b are given they receive the analytic gradient. Feature
/// indices must be < w.size().
double regularized_logistic_loss(std::span<const Example> data, std::span<const double> w, double b,
                                 double lambda, std::vector<double>* grad_w = nullptr, double* grad_b = nullptr);

struct GradientDescentOptions {
    std::size_t max_iter = 300;
    double tolerance = 1e-7;  // on the max-norm of the gradient
    double armijo = 1e-4;
};

struct DenseFit {
    std::vector<double> w;
    double b = 0.0;
    std::size_t iterations = 0;
    double loss = 0.0;
};

// Batch gradient descent with backtracking (Armijo) line search, from zero.
DenseFit fit_logistic(std::span<const Example> data, std::size_t dims, double lambda,
                      const GradientDescentOptions& opts = {});

struct LogisticModel {
    std::vector<std::pair<std::uint32_t, double>> weights;  // sparse, sorted by feature index
    double bias = 0.0;
    double lambda = 0.0;
    std::uint64_t vocab_hash = 0;

    double decision(const FeatureVector& x) const;
    double probability(const FeatureVector& x) const;
};

struct Prediction01 {
    double probability = 0.5;
    bool positive = true;  // probability >= 0.5
};

// Throws ValidationError when the model was trained on another vocabulary.
Prediction01 predict(const LogisticModel& model, const FeatureVector& x, std::uint64_t vocab_hash);

// Fold id for every sample: positives and negatives are shuffled separately,
// laid end to end and dealt round-robin, so folds are stratified and their
// sizes differ by at most one.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed);

struct BinaryMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

BinaryMetrics binary_metrics(std::span<const int> truth, std::span<const int> predicted);

// Index of the grid point with the highest mean F1 over folds; ties go to
// the earlier point. f1[g][fold].
std::size_t select_grid_point(const std::vector<std::vector<double>>& f1);

struct CVReport {
    std::vector<BinaryMetrics> folds;  // at the selected grid point
    std::vector<double> grid;
    std::vector<double> grid_mean_f1;
    std::size_t selected = 0;
    double mean_precision = 0.0;
    double sd_precision = 0.0;
    double mean_recall = 0.0;
    double mean_f1 = 0.0;
};

struct TrainOptions {
    std::size_t folds = 5;
    std::vector<double> grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
    GradientDescentOptions gd;
    std::uint64_t seed = 0;
};

struct CellKey {
    std::string station;
    std::string topic;

    auto operator<=>(const CellKey&) const = default;
    std::string str() const { return station + "/" + topic; }
};

struct TrainedCell {
    CellKey cell;
    LogisticModel model;
    CVReport report;
};

/// k-fold CV over the grid, then a refit on all data at the best point.
/// Throws Error naming the cell when either class has fewer than 2 samples.
TrainedCell train_cell(const CellKey& cell, std::span<const Example> labeled, std::uint64_t vocab_hash,
                       const TrainOptions& opts);

/// Labeled items of one cell, as indices into the task list. The cell's own
/// sampled tasks come first: resolved to the cell's topic -> positive, any
/// other resolved label -> negative. When a class has fewer than
/// min_per_class items, resolved tasks of the same station from other cells
/// are added (in task order, one per segment) until it has enough.
struct CellTrainingSet {
    CellKey cell;
    std::vector<std::size_t> tasks;
    std::vector<int> labels;
};

struct TaskLabel {
    std::string segment_id;
    std::string station;
    std::string cell_topic;  // topic of the cell the task was drawn from
    std::string choice;      // resolved topic id or "none"; empty if unresolved
};

std::map<CellKey, CellTrainingSet> cell_training_sets(std::span<const TaskLabel> tasks,
                                                      std::size_t min_per_class = 2);

struct RefineResult {
    std::map<CellKey, std::vector<std::size_t>> accepted;  // accepted members (indices into features)
    std::map<CellKey, double> cell_precision;               // CV precision of each model
    double mean_precision = 0.0;
    double sd_precision = 0.0;
    std::vector<std::string> warnings;
};

/// The accepted set of each cell = members of its layer-1 set predicted positive by the
/// cell's model. Throws Error when a populated cell has no model.
RefineResult refine(const std::map<CellKey, std::vector<std::size_t>>& weak_sets,
                    std::span<const FeatureVector> features, const std::map<CellKey, TrainedCell>& models,
                    std::uint64_t vocab_hash);

std::string model_to_json(const TrainedCell& cell, const FeatureSpace& space);
TrainedCell model_from_json(std::string_view text, const FeatureSpace& space);

}  // namespace newslens
