#include "newslens/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"

namespace newslens {

using nlohmann::json;

namespace {

// log(1 + exp(-m)) without overflow.
double log1pexp_neg(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double dot(const FeatureVector& x, std::span<const double> w) {
    double s = 0;
    for (const auto& [i, v] : x.entries) s += w[i] * v;
    return s;
}

}  // namespace

FeatureSpace::FeatureSpace(std::vector<std::string> phrases) : phrases_(std::move(phrases)) {
    std::sort(phrases_.begin(), phrases_.end());
    phrases_.erase(std::unique(phrases_.begin(), phrases_.end()), phrases_.end());
    Fnv1a h;
    for (std::uint32_t i = 0; i < phrases_.size(); ++i) {
        index_.emplace(phrases_[i], i);
        h.update(phrases_[i]).update(std::string_view("\n", 1));
    }
    hash_ = h.digest();
}

std::optional<std::uint32_t> FeatureSpace::index(const std::string& phrase) const {
    auto it = index_.find(phrase);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

FeatureVector featurize(const PhraseCounts& counts, const FeatureSpace& space) {
    std::uint64_t m = 0;
    for (const auto& [_, n] : counts) m += n;
    FeatureVector x;
    if (m == 0) return x;
    for (const auto& [phrase, n] : counts)
        if (auto i = space.index(phrase)) x.entries.emplace_back(*i, static_cast<double>(n) / static_cast<double>(m));
    std::sort(x.entries.begin(), x.entries.end());
    return x;
}

double regularized_logistic_loss(std::span<const Example> data, std::span<const double> w, double b,
                                 double lambda, std::vector<double>* grad_w, double* grad_b) {
    const double n = static_cast<double>(data.size());
    if (grad_w) grad_w->assign(w.size(), 0.0);
    double gb = 0;
    double loss = 0;
    for (const auto& ex : data) {
        const double z = dot(ex.x, w) + b;
        const double sign = ex.y ? 1.0 : -1.0;
        loss += log1pexp_neg(sign * z);
        // d/dz log(1 + exp(-s z)) = sigmoid(z) - y
        const double r = sigmoid(z) - static_cast<double>(ex.y);
        if (grad_w)
            for (const auto& [i, v] : ex.x.entries) (*grad_w)[i] += r * v;
        gb += r;
    }
    double reg = 0;
    for (double wi : w) reg += wi * wi;
    loss = loss / n + 0.5 * lambda * reg;
    if (grad_w)
        for (std::size_t i = 0; i < w.size(); ++i) (*grad_w)[i] = (*grad_w)[i] / n + lambda * w[i];
    if (grad_b) *grad_b = gb / n;
    return loss;
}

DenseFit fit_logistic(std::span<const Example> data, std::size_t dims, double lambda,
                      const GradientDescentOptions& opts) {
    DenseFit fit;
    fit.w.assign(dims, 0.0);
    if (data.empty()) return fit;
    std::vector<double> g, w_try(dims);
    double gb = 0;
    double f = regularized_logistic_loss(data, fit.w, fit.b, lambda, &g, &gb);
    double step = 1.0;
    for (; fit.iterations < opts.max_iter; ++fit.iterations) {
        double gmax = std::abs(gb), gsq = gb * gb;
        for (double gi : g) {
            gmax = std::max(gmax, std::abs(gi));
            gsq += gi * gi;
        }
        if (gmax < opts.tolerance) break;

        step = std::min(step * 2.0, 1e8);
        double f_try = 0, b_try = 0;
        bool moved = false;
        for (int halvings = 0; halvings < 80; ++halvings) {
            for (std::size_t i = 0; i < dims; ++i) w_try[i] = fit.w[i] - step * g[i];
            b_try = fit.b - step * gb;
            f_try = regularized_logistic_loss(data, w_try, b_try, lambda);
            if (f_try <= f - opts.armijo * step * gsq) {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
        fit.w.swap(w_try);
        fit.b = b_try;
        f = regularized_logistic_loss(data, fit.w, fit.b, lambda, &g, &gb);
    }
    fit.loss = f;
    return fit;
}

double LogisticModel::decision(const FeatureVector& x) const {
    double s = bias;
    auto wi = weights.begin();
    for (const auto& [i, v] : x.entries) {
        wi = std::lower_bound(wi, weights.end(), i, [](const auto& p, std::uint32_t k) { return p.first < k; });
        if (wi == weights.end()) break;
        if (wi->first == i) s += wi->second * v;
    }
    return s;
}

double LogisticModel::probability(const FeatureVector& x) const { return sigmoid(decision(x)); }

Prediction01 predict(const LogisticModel& model, const FeatureVector& x, std::uint64_t vocab_hash) {
    if (model.vocab_hash != vocab_hash)
        throw ValidationError("model vocabulary " + hex64(model.vocab_hash) + " does not match features " +
                              hex64(vocab_hash));
    Prediction01 p;
    p.probability = model.probability(x);
    p.positive = p.probability >= 0.5;
    return p;
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw Error("fold count must be positive");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
    std::mt19937_64 rng(splitmix64(seed));
    portable_shuffle(pos, rng);
    portable_shuffle(neg, rng);
    std::vector<std::size_t> fold(labels.size());
    std::size_t r = 0;
    for (auto i : pos) fold[i] = r++ % k;
    for (auto i : neg) fold[i] = r++ % k;
    return fold;
}

BinaryMetrics binary_metrics(std::span<const int> truth, std::span<const int> predicted) {
    BinaryMetrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (predicted[i] && truth[i]) ++m.tp;
        else if (predicted[i]) ++m.fp;
        else if (truth[i]) ++m.fn;
        else ++m.tn;
    }
    m.precision = m.tp + m.fp ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = m.tp + m.fn ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

std::size_t select_grid_point(const std::vector<std::vector<double>>& f1) {
    if (f1.empty()) throw Error("empty hyperparameter grid");
    std::size_t best = 0;
    double best_mean = -1;
    for (std::size_t g = 0; g < f1.size(); ++g) {
        double mean = f1[g].empty() ? 0.0 : std::accumulate(f1[g].begin(), f1[g].end(), 0.0) / static_cast<double>(f1[g].size());
        if (mean > best_mean) {
            best_mean = mean;
            best = g;
        }
    }
    return best;
}

namespace {

// Remaps global feature indices to a compact local range.
struct LocalProblem {
    std::vector<std::uint32_t> global;  // local -> global
    std::vector<Example> examples;
};

LocalProblem localize(std::span<const Example> data) {
    LocalProblem p;
    std::vector<std::uint32_t> all;
    for (const auto& ex : data)
        for (const auto& [i, _] : ex.x.entries) all.push_back(i);
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    p.global = all;
    p.examples.reserve(data.size());
    for (const auto& ex : data) {
        Example local{{}, ex.y};
        for (const auto& [i, v] : ex.x.entries) {
            auto at = std::lower_bound(all.begin(), all.end(), i);
            local.x.entries.emplace_back(static_cast<std::uint32_t>(at - all.begin()), v);
        }
        p.examples.push_back(std::move(local));
    }
    return p;
}

LogisticModel to_model(const LocalProblem& p, const DenseFit& fit, double lambda, std::uint64_t vocab_hash) {
    LogisticModel m;
    m.bias = fit.b;
    m.lambda = lambda;
    m.vocab_hash = vocab_hash;
    for (std::size_t i = 0; i < fit.w.size(); ++i)
        if (fit.w[i] != 0.0) m.weights.emplace_back(p.global[i], fit.w[i]);
    return m;
}

}  // namespace

TrainedCell train_cell(const CellKey& cell, std::span<const Example> labeled, std::uint64_t vocab_hash,
                       const TrainOptions& opts) {
    std::vector<int> y;
    std::size_t npos = 0;
    for (const auto& ex : labeled) {
        y.push_back(ex.y ? 1 : 0);
        npos += ex.y ? 1 : 0;
    }
    const std::size_t nneg = labeled.size() - npos;
    if (npos < 2 || nneg < 2)
        throw Error("cell " + cell.str() + ": need at least 2 samples of each class (have " + std::to_string(npos) +
                    " positive, " + std::to_string(nneg) + " negative)");
    if (opts.grid.empty()) throw Error("empty hyperparameter grid");

    const auto fold = stratified_folds(y, opts.folds, opts.seed ^ fnv1a(cell.str()));
    const auto problem = localize(labeled);
    const std::size_t dims = problem.global.size();

    TrainedCell out;
    out.cell = cell;
    out.report.grid = opts.grid;
    std::vector<std::vector<double>> f1(opts.grid.size());
    std::vector<std::vector<BinaryMetrics>> metrics(opts.grid.size());
    for (std::size_t g = 0; g < opts.grid.size(); ++g) {
        for (std::size_t k = 0; k < opts.folds; ++k) {
            std::vector<Example> train;
            std::vector<const Example*> held;
            for (std::size_t i = 0; i < problem.examples.size(); ++i)
                (fold[i] == k ? (void)held.push_back(&problem.examples[i]) : (void)train.push_back(problem.examples[i]));
            if (held.empty()) continue;
            auto fit = fit_logistic(train, dims, opts.grid[g], opts.gd);
            std::vector<int> truth, pred;
            for (const auto* ex : held) {
                truth.push_back(ex->y);
                pred.push_back(sigmoid(dot(ex->x, fit.w) + fit.b) >= 0.5 ? 1 : 0);
            }
            auto m = binary_metrics(truth, pred);
            f1[g].push_back(m.f1);
            metrics[g].push_back(m);
        }
        double mean = 0;
        for (double v : f1[g]) mean += v;
        out.report.grid_mean_f1.push_back(f1[g].empty() ? 0.0 : mean / static_cast<double>(f1[g].size()));
    }
    const std::size_t best = select_grid_point(f1);
    out.report.selected = best;
    out.report.folds = metrics[best];
    const double nf = static_cast<double>(out.report.folds.size());
    for (const auto& m : out.report.folds) {
        out.report.mean_precision += m.precision / nf;
        out.report.mean_recall += m.recall / nf;
        out.report.mean_f1 += m.f1 / nf;
    }
    double var = 0;
    for (const auto& m : out.report.folds) var += (m.precision - out.report.mean_precision) * (m.precision - out.report.mean_precision);
    out.report.sd_precision = nf > 1 ? std::sqrt(var / (nf - 1)) : 0.0;

    auto fit = fit_logistic(problem.examples, dims, opts.grid[best], opts.gd);
    out.model = to_model(problem, fit, opts.grid[best], vocab_hash);
    return out;
}

std::map<CellKey, CellTrainingSet> cell_training_sets(std::span<const TaskLabel> tasks, std::size_t min_per_class) {
    std::map<CellKey, CellTrainingSet> out;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& t = tasks[i];
        CellKey key{t.station, t.cell_topic};
        auto& set = out[key];
        set.cell = key;
        if (t.choice.empty()) continue;
        set.tasks.push_back(i);
        set.labels.push_back(t.choice == t.cell_topic ? 1 : 0);
    }
    for (auto& [key, set] : out) {
        std::size_t have[2] = {0, 0};
        std::set<std::string> segments;
        for (std::size_t j = 0; j < set.tasks.size(); ++j) {
            ++have[set.labels[j]];
            segments.insert(tasks[set.tasks[j]].segment_id);
        }
        for (int cls = 0; cls < 2; ++cls) {
            for (std::size_t i = 0; i < tasks.size() && have[cls] < min_per_class; ++i) {
                const auto& t = tasks[i];
                if (t.choice.empty() || t.station != key.station || t.cell_topic == key.topic) continue;
                if ((t.choice == key.topic ? 1 : 0) != cls || segments.count(t.segment_id)) continue;
                segments.insert(t.segment_id);
                set.tasks.push_back(i);
                set.labels.push_back(cls);
                ++have[cls];
            }
        }
    }
    return out;
}

RefineResult refine(const std::map<CellKey, std::vector<std::size_t>>& weak_sets,
                    std::span<const FeatureVector> features, const std::map<CellKey, TrainedCell>& models,
                    std::uint64_t vocab_hash) {
    RefineResult r;
    std::vector<double> precisions;
    for (const auto& [cell, members] : weak_sets) {
        if (members.empty()) continue;
        auto it = models.find(cell);
        if (it == models.end()) throw Error("no model for populated cell " + cell.str());
        auto& accepted = r.accepted[cell];
        for (auto i : members)
            if (predict(it->second.model, features[i], vocab_hash).positive) accepted.push_back(i);
        if (accepted.empty()) r.warnings.push_back("cell " + cell.str() + ": model rejected every candidate");
        r.cell_precision[cell] = it->second.report.mean_precision;
        precisions.push_back(it->second.report.mean_precision);
    }
    if (!precisions.empty()) {
        const double n = static_cast<double>(precisions.size());
        for (double p : precisions) r.mean_precision += p / n;
        double var = 0;
        for (double p : precisions) var += (p - r.mean_precision) * (p - r.mean_precision);
        r.sd_precision = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    }
    return r;
}

std::string model_to_json(const TrainedCell& c, const FeatureSpace& space) {
    json weights = json::array();
    for (const auto& [i, w] : c.model.weights) weights.push_back({space.phrase(i), w});
    json folds = json::array();
    for (const auto& m : c.report.folds)
        folds.push_back({{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                         {"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}});
    json j = {{"station", c.cell.station},
              {"topic", c.cell.topic},
              {"vocab_hash", hex64(c.model.vocab_hash)},
              {"weights", weights},
              {"bias", c.model.bias},
              {"hyperparameters", {{"lambda", c.model.lambda}, {"grid", c.report.grid}}},
              {"cv_report",
               {{"folds", folds},
                {"grid_mean_f1", c.report.grid_mean_f1},
                {"selected", c.report.selected},
                {"mean_precision", c.report.mean_precision},
                {"sd_precision", c.report.sd_precision},
                {"mean_recall", c.report.mean_recall},
                {"mean_f1", c.report.mean_f1}}}};
    return j.dump();
}

TrainedCell model_from_json(std::string_view text, const FeatureSpace& space) {
    json j = json::parse(text);
    TrainedCell c;
    c.cell = {j.at("station").get<std::string>(), j.at("topic").get<std::string>()};
    c.model.vocab_hash = std::stoull(j.at("vocab_hash").get<std::string>(), nullptr, 16);
    if (c.model.vocab_hash != space.hash())
        throw ValidationError("model " + c.cell.str() + " was trained on a different vocabulary");
    for (const auto& p : j.at("weights")) {
        auto idx = space.index(p.at(0).get<std::string>());
        if (!idx) throw ValidationError("model weight for unknown phrase " + p.at(0).get<std::string>());
        c.model.weights.emplace_back(*idx, p.at(1).get<double>());
    }
    std::sort(c.model.weights.begin(), c.model.weights.end());
    c.model.bias = j.at("bias").get<double>();
    c.model.lambda = j.at("hyperparameters").at("lambda").get<double>();
    c.report.grid = j.at("hyperparameters").at("grid").get<std::vector<double>>();
    const auto& cv = j.at("cv_report");
    for (const auto& f : cv.at("folds")) {
        BinaryMetrics m;
        m.precision = f.at("precision");
        m.recall = f.at("recall");
        m.f1 = f.at("f1");
        m.tp = f.at("tp");
        m.fp = f.at("fp");
        m.fn = f.at("fn");
        m.tn = f.at("tn");
        c.report.folds.push_back(m);
    }
    c.report.grid_mean_f1 = cv.at("grid_mean_f1").get<std::vector<double>>();
    c.report.selected = cv.at("selected");
    c.report.mean_precision = cv.at("mean_precision");
    c.report.sd_precision = cv.at("sd_precision");
    c.report.mean_recall = cv.at("mean_recall");
    c.report.mean_f1 = cv.at("mean_f1");
    return c;
}

}  // namespace newslens
