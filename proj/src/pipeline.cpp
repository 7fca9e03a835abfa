#include "newslens/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>

#include "newslens/classify.hpp"
#include "newslens/snapshot.hpp"

namespace newslens {

using nlohmann::json;
namespace fs = std::filesystem;

// --- configuration -----------------------------------------------------------

json default_config() {
    return json::parse(R"({
      "stations": ["ABC", "CBS", "NBC", "CNN", "FNC", "MSNBC"],
      "topics": [],
      "stopwords": [],
      "confounders": {"global": [], "per_station": {}},
      "segment": {"max_words": 150},
      "oracle": {"kind": "distributional", "window": 2, "max_contexts": 200,
                 "similarity_floor": 0.05, "predictions": ""},
      "dictionary": {"k": 50, "vocab_cap": 100, "removals": {"global": [], "per_topic": {}}},
      "weak": {"k": 50, "threshold": 0.20},
      "annotation": {"n_per_cell": 50, "min_annotators": 4, "max_annotators": 7},
      "train": {"folds": 5, "grid": [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0], "max_iter": 300,
                "tolerance": 1e-7, "min_df": 2, "min_per_class": 2, "insufficient_cell": "error"},
      "polarization": {"basis": "counts", "zero_policy": "neutral", "window": "yearly",
                       "eras": ["2016-01-01", "2020-01-01"], "station_sets": {}, "pairs": [],
                       "category_filters": [[]]},
      "divergence": {"window": "monthly", "aggregation": "mean_of_days", "smoothing_days": 1, "pairs": []},
      "consumption": {"min_minutes": 30, "thresholds": [0.50, 0.75], "station_sets": {}, "big_six": ""},
      "seed": 42,
      "jobs": 1,
      "paths": {"episodes": "", "panel": "", "records": "records.jsonl", "work": "work",
                "exports": "exports", "static": ""}
    })");
}

namespace {

// Objects whose keys are user-chosen names rather than schema fields.
const std::set<std::string> kFreeMaps = {"/confounders/per_station", "/dictionary/removals/per_topic",
                                         "/polarization/station_sets", "/consumption/station_sets"};

void merge_strict(json& base, const json& user, const std::string& path) {
    if (!user.is_object()) throw ValidationError("config " + (path.empty() ? "root" : path) + " must be an object");
    for (const auto& [k, v] : user.items()) {
        const std::string p = path + "/" + k;
        if (!base.contains(k)) throw ValidationError("unknown config key '" + p + "'");
        if (base[k].is_object() && !kFreeMaps.count(p))
            merge_strict(base[k], v, p);
        else
            base[k] = v;
    }
}

std::vector<std::string> strings(const json& j) { return j.get<std::vector<std::string>>(); }

std::string resolve_path(const std::string& p, const std::string& base_dir) {
    if (p.empty()) return p;
    fs::path path(p);
    if (path.is_absolute() || base_dir.empty()) return path.lexically_normal().string();
    return (fs::path(base_dir) / path).lexically_normal().string();
}

std::pair<std::string, std::string> name_pair(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2) throw ValidationError(std::string(what) + " entries must be [a, b]");
    return {j[0].get<std::string>(), j[1].get<std::string>()};
}

ShareAggregation parse_aggregation(const std::string& s) {
    if (s == "mean_of_days") return ShareAggregation::mean_of_days;
    if (s == "word_weighted") return ShareAggregation::word_weighted;
    throw ValidationError("unknown divergence aggregation '" + s + "'");
}

void fill(PipelineConfig& c, const json& r, const std::string& base_dir) {
    c.stations = strings(r.at("stations"));
    if (c.stations.empty()) throw ValidationError("config: no stations");
    for (const auto& t : r.at("topics")) {
        for (const auto& [k, _] : t.items())
            if (k != "id" && k != "label_words") throw ValidationError("unknown config key '/topics/" + k + "'");
        c.topics.push_back({t.at("id").get<std::string>(), strings(t.at("label_words"))});
    }
    validate_topics(c.topics);
    c.stopwords = strings(r.at("stopwords"));
    c.confounders = strings(r.at("confounders").at("global"));
    for (const auto& [st, list] : r.at("confounders").at("per_station").items()) {
        if (std::find(c.stations.begin(), c.stations.end(), st) == c.stations.end())
            throw ValidationError("confounders for unregistered station " + st);
        c.station_confounders[st] = strings(list);
    }
    c.max_words = r.at("segment").at("max_words").get<std::size_t>();
    if (c.max_words == 0) throw ValidationError("segment.max_words must be at least 1");

    const auto& o = r.at("oracle");
    c.oracle.kind = o.at("kind").get<std::string>();
    if (c.oracle.kind != "distributional" && c.oracle.kind != "precomputed")
        throw ValidationError("oracle.kind must be distributional or precomputed");
    c.oracle.options.window = o.at("window").get<std::size_t>();
    c.oracle.options.max_contexts = o.at("max_contexts").get<std::size_t>();
    c.oracle.options.similarity_floor = o.at("similarity_floor").get<double>();
    c.oracle.predictions = resolve_path(o.at("predictions").get<std::string>(), base_dir);
    if (c.oracle.kind == "precomputed" && c.oracle.predictions.empty())
        throw ValidationError("oracle.predictions is required for the precomputed oracle");

    const auto& d = r.at("dictionary");
    c.dictionary.k = d.at("k").get<std::size_t>();
    c.dictionary.vocab_cap = d.at("vocab_cap").get<std::size_t>();
    c.dictionary.global_removals = strings(d.at("removals").at("global"));
    for (const auto& [topic, list] : d.at("removals").at("per_topic").items())
        c.dictionary.removals[topic] = strings(list);

    c.weak.k = r.at("weak").at("k").get<std::size_t>();
    c.weak.threshold = r.at("weak").at("threshold").get<double>();
    if (c.weak.k == 0) throw ValidationError("weak.k must be at least 1");
    if (!(c.weak.threshold >= 0.0 && c.weak.threshold <= 1.0))
        throw ValidationError("weak.threshold must lie in [0, 1]");

    const auto& a = r.at("annotation");
    c.annotation.n_per_cell = a.at("n_per_cell").get<std::size_t>();
    c.annotation.policy.min_annotators = a.at("min_annotators").get<std::size_t>();
    c.annotation.policy.max_annotators = a.at("max_annotators").get<std::size_t>();
    if (c.annotation.policy.max_annotators < c.annotation.policy.min_annotators)
        throw ValidationError("annotation.max_annotators is below min_annotators");

    const auto& t = r.at("train");
    c.train.folds = t.at("folds").get<std::size_t>();
    c.train.grid = t.at("grid").get<std::vector<double>>();
    c.train.max_iter = t.at("max_iter").get<std::size_t>();
    c.train.tolerance = t.at("tolerance").get<double>();
    c.train.min_df = t.at("min_df").get<std::size_t>();
    c.train.min_per_class = t.at("min_per_class").get<std::size_t>();
    c.train.insufficient_cell = t.at("insufficient_cell").get<std::string>();
    if (c.train.folds < 2) throw ValidationError("train.folds must be at least 2");
    if (c.train.grid.empty()) throw ValidationError("train.grid is empty");
    if (c.train.insufficient_cell != "error" && c.train.insufficient_cell != "keep_weak")
        throw ValidationError("train.insufficient_cell must be error or keep_weak");

    const auto& p = r.at("polarization");
    const auto basis = p.at("basis").get<std::string>();
    if (basis == "counts")
        c.polarization.estimator.basis = RhoBasis::counts;
    else if (basis == "frequencies")
        c.polarization.estimator.basis = RhoBasis::frequencies;
    else
        throw ValidationError("polarization.basis must be counts or frequencies");
    const auto zero = p.at("zero_policy").get<std::string>();
    if (zero == "neutral")
        c.polarization.estimator.zero = ZeroPolicy::neutral;
    else if (zero == "drop")
        c.polarization.estimator.zero = ZeroPolicy::drop;
    else
        throw ValidationError("polarization.zero_policy must be neutral or drop");
    c.polarization.window = parse_window_kind(p.at("window").get<std::string>());
    for (const auto& e : p.at("eras")) c.polarization.eras.push_back(Date::parse(e.get<std::string>()));
    std::sort(c.polarization.eras.begin(), c.polarization.eras.end());
    for (const auto& [name, list] : p.at("station_sets").items()) {
        auto v = strings(list);
        c.polarization.station_sets[name] = {v.begin(), v.end()};
    }
    for (const auto& pr : p.at("pairs")) c.polarization.pairs.push_back(name_pair(pr, "polarization.pairs"));
    for (const auto& f : p.at("category_filters")) {
        std::set<ProgramCategory> cats;
        for (const auto& s : f) cats.insert(parse_category(s.get<std::string>()));
        c.polarization.category_filters.push_back(std::move(cats));
    }
    if (c.polarization.category_filters.empty()) c.polarization.category_filters.push_back({});

    const auto& dv = r.at("divergence");
    c.divergence.window = parse_window_kind(dv.at("window").get<std::string>());
    c.divergence.aggregation = parse_aggregation(dv.at("aggregation").get<std::string>());
    c.divergence.smoothing_days = dv.at("smoothing_days").get<std::size_t>();
    if (c.divergence.smoothing_days == 0) throw ValidationError("divergence.smoothing_days must be at least 1");
    for (const auto& pr : dv.at("pairs")) c.divergence.pairs.push_back(name_pair(pr, "divergence.pairs"));

    const auto& cs = r.at("consumption");
    c.consumption.min_minutes = cs.at("min_minutes").get<double>();
    c.consumption.thresholds = cs.at("thresholds").get<std::vector<double>>();
    for (double th : c.consumption.thresholds)
        if (!(th > 0.0 && th <= 1.0)) throw ValidationError("consumption thresholds must lie in (0, 1]");
    for (const auto& [name, list] : cs.at("station_sets").items()) {
        auto v = strings(list);
        c.consumption.station_sets[name] = {v.begin(), v.end()};
    }
    c.consumption.big_six = cs.at("big_six").get<std::string>();
    if (!c.consumption.big_six.empty() && !c.consumption.station_sets.count(c.consumption.big_six))
        throw ValidationError("consumption.big_six names an unknown station set");

    c.seed = r.at("seed").get<std::uint64_t>();
    c.jobs = r.at("jobs").get<unsigned>();
    if (c.jobs == 0) c.jobs = 1;

    const auto& paths = r.at("paths");
    c.paths.episodes = resolve_path(paths.at("episodes").get<std::string>(), base_dir);
    c.paths.panel = resolve_path(paths.at("panel").get<std::string>(), base_dir);
    c.paths.records = resolve_path(paths.at("records").get<std::string>(), base_dir);
    c.paths.work = resolve_path(paths.at("work").get<std::string>(), base_dir);
    c.paths.exports = resolve_path(paths.at("exports").get<std::string>(), base_dir);
    c.paths.static_dir = resolve_path(paths.at("static").get<std::string>(), base_dir);
}

}  // namespace

PipelineConfig parse_config(std::string_view text, const std::string& base_dir, const ConfigOverrides& ov) {
    json user;
    try {
        user = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    json r = default_config();
    merge_strict(r, user, "");
    if (ov.seed) r["seed"] = *ov.seed;
    if (ov.jobs) r["jobs"] = *ov.jobs;
    if (ov.window) {
        r["polarization"]["window"] = *ov.window;
        r["divergence"]["window"] = *ov.window;
    }
    if (ov.threshold) r["weak"]["threshold"] = *ov.threshold;

    PipelineConfig c;
    try {
        fill(c, r, base_dir);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.resolved = std::move(r);
    return c;
}

PipelineConfig load_config(const std::string& path, const ConfigOverrides& overrides) {
    if (!fs::exists(path)) throw ValidationError("config file not found: " + path);
    return parse_config(read_file(path), fs::path(path).parent_path().string(), overrides);
}

namespace {

json hashed_view(const PipelineConfig& cfg) {
    json j = cfg.resolved;
    j.erase("paths");
    j.erase("jobs");
    j["oracle"].erase("predictions");
    return j;
}

}  // namespace

std::uint64_t config_hash(const PipelineConfig& cfg) { return fnv1a(hashed_view(cfg).dump()); }

// --- stage graph -----------------------------------------------------------------

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> v = {Stage::ingest,       Stage::segment,           Stage::expand_dict,
                                         Stage::weak_classify, Stage::sample_annotation, Stage::import_annotations,
                                         Stage::train,        Stage::refine,            Stage::polarization,
                                         Stage::divergence,   Stage::consumption,       Stage::export_figures};
    return v;
}

std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::ingest: return "ingest";
        case Stage::segment: return "segment";
        case Stage::expand_dict: return "expand-dict";
        case Stage::weak_classify: return "weak-classify";
        case Stage::sample_annotation: return "sample-annotation";
        case Stage::import_annotations: return "import-annotations";
        case Stage::train: return "train";
        case Stage::refine: return "refine";
        case Stage::polarization: return "polarization";
        case Stage::divergence: return "divergence";
        case Stage::consumption: return "consumption";
        case Stage::export_figures: return "export-figures";
    }
    return "?";
}

std::optional<Stage> parse_stage(std::string_view name) {
    for (Stage s : all_stages())
        if (stage_name(s) == name) return s;
    return std::nullopt;
}

const std::vector<Stage>& stage_dependencies(Stage s) {
    static const std::map<Stage, std::vector<Stage>> deps = {
        {Stage::ingest, {}},
        {Stage::segment, {Stage::ingest}},
        {Stage::expand_dict, {Stage::segment}},
        {Stage::weak_classify, {Stage::segment, Stage::expand_dict}},
        {Stage::sample_annotation, {Stage::segment, Stage::weak_classify}},
        {Stage::import_annotations, {Stage::sample_annotation}},
        {Stage::train, {Stage::segment, Stage::sample_annotation, Stage::import_annotations}},
        {Stage::refine, {Stage::segment, Stage::weak_classify, Stage::train}},
        {Stage::polarization, {Stage::ingest, Stage::segment, Stage::refine}},
        {Stage::divergence, {Stage::segment, Stage::refine}},
        {Stage::consumption, {}},
        {Stage::export_figures, {Stage::polarization, Stage::divergence, Stage::consumption}},
    };
    return deps.at(s);
}

namespace {

std::vector<std::string> stage_sections(Stage s) {
    switch (s) {
        case Stage::ingest: return {"stations"};
        case Stage::segment: return {"segment"};
        case Stage::expand_dict: return {"topics", "oracle", "dictionary"};
        case Stage::weak_classify: return {"weak"};
        case Stage::sample_annotation: return {"annotation", "seed"};
        case Stage::import_annotations: return {};
        case Stage::train: return {"stopwords", "confounders", "train", "seed"};
        case Stage::refine: return {};
        case Stage::polarization: return {"stopwords", "confounders", "polarization"};
        case Stage::divergence: return {"divergence"};
        case Stage::consumption: return {"stations", "consumption"};
        case Stage::export_figures: return {};
    }
    return {};
}

}  // namespace

std::uint64_t stage_config_hash(const PipelineConfig& cfg, Stage s) {
    const json view = hashed_view(cfg);
    Fnv1a h;
    h.update(stage_name(s)).update_u64(kPipelineFormatVersion);
    for (const auto& sec : stage_sections(s)) h.update(sec).update(view.at(sec).dump());
    for (Stage d : stage_dependencies(s)) h.update_u64(stage_config_hash(cfg, d));
    return h.digest();
}

// --- helpers ---------------------------------------------------------------------

namespace {

std::string file_hash(const std::string& path) { return hex64(fnv1a(read_file(path))); }

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

json manifest_to_json(const Manifest& m) {
    return {{"stage", m.stage},
            {"format_version", m.format_version},
            {"config_hash", m.config_hash},
            {"inputs", m.inputs},
            {"outputs", m.outputs}};
}

Manifest manifest_from_json(const json& j) {
    Manifest m;
    m.stage = j.at("stage").get<std::string>();
    m.format_version = j.at("format_version").get<int>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    return m;
}

std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) out.emplace_back(line);
        pos = nl + 1;
    }
    return out;
}

std::vector<std::string> topic_ids(const PipelineConfig& cfg) {
    std::vector<std::string> ids;
    for (const auto& t : cfg.topics) ids.push_back(t.id);
    return ids;
}

PhraseFilter phrase_filter(const PipelineConfig& cfg) {
    std::set<std::string> conf(cfg.confounders.begin(), cfg.confounders.end());
    for (const auto& [_, list] : cfg.station_confounders) conf.insert(list.begin(), list.end());
    return PhraseFilter(cfg.stopwords, {conf.begin(), conf.end()});
}

std::set<std::string> resolve_set(const std::map<std::string, std::set<std::string>>& sets,
                                  const std::vector<std::string>& stations, const std::string& name) {
    auto it = sets.find(name);
    if (it != sets.end()) return it->second;
    if (std::find(stations.begin(), stations.end(), name) != stations.end()) return {name};
    throw ValidationError("'" + name + "' is neither a station set nor a station");
}

std::string join_set(const std::set<std::string>& s, const char* sep = ",") {
    std::string out;
    for (const auto& x : s) out += (out.empty() ? "" : sep) + x;
    return out;
}

std::string join_categories(const std::set<ProgramCategory>& cats) {
    if (cats.empty()) return "all";
    std::string out;
    for (auto c : cats) out += (out.empty() ? "" : ",") + std::string(to_string(c));
    return out;
}

std::vector<TokenizedSegment> tokenized(const std::vector<Segment>& segs, unsigned jobs) {
    std::vector<TokenizedSegment> out(segs.size());
    parallel_for(segs.size(), jobs, [&](std::size_t i) { out[i] = {segs[i].id(), tokenize(segs[i].text)}; });
    return out;
}

std::vector<PhraseCounts> all_phrase_counts(const std::vector<Segment>& segs, const PhraseFilter& filter,
                                            unsigned jobs) {
    std::vector<PhraseCounts> out(segs.size());
    parallel_for(segs.size(), jobs, [&](std::size_t i) { out[i] = phrase_counts(segs[i], filter); });
    return out;
}

FeatureSpace feature_space(const std::vector<PhraseCounts>& counts, std::size_t min_df) {
    std::map<std::string, std::size_t> df;
    for (const auto& pc : counts)
        for (const auto& [p, _] : pc) ++df[p];
    std::vector<std::string> vocab;
    for (const auto& [p, n] : df)
        if (n >= min_df) vocab.push_back(p);
    return FeatureSpace(std::move(vocab));
}

std::unique_ptr<ReplacementOracle> make_oracle(const PipelineConfig& cfg, const std::vector<TokenizedSegment>& toks) {
    if (cfg.oracle.kind == "precomputed")
        return std::make_unique<PrecomputedOracle>(PrecomputedOracle::load(cfg.oracle.predictions));
    return std::make_unique<DistributionalOracle>(DistributionalOracle::build(toks, cfg.oracle.options));
}

std::string quantile(std::vector<double> v, double q) {
    if (v.empty()) return "NA";
    std::sort(v.begin(), v.end());
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    return fmt(v[std::clamp<std::size_t>(rank, 1, v.size()) - 1]);
}

}  // namespace

// --- pipeline ------------------------------------------------------------------

Pipeline::Pipeline(PipelineConfig cfg, std::ostream* log) : cfg_(std::move(cfg)), log_(log) {}

std::string Pipeline::work_path(const std::string& name) const { return (fs::path(cfg_.paths.work) / name).string(); }

std::string Pipeline::export_path(const std::string& name) const {
    return (fs::path(cfg_.paths.exports) / name).string();
}

std::optional<Manifest> Pipeline::manifest(Stage s) const {
    const auto path = work_path("manifests/" + std::string(stage_name(s)) + ".json");
    if (!fs::exists(path)) return std::nullopt;
    try {
        return manifest_from_json(json::parse(read_file(path)));
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

void Pipeline::require(Stage s) const {
    const std::string name(stage_name(s));
    auto m = manifest(s);
    if (!m) throw DependencyError("stage '" + name + "' has no output yet; run `newslens " + name + "` first");
    if (m->format_version != kPipelineFormatVersion || m->config_hash != hex64(stage_config_hash(cfg_, s)))
        throw DependencyError("output of stage '" + name + "' is stale (configuration changed); rerun `newslens " +
                              name + "`");
    for (const auto& [file, hash] : m->outputs) {
        const auto path = work_path(file);
        if (!fs::exists(path) || file_hash(path) != hash)
            throw DependencyError("output " + file + " of stage '" + name + "' is missing or modified; rerun `newslens " +
                                  name + "`");
    }
}

std::map<std::string, std::string> Pipeline::external_inputs(Stage s) const {
    std::map<std::string, std::string> in;
    auto need = [&](const std::string& label, const std::string& path, const std::string& hint, bool dependency) {
        if (path.empty() || !fs::exists(path)) {
            std::string msg = label + " not found" + (path.empty() ? "" : ": " + path) + hint;
            if (dependency) throw DependencyError(msg);
            throw ValidationError(msg);
        }
        in[label] = file_hash(path);
    };
    switch (s) {
        case Stage::ingest: need("episodes", cfg_.paths.episodes, " (set paths.episodes)", false); break;
        case Stage::expand_dict:
        case Stage::weak_classify:
            if (cfg_.oracle.kind == "precomputed") need("oracle_predictions", cfg_.oracle.predictions, "", false);
            break;
        case Stage::import_annotations:
            need("records", cfg_.paths.records,
                 "; collect records with `newslens serve-annotation` or `newslens simulate-annotations`", true);
            break;
        case Stage::consumption: need("panel", cfg_.paths.panel, " (set paths.panel)", false); break;
        default: break;
    }
    return in;
}

StageResult Pipeline::run(Stage s) {
    const std::string name(stage_name(s));
    StageResult result{s, false, {}};
    std::map<std::string, std::string> inputs;
    for (Stage d : stage_dependencies(s)) {
        try {
            require(d);
        } catch (const DependencyError& e) {
            throw DependencyError("cannot run '" + name + "': " + e.what());
        }
        const auto m = manifest(d);
        for (const auto& [file, hash] : m->outputs) inputs[std::string(stage_name(d)) + "/" + file] = hash;
    }
    for (auto& [k, v] : external_inputs(s)) inputs[k] = v;

    const std::string chash = hex64(stage_config_hash(cfg_, s));
    if (auto m = manifest(s); m && m->config_hash == chash && m->inputs == inputs &&
                              m->format_version == kPipelineFormatVersion) {
        bool intact = true;
        for (const auto& [file, hash] : m->outputs)
            if (!fs::exists(work_path(file)) || file_hash(work_path(file)) != hash) intact = false;
        if (intact) {
            result.cache_hit = true;
            if (log_) *log_ << "[" << name << "] cache hit\n";
            return result;
        }
    }

    fs::create_directories(cfg_.paths.work);
    fs::create_directories(work_path("manifests"));
    if (log_) *log_ << "[" << name << "] running\n";
    auto outputs = run_stage(s, inputs, result.notes);
    for (const auto& n : result.notes)
        if (log_) *log_ << "[" << name << "] " << n << "\n";

    Manifest m;
    m.stage = name;
    m.config_hash = chash;
    m.inputs = inputs;
    m.outputs = outputs;
    write_file(work_path("manifests/" + name + ".json"), manifest_to_json(m).dump(2) + "\n");
    return result;
}

std::vector<StageResult> Pipeline::run_through(Stage last) {
    std::vector<StageResult> out;
    for (Stage s : all_stages()) {
        out.push_back(run(s));
        if (s == last) break;
    }
    return out;
}

// --- stage bodies ----------------------------------------------------------------

namespace {

struct Ctx {
    const Pipeline& p;
    const PipelineConfig& cfg;
    std::vector<std::string>& notes;
    std::map<std::string, std::string> outputs;

    void write(const std::string& file, const std::string& contents) {
        write_file(p.work_path(file), contents);
        outputs[file] = hex64(fnv1a(contents));
    }
    void note(std::string msg) { notes.push_back(std::move(msg)); }
};

std::vector<Episode> load_episodes(const Pipeline& p) {
    return decode_episodes(read_file(p.work_path("episodes.bin")), stage_config_hash(p.config(), Stage::ingest));
}

std::vector<Segment> load_segments(const Pipeline& p) {
    return decode_segments(read_file(p.work_path("segments.bin")), stage_config_hash(p.config(), Stage::segment));
}

std::vector<WeakLabel> load_weak_labels(const Pipeline& p, const std::vector<Segment>& segs) {
    const auto ids = topic_ids(p.config());
    std::vector<WeakLabel> out;
    for (const auto& line : lines_of(read_file(p.work_path("weak_labels.jsonl"))))
        out.push_back(weak_label_from_json_line(line, ids, p.config().weak.threshold));
    if (out.size() != segs.size()) throw DependencyError("weak labels do not match the segment snapshot; rerun weak-classify");
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i].segment_id != segs[i].id())
            throw DependencyError("weak labels do not match the segment snapshot; rerun weak-classify");
    return out;
}

// segment id -> topics of the refined sets
std::map<std::string, std::set<std::string>> load_refined(const Pipeline& p) {
    std::map<std::string, std::set<std::string>> out;
    for (const auto& line : lines_of(read_file(p.work_path("refined.jsonl")))) {
        json j = json::parse(line);
        auto topics = strings(j.at("topics"));
        out[j.at("segment_id").get<std::string>()] = {topics.begin(), topics.end()};
    }
    return out;
}

struct GroundTruthRow {
    std::string task_id, segment_id, station, cell_topic, choice;
    LabelStatus status;
};

void stage_ingest(Ctx& c) {
    auto res = ingest_episodes(c.cfg.paths.episodes, StationRegistry(c.cfg.stations));
    std::string report;
    for (const auto& is : res.issues)
        report += json{{"line", is.line}, {"id", is.record_id}, {"message", is.message}}.dump() + "\n";
    c.write("ingest_report.jsonl", report);
    if (res.episodes.empty()) throw ValidationError("no valid episodes in " + c.cfg.paths.episodes);
    c.write("episodes.bin", encode_episodes(res.episodes, stage_config_hash(c.cfg, Stage::ingest)));
    c.note(std::to_string(res.episodes.size()) + " episodes, " + std::to_string(res.issues.size()) +
           " rejected records");
}

void stage_segment(Ctx& c) {
    auto eps = load_episodes(c.p);
    auto segs = segment_corpus(eps, c.cfg.max_words, c.cfg.jobs);
    c.write("segments.bin", encode_segments(segs, stage_config_hash(c.cfg, Stage::segment)));
    c.note(std::to_string(segs.size()) + " segments");
}

void stage_expand_dict(Ctx& c) {
    auto toks = tokenized(load_segments(c.p), c.cfg.jobs);
    auto oracle = make_oracle(c.cfg, toks);
    std::string out;
    for (const auto& topic : c.cfg.topics) {
        for (const auto& w : topic.label_words)
            if (tokenize(w).size() > 1) c.note("topic " + topic.id + ": label '" + w + "' masked as one slot");
        auto lists = collect_replacements(toks, topic, *oracle, c.cfg.dictionary.k);
        for (const auto& w : lists.warnings) c.note(w);
        bool any = std::any_of(lists.lists.begin(), lists.lists.end(), [](const auto& l) { return !l.empty(); });
        if (!any) throw ValidationError("topic " + topic.id + " cannot be expanded: no replacement candidates");
        auto vocab = build_class_vocabulary(topic.id, lists.lists, c.cfg.dictionary.vocab_cap);
        std::vector<std::string> removals = c.cfg.dictionary.global_removals;
        if (auto it = c.cfg.dictionary.removals.find(topic.id); it != c.cfg.dictionary.removals.end())
            removals.insert(removals.end(), it->second.begin(), it->second.end());
        auto review = review_vocabulary(vocab, removals);
        DictionaryRecord rec{topic.id, vocab.ranked_words, review.removed, review.dictionary.words};
        out += dictionary_to_json_line(rec) + "\n";
        c.note("topic " + topic.id + ": " + std::to_string(lists.lists.size()) + " masked occurrences, " +
               std::to_string(vocab.ranked_words.size()) + " candidates, " +
               std::to_string(review.dictionary.words.size()) + " kept");
    }
    c.write("dictionaries.jsonl", out);
}

void stage_weak_classify(Ctx& c) {
    auto segs = load_segments(c.p);
    auto toks = tokenized(segs, c.cfg.jobs);
    auto records = parse_dictionary_file(read_file(c.p.work_path("dictionaries.jsonl")));
    const auto ids = topic_ids(c.cfg);
    if (records.size() != ids.size()) throw DependencyError("dictionary file does not match the topic registry");
    std::vector<ExpandedDictionary> dicts;
    for (std::size_t z = 0; z < ids.size(); ++z) {
        if (records[z].topic_id != ids[z]) throw DependencyError("dictionary file does not match the topic registry");
        dicts.push_back(to_expanded(records[z]));
    }
    auto oracle = make_oracle(c.cfg, toks);
    WeakClassifier wc(std::move(dicts), *oracle, c.cfg.weak.k, c.cfg.weak.threshold);
    auto labels = wc.classify_all(toks, c.cfg.jobs);
    std::string out;
    std::vector<std::size_t> sizes(ids.size(), 0);
    for (const auto& l : labels) {
        out += weak_label_to_json_line(l, ids) + "\n";
        for (auto z : l.assigned) ++sizes[z];
    }
    c.write("weak_labels.jsonl", out);
    for (std::size_t z = 0; z < ids.size(); ++z)
        c.note("topic " + ids[z] + ": " + std::to_string(sizes[z]) + " layer-1 segments");
}

void stage_sample_annotation(Ctx& c) {
    auto segs = load_segments(c.p);
    auto labels = load_weak_labels(c.p, segs);
    std::vector<std::string> warnings;
    auto tasks = sample_tasks(segs, labels, topic_ids(c.cfg), c.cfg.stations, c.cfg.annotation.n_per_cell, c.cfg.seed,
                              &warnings);
    for (const auto& w : warnings) c.note(w);
    std::string out;
    for (const auto& t : tasks) out += task_to_json_line(t) + "\n";
    c.write("tasks.jsonl", out);
    c.note(std::to_string(tasks.size()) + " annotation tasks");
}

void stage_import_annotations(Ctx& c) {
    auto tasks = load_tasks(c.p.work_path("tasks.jsonl"));
    auto imported = import_records(c.cfg.paths.records, tasks);
    auto agg = aggregate(imported.records, tasks, c.cfg.annotation.policy);
    std::string rejections;
    for (const auto& r : imported.rejected)
        rejections += json{{"line", r.line}, {"task_id", r.record.task_id}, {"annotator_id", r.record.annotator_id},
                           {"reason", r.reason}}.dump() + "\n";
    c.write("import_rejections.jsonl", rejections);
    std::string out;
    std::map<LabelStatus, std::size_t> counts;
    for (const auto& t : tasks) {
        const auto& g = agg.labels.at(t.task_id);
        ++counts[g.status];
        out += json{{"task_id", t.task_id},     {"segment_id", t.segment_id}, {"station", t.station},
                    {"cell_topic", t.topic_id}, {"status", to_string(g.status)}, {"choice", g.choice},
                    {"n_records", g.n_records}}.dump() + "\n";
    }
    c.write("ground_truth.jsonl", out);
    c.note(std::to_string(imported.records.size()) + " records, " + std::to_string(imported.rejected.size()) +
           " rejected; " + std::to_string(counts[LabelStatus::resolved]) + " resolved, " +
           std::to_string(counts[LabelStatus::needs_more]) + " need more annotations, " +
           std::to_string(counts[LabelStatus::dropped]) + " dropped");
}

std::vector<GroundTruthRow> load_ground_truth(const Pipeline& p) {
    std::vector<GroundTruthRow> out;
    for (const auto& line : lines_of(read_file(p.work_path("ground_truth.jsonl")))) {
        json j = json::parse(line);
        const auto st = j.at("status").get<std::string>();
        out.push_back({j.at("task_id").get<std::string>(), j.at("segment_id").get<std::string>(),
                       j.at("station").get<std::string>(), j.at("cell_topic").get<std::string>(),
                       j.at("choice").get<std::string>(),
                       st == "resolved" ? LabelStatus::resolved
                                        : st == "dropped" ? LabelStatus::dropped : LabelStatus::needs_more});
    }
    return out;
}

TrainOptions train_options(const PipelineConfig& cfg) {
    TrainOptions o;
    o.folds = cfg.train.folds;
    o.grid = cfg.train.grid;
    o.gd.max_iter = cfg.train.max_iter;
    o.gd.tolerance = cfg.train.tolerance;
    o.seed = cfg.seed;
    return o;
}

void stage_train(Ctx& c) {
    auto segs = load_segments(c.p);
    auto counts = all_phrase_counts(segs, phrase_filter(c.cfg), c.cfg.jobs);
    auto space = feature_space(counts, c.cfg.train.min_df);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < segs.size(); ++i) index[segs[i].id()] = i;

    auto truth = load_ground_truth(c.p);
    std::vector<TaskLabel> labels;
    for (const auto& g : truth)
        labels.push_back({g.segment_id, g.station, g.cell_topic, g.status == LabelStatus::resolved ? g.choice : ""});
    auto sets = cell_training_sets(labels, c.cfg.train.min_per_class);

    std::vector<const CellTrainingSet*> cells;
    for (const auto& [_, set] : sets) cells.push_back(&set);
    std::vector<std::optional<TrainedCell>> trained(cells.size());
    std::vector<std::string> problems(cells.size());
    const auto opts = train_options(c.cfg);
    parallel_for(cells.size(), c.cfg.jobs, [&](std::size_t k) {
        const auto& set = *cells[k];
        std::vector<Example> ex;
        for (std::size_t j = 0; j < set.tasks.size(); ++j) {
            auto it = index.find(labels[set.tasks[j]].segment_id);
            if (it == index.end()) continue;
            ex.push_back({featurize(counts[it->second], space), set.labels[j]});
        }
        try {
            trained[k] = train_cell(set.cell, ex, space.hash(), opts);
        } catch (const Error& e) {
            problems[k] = e.what();
        }
    });

    std::string out;
    std::size_t kept_weak = 0;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (!trained[k]) {
            if (c.cfg.train.insufficient_cell == "error") throw ValidationError(problems[k]);
            // Accept-all model: the cell keeps its layer-1 set.
            TrainedCell passthrough;
            passthrough.cell = cells[k]->cell;
            passthrough.model.bias = 1.0;
            passthrough.model.vocab_hash = space.hash();
            trained[k] = passthrough;
            ++kept_weak;
            c.note(problems[k] + "; keeping its layer-1 set");
        }
        out += model_to_json(*trained[k], space) + "\n";
    }
    c.write("models.jsonl", out);
    c.note(std::to_string(cells.size()) + " cell models over " + std::to_string(space.size()) + " features" +
           (kept_weak ? ", " + std::to_string(kept_weak) + " kept at layer 1" : ""));
}

void stage_refine(Ctx& c) {
    auto segs = load_segments(c.p);
    auto labels = load_weak_labels(c.p, segs);
    const auto ids = topic_ids(c.cfg);
    auto counts = all_phrase_counts(segs, phrase_filter(c.cfg), c.cfg.jobs);
    auto space = feature_space(counts, c.cfg.train.min_df);

    std::map<CellKey, TrainedCell> models;
    for (const auto& line : lines_of(read_file(c.p.work_path("models.jsonl")))) {
        auto m = model_from_json(line, space);
        models.emplace(m.cell, std::move(m));
    }
    std::map<CellKey, std::vector<std::size_t>> weak;
    std::vector<FeatureVector> features(segs.size());
    std::vector<char> needed(segs.size(), 0);
    for (std::size_t i = 0; i < segs.size(); ++i)
        for (auto z : labels[i].assigned) {
            weak[{segs[i].station.code, ids[z]}].push_back(i);
            needed[i] = 1;
        }
    parallel_for(segs.size(), c.cfg.jobs, [&](std::size_t i) {
        if (needed[i]) features[i] = featurize(counts[i], space);
    });
    auto res = refine(weak, features, models, space.hash());
    for (const auto& w : res.warnings) c.note(w);

    std::vector<std::set<std::string>> topics(segs.size());
    for (const auto& [cell, members] : res.accepted)
        for (auto i : members) topics[i].insert(cell.topic);
    std::string out;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        if (topics[i].empty()) continue;
        json t = json::array();
        for (const auto& id : ids)
            if (topics[i].count(id)) t.push_back(id);
        out += json{{"segment_id", segs[i].id()}, {"topics", t}}.dump() + "\n";
    }
    c.write("refined.jsonl", out);

    json cells = json::array();
    for (const auto& [cell, members] : weak) {
        auto acc = res.accepted.find(cell);
        auto prec = res.cell_precision.find(cell);
        cells.push_back({{"station", cell.station},
                         {"topic", cell.topic},
                         {"layer1", members.size()},
                         {"refined", acc == res.accepted.end() ? 0 : acc->second.size()},
                         {"cv_precision", prec == res.cell_precision.end() ? json(nullptr) : json(prec->second)}});
    }
    json summary = {{"mean_cv_precision", res.mean_precision}, {"sd_cv_precision", res.sd_precision}, {"cells", cells}};
    c.write("refine_summary.json", summary.dump(2) + "\n");
    c.note("mean cross-validated precision " + fmt(res.mean_precision) + " (sd " + fmt(res.sd_precision) + ")");
}

struct PolarizationInputs {
    std::vector<SeriesSegment> series;
    std::map<std::string, std::string> program;  // episode id -> title
};

void stage_polarization(Ctx& c) {
    auto eps = load_episodes(c.p);
    auto segs = load_segments(c.p);
    auto refined = load_refined(c.p);
    auto counts = all_phrase_counts(segs, phrase_filter(c.cfg), c.cfg.jobs);
    std::map<std::string, std::string> program;
    for (const auto& e : eps) program[e.id] = e.program_title;

    PhraseTable table;
    std::vector<SeriesSegment> series;
    series.reserve(segs.size());
    for (std::size_t i = 0; i < segs.size(); ++i) {
        SeriesSegment s;
        s.id = segs[i].id();
        s.station = segs[i].station.code;
        s.category = segs[i].category;
        s.air_date = segs[i].air_date;
        if (auto it = refined.find(s.id); it != refined.end()) s.topics = it->second;
        s.phrases = table.vectorize(counts[i]);
        series.push_back(std::move(s));
    }

    const auto& pc = c.cfg.polarization;
    std::vector<PairSpec> pairs;
    for (const auto& [a, b] : pc.pairs)
        pairs.push_back({a, resolve_set(pc.station_sets, c.cfg.stations, a), b,
                         resolve_set(pc.station_sets, c.cfg.stations, b)});

    const std::string header = "window_start\twindow_end\tsource\ttarget\tcategory_filter\ttopic_filter\tpi_lo\tn_source\tn_target\n";
    auto rows = [&](const std::vector<SeriesPoint>& pts, const PairSpec& pair, const std::string& cats,
                    const std::string& topic) {
        std::string out;
        for (const auto& p : pts)
            out += p.window.start.str() + "\t" + p.window.end.str() + "\t" + pair.source_label + "\t" +
                   pair.target_label + "\t" + cats + "\t" + topic + "\t" +
                   (p.estimate ? fmt(p.estimate->value) : "NA") + "\t" + std::to_string(p.n_source) + "\t" +
                   std::to_string(p.n_target) + "\n";
        return out;
    };

    std::string meta = "# estimator=leave_out basis=" +
                       std::string(pc.estimator.basis == RhoBasis::counts ? "counts" : "frequencies") +
                       " zero_policy=" + std::string(pc.estimator.zero == ZeroPolicy::neutral ? "neutral" : "drop") +
                       " group_means=per_group NA=fewer_than_2_segments\n";
    std::string fig3 = meta + header;
    WindowSpec win{pc.window, pc.eras};
    for (const auto& pair : pairs)
        for (const auto& cats : pc.category_filters)
            fig3 += rows(polarization_series(series, pair, win, {cats, std::nullopt}, pc.estimator), pair,
                         join_categories(cats), "all");
    c.write("fig3_polarization.tsv", fig3);

    std::string fig4 = meta + header;
    WindowSpec eras{WindowKind::era, pc.eras};
    for (const auto& topic : c.cfg.topics)
        for (const auto& pair : pairs)
            fig4 += rows(polarization_series(series, pair, eras, {{}, topic.id}, pc.estimator), pair, "all", topic.id);
    c.write("fig4_topic_polarization.tsv", fig4);

    std::string seg_rows = meta + "source\ttarget\tsegment_id\tstation\tprogram_title\tcategory\ttopics\tscore\town_group_score\n";
    std::string prog_rows = meta + "source\ttarget\tstation\tprogram_title\tcategory\tn\tmean\tp10\tp50\tp90\n";
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < series.size(); ++i) by_id[series[i].id] = i;
    for (const auto& pair : pairs) {
        std::vector<std::string> s_ids, t_ids;
        std::vector<PhraseVector> s_vecs, t_vecs;
        for (const auto& s : series) {
            if (pair.source_stations.count(s.station)) {
                s_ids.push_back(s.id);
                s_vecs.push_back(s.phrases);
            }
            if (pair.target_stations.count(s.station)) {
                t_ids.push_back(s.id);
                t_vecs.push_back(s.phrases);
            }
        }
        GroupCorpus src(pair.source_label, s_ids, s_vecs), tgt(pair.target_label, t_ids, t_vecs);
        if (src.segment_count() < 2 || tgt.segment_count() < 2) {
            c.note("pair " + pair.source_label + "/" + pair.target_label + ": too few segments for scores");
            continue;
        }
        auto scores = partisan_scores(src, tgt, pc.estimator);
        std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> per_program;
        for (const auto& sc : scores) {
            const auto& s = series[by_id.at(sc.segment_id)];
            const auto ep = sc.segment_id.substr(0, sc.segment_id.rfind('#'));
            const auto& title = program[ep];
            seg_rows += pair.source_label + "\t" + pair.target_label + "\t" + sc.segment_id + "\t" + s.station + "\t" +
                        title + "\t" + std::string(to_string(s.category)) + "\t" +
                        (s.topics.empty() ? "none" : join_set(s.topics)) + "\t" + fmt(sc.toward_source) + "\t" +
                        fmt(sc.own_group) + "\n";
            per_program[{s.station, title, std::string(to_string(s.category))}].push_back(sc.toward_source);
        }
        for (const auto& [key, v] : per_program) {
            double mean = 0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            prog_rows += pair.source_label + "\t" + pair.target_label + "\t" + std::get<0>(key) + "\t" +
                         std::get<1>(key) + "\t" + std::get<2>(key) + "\t" + std::to_string(v.size()) + "\t" +
                         fmt(mean) + "\t" + quantile(v, 0.1) + "\t" + quantile(v, 0.5) + "\t" + quantile(v, 0.9) +
                         "\n";
        }
    }
    c.write("fig5_segment_scores.tsv", seg_rows);
    c.write("fig5_program_scores.tsv", prog_rows);
    c.note(std::to_string(pairs.size()) + " station pairs scored");
}

void stage_divergence(Ctx& c) {
    auto segs = load_segments(c.p);
    auto refined = load_refined(c.p);
    const auto ids = topic_ids(c.cfg);
    std::vector<ShareSegment> shares;
    std::map<std::string, std::map<Date, double>> words;
    for (const auto& s : segs) {
        ShareSegment sh{s.station.code, s.air_date, s.word_count, {}};
        if (auto it = refined.find(s.id()); it != refined.end()) sh.topics = it->second;
        words[sh.station][sh.air_date] += s.word_count;
        shares.push_back(std::move(sh));
    }
    auto daily = daily_topic_shares(shares, ids);
    const auto& dc = c.cfg.divergence;
    WindowSpec win{dc.window, c.cfg.polarization.eras};

    std::string meta = "# window=" + std::string(to_string(dc.window)) + " aggregation=" +
                       (dc.aggregation == ShareAggregation::mean_of_days ? "mean_of_days" : "word_weighted") +
                       " smoothing=centered_mean days=" + std::to_string(dc.smoothing_days) + "\n";
    std::string fig1 = meta + "station\ttopic\twindow_start\twindow_end\tshare\n";
    for (const auto& station : c.cfg.stations) {
        auto it = daily.find(station);
        if (it == daily.end()) continue;
        auto w = window_shares(it->second, win, dc.aggregation, &words[station]);
        for (std::size_t z = 0; z < ids.size(); ++z)
            for (const auto& [window, y] : w)
                fig1 += station + "\t" + ids[z] + "\t" + window.start.str() + "\t" + window.end.str() + "\t" +
                        fmt(y[z]) + "\n";
    }
    c.write("fig1_topic_shares.tsv", fig1);

    auto pairs = dc.pairs;
    if (pairs.empty())
        for (std::size_t a = 0; a < c.cfg.stations.size(); ++a)
            for (std::size_t b = a + 1; b < c.cfg.stations.size(); ++b)
                pairs.push_back({c.cfg.stations[a], c.cfg.stations[b]});
    std::string fig2 = meta + "station_a\tstation_b\twindow_start\twindow_end\tdelta\tdelta_smoothed\n";
    const DailyShares empty;
    for (const auto& [a, b] : pairs) {
        const auto& da = daily.count(a) ? daily.at(a) : empty;
        const auto& db = daily.count(b) ? daily.at(b) : empty;
        auto pts = divergence_series(da, db, win, dc.aggregation, &words[a], &words[b]);
        DatedSeries raw;
        for (const auto& p : pts)
            if (p.delta) raw[p.window.start] = *p.delta;
        auto smoothed = smooth(raw, dc.smoothing_days);
        for (const auto& p : pts) {
            fig2 += a + "\t" + b + "\t" + p.window.start.str() + "\t" + p.window.end.str() + "\t" +
                    (p.delta ? fmt(*p.delta) : "NA") + "\t" +
                    (p.delta ? fmt(smoothed.at(p.window.start)) : "NA") + "\n";
        }
    }
    c.write("fig2_divergence.tsv", fig2);
    c.note(std::to_string(pairs.size()) + " station pairs");
}

void stage_consumption(Ctx& c) {
    auto parsed = parse_panel(read_file(c.cfg.paths.panel));
    std::string report;
    for (const auto& is : parsed.issues) report += json{{"line", is.line}, {"message", is.message}}.dump() + "\n";
    c.write("panel_report.jsonl", report);
    const auto& cc = c.cfg.consumption;
    std::set<std::string> tracked(c.cfg.stations.begin(), c.cfg.stations.end());
    for (const auto& [name, set] : cc.station_sets)
        for (const auto& s : set)
            if (!tracked.count(s)) throw ValidationError("station set " + name + " contains untracked station " + s);
    std::set<YearMonth> months;
    for (const auto& r : parsed.records) months.insert(r.month);

    std::string out = "# min_minutes=" + fmt(cc.min_minutes) + "\nmonth\tmeasure\tstation_set\tthreshold\tnumerator\tdenominator\tshare\n";
    auto row = [&](const YearMonth& m, const std::string& measure, const std::string& set, const std::string& th,
                   double num, double den, double share) {
        out += m.str() + "\t" + measure + "\t" + set + "\t" + th + "\t" + fmt(num) + "\t" + fmt(den) + "\t" +
               fmt(share) + "\n";
    };
    for (const auto& m : months) {
        auto active = active_consumers(parsed.records, m, cc.min_minutes);
        row(m, "active", "all", "NA", active.numerator, active.denominator, active.share);
        for (const auto& [name, set] : cc.station_sets)
            for (double th : cc.thresholds) {
                auto s = majority_share(parsed.records, m, set, th, cc.min_minutes);
                row(m, "majority", name, fmt(th), s.numerator, s.denominator, s.share);
                if (name == cc.big_six)
                    row(m, "big_six_fraction", name, fmt(th), s.numerator, active.numerator,
                        active.numerator > 0 ? s.numerator / active.numerator : 0.0);
            }
    }
    c.write("fig6_consumption.tsv", out);
    c.note(std::to_string(parsed.records.size()) + " panel records over " + std::to_string(months.size()) +
           " months, " + std::to_string(parsed.issues.size()) + " rejected");
}

void stage_export_figures(Ctx& c) {
    const std::vector<std::pair<Stage, std::string>> figures = {
        {Stage::divergence, "fig1_topic_shares.tsv"},          {Stage::divergence, "fig2_divergence.tsv"},
        {Stage::polarization, "fig3_polarization.tsv"},        {Stage::polarization, "fig4_topic_polarization.tsv"},
        {Stage::polarization, "fig5_segment_scores.tsv"},      {Stage::polarization, "fig5_program_scores.tsv"},
        {Stage::consumption, "fig6_consumption.tsv"},
    };
    fs::create_directories(c.cfg.paths.exports);
    const std::string chash = hex64(config_hash(c.cfg));
    std::string index;
    for (const auto& [stage, file] : figures) {
        auto m = c.p.manifest(stage);
        std::string inputs;
        for (const auto& [k, v] : m->inputs) inputs += (inputs.empty() ? "" : ";") + k + ":" + v;
        std::string body = "# figure=" + file.substr(0, file.find('.')) + "\n# format_version=" +
                           std::to_string(kPipelineFormatVersion) + "\n# config_hash=" + chash + "\n# stage=" +
                           std::string(stage_name(stage)) + "\n# stage_inputs=" + inputs + "\n" +
                           read_file(c.p.work_path(file));
        write_file(c.p.export_path(file), body);
        const auto h = hex64(fnv1a(body));
        index += file + "\t" + h + "\n";
    }
    // The exports live outside the work directory; the index records their hashes.
    c.write("exports_index.tsv", index);
    c.note(std::to_string(figures.size()) + " figure files written to " + c.cfg.paths.exports);
}

}  // namespace

std::map<std::string, std::string> Pipeline::run_stage(Stage s, const std::map<std::string, std::string>&,
                                                       std::vector<std::string>& notes) {
    Ctx c{*this, cfg_, notes, {}};
    switch (s) {
        case Stage::ingest: stage_ingest(c); break;
        case Stage::segment: stage_segment(c); break;
        case Stage::expand_dict: stage_expand_dict(c); break;
        case Stage::weak_classify: stage_weak_classify(c); break;
        case Stage::sample_annotation: stage_sample_annotation(c); break;
        case Stage::import_annotations: stage_import_annotations(c); break;
        case Stage::train: stage_train(c); break;
        case Stage::refine: stage_refine(c); break;
        case Stage::polarization: stage_polarization(c); break;
        case Stage::divergence: stage_divergence(c); break;
        case Stage::consumption: stage_consumption(c); break;
        case Stage::export_figures: stage_export_figures(c); break;
    }
    return c.outputs;
}

}  // namespace newslens
