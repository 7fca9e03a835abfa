// newslens: command-line driver for the batch pipeline and the annotation server.
//
// Exit codes: 0 ok, 1 usage, 2 invalid input or processing error,
// 3 missing or stale upstream stage.

#include <csignal>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "newslens/fixture.hpp"
#include "newslens/pipeline.hpp"

using namespace newslens;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

AnnotationServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

struct Common {
    std::string config = "newslens.json";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::optional<std::string> window;
    std::optional<double> threshold;

    void attach(CLI::App* cmd) {
        cmd->add_option("-c,--config", config, "Pipeline configuration (JSON)")->capture_default_str();
        cmd->add_option("--seed", seed, "Override the random seed");
        cmd->add_option("-j,--jobs", jobs, "Worker threads");
        cmd->add_option("--window", window, "Window for polarization and divergence: monthly|quarterly|yearly|era");
        cmd->add_option("--threshold", threshold, "Layer-1 overlap threshold");
    }

    PipelineConfig load() const { return load_config(config, {seed, jobs, window, threshold}); }
};

json fixture_config(const Fixture& fx, std::size_t story_words) {
    json topics = json::array();
    for (const auto& t : fx.topics) topics.push_back({{"id", t.id}, {"label_words", t.label_words}});
    json per_topic = json::object();
    for (std::size_t z = 0; z < fx.topics.size(); ++z) per_topic[fx.topics[z].id] = fx.removals[z];
    return {
        {"topics", topics},
        {"stopwords", json::array({"the", "a", "an", "and", "of", "to", "in", "on", "for", "is", "was"})},
        {"confounders", {{"global", fx.confounders}, {"per_station", fx.station_confounders}}},
        {"segment", {{"max_words", story_words}}},
        {"dictionary", {{"removals", {{"global", fx.global_removals}, {"per_topic", per_topic}}}}},
        {"annotation", {{"n_per_cell", 20}}},
        {"polarization",
         {{"window", "yearly"},
          {"eras", json::array({"2016-01-01", "2020-01-01"})},
          {"station_sets", {{"right", json::array({"FNC"})}, {"left", json::array({"CNN", "MSNBC"})}, {"broadcast", json::array({"ABC", "CBS", "NBC"})}}},
          {"pairs", json::array({json::array({"right", "left"}), json::array({"FNC", "broadcast"})})},
          {"category_filters", json::array({json::array(), json::array({"hard_news"}), json::array({"partisan_opinion"})})}}},
        {"divergence", {{"window", "quarterly"}, {"smoothing_days", 183}}},
        {"consumption",
         {{"station_sets",
           {{"big_six", json::array({"ABC", "CBS", "NBC", "CNN", "FNC", "MSNBC"})}, {"cable", json::array({"CNN", "FNC", "MSNBC"})}}},
          {"big_six", "big_six"}}},
        {"paths",
         {{"episodes", "episodes.jsonl"},
          {"panel", "panel.jsonl"},
          {"records", "records.jsonl"},
          {"work", "work"},
          {"exports", "exports"}}},
    };
}

int cmd_fixture(const std::string& out_dir, std::uint64_t seed, std::size_t topics) {
    FixtureOptions opts;
    opts.seed = seed;
    opts.planted.topics = topics;
    auto fx = make_fixture(opts);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    std::string eps, panel, truth;
    for (const auto& e : fx.episodes) eps += episode_to_json_line(e) + "\n";
    for (const auto& r : fx.panel) panel += panel_record_to_json_line(r) + "\n";
    for (const auto& t : fx.truth)
        truth += json{{"segment_id", t.segment_id}, {"station", t.station}, {"topics", t.topics}}.dump() + "\n";
    write_file((dir / "episodes.jsonl").string(), eps);
    write_file((dir / "panel.jsonl").string(), panel);
    write_file((dir / "truth.jsonl").string(), truth);
    write_file((dir / "newslens.json").string(), fixture_config(fx, opts.story_words).dump(2) + "\n");
    std::cout << fx.episodes.size() << " episodes, " << fx.truth.size() << " stories, " << fx.panel.size()
              << " panel records written to " << out_dir << "\n";
    return 0;
}

int cmd_simulate(const Common& common, const std::string& truth_path, SimulatedAnnotators sim) {
    auto cfg = common.load();
    Pipeline p(cfg);
    p.require(Stage::sample_annotation);
    auto tasks = load_tasks(p.work_path("tasks.jsonl"));
    std::map<std::string, std::vector<std::string>> truth;
    const auto text = read_file(truth_path);
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line);
        truth[j.at("segment_id").get<std::string>()] = j.at("topics").get<std::vector<std::string>>();
    }
    sim.policy = cfg.annotation.policy;
    auto records = simulate_annotations(tasks, truth, sim);
    std::string out;
    for (const auto& r : records) out += record_to_json_line(r) + "\n";
    write_file(cfg.paths.records, out);
    std::cout << records.size() << " records for " << tasks.size() << " tasks written to " << cfg.paths.records
              << "\n";
    return 0;
}

int cmd_serve(const Common& common, const std::string& host, int port) {
    auto cfg = common.load();
    Pipeline p(cfg);
    p.require(Stage::sample_annotation);
    TaskService service(load_tasks(p.work_path("tasks.jsonl")), cfg.annotation.policy, cfg.paths.records);
    AnnotationServer server(service, cfg.paths.static_dir);
    if (port == 0) {
        port = server.bind_to_any_port(host);
        if (port < 0) throw Error("cannot bind " + host);
    } else if (!server.bind(host, port)) {
        throw Error("cannot bind " + host + ":" + std::to_string(port));
    }
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    auto prog = service.progress();
    std::cout << "serving " << prog.tasks << " tasks on http://" << host << ":" << port << " (records: "
              << cfg.paths.records << ")" << std::endl;
    server.listen_after_bind();
    g_server = nullptr;
    prog = service.progress();
    std::cout << prog.records << " records, " << prog.resolved << " resolved, " << prog.needs_more
              << " need more, " << prog.dropped << " dropped\n";
    return 0;
}

void print_results(const std::vector<StageResult>& results) {
    for (const auto& r : results)
        std::cout << stage_name(r.stage) << ": " << (r.cache_hit ? "up to date" : "done") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"newslens: topic and polarization measurement for television news transcripts"};
    app.require_subcommand(1);

    Common common;
    std::map<CLI::App*, Stage> stage_cmds;
    for (Stage s : all_stages()) {
        auto* cmd = app.add_subcommand(std::string(stage_name(s)), "Run the " + std::string(stage_name(s)) + " stage");
        common.attach(cmd);
        stage_cmds[cmd] = s;
    }

    std::string through = "export-figures";
    auto* run = app.add_subcommand("run", "Run every stage up to --through, reusing cached results");
    common.attach(run);
    run->add_option("--through", through, "Last stage to run")->capture_default_str();

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve-annotation", "Serve the sampled tasks to annotators over HTTP");
    common.attach(serve);
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port, "0 picks a free port")->capture_default_str();

    std::string truth_path;
    SimulatedAnnotators sim;
    auto* simulate = app.add_subcommand("simulate-annotations", "Write simulated annotation records for the tasks");
    common.attach(simulate);
    simulate->add_option("--truth", truth_path, "JSONL of {segment_id, topics}")->required();
    simulate->add_option("--annotators", sim.annotators)->capture_default_str();
    simulate->add_option("--accuracy", sim.accuracy)->capture_default_str();
    simulate->add_option("--sim-seed", sim.seed)->capture_default_str();

    std::string fixture_out;
    std::uint64_t fixture_seed = 11;
    std::size_t fixture_topics = 8;
    auto* fixture = app.add_subcommand("fixture", "Write a synthetic corpus, panel and config");
    fixture->add_option("--out", fixture_out)->required();
    fixture->add_option("--seed", fixture_seed)->capture_default_str();
    fixture->add_option("--topics", fixture_topics)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*fixture) return cmd_fixture(fixture_out, fixture_seed, fixture_topics);
        if (*simulate) return cmd_simulate(common, truth_path, sim);
        if (*serve) return cmd_serve(common, host, port);
        if (*run) {
            auto last = parse_stage(through);
            if (!last) {
                std::cerr << "unknown stage '" << through << "'\n";
                return 1;
            }
            Pipeline p(common.load(), &std::cerr);
            print_results(p.run_through(*last));
            return 0;
        }
        for (const auto& [cmd, stage] : stage_cmds)
            if (*cmd) {
                Pipeline p(common.load(), &std::cerr);
                print_results({p.run(stage)});
                return 0;
            }
    } catch (const DependencyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
