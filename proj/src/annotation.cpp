#include "newslens/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>

#include "httplib.h"
#include "json.hpp"

namespace newslens {

using nlohmann::json;

bool AnnotationTask::accepts(std::string_view choice) const {
    return choice == kNoneChoice || std::find(candidates.begin(), candidates.end(), choice) != candidates.end();
}

std::string_view to_string(LabelStatus s) {
    switch (s) {
        case LabelStatus::resolved: return "resolved";
        case LabelStatus::needs_more: return "needs_more";
        case LabelStatus::dropped: return "dropped";
    }
    return "needs_more";
}

std::array<std::string, 3> candidate_topics(std::span<const double> scores,
                                            const std::vector<std::string>& topic_ids) {
    if (topic_ids.size() < 3) throw ValidationError("annotation needs at least three topics");
    if (scores.size() != topic_ids.size()) throw Error("score vector does not match topic registry");
    std::vector<std::size_t> order(topic_ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : topic_ids[a] < topic_ids[b];
    });
    return {topic_ids[order[0]], topic_ids[order[1]], topic_ids[order[2]]};
}

std::vector<AnnotationTask> sample_tasks(std::span<const Segment> segments, std::span<const WeakLabel> labels,
                                         const std::vector<std::string>& topic_ids,
                                         const std::vector<std::string>& stations, std::size_t n_per_cell,
                                         std::uint64_t seed, std::vector<std::string>* warnings) {
    if (segments.size() != labels.size()) throw Error("sample_tasks: segments and labels differ in length");
    std::vector<AnnotationTask> tasks;
    for (std::uint32_t z = 0; z < topic_ids.size(); ++z) {
        for (const auto& station : stations) {
            std::vector<std::size_t> cell;
            for (std::size_t i = 0; i < segments.size(); ++i) {
                if (segments[i].station.code != station) continue;
                const auto& a = labels[i].assigned;
                if (std::find(a.begin(), a.end(), z) != a.end()) cell.push_back(i);
            }
            if (cell.empty()) {
                if (warnings) warnings->push_back("empty cell (" + station + ", " + topic_ids[z] + ")");
                continue;
            }
            std::sort(cell.begin(), cell.end(),
                      [&](std::size_t a, std::size_t b) { return segments[a].id() < segments[b].id(); });
            std::mt19937_64 rng(splitmix64(seed ^ fnv1a(topic_ids[z] + "|" + station)));
            portable_shuffle(cell, rng);
            cell.resize(std::min(cell.size(), n_per_cell));
            for (std::size_t i : cell) {
                if (labels[i].segment_id != segments[i].id())
                    throw Error("sample_tasks: label/segment misalignment at " + segments[i].id());
                AnnotationTask t;
                t.segment_id = segments[i].id();
                t.task_id = topic_ids[z] + ":" + t.segment_id;
                t.station = station;
                t.topic_id = topic_ids[z];
                t.text = segments[i].text;
                t.candidates = candidate_topics(labels[i].scores, topic_ids);
                tasks.push_back(std::move(t));
            }
        }
    }
    return tasks;
}

GroundTruthLabel aggregate_choices(std::span<const std::string> choices, const AggregationPolicy& policy) {
    GroundTruthLabel g;
    g.n_records = choices.size();
    std::map<std::string, std::size_t> counts;
    for (const auto& c : choices) ++counts[c];
    const std::string* best = nullptr;
    std::size_t best_n = 0;
    for (const auto& [c, n] : counts)
        if (n > best_n) {
            best = &c;
            best_n = n;
        }
    if (g.n_records >= policy.min_annotators && best && 2 * best_n > g.n_records) {
        g.status = LabelStatus::resolved;
        g.choice = *best;
    } else if (g.n_records >= policy.max_annotators) {
        g.status = LabelStatus::dropped;
    } else {
        g.status = LabelStatus::needs_more;
    }
    return g;
}

AggregationResult aggregate(std::span<const AnnotationRecord> records, std::span<const AnnotationTask> tasks,
                            const AggregationPolicy& policy) {
    AggregationResult result;
    std::map<std::string, const AnnotationTask*> by_id;
    for (const auto& t : tasks) by_id[t.task_id] = &t;

    // task -> annotator -> kept record
    std::map<std::string, std::map<std::string, const AnnotationRecord*>> kept;
    for (const auto& r : records) {
        auto it = by_id.find(r.task_id);
        if (it == by_id.end()) {
            result.rejected.push_back({0, r, "unknown task " + r.task_id});
            continue;
        }
        if (!it->second->accepts(r.choice)) {
            result.rejected.push_back({0, r, "choice '" + r.choice + "' is not a candidate"});
            continue;
        }
        auto& slot = kept[r.task_id][r.annotator_id];
        if (!slot || std::tie(r.timestamp, r.choice) < std::tie(slot->timestamp, slot->choice)) slot = &r;
    }
    for (const auto& t : tasks) {
        std::vector<std::string> choices;
        if (auto it = kept.find(t.task_id); it != kept.end())
            for (const auto& [_, r] : it->second) choices.push_back(r->choice);
        auto g = aggregate_choices(choices, policy);
        g.task_id = t.task_id;
        g.segment_id = t.segment_id;
        result.labels[t.task_id] = std::move(g);
    }
    return result;
}

std::string task_to_json_line(const AnnotationTask& t) {
    json j = {{"schema_version", kAnnotationSchemaVersion},
              {"kind", "task"},
              {"task_id", t.task_id},
              {"segment_id", t.segment_id},
              {"station", t.station},
              {"topic_id", t.topic_id},
              {"text", t.text},
              {"candidates", t.candidates}};
    return j.dump();
}

std::string record_to_json_line(const AnnotationRecord& r) {
    json j = {{"schema_version", kAnnotationSchemaVersion},
              {"kind", "record"},
              {"task_id", r.task_id},
              {"annotator_id", r.annotator_id},
              {"choice", r.choice},
              {"timestamp", r.timestamp}};
    return j.dump();
}

namespace {

void check_schema(const json& j) {
    if (!j.is_object()) throw ValidationError("annotation line is not an object");
    if (!j.contains("schema_version") || j["schema_version"] != kAnnotationSchemaVersion)
        throw ValidationError("unsupported or missing schema_version");
}

AnnotationTask task_from(const json& j) {
    check_schema(j);
    AnnotationTask t;
    t.task_id = j.at("task_id").get<std::string>();
    t.segment_id = j.at("segment_id").get<std::string>();
    t.station = j.at("station").get<std::string>();
    t.topic_id = j.at("topic_id").get<std::string>();
    t.text = j.at("text").get<std::string>();
    auto c = j.at("candidates").get<std::vector<std::string>>();
    if (c.size() != 3) throw ValidationError("task " + t.task_id + " must have exactly 3 candidates");
    if (c[0] == c[1] || c[0] == c[2] || c[1] == c[2])
        throw ValidationError("task " + t.task_id + " has duplicate candidates");
    std::copy(c.begin(), c.end(), t.candidates.begin());
    return t;
}

AnnotationRecord record_from(const json& j) {
    check_schema(j);
    AnnotationRecord r;
    r.task_id = j.at("task_id").get<std::string>();
    r.annotator_id = j.at("annotator_id").get<std::string>();
    r.choice = j.at("choice").get<std::string>();
    r.timestamp = j.value("timestamp", std::string{});
    if (r.annotator_id.empty()) throw ValidationError("empty annotator_id");
    return r;
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        fn(line_no, line);
    }
}

std::string utc_now() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

AnnotationTask task_from_json(std::string_view line) { return task_from(json::parse(line)); }
AnnotationRecord record_from_json(std::string_view line) { return record_from(json::parse(line)); }

void export_tasks(std::span<const AnnotationTask> tasks, const std::string& path) {
    std::string out;
    for (const auto& t : tasks) out += task_to_json_line(t) + "\n";
    write_file(path, out);
}

std::vector<AnnotationTask> load_tasks(const std::string& path) {
    std::vector<AnnotationTask> tasks;
    std::set<std::string> ids;
    for_each_line(read_file(path), [&](std::size_t line_no, std::string_view line) {
        try {
            json j = json::parse(line);
            if (j.value("kind", std::string{}) != "task") return;
            auto t = task_from(j);
            if (!ids.insert(t.task_id).second) throw ValidationError("duplicate task id " + t.task_id);
            tasks.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    });
    return tasks;
}

ImportResult import_records_text(std::string_view jsonl, std::span<const AnnotationTask> tasks) {
    ImportResult out;
    std::map<std::string, const AnnotationTask*> by_id;
    for (const auto& t : tasks) by_id[t.task_id] = &t;
    for_each_line(jsonl, [&](std::size_t line_no, std::string_view line) {
        AnnotationRecord r;
        try {
            json j = json::parse(line);
            auto kind = j.value("kind", std::string{});
            if (kind == "task") return;
            if (kind != "record") throw ValidationError("unknown line kind '" + kind + "'");
            r = record_from(j);
        } catch (const std::exception& e) {
            out.rejected.push_back({line_no, r, e.what()});
            return;
        }
        auto it = by_id.find(r.task_id);
        if (it == by_id.end())
            out.rejected.push_back({line_no, r, "unknown task " + r.task_id});
        else if (!it->second->accepts(r.choice))
            out.rejected.push_back({line_no, r, "choice '" + r.choice + "' is not a candidate"});
        else
            out.records.push_back(std::move(r));
    });
    return out;
}

ImportResult import_records(const std::string& path, std::span<const AnnotationTask> tasks) {
    return import_records_text(read_file(path), tasks);
}

// --- TaskService -------------------------------------------------------------

TaskService::TaskService(std::vector<AnnotationTask> tasks, AggregationPolicy policy, std::string record_log)
    : tasks_(std::move(tasks)), policy_(policy), log_path_(std::move(record_log)) {
    for (std::size_t i = 0; i < tasks_.size(); ++i)
        if (!index_.emplace(tasks_[i].task_id, i).second)
            throw ValidationError("duplicate task id " + tasks_[i].task_id);
    choices_.resize(tasks_.size());
    if (!log_path_.empty() && std::ifstream(log_path_).good()) {
        auto imported = import_records(log_path_, tasks_);
        for (auto& r : imported.records) {
            auto& per_task = choices_[index_.at(r.task_id)];
            if (per_task.emplace(r.annotator_id, r.choice).second) records_.push_back(std::move(r));
        }
    }
}

LabelStatus TaskService::status_locked(std::size_t i) const {
    std::vector<std::string> choices;
    for (const auto& [_, c] : choices_[i]) choices.push_back(c);
    return aggregate_choices(choices, policy_).status;
}

std::optional<AnnotationTask> TaskService::next_task(const std::string& annotator_id) const {
    std::shared_lock lock(mu_);
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
        if (choices_[i].count(annotator_id)) continue;
        if (status_locked(i) == LabelStatus::needs_more) return tasks_[i];
    }
    return std::nullopt;
}

TaskService::SubmitResult TaskService::submit(AnnotationRecord record) {
    std::unique_lock lock(mu_);
    auto it = index_.find(record.task_id);
    if (it == index_.end()) return {SubmitStatus::unknown_task, "unknown task " + record.task_id};
    const std::size_t i = it->second;
    if (record.annotator_id.empty()) return {SubmitStatus::invalid, "empty annotator_id"};
    if (!tasks_[i].accepts(record.choice))
        return {SubmitStatus::invalid, "choice '" + record.choice + "' is not a candidate"};
    if (auto prev = choices_[i].find(record.annotator_id); prev != choices_[i].end()) {
        if (prev->second == record.choice) return {SubmitStatus::duplicate, "already recorded"};
        return {SubmitStatus::conflict, "annotator already labeled this task"};
    }
    if (status_locked(i) != LabelStatus::needs_more)
        return {SubmitStatus::conflict, "task is already " + std::string(to_string(status_locked(i)))};
    if (record.timestamp.empty()) record.timestamp = utc_now();
    if (!log_path_.empty()) {
        std::ofstream out(log_path_, std::ios::app | std::ios::binary);
        out << record_to_json_line(record) << "\n";
        if (!out) return {SubmitStatus::invalid, "could not persist record"};
    }
    choices_[i].emplace(record.annotator_id, record.choice);
    records_.push_back(std::move(record));
    return {SubmitStatus::accepted, "accepted"};
}

Progress TaskService::progress() const {
    std::shared_lock lock(mu_);
    Progress p;
    p.tasks = tasks_.size();
    p.records = records_.size();
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
        switch (status_locked(i)) {
            case LabelStatus::resolved: ++p.resolved; break;
            case LabelStatus::needs_more: ++p.needs_more; break;
            case LabelStatus::dropped: ++p.dropped; break;
        }
    }
    return p;
}

std::vector<AnnotationRecord> TaskService::records() const {
    std::shared_lock lock(mu_);
    return records_;
}

// --- HTTP ----------------------------------------------------------------------

struct AnnotationServer::Impl {
    httplib::Server server;
};

AnnotationServer::AnnotationServer(TaskService& service, std::string static_dir) : impl_(std::make_unique<Impl>()) {
    auto& srv = impl_->server;
    auto send_json = [](httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json; charset=utf-8");
    };

    srv.Get("/tasks/next", [&service, send_json](const httplib::Request& req, httplib::Response& res) {
        auto annotator = req.get_param_value("annotator");
        if (annotator.empty()) return send_json(res, 400, {{"error", "annotator parameter required"}});
        auto task = service.next_task(annotator);
        if (!task) {
            res.status = 204;
            return;
        }
        json body = {{"schema_version", kAnnotationSchemaVersion}, {"task", json::parse(task_to_json_line(*task))}};
        send_json(res, 200, body);
    });

    srv.Post("/records", [&service, send_json](const httplib::Request& req, httplib::Response& res) {
        AnnotationRecord r;
        try {
            r = record_from(json::parse(req.body));
        } catch (const std::exception& e) {
            return send_json(res, 400, {{"error", e.what()}});
        }
        auto result = service.submit(std::move(r));
        int status = 400;
        switch (result.status) {
            case TaskService::SubmitStatus::accepted: status = 201; break;
            case TaskService::SubmitStatus::duplicate: status = 200; break;
            case TaskService::SubmitStatus::conflict: status = 409; break;
            case TaskService::SubmitStatus::unknown_task: status = 404; break;
            case TaskService::SubmitStatus::invalid: status = 400; break;
        }
        json body = {{"schema_version", kAnnotationSchemaVersion}, {"message", result.message}};
        if (status >= 400) body["error"] = result.message;
        send_json(res, status, body);
    });

    srv.Get("/progress", [&service, send_json](const httplib::Request&, httplib::Response& res) {
        auto p = service.progress();
        send_json(res, 200,
                  {{"schema_version", kAnnotationSchemaVersion},
                   {"tasks", p.tasks},
                   {"records", p.records},
                   {"resolved", p.resolved},
                   {"needs_more", p.needs_more},
                   {"dropped", p.dropped}});
    });

    if (!static_dir.empty()) srv.set_mount_point("/", static_dir);
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool AnnotationServer::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }
bool AnnotationServer::listen_after_bind() { return impl_->server.listen_after_bind(); }
void AnnotationServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace newslens
