#pragma once

// Human annotation of layer-1 candidates: task sampling, record validation,
// majority-vote aggregation and the task queue behind the labeling UI.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "newslens/corpus.hpp"
#include "newslens/weaksup.hpp"

namespace newslens {

inline constexpr int kAnnotationSchemaVersion = 1;
inline constexpr std::string_view kNoneChoice = "none";

struct AnnotationTask {
    std::string task_id;     // "<topic_id>:<segment_id>"
    std::string segment_id;
    std::string station;
    std::string topic_id;    // the (station, topic) cell it was drawn from
    std::string text;
    std::array<std::string, 3> candidates;

    bool accepts(std::string_view choice) const;  // a candidate or "none"
};

struct AnnotationRecord {
    std::string task_id;
    std::string annotator_id;
    std::string choice;
    std::string timestamp;

    bool operator==(const AnnotationRecord&) const = default;
};

enum class LabelStatus { resolved, needs_more, dropped };
std::string_view to_string(LabelStatus s);

struct GroundTruthLabel {
    std::string task_id;
    std::string segment_id;
    std::string choice;  // topic id or "none"; empty unless resolved
    LabelStatus status = LabelStatus::needs_more;
    std::size_t n_records = 0;

    bool operator==(const GroundTruthLabel&) const = default;
};

struct AggregationPolicy {
    std::size_t min_annotators = 4;
    std::size_t max_annotators = 7;  // unresolved at this many records -> dropped
};

// Top three topics by layer-1 score, ties broken by topic id.
std::array<std::string, 3> candidate_topics(std::span<const double> scores,
                                            const std::vector<std::string>& topic_ids);

/// Draws min(n_per_cell, |cell|) segments without replacement from every
/// (topic, station) cell of the layer-1 sets. `labels` is aligned with
/// `segments`. Empty cells produce a warning and no tasks.
std::vector<AnnotationTask> sample_tasks(std::span<const Segment> segments, std::span<const WeakLabel> labels,
                                         const std::vector<std::string>& topic_ids,
                                         const std::vector<std::string>& stations, std::size_t n_per_cell,
                                         std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

struct RecordRejection {
    std::size_t line = 0;  // 0 when not from a file
    AnnotationRecord record;
    std::string reason;
};

struct AggregationResult {
    std::map<std::string, GroundTruthLabel> labels;  // by task id, every task present
    std::vector<RecordRejection> rejected;
};

/// Strict majority among at least min_annotators distinct annotators.
/// Ties stay needs_more until the cap, then the task is dropped. Duplicate
/// (task, annotator) pairs keep the smallest (timestamp, choice), so the
/// result does not depend on record order.
AggregationResult aggregate(std::span<const AnnotationRecord> records, std::span<const AnnotationTask> tasks,
                            const AggregationPolicy& policy = {});

// Counts-only form used by the truth-table tests.
GroundTruthLabel aggregate_choices(std::span<const std::string> choices, const AggregationPolicy& policy = {});

std::string task_to_json_line(const AnnotationTask& t);
std::string record_to_json_line(const AnnotationRecord& r);
AnnotationTask task_from_json(std::string_view line);
AnnotationRecord record_from_json(std::string_view line);

void export_tasks(std::span<const AnnotationTask> tasks, const std::string& path);
std::vector<AnnotationTask> load_tasks(const std::string& path);

struct ImportResult {
    std::vector<AnnotationRecord> records;
    std::vector<RecordRejection> rejected;
};

// Task lines are skipped, so a task file with records appended can be
// imported directly. Records are checked against the task candidates.
ImportResult import_records_text(std::string_view jsonl, std::span<const AnnotationTask> tasks);
ImportResult import_records(const std::string& path, std::span<const AnnotationTask> tasks);

struct Progress {
    std::size_t tasks = 0;
    std::size_t records = 0;
    std::size_t resolved = 0;
    std::size_t needs_more = 0;
    std::size_t dropped = 0;
};

/// In-process task queue. Appends are serialized; reads run concurrently.
/// When a log path is given, existing records are loaded from it and every
/// accepted record is appended to it.
class TaskService {
  public:
    enum class SubmitStatus { accepted, duplicate, conflict, unknown_task, invalid };
    struct SubmitResult {
        SubmitStatus status;
        std::string message;
    };

    TaskService(std::vector<AnnotationTask> tasks, AggregationPolicy policy, std::string record_log = {});

    // First task (in task order) that is still open and that the annotator
    // has not labeled yet.
    std::optional<AnnotationTask> next_task(const std::string& annotator_id) const;
    SubmitResult submit(AnnotationRecord record);
    Progress progress() const;
    std::vector<AnnotationRecord> records() const;
    const std::vector<AnnotationTask>& tasks() const { return tasks_; }

  private:
    LabelStatus status_locked(std::size_t task_index) const;

    std::vector<AnnotationTask> tasks_;
    std::map<std::string, std::size_t, std::less<>> index_;
    AggregationPolicy policy_;
    std::string log_path_;

    mutable std::shared_mutex mu_;
    std::vector<AnnotationRecord> records_;
    std::vector<std::map<std::string, std::string>> choices_;  // per task: annotator -> choice
};

/// HTTP front end for TaskService:
///   GET  /tasks/next?annotator=ID   200 {schema_version, task} | 204
///   POST /records                   201 accepted | 200 duplicate | 409 | 404 | 400
///   GET  /progress                  200 {schema_version, tasks, records, ...}
/// Static files under static_dir are served at "/".
class AnnotationServer {
  public:
    explicit AnnotationServer(TaskService& service, std::string static_dir = {});
    ~AnnotationServer();
    AnnotationServer(const AnnotationServer&) = delete;
    AnnotationServer& operator=(const AnnotationServer&) = delete;

    int bind_to_any_port(const std::string& host);
    bool bind(const std::string& host, int port);
    bool listen_after_bind();  // blocks until stop()
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace newslens
