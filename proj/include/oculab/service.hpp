#pragma once

// Run execution and the operations behind the CLI and HTTP API.
//
// Batch and live runs share one code path (execute_run); a live run also
// appends each step to a log that clients read with a cursor. All store
// mutations go through a single writer thread.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "oculab/error.hpp"
#include "oculab/learning_path.hpp"
#include "oculab/metrics.hpp"
#include "oculab/protocol.hpp"
#include "oculab/serialization.hpp"
#include "oculab/store.hpp"
#include "oculab/subject.hpp"

namespace oculab {

// ---------------------------------------------------------------- requests

struct RunRequest {
    std::string patient_id;
    ExamConfig config;
    std::optional<SubjectParams> subject;            // simulator source
    std::optional<std::vector<GazeSample>> replay;  // recorded source
    Thresholds thresholds;
    MetricsOptions metrics;
    bool live = false;
    bool realtime = false;
};

inline void validate(const RunRequest& r) {
    if (r.subject.has_value() == r.replay.has_value())
        throw ValidationError("exactly one subject source (subject or replay) is required");
    validate(r.config);
    if (r.subject) validate(*r.subject);
    if (auto bad = invalid_fields(r.thresholds); !bad.empty()) throw ConfigError(bad, "invalid thresholds");
    if (r.replay) {
        if (r.replay->empty()) throw EmptyInputError("replay stream has no samples");
        if (r.replay->back().t + 1e-9 < r.config.duration_s)
            throw IncompleteSessionError("sample stream ends before the configured duration");
    }
}

inline std::vector<GazeSample> read_samples_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open samples file '" + path + "'");
    return read_samples_csv(in);
}

/// Shared document shape for config files and POST /runs bodies:
/// {"patient_id", "test": ExamConfig, "subject": {"preset", ...overrides}
///  | "replay": {"samples_csv"} | {"path"}, "thresholds", "metrics",
///  "live", "realtime"}
inline RunRequest run_request_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("run request must be a JSON object");
    RunRequest r;
    r.patient_id = detail::get_or<std::string>(j, "patient_id", "");
    r.config = exam_config_from_json(j.value("test", json::object()));
    if (j.contains("subject") && !j.at("subject").is_null()) r.subject = subject_params_from_json(j.at("subject"));
    if (j.contains("replay") && !j.at("replay").is_null()) {
        const json& rp = j.at("replay");
        if (rp.contains("samples_csv")) {
            std::istringstream in(rp.at("samples_csv").get<std::string>());
            r.replay = read_samples_csv(in);
        } else if (rp.contains("path")) {
            r.replay = read_samples_file(rp.at("path").get<std::string>());
        } else {
            throw ValidationError("replay needs 'samples_csv' or 'path'");
        }
    }
    if (j.contains("thresholds")) r.thresholds = thresholds_from_json(j.at("thresholds"));
    if (j.contains("metrics")) r.metrics = metrics_options_from_json(j.at("metrics"));
    r.live = detail::get_or(j, "live", false);
    r.realtime = detail::get_or(j, "realtime", false);
    return r;
}

// --------------------------------------------------------------- execution

struct RunOutput {
    SessionRecord record;  // session_id and started_at left for the caller
    std::vector<GazeSample> samples;
};

/// Runs the request to SESSION_END, computes and classifies the report.
/// `on_step` sees every step in order, identically for batch and live runs.
inline RunOutput execute_run(const RunRequest& req, const StepCallback& on_step = {}) {
    validate(req);
    RawTestOutput raw;
    if (req.subject) {
        raw = run_closed_loop(req.config, *req.subject, on_step);
    } else {
        ExamState st = new_session(req.config);
        for (const auto& s : *req.replay) {
            if (st.finished) break;
            const StepOutput out = step(st, s);
            if (on_step) on_step(st, out);
        }
        raw = finalize(std::move(st));
    }
    RunOutput out;
    SessionRecord& rec = out.record;
    rec.patient_id = req.patient_id;
    rec.source = req.subject ? "simulator" : "replay";
    rec.config = req.config;
    rec.subject = req.subject;
    rec.thresholds = req.thresholds;
    rec.metrics = req.metrics;
    rec.report = classify(compute_report(raw, req.metrics), req.thresholds);
    rec.events = std::move(raw.events);
    rec.records = std::move(raw.records);
    out.samples = std::move(raw.samples);
    return out;
}

// ------------------------------------------------------------------ stream

/// One step of a session as seen by a stream reader: a record, or an event.
struct StreamEntry {
    std::variant<SampleRecord, TrialEvent> item;
    friend bool operator==(const StreamEntry&, const StreamEntry&) = default;
};

inline json to_json(const StreamEntry& e) {
    json body;
    json out;
    if (const auto* r = std::get_if<SampleRecord>(&e.item)) {
        out["type"] = "record";
        body = to_json(*r);
    } else {
        out["type"] = "event";
        body = to_json(std::get<TrialEvent>(e.item));
    }
    for (auto& [k, v] : body.items()) out[k] = v;
    return out;
}

/// Entries for one step: its record, then the events it emitted.
inline void append_step(std::vector<StreamEntry>& log, const StepOutput& out) {
    log.push_back({out.record});
    for (const auto& e : out.events) log.push_back({e});
}

/// Reconstructs the step log of a stored session: events are attached to
/// the record with the same sample time.
inline std::vector<StreamEntry> stream_log(const SessionRecord& rec) {
    std::vector<StreamEntry> log;
    log.reserve(rec.records.size() + rec.events.size());
    std::size_t j = 0;
    for (const auto& r : rec.records) {
        log.push_back({r});
        while (j < rec.events.size() && rec.events[j].t <= r.t) log.push_back({rec.events[j++]});
    }
    while (j < rec.events.size()) log.push_back({rec.events[j++]});
    return log;
}

struct StreamBatch {
    std::string session_id;
    std::size_t cursor = 0;
    std::size_t next_cursor = 0;
    std::vector<StreamEntry> entries;
    std::string status;  // "running", "complete" or "failed"
    std::optional<std::string> error;
};

inline json to_json(const StreamBatch& b) {
    json entries = json::array();
    for (const auto& e : b.entries) entries.push_back(to_json(e));
    json out{{"session_id", b.session_id},
             {"cursor", b.cursor},
             {"next_cursor", b.next_cursor},
             {"status", b.status},
             {"done", b.status != "running"},
             {"entries", entries}};
    if (b.error) out["error"] = *b.error;
    return out;
}

/// Append-only log of a live session with blocking reads.
class LiveLog {
public:
    LiveLog(std::string session_id, std::string patient_id)
        : session_id_(std::move(session_id)), patient_id_(std::move(patient_id)) {}

    const std::string& session_id() const noexcept { return session_id_; }
    const std::string& patient_id() const noexcept { return patient_id_; }

    void append(const StepOutput& out) {
        {
            std::lock_guard lock(mu_);
            append_step(entries_, out);
        }
        cv_.notify_all();
    }

    void finish(std::optional<std::string> error = std::nullopt) {
        {
            std::lock_guard lock(mu_);
            status_ = error ? "failed" : "complete";
            error_ = std::move(error);
        }
        cv_.notify_all();
    }

    std::string status() const {
        std::lock_guard lock(mu_);
        return status_;
    }

    /// Entries from `cursor`, waiting up to `wait` for new ones while running.
    StreamBatch read(std::size_t cursor, std::chrono::milliseconds wait, std::size_t limit = 0) const {
        std::unique_lock lock(mu_);
        if (cursor > entries_.size()) throw ValidationError("cursor beyond end of stream");
        if (wait.count() > 0)
            cv_.wait_for(lock, wait, [&] { return entries_.size() > cursor || status_ != "running"; });
        StreamBatch b;
        b.session_id = session_id_;
        b.cursor = cursor;
        std::size_t end = entries_.size();
        if (limit > 0) end = std::min(end, cursor + limit);
        b.entries.assign(entries_.begin() + static_cast<std::ptrdiff_t>(cursor),
                         entries_.begin() + static_cast<std::ptrdiff_t>(end));
        b.next_cursor = end;
        b.status = end == entries_.size() ? status_ : "running";
        if (b.status == "failed") b.error = error_;
        return b;
    }

private:
    std::string session_id_;
    std::string patient_id_;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::vector<StreamEntry> entries_;
    std::string status_ = "running";
    std::optional<std::string> error_;
};

// ------------------------------------------------------------------ writer

/// Owns all store mutations; tasks run one at a time in submission order.
class StoreWriter {
public:
    explicit StoreWriter(Store& store) : store_(store), thread_([this] { loop(); }) {}
    StoreWriter(const StoreWriter&) = delete;
    StoreWriter& operator=(const StoreWriter&) = delete;
    ~StoreWriter() { stop(); }

    template <class F>
    auto submit(F fn) -> std::future<decltype(fn(std::declval<Store&>()))> {
        using R = decltype(fn(std::declval<Store&>()));
        auto task = std::make_shared<std::packaged_task<R()>>([this, fn = std::move(fn)]() mutable { return fn(store_); });
        auto fut = task->get_future();
        {
            std::lock_guard lock(mu_);
            if (stopping_) throw Error("store writer is shut down");
            queue_.emplace_back([task] { (*task)(); });
        }
        cv_.notify_one();
        return fut;
    }

    template <class F>
    auto run(F fn) {
        return submit(std::move(fn)).get();
    }

    /// Drains queued tasks, then stops.
    void stop() {
        {
            std::lock_guard lock(mu_);
            if (stopping_ && !thread_.joinable()) return;
            stopping_ = true;
        }
        cv_.notify_one();
        if (thread_.joinable()) thread_.join();
    }

private:
    void loop() {
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
                if (queue_.empty()) return;
                task = std::move(queue_.front());
                queue_.pop_front();
            }
            task();
        }
    }

    Store& store_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> queue_;
    bool stopping_ = false;
    std::thread thread_;
};

// ----------------------------------------------------------------- service

struct RunTicket {
    std::string session_id;
    bool live = false;
    std::optional<SessionRecord> record;  // batch runs only
};

class Service {
public:
    explicit Service(Store& store) : store_(store), writer_(store) {}
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;
    ~Service() { shutdown(); }

    Store& store() noexcept { return store_; }

    PatientProfile create_patient(const std::string& name, std::optional<std::string> id = std::nullopt) {
        return writer_.run([&](Store& s) { return s.create_patient(name, id); });
    }

    std::vector<PatientProfile> list_patients() const { return store_.list_patients(); }

    /// Batch runs return once saved; live runs return at once and save when
    /// SESSION_END is reached.
    RunTicket start_run(RunRequest req) {
        if (stopping_) throw ConflictError("service is shutting down");
        validate(req);
        if (!store_.find_patient(req.patient_id)) throw ReferentialError("unknown patient '" + req.patient_id + "'");
        const std::string started_at = store_.now();
        if (!req.live) {
            RunOutput out = execute_run(req);
            out.record.started_at = started_at;
            const auto id = save(std::move(out));
            return RunTicket{id, false, store_.load_session(id)};
        }
        const std::string id = writer_.run([](Store& s) { return s.reserve_session_id(); });
        auto log = std::make_shared<LiveLog>(id, req.patient_id);
        std::lock_guard lock(live_mu_);
        live_.emplace(id, log);
        workers_.emplace_back([this, req = std::move(req), log, started_at] { run_live(req, log, started_at); });
        return RunTicket{id, true, std::nullopt};
    }

    /// "complete" (stored), "running" or "failed" (live), else NotFoundError.
    std::string session_status(const std::string& id) const {
        if (auto log = live_log(id)) {
            const auto st = log->status();
            if (st != "complete") return st;
        }
        if (store_.has_session(id)) return "complete";
        throw NotFoundError("unknown session '" + id + "'");
    }

    StreamBatch stream(const std::string& id, std::size_t cursor, std::chrono::milliseconds wait = {},
                       std::size_t limit = 0) const {
        if (auto log = live_log(id)) return log->read(cursor, wait, limit);
        const SessionRecord rec = store_.load_session(id);
        const auto log = stream_log(rec);
        if (cursor > log.size()) throw ValidationError("cursor beyond end of stream");
        StreamBatch b;
        b.session_id = id;
        b.cursor = cursor;
        std::size_t end = log.size();
        if (limit > 0) end = std::min(end, cursor + limit);
        b.entries.assign(log.begin() + static_cast<std::ptrdiff_t>(cursor), log.begin() + static_cast<std::ptrdiff_t>(end));
        b.next_cursor = end;
        b.status = end == log.size() ? "complete" : "running";
        return b;
    }

    std::vector<TrendPoint> trend(const std::string& patient, const std::string& metric) const {
        return store_.trend(patient, metric);
    }

    TopicGraph graph() const { return store_.load_graph(); }

    void put_graph(const TopicGraph& g) {
        writer_.run([&](Store& s) {
            s.save_graph(g);
            return 0;
        });
    }

    StudentProgress progress(const std::string& student) const { return store_.load_progress(student); }

    /// Marks a topic, or one of its components, complete for a student.
    StudentProgress complete(const std::string& student, const std::string& topic,
                             const std::optional<std::string>& component) {
        return writer_.run([&](Store& s) {
            const TopicGraph g = s.load_graph();
            StudentProgress p = s.load_progress(student);
            p = component ? mark_component_complete(std::move(p), g, topic, *component)
                          : mark_complete(std::move(p), g, topic);
            s.save_progress(p);
            return p;
        });
    }

    /// Stops accepting runs, lets live runs finish at full speed and saves
    /// them, then drains the writer.
    void shutdown() {
        stopping_ = true;
        std::vector<std::thread> workers;
        {
            std::lock_guard lock(live_mu_);
            workers.swap(workers_);
        }
        for (auto& w : workers)
            if (w.joinable()) w.join();
        writer_.stop();
    }

private:
    std::string save(RunOutput out) {
        return writer_.run([out = std::move(out)](Store& s) { return s.save_session(out.record, out.samples); });
    }

    void run_live(const RunRequest& req, const std::shared_ptr<LiveLog>& log, const std::string& started_at) {
        const auto wall0 = std::chrono::steady_clock::now();
        try {
            RunOutput out = execute_run(req, [&](const ExamState& st, const StepOutput& o) {
                if (req.realtime && !stopping_) {
                    const auto due = wall0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                 std::chrono::duration<double>(st.clock));
                    std::this_thread::sleep_until(due);
                }
                log->append(o);
            });
            out.record.session_id = log->session_id();
            out.record.started_at = started_at;
            save(std::move(out));
            log->finish();
        } catch (const std::exception& e) {
            log->finish(std::string(e.what()));
        }
    }

    std::shared_ptr<LiveLog> live_log(const std::string& id) const {
        std::lock_guard lock(live_mu_);
        auto it = live_.find(id);
        return it == live_.end() ? nullptr : it->second;
    }

    Store& store_;
    StoreWriter writer_;
    std::atomic<bool> stopping_{false};
    mutable std::mutex live_mu_;
    std::map<std::string, std::shared_ptr<LiveLog>> live_;
    std::vector<std::thread> workers_;
};

}  // namespace oculab
