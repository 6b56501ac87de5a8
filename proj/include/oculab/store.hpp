#pragma once

// Directory-backed records store:
//
//   <root>/patients.json                  array of patient profiles
//   <root>/sessions/<id>.json             session record (config, report, events, records)
//   <root>/sessions/<id>.samples.csv      raw gaze samples
//   <root>/pedagogy/graph.json            learning-path graph (default when absent)
//   <root>/pedagogy/progress/<student>.json
//
// Session files are written once and never modified. Writes are serialised
// by an internal lock; reads may run concurrently.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oculab/error.hpp"
#include "oculab/learning_path.hpp"
#include "oculab/metrics.hpp"
#include "oculab/serialization.hpp"

namespace oculab {

struct PatientProfile {
    std::string id;
    std::string display_name;
    std::string created_at;
    friend bool operator==(const PatientProfile&, const PatientProfile&) = default;
};

struct SessionRecord {
    std::string session_id;
    std::string patient_id;
    std::string started_at;
    std::string source = "simulator";  // or "replay"
    ExamConfig config;
    std::optional<SubjectParams> subject;
    Thresholds thresholds;
    MetricsOptions metrics;
    ExamReport report;
    std::vector<TrialEvent> events;
    std::vector<SampleRecord> records;
    std::string samples_file;
    friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

struct TrendPoint {
    std::string started_at;
    std::string session_id;
    double value = 0.0;
    friend bool operator==(const TrendPoint&, const TrendPoint&) = default;
};

inline json to_json(const PatientProfile& p) {
    return json{{"id", p.id}, {"display_name", p.display_name}, {"created_at", p.created_at}};
}

inline PatientProfile patient_from_json(const json& j) {
    return PatientProfile{detail::required<std::string>(j, "id"), detail::required<std::string>(j, "display_name"),
                          detail::get_or<std::string>(j, "created_at", "")};
}

inline json to_json(const SessionRecord& r) {
    json events = json::array();
    for (const auto& e : r.events) events.push_back(to_json(e));
    json records = json::array();
    for (const auto& rec : r.records) records.push_back(to_json(rec));
    return json{{"session_id", r.session_id},
                {"patient_id", r.patient_id},
                {"started_at", r.started_at},
                {"source", r.source},
                {"config", to_json(r.config)},
                {"subject", r.subject ? to_json(*r.subject) : json(nullptr)},
                {"thresholds", to_json(r.thresholds)},
                {"metrics", to_json(r.metrics)},
                {"report", to_json(r.report)},
                {"events", events},
                {"records", records},
                {"samples_file", r.samples_file}};
}

inline SessionRecord session_from_json(const json& j) {
    SessionRecord r;
    r.session_id = detail::required<std::string>(j, "session_id");
    r.patient_id = detail::required<std::string>(j, "patient_id");
    r.started_at = detail::get_or<std::string>(j, "started_at", "");
    r.source = detail::get_or<std::string>(j, "source", "simulator");
    r.config = exam_config_from_json(j.at("config"));
    if (j.contains("subject") && !j.at("subject").is_null()) r.subject = subject_params_from_json(j.at("subject"));
    if (j.contains("thresholds")) r.thresholds = thresholds_from_json(j.at("thresholds"));
    if (j.contains("metrics")) r.metrics = metrics_options_from_json(j.at("metrics"));
    r.report = exam_report_from_json(j.at("report"));
    for (const auto& e : j.value("events", json::array())) r.events.push_back(trial_event_from_json(e));
    for (const auto& rec : j.value("records", json::array())) r.records.push_back(sample_record_from_json(rec));
    r.samples_file = detail::get_or<std::string>(j, "samples_file", "");
    return r;
}

/// Serialised form written to disk; stable under load/save.
inline std::string session_file_text(const SessionRecord& r) { return to_json(r).dump(2) + "\n"; }

/// The record as it will read back from disk (numbers at 9 digits).
inline SessionRecord canonical(const SessionRecord& r) { return session_from_json(to_json(r)); }

/// UTC ISO-8601 with millisecond precision, e.g. 2024-05-01T12:00:00.000Z.
inline std::string utc_now_iso() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
    const std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
    return buf;
}

/// Random hex id with a prefix, e.g. "P-3fa29c1b".
inline std::string random_id(const std::string& prefix, std::size_t hex_digits) {
    static thread_local std::mt19937_64 gen{std::random_device{}()};
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id = prefix;
    for (std::size_t i = 0; i < hex_digits; ++i) id += kHex[gen() & 15u];
    return id;
}

/// Ids and timestamps are injectable so tests and replays are reproducible.
struct StoreHooks {
    std::function<std::string()> patient_id = [] { return random_id("P-", 8); };
    std::function<std::string()> session_id = [] { return random_id("S-", 12); };
    std::function<std::string()> now = utc_now_iso;
};

class Store {
public:
    explicit Store(std::filesystem::path root, StoreHooks hooks = {}) : root_(std::move(root)), hooks_(std::move(hooks)) {
        std::error_code ec;
        std::filesystem::create_directories(root_ / "sessions", ec);
        std::filesystem::create_directories(root_ / "pedagogy" / "progress", ec);
        if (ec) throw ValidationError("cannot create store at " + root_.string() + ": " + ec.message());
        load_index();
    }

    const std::filesystem::path& root() const noexcept { return root_; }

    std::string now() const { return hooks_.now(); }
    /// Claims a fresh session id for a run that will be saved later.
    std::string reserve_session_id() {
        std::unique_lock lock(mu_);
        auto id = fresh_session_id_locked();
        reserved_.insert(id);
        return id;
    }

    // ------------------------------------------------------------ patients

    PatientProfile create_patient(const std::string& name, std::optional<std::string> id = std::nullopt) {
        if (name.empty()) throw ValidationError("patient name must be non-empty");
        std::unique_lock lock(mu_);
        PatientProfile p;
        p.display_name = name;
        p.created_at = hooks_.now();
        if (id) {
            if (id->empty() || !safe_token(*id)) throw ValidationError("invalid patient id '" + *id + "'");
            if (patients_.count(*id)) throw ConflictError("patient id '" + *id + "' already exists");
            p.id = *id;
        } else {
            for (int attempt = 0;; ++attempt) {
                p.id = hooks_.patient_id();
                if (!patients_.count(p.id) && safe_token(p.id)) break;
                if (attempt > 1000) throw Error("could not generate a unique patient id");
            }
        }
        patients_.emplace(p.id, p);
        patient_order_.push_back(p.id);
        write_patients_locked();
        return p;
    }

    std::vector<PatientProfile> list_patients() const {
        std::shared_lock lock(mu_);
        std::vector<PatientProfile> out;
        for (const auto& id : patient_order_) out.push_back(patients_.at(id));
        return out;
    }

    std::optional<PatientProfile> find_patient(const std::string& id) const {
        std::shared_lock lock(mu_);
        auto it = patients_.find(id);
        if (it == patients_.end()) return std::nullopt;
        return it->second;
    }

    // ------------------------------------------------------------ sessions

    /// Persists a session and its raw samples; assigns an id and start time
    /// when they are empty. Returns the session id.
    std::string save_session(SessionRecord rec, const std::vector<GazeSample>& samples) {
        std::unique_lock lock(mu_);
        if (!patients_.count(rec.patient_id)) throw ReferentialError("unknown patient '" + rec.patient_id + "'");
        if (rec.session_id.empty()) rec.session_id = fresh_session_id_locked();
        if (!safe_token(rec.session_id)) throw ValidationError("invalid session id '" + rec.session_id + "'");
        if (sessions_.count(rec.session_id)) throw ConflictError("session '" + rec.session_id + "' already exists");
        reserved_.erase(rec.session_id);
        if (rec.started_at.empty()) rec.started_at = hooks_.now();
        rec.samples_file = "sessions/" + rec.session_id + ".samples.csv";
        write_atomic(root_ / rec.samples_file, samples_csv_string(samples));
        const json doc = to_json(rec);
        write_atomic(session_path(rec.session_id), doc.dump(2) + "\n");
        // Index what a reload would see, not the unrounded input.
        sessions_.emplace(rec.session_id, index_entry(session_from_json(doc)));
        return rec.session_id;
    }

    SessionRecord load_session(const std::string& id) const {
        {
            std::shared_lock lock(mu_);
            if (!sessions_.count(id)) throw NotFoundError("unknown session '" + id + "'");
        }
        return session_from_json(read_json(session_path(id)));
    }

    /// Raw file bytes, as served to clients.
    std::string session_text(const std::string& id) const {
        {
            std::shared_lock lock(mu_);
            if (!sessions_.count(id)) throw NotFoundError("unknown session '" + id + "'");
        }
        return read_text(session_path(id));
    }

    std::vector<GazeSample> load_samples(const std::string& id) const {
        {
            std::shared_lock lock(mu_);
            if (!sessions_.count(id)) throw NotFoundError("unknown session '" + id + "'");
        }
        std::ifstream in(root_ / "sessions" / (id + ".samples.csv"));
        if (!in) throw NotFoundError("samples file missing for session '" + id + "'");
        return read_samples_csv(in);
    }

    bool has_session(const std::string& id) const {
        std::shared_lock lock(mu_);
        return sessions_.count(id) != 0;
    }

    /// Session ids ordered by (started_at, session_id), optionally for one patient.
    std::vector<std::string> list_sessions(const std::optional<std::string>& patient = std::nullopt) const {
        std::shared_lock lock(mu_);
        std::vector<const IndexEntry*> entries;
        for (const auto& [_, e] : sessions_)
            if (!patient || e.patient_id == *patient) entries.push_back(&e);
        std::sort(entries.begin(), entries.end(), [](const IndexEntry* a, const IndexEntry* b) {
            return std::tie(a->started_at, a->session_id) < std::tie(b->started_at, b->session_id);
        });
        std::vector<std::string> out;
        for (const auto* e : entries) out.push_back(e->session_id);
        return out;
    }

    /// Chronological values of one metric across a patient's sessions;
    /// sessions without the metric are skipped.
    std::vector<TrendPoint> trend(const std::string& patient_id, const std::string& metric) const {
        if (!is_metric_name(metric)) metric_value(ExamReport{}, metric);  // throws with the valid names
        std::shared_lock lock(mu_);
        if (!patients_.count(patient_id)) throw NotFoundError("unknown patient '" + patient_id + "'");
        std::vector<TrendPoint> out;
        for (const auto& [_, e] : sessions_) {
            if (e.patient_id != patient_id) continue;
            if (auto v = metric_value(e.report, metric)) out.push_back({e.started_at, e.session_id, *v});
        }
        std::sort(out.begin(), out.end(), [](const TrendPoint& a, const TrendPoint& b) {
            return std::tie(a.started_at, a.session_id) < std::tie(b.started_at, b.session_id);
        });
        return out;
    }

    // ------------------------------------------------------------ pedagogy

    TopicGraph load_graph() const {
        std::shared_lock lock(mu_);
        const auto path = root_ / "pedagogy" / "graph.json";
        if (!std::filesystem::exists(path)) return default_topic_graph();
        return topic_graph_from_json(read_json(path));
    }

    void save_graph(const TopicGraph& g) {
        validate(g);
        std::unique_lock lock(mu_);
        write_atomic(root_ / "pedagogy" / "graph.json", to_json(g).dump(2) + "\n");
    }

    StudentProgress load_progress(const std::string& student) const {
        if (!safe_token(student)) throw ValidationError("invalid student id '" + student + "'");
        std::shared_lock lock(mu_);
        const auto path = progress_path(student);
        if (!std::filesystem::exists(path)) return StudentProgress{student, {}, {}};
        return student_progress_from_json(read_json(path));
    }

    void save_progress(const StudentProgress& p) {
        if (!safe_token(p.student_id)) throw ValidationError("invalid student id '" + p.student_id + "'");
        std::unique_lock lock(mu_);
        write_atomic(progress_path(p.student_id), to_json(p).dump(2) + "\n");
    }

    /// Ids and names usable as file names: [A-Za-z0-9._-], not starting with '.'.
    static bool safe_token(const std::string& s) {
        if (s.empty() || s.size() > 128 || s.front() == '.') return false;
        return std::all_of(s.begin(), s.end(), [](char c) {
            return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                   c == '_' || c == '.';
        });
    }

private:
    struct IndexEntry {
        std::string session_id;
        std::string patient_id;
        std::string started_at;
        ExamReport report;
    };

    static IndexEntry index_entry(const SessionRecord& r) {
        return IndexEntry{r.session_id, r.patient_id, r.started_at, r.report};
    }

    std::filesystem::path session_path(const std::string& id) const { return root_ / "sessions" / (id + ".json"); }
    std::filesystem::path progress_path(const std::string& s) const {
        return root_ / "pedagogy" / "progress" / (s + ".json");
    }

    std::string fresh_session_id_locked() const {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            auto id = hooks_.session_id();
            if (!sessions_.count(id) && !reserved_.count(id) && safe_token(id)) return id;
        }
        throw Error("could not generate a unique session id");
    }

    static std::string read_text(const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw NotFoundError("cannot read " + p.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    static json read_json(const std::filesystem::path& p) {
        try {
            return json::parse(read_text(p));
        } catch (const json::parse_error& e) {
            throw ValidationError("malformed JSON in " + p.string() + ": " + e.what());
        }
    }

    static void write_atomic(const std::filesystem::path& p, const std::string& text) {
        const auto tmp = p.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot write " + tmp);
            out << text;
            if (!out.flush()) throw Error("short write to " + tmp);
        }
        std::filesystem::rename(tmp, p);
    }

    void write_patients_locked() {
        json arr = json::array();
        for (const auto& id : patient_order_) arr.push_back(to_json(patients_.at(id)));
        write_atomic(root_ / "patients.json", arr.dump(2) + "\n");
    }

    void load_index() {
        const auto ppath = root_ / "patients.json";
        if (std::filesystem::exists(ppath)) {
            for (const auto& j : read_json(ppath)) {
                auto p = patient_from_json(j);
                if (patients_.emplace(p.id, p).second) patient_order_.push_back(p.id);
            }
        }
        for (const auto& entry : std::filesystem::directory_iterator(root_ / "sessions")) {
            const auto name = entry.path().filename().string();
            if (name.size() <= 5 || name.ends_with(".samples.csv") || !name.ends_with(".json")) continue;
            auto rec = session_from_json(read_json(entry.path()));
            sessions_.emplace(rec.session_id, index_entry(rec));
        }
    }

    std::filesystem::path root_;
    StoreHooks hooks_;
    mutable std::shared_mutex mu_;
    std::map<std::string, PatientProfile> patients_;
    std::vector<std::string> patient_order_;
    std::map<std::string, IndexEntry> sessions_;
    std::set<std::string> reserved_;
};

}  // namespace oculab
