#pragma once

// JSON and CSV forms of every persisted type. Floating-point values are
// rounded to 9 significant digits before serialisation, so writing a
// loaded value reproduces the original bytes.

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oculab/error.hpp"
#include "oculab/learning_path.hpp"
#include "oculab/metrics.hpp"
#include "oculab/protocol.hpp"
#include "oculab/subject.hpp"

namespace oculab {

using json = nlohmann::ordered_json;

inline double round_sig9(double v) {
    if (!std::isfinite(v)) return v;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::strtod(buf, nullptr);
}

inline std::string format_sig9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace detail {

inline json num(double v) { return round_sig9(v); }

inline json opt(const std::optional<double>& v) { return v ? json(round_sig9(*v)) : json(nullptr); }

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("field '") + key + "' has the wrong type");
    }
}

inline std::optional<double> get_opt(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_number()) throw ValidationError(std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

template <class T>
T required(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) throw ValidationError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("field '") + key + "' has the wrong type");
    }
}

inline json vec3_json(const Vec3& v) { return json::array({num(v.x), num(v.y), num(v.z)}); }

}  // namespace detail

// ------------------------------------------------------------ ExamConfig

inline json to_json(const ExamConfig& c) {
    using detail::num;
    return json{{"test", to_string(c.test_kind)},
                {"duration_s", num(c.duration_s)},
                {"sample_rate_hz", num(c.sample_rate_hz)},
                {"eccentricity_deg", num(c.eccentricity_deg)},
                {"travel_deg", num(c.travel_deg)},
                {"period_s", num(c.period_s)},
                {"isi_min_s", num(c.isi_min_s)},
                {"isi_max_s", num(c.isi_max_s)},
                {"trial_timeout_s", num(c.trial_timeout_s)},
                {"dwell_s", num(c.dwell_s)},
                {"require_hold", c.require_hold},
                {"head_amp_deg", num(c.head_amp_deg)},
                {"target_radius_m", num(c.target_radius_m)},
                {"target_distance_m", num(c.target_distance_m)},
                {"seed", c.seed}};
}

/// Missing keys take the defaults for the requested test kind. The result
/// is not validated; call validate().
inline ExamConfig exam_config_from_json(const json& j) {
    using detail::get_or;
    if (!j.is_object()) throw ValidationError("exam config must be a JSON object");
    ExamConfig c = ExamConfig::defaults_for(parse_test_kind(get_or<std::string>(j, "test", "pursuit")));
    c.duration_s = get_or(j, "duration_s", c.duration_s);
    c.sample_rate_hz = get_or(j, "sample_rate_hz", c.sample_rate_hz);
    c.eccentricity_deg = get_or(j, "eccentricity_deg", c.eccentricity_deg);
    c.travel_deg = get_or(j, "travel_deg", c.travel_deg);
    c.period_s = get_or(j, "period_s", c.period_s);
    c.isi_min_s = get_or(j, "isi_min_s", c.isi_min_s);
    c.isi_max_s = get_or(j, "isi_max_s", c.isi_max_s);
    c.trial_timeout_s = get_or(j, "trial_timeout_s", c.trial_timeout_s);
    c.dwell_s = get_or(j, "dwell_s", c.dwell_s);
    c.require_hold = get_or(j, "require_hold", c.require_hold);
    c.head_amp_deg = get_or(j, "head_amp_deg", c.head_amp_deg);
    c.target_radius_m = get_or(j, "target_radius_m", c.target_radius_m);
    c.target_distance_m = get_or(j, "target_distance_m", c.target_distance_m);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    return c;
}

// --------------------------------------------------------- SubjectParams

inline json to_json(const SubjectParams& p) {
    using detail::num;
    return json{{"saccade_latency_mean_s", num(p.saccade_latency_mean_s)},
                {"saccade_latency_sd_s", num(p.saccade_latency_sd_s)},
                {"saccade_speed_dps", num(p.saccade_speed_dps)},
                {"pursuit_gain", num(p.pursuit_gain)},
                {"pursuit_lag_s", num(p.pursuit_lag_s)},
                {"catchup_threshold_deg", num(p.catchup_threshold_deg)},
                {"catchup_enabled", p.catchup_enabled},
                {"vor_gain", num(p.vor_gain)},
                {"head_amp_deg", num(p.head_amp_deg)},
                {"head_freq_hz", num(p.head_freq_hz)},
                {"noise_sd_deg", num(p.noise_sd_deg)},
                {"ipd_m", num(p.ipd_m)},
                {"pupil_diameter_mm", num(p.pupil_diameter_mm)},
                {"eye_openness", num(p.eye_openness)},
                {"seed", p.seed}};
}

/// Accepts {"preset": "normal", ...overrides} or plain parameters.
inline SubjectParams subject_params_from_json(const json& j) {
    using detail::get_or;
    if (!j.is_object()) throw ValidationError("subject must be a JSON object");
    SubjectParams p = preset_params(parse_preset(get_or<std::string>(j, "preset", "normal")));
    p.saccade_latency_mean_s = get_or(j, "saccade_latency_mean_s", p.saccade_latency_mean_s);
    p.saccade_latency_sd_s = get_or(j, "saccade_latency_sd_s", p.saccade_latency_sd_s);
    p.saccade_speed_dps = get_or(j, "saccade_speed_dps", p.saccade_speed_dps);
    p.pursuit_gain = get_or(j, "pursuit_gain", p.pursuit_gain);
    p.pursuit_lag_s = get_or(j, "pursuit_lag_s", p.pursuit_lag_s);
    p.catchup_threshold_deg = get_or(j, "catchup_threshold_deg", p.catchup_threshold_deg);
    p.catchup_enabled = get_or(j, "catchup_enabled", p.catchup_enabled);
    p.vor_gain = get_or(j, "vor_gain", p.vor_gain);
    p.head_amp_deg = get_or(j, "head_amp_deg", p.head_amp_deg);
    p.head_freq_hz = get_or(j, "head_freq_hz", p.head_freq_hz);
    p.noise_sd_deg = get_or(j, "noise_sd_deg", p.noise_sd_deg);
    p.ipd_m = get_or(j, "ipd_m", p.ipd_m);
    p.pupil_diameter_mm = get_or(j, "pupil_diameter_mm", p.pupil_diameter_mm);
    p.eye_openness = get_or(j, "eye_openness", p.eye_openness);
    p.seed = get_or<std::uint64_t>(j, "seed", p.seed);
    return p;
}

// ------------------------------------------------------------ Thresholds

inline json to_json(const Thresholds& t) {
    using detail::opt;
    return json{{"max_latency_s", opt(t.max_latency_s)},
                {"max_precision_rms_deg", opt(t.max_precision_rms_deg)},
                {"min_pursuit_gain", opt(t.min_pursuit_gain)},
                {"min_vor_gain_proxy", opt(t.min_vor_gain_proxy)},
                {"min_head_freq_hz", opt(t.min_head_freq_hz)},
                {"max_head_freq_hz", opt(t.max_head_freq_hz)}};
}

/// Absent keys keep their defaults; an explicit null removes a threshold.
inline Thresholds thresholds_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("thresholds must be a JSON object");
    Thresholds t;
    auto field = [&](const char* key, std::optional<double>& dst) {
        if (j.contains(key)) dst = detail::get_opt(j, key);
    };
    field("max_latency_s", t.max_latency_s);
    field("max_precision_rms_deg", t.max_precision_rms_deg);
    field("min_pursuit_gain", t.min_pursuit_gain);
    field("min_vor_gain_proxy", t.min_vor_gain_proxy);
    field("min_head_freq_hz", t.min_head_freq_hz);
    field("max_head_freq_hz", t.max_head_freq_hz);
    return t;
}

inline json to_json(const MetricsOptions& m) {
    return json{{"saccade_velocity_threshold_dps", detail::num(m.saccade_velocity_threshold_dps)},
                {"hysteresis_fraction", detail::num(m.hysteresis_fraction)}};
}

inline MetricsOptions metrics_options_from_json(const json& j) {
    MetricsOptions m;
    m.saccade_velocity_threshold_dps =
        detail::get_or(j, "saccade_velocity_threshold_dps", m.saccade_velocity_threshold_dps);
    m.hysteresis_fraction = detail::get_or(j, "hysteresis_fraction", m.hysteresis_fraction);
    if (!(m.saccade_velocity_threshold_dps > 0.0) || !(m.hysteresis_fraction > 0.0))
        throw ConfigError({"metrics"}, "metrics options must be positive");
    return m;
}

// ------------------------------------------------------ events, records

inline json to_json(const TrialEvent& e) {
    json j{{"kind", to_string(e.kind)}, {"t", detail::num(e.t)}, {"side", to_string(e.side)}};
    if (e.latency_s) j["latency_s"] = detail::num(*e.latency_s);
    if (e.gap_s) j["gap_s"] = detail::num(*e.gap_s);
    return j;
}

inline TrialEvent trial_event_from_json(const json& j) {
    TrialEvent e;
    e.kind = parse_event_kind(detail::required<std::string>(j, "kind"));
    e.t = detail::required<double>(j, "t");
    e.side = parse_side(detail::get_or<std::string>(j, "side", "NONE"));
    e.latency_s = detail::get_opt(j, "latency_s");
    e.gap_s = detail::get_opt(j, "gap_s");
    return e;
}

inline json to_json(const SampleRecord& r) {
    using detail::num;
    return json{{"t", num(r.t)},
                {"target_yaw", num(r.target_yaw)},
                {"gaze_yaw", num(r.gaze_yaw)},
                {"error_left", num(r.error_left)},
                {"error_right", num(r.error_right)},
                {"error_cyclopean", num(r.error_cyclopean)},
                {"head_yaw", num(r.head_yaw)}};
}

inline SampleRecord sample_record_from_json(const json& j) {
    using detail::required;
    return SampleRecord{required<double>(j, "t"),          required<double>(j, "target_yaw"),
                        required<double>(j, "gaze_yaw"),   required<double>(j, "error_left"),
                        required<double>(j, "error_right"), required<double>(j, "error_cyclopean"),
                        required<double>(j, "head_yaw")};
}

// ------------------------------------------------------------ ExamReport

inline json to_json(const ExamReport& r) {
    using detail::num;
    using detail::opt;
    json lat = json::array();
    for (double x : r.latencies_s) lat.push_back(num(x));
    json flags = json::object();
    for (const auto& [k, f] : r.flags) flags[k] = to_string(f);
    return json{{"test", to_string(r.test_kind)},
                {"duration_s", num(r.duration_s)},
                {"latencies_s", lat},
                {"trial_count", r.trial_count},
                {"miss_count", r.miss_count},
                {"latency_mean_s", opt(r.latency_mean_s)},
                {"latency_sd_s", opt(r.latency_sd_s)},
                {"precision_rms_deg", opt(r.precision_rms_deg)},
                {"precision_left_rms_deg", opt(r.precision_left_rms_deg)},
                {"precision_right_rms_deg", opt(r.precision_right_rms_deg)},
                {"precision_mean_deg", opt(r.precision_mean_deg)},
                {"precision_max_deg", opt(r.precision_max_deg)},
                {"pursuit_gain_est", opt(r.pursuit_gain_est)},
                {"vor_gain_est", opt(r.vor_gain_est)},
                {"vor_cycles", r.vor_cycles ? json(*r.vor_cycles) : json(nullptr)},
                {"vor_freq_hz", opt(r.vor_freq_hz)},
                {"head_speed_mean_dps", opt(r.head_speed_mean_dps)},
                {"head_speed_peak_dps", opt(r.head_speed_peak_dps)},
                {"flags", flags},
                {"overall", to_string(r.overall)}};
}

inline ExamReport exam_report_from_json(const json& j) {
    using detail::get_opt;
    ExamReport r;
    r.test_kind = parse_test_kind(detail::required<std::string>(j, "test"));
    r.duration_s = detail::get_or(j, "duration_s", 0.0);
    if (j.contains("latencies_s"))
        for (const auto& x : j.at("latencies_s")) r.latencies_s.push_back(x.get<double>());
    r.trial_count = detail::get_or(j, "trial_count", 0);
    r.miss_count = detail::get_or(j, "miss_count", 0);
    r.latency_mean_s = get_opt(j, "latency_mean_s");
    r.latency_sd_s = get_opt(j, "latency_sd_s");
    r.precision_rms_deg = get_opt(j, "precision_rms_deg");
    r.precision_left_rms_deg = get_opt(j, "precision_left_rms_deg");
    r.precision_right_rms_deg = get_opt(j, "precision_right_rms_deg");
    r.precision_mean_deg = get_opt(j, "precision_mean_deg");
    r.precision_max_deg = get_opt(j, "precision_max_deg");
    r.pursuit_gain_est = get_opt(j, "pursuit_gain_est");
    r.vor_gain_est = get_opt(j, "vor_gain_est");
    if (j.contains("vor_cycles") && !j.at("vor_cycles").is_null()) r.vor_cycles = j.at("vor_cycles").get<int>();
    r.vor_freq_hz = get_opt(j, "vor_freq_hz");
    r.head_speed_mean_dps = get_opt(j, "head_speed_mean_dps");
    r.head_speed_peak_dps = get_opt(j, "head_speed_peak_dps");
    if (j.contains("flags"))
        for (const auto& [k, v] : j.at("flags").items()) r.flags[k] = parse_flag(v.get<std::string>());
    r.overall = parse_flag(detail::get_or<std::string>(j, "overall", "UNDETERMINED"));
    return r;
}

// ----------------------------------------------------------- samples CSV

inline constexpr const char* kSamplesCsvHeader =
    "t,left_ox,left_oy,left_oz,left_dx,left_dy,left_dz,right_ox,right_oy,right_oz,right_dx,right_dy,right_dz,"
    "pupil_l,pupil_r,open_l,open_r,head_yaw";

inline void write_samples_csv(std::ostream& out, const std::vector<GazeSample>& samples) {
    out << kSamplesCsvHeader << '\n';
    for (const auto& s : samples) {
        const double v[] = {s.t,
                            s.left.origin.x,
                            s.left.origin.y,
                            s.left.origin.z,
                            s.left.dir.x(),
                            s.left.dir.y(),
                            s.left.dir.z(),
                            s.right.origin.x,
                            s.right.origin.y,
                            s.right.origin.z,
                            s.right.dir.x(),
                            s.right.dir.y(),
                            s.right.dir.z(),
                            s.pupil_diameter_left,
                            s.pupil_diameter_right,
                            s.eye_openness_left,
                            s.eye_openness_right,
                            s.head_yaw};
        for (std::size_t i = 0; i < std::size(v); ++i) out << (i ? "," : "") << format_sig9(v[i]);
        out << '\n';
    }
}

/// Parses an externally produced or exported samples file. The header must
/// match exactly; directions already unit length to 1e-8 are
/// kept verbatim, others are normalised.
inline std::vector<GazeSample> read_samples_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("samples CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kSamplesCsvHeader) throw ValidationError("samples CSV header mismatch");
    std::vector<GazeSample> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double v[18];
        std::size_t n = 0;
        const char* p = line.c_str();
        while (n < 18) {
            char* end = nullptr;
            v[n] = std::strtod(p, &end);
            if (end == p) break;
            ++n;
            p = end;
            if (*p == ',') ++p;
            else break;
        }
        if (n != 18 || *p != '\0')
            throw ValidationError("samples CSV line " + std::to_string(lineno) + ": expected 18 numeric fields");
        for (double x : v)
            if (!std::isfinite(x)) throw ValidationError("samples CSV line " + std::to_string(lineno) + ": non-finite");
        GazeSample s;
        s.t = v[0];
        try {
            s.left = GazeRay{{v[1], v[2], v[3]}, Direction3::from_components({v[4], v[5], v[6]})};
            s.right = GazeRay{{v[7], v[8], v[9]}, Direction3::from_components({v[10], v[11], v[12]})};
        } catch (const GeometryError&) {
            throw ValidationError("samples CSV line " + std::to_string(lineno) + ": zero gaze direction");
        }
        s.pupil_diameter_left = v[13];
        s.pupil_diameter_right = v[14];
        s.eye_openness_left = v[15];
        s.eye_openness_right = v[16];
        s.head_yaw = v[17];
        if (s.eye_openness_left < 0 || s.eye_openness_left > 1 || s.eye_openness_right < 0 || s.eye_openness_right > 1)
            throw ValidationError("samples CSV line " + std::to_string(lineno) + ": openness outside [0,1]");
        if (s.pupil_diameter_left < 0 || s.pupil_diameter_right < 0)
            throw ValidationError("samples CSV line " + std::to_string(lineno) + ": negative pupil diameter");
        out.push_back(s);
    }
    return out;
}

inline std::string samples_csv_string(const std::vector<GazeSample>& samples) {
    std::ostringstream os;
    write_samples_csv(os, samples);
    return os.str();
}

// ---------------------------------------------------------- learning path

inline json to_json(const Dag& g) {
    json nodes = json::array();
    for (const auto& [id, title] : g.nodes()) nodes.push_back(json{{"id", id}, {"title", title}});
    json edges = json::array();
    for (const auto& [from, to] : g.edges()) edges.push_back(json::array({from, to}));
    return json{{"nodes", nodes}, {"edges", edges}};
}

inline Dag dag_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("graph must be a JSON object");
    Dag g;
    for (const auto& n : j.value("nodes", json::array()))
        g = g.with_node(detail::required<std::string>(n, "id"), detail::get_or<std::string>(n, "title", ""));
    for (const auto& e : j.value("edges", json::array())) {
        if (!e.is_array() || e.size() != 2) throw ValidationError("edges must be [from, to] pairs");
        g = add_dependency(g, e[0].get<std::string>(), e[1].get<std::string>());
    }
    return g;
}

/// {"nodes": [{"id", "title", "components": {"nodes", "edges"}}], "edges": [[from, to]]}
inline json to_json(const TopicGraph& g) {
    json out = to_json(g.topics);
    for (auto& n : out["nodes"]) {
        const auto id = n["id"].get<std::string>();
        if (const Dag* c = g.components_of(id)) n["components"] = to_json(*c);
    }
    return out;
}

inline TopicGraph topic_graph_from_json(const json& j) {
    TopicGraph g;
    g.topics = dag_from_json(j);
    for (const auto& n : j.value("nodes", json::array())) {
        if (!n.contains("components")) continue;
        const auto& c = n.at("components");
        for (const auto& cn : c.value("nodes", json::array()))
            if (cn.contains("components")) throw ValidationError("components cannot nest further");
        g.components[n.at("id").get<std::string>()] = dag_from_json(c);
    }
    validate(g);
    return g;
}

inline json to_json(const StudentProgress& p) {
    json comps = json::object();
    for (const auto& [topic, done] : p.components)
        if (!done.empty()) comps[topic] = done;
    return json{{"student_id", p.student_id}, {"completed", p.completed}, {"components", comps}};
}

inline StudentProgress student_progress_from_json(const json& j) {
    StudentProgress p;
    p.student_id = detail::required<std::string>(j, "student_id");
    p.completed = detail::get_or(j, "completed", std::set<std::string>{});
    if (j.contains("components"))
        for (const auto& [topic, done] : j.at("components").items()) p.components[topic] = done.get<std::set<std::string>>();
    return p;
}

}  // namespace oculab
