#pragma once

// Measurements computed from a finished session: saccade latency, focus
// precision, pursuit gain, head-rotation frequency and speed, I-VT saccade
// detection, and normal/abnormal screening against thresholds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oculab/error.hpp"
#include "oculab/protocol.hpp"

namespace oculab {

enum class Flag { Normal, Abnormal, Undetermined };

inline std::string_view to_string(Flag f) {
    switch (f) {
        case Flag::Normal: return "NORMAL";
        case Flag::Abnormal: return "ABNORMAL";
        case Flag::Undetermined: return "UNDETERMINED";
    }
    return "?";
}

inline Flag parse_flag(std::string_view s) {
    if (s == "NORMAL") return Flag::Normal;
    if (s == "ABNORMAL") return Flag::Abnormal;
    if (s == "UNDETERMINED") return Flag::Undetermined;
    throw ValidationError("unknown flag '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- latency

struct LatencyStats {
    std::vector<double> latencies_s;
    std::optional<double> mean_s;
    std::optional<double> sd_s;  // sample standard deviation, needs >= 2 hits
    int miss_count = 0;
};

inline LatencyStats latency_stats(const std::vector<TrialEvent>& events) {
    LatencyStats out;
    for (const auto& e : events) {
        if (e.kind == EventKind::StimulusHit && e.latency_s) out.latencies_s.push_back(*e.latency_s);
        if (e.kind == EventKind::TrialTimeout) ++out.miss_count;
    }
    const auto n = out.latencies_s.size();
    if (n == 0) return out;
    const double mean = std::accumulate(out.latencies_s.begin(), out.latencies_s.end(), 0.0) / static_cast<double>(n);
    out.mean_s = mean;
    if (n >= 2) {
        double ss = 0.0;
        for (double x : out.latencies_s) ss += (x - mean) * (x - mean);
        out.sd_s = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return out;
}

// -------------------------------------------------------------- precision

struct PrecisionSeries {
    std::vector<double> t;
    std::vector<double> left;
    std::vector<double> right;
    std::vector<double> cyclopean;
    double rms_left = 0.0;
    double rms_right = 0.0;
    double rms_cyclopean = 0.0;
    double mean_cyclopean = 0.0;
    double max_cyclopean = 0.0;
};

inline double rms(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += x * x;
    return std::sqrt(ss / static_cast<double>(v.size()));
}

inline PrecisionSeries precision_series(const std::vector<SampleRecord>& records) {
    if (records.empty()) throw EmptyInputError("precision needs at least one record");
    PrecisionSeries p;
    p.t.reserve(records.size());
    p.left.reserve(records.size());
    p.right.reserve(records.size());
    p.cyclopean.reserve(records.size());
    for (const auto& r : records) {
        p.t.push_back(r.t);
        p.left.push_back(r.error_left);
        p.right.push_back(r.error_right);
        p.cyclopean.push_back(r.error_cyclopean);
    }
    p.rms_left = rms(p.left);
    p.rms_right = rms(p.right);
    p.rms_cyclopean = rms(p.cyclopean);
    p.mean_cyclopean = std::accumulate(p.cyclopean.begin(), p.cyclopean.end(), 0.0) /
                       static_cast<double>(p.cyclopean.size());
    p.max_cyclopean = *std::max_element(p.cyclopean.begin(), p.cyclopean.end());
    return p;
}

// --------------------------------------------------------------- velocity

/// Three-point running median; end samples pass through.
inline std::vector<double> median3(const std::vector<double>& y) {
    std::vector<double> out = y;
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        const double a = y[i - 1], b = y[i], c = y[i + 1];
        out[i] = std::max(std::min(a, b), std::min(std::max(a, b), c));
    }
    return out;
}

/// Central differences against explicit timestamps, one-sided at the ends.
inline std::vector<double> central_difference(const std::vector<double>& t, const std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<double> v(n, 0.0);
    if (n < 2) return v;
    v.front() = (y[1] - y[0]) / (t[1] - t[0]);
    v.back() = (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) v[i] = (y[i + 1] - y[i - 1]) / (t[i + 1] - t[i - 1]);
    return v;
}

inline std::vector<double> uniform_times(std::size_t n, double sample_rate_hz, double t0 = 0.0) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = t0 + static_cast<double>(i) / sample_rate_hz;
    return t;
}

/// Angular velocity (deg/s): 3-sample median prefilter, then central differences.
inline std::vector<double> angular_velocity(const std::vector<double>& t, const std::vector<double>& yaw) {
    return central_difference(t, median3(yaw));
}

inline std::vector<double> moving_average(const std::vector<double>& y, std::size_t half_width) {
    const std::size_t n = y.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half_width ? i - half_width : 0;
        const std::size_t hi = std::min(n - 1, i + half_width);
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) s += y[j];
        out[i] = s / static_cast<double>(hi - lo + 1);
    }
    return out;
}

// --------------------------------------------------------------- saccades

struct SaccadeInterval {
    std::size_t first = 0;  // sample indices, inclusive
    std::size_t last = 0;
    double start_t = 0.0;
    double end_t = 0.0;
    friend bool operator==(const SaccadeInterval&, const SaccadeInterval&) = default;
};

/// I-VT: maximal runs of samples with |velocity| above the threshold; runs
/// separated by fewer than two sub-threshold samples are merged.
inline std::vector<SaccadeInterval> detect_saccades(const std::vector<double>& yaw, double sample_rate_hz,
                                                    double velocity_threshold_dps, double t0 = 0.0) {
    if (yaw.size() < 3) throw EmptyInputError("saccade detection needs at least 3 samples");
    const auto t = uniform_times(yaw.size(), sample_rate_hz, t0);
    const auto v = angular_velocity(t, yaw);
    std::vector<SaccadeInterval> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(std::abs(v[i]) > velocity_threshold_dps)) continue;
        if (!out.empty() && i - out.back().last <= 2) {
            out.back().last = i;
        } else {
            out.push_back({i, i, 0.0, 0.0});
        }
    }
    for (auto& s : out) {
        s.start_t = t[s.first];
        s.end_t = t[s.last];
    }
    return out;
}

// ---------------------------------------------------------------- pursuit

inline constexpr double kDefaultSaccadeThresholdDps = 30.0;

namespace detail {

/// Least-squares slope of y on x (with intercept); empty when x has no spread.
inline std::optional<double> ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 3) return std::nullopt;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx / static_cast<double>(n) < 1e-9) return std::nullopt;
    return sxy / sxx;
}

}  // namespace detail

/// Slope of smoothed gaze velocity against target velocity over the
/// non-saccadic samples. Saccades are found by I-VT on the retinal error
/// (gaze - target), so fast pursuit is not mistaken for a saccade.
/// Empty when the target does not move or every sample is saccadic.
inline std::optional<double> pursuit_gain_est(const std::vector<SampleRecord>& records, double sample_rate_hz,
                                              double saccade_threshold_dps = kDefaultSaccadeThresholdDps) {
    if (records.size() < 3 || records.back().t - records.front().t < 2.0)
        throw EmptyInputError("pursuit gain needs at least 2 s of records");
    const std::size_t n = records.size();
    std::vector<double> t(n), gaze(n), target(n), err(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = records[i].t;
        gaze[i] = records[i].gaze_yaw;
        target[i] = records[i].target_yaw;
        err[i] = gaze[i] - target[i];
    }
    constexpr std::size_t kSmooth = 2;  // 5-sample window
    constexpr std::size_t kMargin = kSmooth + 1;
    std::vector<bool> keep(n, true);
    for (std::size_t i = 0; i < std::min(n, kMargin); ++i) keep[i] = keep[n - 1 - i] = false;
    for (const auto& s : detect_saccades(err, sample_rate_hz, saccade_threshold_dps, t.front())) {
        const std::size_t lo = s.first >= kMargin ? s.first - kMargin : 0;
        const std::size_t hi = std::min(n - 1, s.last + kMargin);
        for (std::size_t i = lo; i <= hi; ++i) keep[i] = false;
    }
    const auto gv = moving_average(angular_velocity(t, gaze), kSmooth);
    const auto tv = moving_average(central_difference(t, target), kSmooth);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        x.push_back(tv[i]);
        y.push_back(gv[i]);
    }
    return detail::ls_slope(x, y);
}

/// 1 - slope of world gaze yaw on head yaw: 1 for perfect stabilisation.
inline std::optional<double> vor_gain_est(const std::vector<SampleRecord>& records) {
    std::vector<double> head, gaze;
    head.reserve(records.size());
    gaze.reserve(records.size());
    for (const auto& r : records) {
        head.push_back(r.head_yaw);
        gaze.push_back(r.gaze_yaw);
    }
    const auto slope = detail::ls_slope(head, gaze);
    if (!slope) return std::nullopt;
    return 1.0 - *slope;
}

// --------------------------------------------------------- head rotation

struct CycleCount {
    int cycles = 0;
    double hz = 0.0;
};

/// Counts alternating excursions beyond +/-hysteresis; each left/right pair
/// is one rotation cycle. Frequency is cycles over the series time span.
inline CycleCount vor_frequency(const std::vector<double>& t, const std::vector<double>& head_yaw,
                                double hysteresis_deg) {
    if (!(hysteresis_deg > 0.0)) throw ValidationError("hysteresis must be positive");
    if (t.size() < 2 || !(t.back() - t.front() > 0.0)) throw EmptyInputError("head series spans zero time");
    int excursions = 0;
    int side = 0;
    for (double y : head_yaw) {
        const int now = y > hysteresis_deg ? 1 : (y < -hysteresis_deg ? -1 : 0);
        if (now != 0 && now != side) {
            ++excursions;
            side = now;
        }
    }
    CycleCount c;
    c.cycles = excursions / 2;
    c.hz = c.cycles / (t.back() - t.front());
    return c;
}

struct HeadSpeed {
    double mean_dps = 0.0;
    double peak_dps = 0.0;
};

inline HeadSpeed head_speed(const std::vector<double>& t, const std::vector<double>& head_yaw) {
    if (t.size() < 2 || !(t.back() - t.front() > 0.0)) throw EmptyInputError("head series spans zero time");
    const auto v = angular_velocity(t, head_yaw);
    HeadSpeed h;
    for (double x : v) {
        h.mean_dps += std::abs(x);
        h.peak_dps = std::max(h.peak_dps, std::abs(x));
    }
    h.mean_dps /= static_cast<double>(v.size());
    return h;
}

// ----------------------------------------------------------------- report

struct ExamReport {
    TestKind test_kind = TestKind::SmoothPursuit;
    double duration_s = 0.0;
    std::vector<double> latencies_s;
    int trial_count = 0;
    int miss_count = 0;
    std::optional<double> latency_mean_s;
    std::optional<double> latency_sd_s;
    std::optional<double> precision_rms_deg;
    std::optional<double> precision_left_rms_deg;
    std::optional<double> precision_right_rms_deg;
    std::optional<double> precision_mean_deg;
    std::optional<double> precision_max_deg;
    std::optional<double> pursuit_gain_est;
    std::optional<double> vor_gain_est;
    std::optional<int> vor_cycles;
    std::optional<double> vor_freq_hz;
    std::optional<double> head_speed_mean_dps;
    std::optional<double> head_speed_peak_dps;
    std::map<std::string, Flag> flags;
    Flag overall = Flag::Undetermined;

    friend bool operator==(const ExamReport&, const ExamReport&) = default;
};

/// Scalar metrics addressable by name (trend queries, CLI, HTTP).
inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {
        "latency_mean_s",      "latency_sd_s",         "miss_count",          "trial_count",
        "precision_rms_deg",   "precision_left_rms_deg", "precision_right_rms_deg", "precision_mean_deg",
        "precision_max_deg",   "pursuit_gain_est",     "vor_gain_est",        "vor_cycles",
        "vor_freq_hz",         "head_speed_mean_dps",  "head_speed_peak_dps"};
    return names;
}

inline bool is_metric_name(std::string_view name) {
    const auto& n = metric_names();
    return std::find(n.begin(), n.end(), name) != n.end();
}

/// Value of a named metric, empty when this report lacks it.
inline std::optional<double> metric_value(const ExamReport& r, std::string_view name) {
    auto i = [](std::optional<int> v) -> std::optional<double> {
        if (!v) return std::nullopt;
        return static_cast<double>(*v);
    };
    const bool saccade = r.test_kind == TestKind::SaccadeLatency;
    if (name == "latency_mean_s") return r.latency_mean_s;
    if (name == "latency_sd_s") return r.latency_sd_s;
    if (name == "miss_count") return saccade ? std::optional<double>(r.miss_count) : std::nullopt;
    if (name == "trial_count") return saccade ? std::optional<double>(r.trial_count) : std::nullopt;
    if (name == "precision_rms_deg") return r.precision_rms_deg;
    if (name == "precision_left_rms_deg") return r.precision_left_rms_deg;
    if (name == "precision_right_rms_deg") return r.precision_right_rms_deg;
    if (name == "precision_mean_deg") return r.precision_mean_deg;
    if (name == "precision_max_deg") return r.precision_max_deg;
    if (name == "pursuit_gain_est") return r.pursuit_gain_est;
    if (name == "vor_gain_est") return r.vor_gain_est;
    if (name == "vor_cycles") return i(r.vor_cycles);
    if (name == "vor_freq_hz") return r.vor_freq_hz;
    if (name == "head_speed_mean_dps") return r.head_speed_mean_dps;
    if (name == "head_speed_peak_dps") return r.head_speed_peak_dps;
    std::string valid;
    for (const auto& n : metric_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ValidationError("unknown metric '" + std::string(name) + "'; valid metrics: " + valid);
}

struct MetricsOptions {
    double saccade_velocity_threshold_dps = kDefaultSaccadeThresholdDps;
    /// Cycle-count hysteresis as a fraction of the configured head amplitude.
    double hysteresis_fraction = 0.25;
    friend bool operator==(const MetricsOptions&, const MetricsOptions&) = default;
};

/// Computes every metric the test kind supports. Flags are left empty;
/// see classify().
inline ExamReport compute_report(const RawTestOutput& raw, const MetricsOptions& opt = {}) {
    ExamReport r;
    r.test_kind = raw.config.test_kind;
    if (!raw.records.empty()) r.duration_s = raw.records.back().t - raw.records.front().t;

    switch (r.test_kind) {
        case TestKind::SaccadeLatency: {
            const auto s = latency_stats(raw.events);
            r.latencies_s = s.latencies_s;
            r.latency_mean_s = s.mean_s;
            r.latency_sd_s = s.sd_s;
            r.miss_count = s.miss_count;
            r.trial_count = static_cast<int>(s.latencies_s.size()) + s.miss_count;
            break;
        }
        case TestKind::SmoothPursuit:
        case TestKind::Vor: {
            if (raw.records.empty()) break;
            const auto p = precision_series(raw.records);
            r.precision_rms_deg = p.rms_cyclopean;
            r.precision_left_rms_deg = p.rms_left;
            r.precision_right_rms_deg = p.rms_right;
            r.precision_mean_deg = p.mean_cyclopean;
            r.precision_max_deg = p.max_cyclopean;
            if (r.test_kind == TestKind::SmoothPursuit) {
                if (r.duration_s >= 2.0)
                    r.pursuit_gain_est = pursuit_gain_est(raw.records, raw.config.sample_rate_hz,
                                                          opt.saccade_velocity_threshold_dps);
                break;
            }
            r.vor_gain_est = vor_gain_est(raw.records);
            if (r.duration_s > 0.0 && raw.records.size() >= 2) {
                std::vector<double> t, head;
                for (const auto& rec : raw.records) {
                    t.push_back(rec.t);
                    head.push_back(rec.head_yaw);
                }
                const auto c = vor_frequency(t, head, opt.hysteresis_fraction * raw.config.head_amp_deg);
                r.vor_cycles = c.cycles;
                r.vor_freq_hz = c.hz;
                const auto hs = head_speed(t, head);
                r.head_speed_mean_dps = hs.mean_dps;
                r.head_speed_peak_dps = hs.peak_dps;
            }
            break;
        }
    }
    return r;
}

// --------------------------------------------------------- classification

/// Screening thresholds. These are calibration points for the synthetic
/// subject presets, not clinical norms.
struct Thresholds {
    std::optional<double> max_latency_s = 0.31;
    std::optional<double> max_precision_rms_deg = 3.5;
    std::optional<double> min_pursuit_gain = 0.79;
    std::optional<double> min_vor_gain_proxy = 0.78;
    std::optional<double> min_head_freq_hz = 0.3;
    std::optional<double> max_head_freq_hz = 3.0;
    friend bool operator==(const Thresholds&, const Thresholds&) = default;

    static Thresholds none() {
        Thresholds t;
        t.max_latency_s.reset();
        t.max_precision_rms_deg.reset();
        t.min_pursuit_gain.reset();
        t.min_vor_gain_proxy.reset();
        t.min_head_freq_hz.reset();
        t.max_head_freq_hz.reset();
        return t;
    }
};

inline std::vector<std::string> invalid_fields(const Thresholds& t) {
    std::vector<std::string> bad;
    auto check = [&](const std::optional<double>& v, const char* name) {
        if (v && !(*v > 0.0 && std::isfinite(*v))) bad.emplace_back(name);
    };
    check(t.max_latency_s, "max_latency_s");
    check(t.max_precision_rms_deg, "max_precision_rms_deg");
    check(t.min_pursuit_gain, "min_pursuit_gain");
    check(t.min_vor_gain_proxy, "min_vor_gain_proxy");
    check(t.min_head_freq_hz, "min_head_freq_hz");
    check(t.max_head_freq_hz, "max_head_freq_hz");
    if (t.min_head_freq_hz && t.max_head_freq_hz && *t.min_head_freq_hz > *t.max_head_freq_hz)
        bad.emplace_back("min_head_freq_hz>max_head_freq_hz");
    return bad;
}

/// Flags each screened metric and derives the overall verdict: ABNORMAL if
/// any metric is abnormal, else UNDETERMINED if any is undetermined, else
/// NORMAL. A present metric without its threshold is a ConfigError.
inline ExamReport classify(ExamReport report, const Thresholds& th) {
    if (auto bad = invalid_fields(th); !bad.empty()) throw ConfigError(std::move(bad));
    std::vector<std::string> missing;
    auto need = [&](const std::optional<double>& value, const std::optional<double>& threshold, const char* name) {
        if (value && !threshold) missing.emplace_back(name);
    };
    auto at_most = [](const std::optional<double>& v, const std::optional<double>& limit) {
        if (!v) return Flag::Undetermined;
        return *v <= *limit ? Flag::Normal : Flag::Abnormal;
    };
    auto at_least = [](const std::optional<double>& v, const std::optional<double>& limit) {
        if (!v) return Flag::Undetermined;
        return *v >= *limit ? Flag::Normal : Flag::Abnormal;
    };

    report.flags.clear();
    switch (report.test_kind) {
        case TestKind::SaccadeLatency:
            need(report.latency_mean_s, th.max_latency_s, "max_latency_s");
            if (!missing.empty()) break;
            report.flags["latency_mean_s"] = at_most(report.latency_mean_s, th.max_latency_s);
            break;
        case TestKind::SmoothPursuit:
            need(report.precision_rms_deg, th.max_precision_rms_deg, "max_precision_rms_deg");
            need(report.pursuit_gain_est, th.min_pursuit_gain, "min_pursuit_gain");
            if (!missing.empty()) break;
            report.flags["precision_rms_deg"] = at_most(report.precision_rms_deg, th.max_precision_rms_deg);
            report.flags["pursuit_gain_est"] = at_least(report.pursuit_gain_est, th.min_pursuit_gain);
            break;
        case TestKind::Vor: {
            need(report.precision_rms_deg, th.max_precision_rms_deg, "max_precision_rms_deg");
            need(report.vor_gain_est, th.min_vor_gain_proxy, "min_vor_gain_proxy");
            need(report.vor_freq_hz, th.min_head_freq_hz, "min_head_freq_hz");
            need(report.vor_freq_hz, th.max_head_freq_hz, "max_head_freq_hz");
            if (!missing.empty()) break;
            const bool valid_trial = report.vor_freq_hz && *report.vor_freq_hz >= *th.min_head_freq_hz &&
                                     *report.vor_freq_hz <= *th.max_head_freq_hz;
            report.flags["vor_freq_hz"] = valid_trial ? Flag::Normal : Flag::Undetermined;
            report.flags["precision_rms_deg"] =
                valid_trial ? at_most(report.precision_rms_deg, th.max_precision_rms_deg) : Flag::Undetermined;
            report.flags["vor_gain_est"] =
                valid_trial ? at_least(report.vor_gain_est, th.min_vor_gain_proxy) : Flag::Undetermined;
            break;
        }
    }
    if (!missing.empty()) throw ConfigError(std::move(missing), "missing thresholds for present metrics");

    bool any_abnormal = false, any_undetermined = false;
    for (const auto& [_, f] : report.flags) {
        any_abnormal |= f == Flag::Abnormal;
        any_undetermined |= f == Flag::Undetermined;
    }
    report.overall = any_abnormal ? Flag::Abnormal : (any_undetermined ? Flag::Undetermined : Flag::Normal);
    return report;
}

}  // namespace oculab
