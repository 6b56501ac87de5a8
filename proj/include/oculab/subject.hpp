#pragma once

// Closed-loop synthetic subject. It watches the protocol's displayed
// stimulus and produces binocular gaze samples:
//
//   saccades  reaction latency (Gaussian, truncated at 0) then constant-speed
//             flight to the new target
//   pursuit   gain * target(t - lag) + offset, with catch-up saccades once
//             the position error exceeds a threshold
//   vor       head = amp sin(2 pi f t), eye-in-head = -vor_gain * head
//
// Both eyes verge on a point at the target distance along the world gaze
// yaw; optional i.i.d. Gaussian yaw noise is added per eye per sample.
// None of the parameter defaults are clinical norms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oculab/error.hpp"
#include "oculab/geometry.hpp"
#include "oculab/protocol.hpp"
#include "oculab/random.hpp"

namespace oculab {

struct SubjectParams {
    double saccade_latency_mean_s = 0.20;
    double saccade_latency_sd_s = 0.03;
    double saccade_speed_dps = 400.0;
    double pursuit_gain = 0.95;
    double pursuit_lag_s = 0.10;
    double catchup_threshold_deg = 3.0;
    bool catchup_enabled = true;
    double vor_gain = 0.95;
    double head_amp_deg = 20.0;
    double head_freq_hz = 1.0;
    double noise_sd_deg = 0.1;
    double ipd_m = 0.064;
    double pupil_diameter_mm = 3.5;
    double eye_openness = 1.0;
    std::uint64_t seed = 7;

    friend bool operator==(const SubjectParams&, const SubjectParams&) = default;
};

enum class SubjectPreset { Normal, Abnormal, Perfect };

/// NORMAL and ABNORMAL are calibration points for the default screening
/// thresholds. PERFECT has zero latency, unit gains, no lag and no noise.
inline SubjectParams preset_params(SubjectPreset p) {
    SubjectParams s;
    switch (p) {
        case SubjectPreset::Normal: break;
        case SubjectPreset::Abnormal:
            s.saccade_latency_mean_s = 0.35;
            s.saccade_latency_sd_s = 0.05;
            s.pursuit_gain = 0.70;
            s.pursuit_lag_s = 0.20;
            s.vor_gain = 0.60;
            break;
        case SubjectPreset::Perfect:
            s.saccade_latency_mean_s = 0.0;
            s.saccade_latency_sd_s = 0.0;
            s.pursuit_gain = 1.0;
            s.pursuit_lag_s = 0.0;
            s.vor_gain = 1.0;
            s.noise_sd_deg = 0.0;
            break;
    }
    return s;
}

inline SubjectPreset parse_preset(std::string_view s) {
    if (s == "normal" || s == "NORMAL") return SubjectPreset::Normal;
    if (s == "abnormal" || s == "ABNORMAL") return SubjectPreset::Abnormal;
    if (s == "perfect" || s == "PERFECT") return SubjectPreset::Perfect;
    throw ValidationError("unknown subject preset '" + std::string(s) + "' (expected normal, abnormal or perfect)");
}

inline std::vector<std::string> invalid_fields(const SubjectParams& p) {
    std::vector<std::string> bad;
    auto check = [&](bool ok, const char* name) {
        if (!ok) bad.emplace_back(name);
    };
    auto finite = [](double v) { return std::isfinite(v); };
    check(finite(p.saccade_latency_mean_s) && p.saccade_latency_mean_s >= 0.0, "saccade_latency_mean_s");
    check(finite(p.saccade_latency_sd_s) && p.saccade_latency_sd_s >= 0.0, "saccade_latency_sd_s");
    check(finite(p.saccade_speed_dps) && p.saccade_speed_dps > 0.0, "saccade_speed_dps");
    check(p.pursuit_gain > 0.0 && p.pursuit_gain <= 1.0, "pursuit_gain");
    check(finite(p.pursuit_lag_s) && p.pursuit_lag_s >= 0.0, "pursuit_lag_s");
    check(p.catchup_threshold_deg > 0.0, "catchup_threshold_deg");
    check(p.vor_gain >= 0.0 && p.vor_gain <= 1.5, "vor_gain");
    check(finite(p.head_amp_deg) && p.head_amp_deg > 0.0, "head_amp_deg");
    check(finite(p.head_freq_hz) && p.head_freq_hz > 0.0, "head_freq_hz");
    check(finite(p.noise_sd_deg) && p.noise_sd_deg >= 0.0, "noise_sd_deg");
    check(finite(p.ipd_m) && p.ipd_m >= 0.0, "ipd_m");
    check(finite(p.pupil_diameter_mm) && p.pupil_diameter_mm >= 0.0, "pupil_diameter_mm");
    check(p.eye_openness >= 0.0 && p.eye_openness <= 1.0, "eye_openness");
    return bad;
}

inline void validate(const SubjectParams& p) {
    if (auto bad = invalid_fields(p); !bad.empty()) throw ConfigError(std::move(bad));
}

/// Constant-speed flight from `from` toward `to`, clamped at `to`.
inline double saccade_yaw(double from, double to, double dt_since_onset, double speed_dps) {
    if (dt_since_onset <= 0.0) return from;
    const double travel = speed_dps * dt_since_onset;
    const double span = to - from;
    if (std::abs(span) <= travel) return to;
    return from + std::copysign(travel, span);
}

/// Smooth component of pursuit: scaled, delayed target plus the offset left
/// behind by the last catch-up saccade.
inline double smooth_pursuit_yaw(double delayed_target_yaw, double gain, double offset = 0.0) {
    return gain * delayed_target_yaw + offset;
}

inline double head_yaw_at(double t, double amp_deg, double freq_hz) {
    return amp_deg * std::sin(2.0 * std::numbers::pi * freq_hz * t);
}

inline double vor_eye_in_head(double head_yaw, double vor_gain) { return -vor_gain * head_yaw; }

/// Pursuit with catch-up saccades. A catch-up engages when |error| exceeds
/// the threshold and flies toward the moving target until |error| < 0.5 deg.
class PursuitTracker {
public:
    static constexpr double kCatchupExitDeg = 0.5;

    PursuitTracker(double gain, double threshold_deg, bool catchup_enabled, double speed_dps)
        : gain_(gain), threshold_(threshold_deg), catchup_enabled_(catchup_enabled), speed_(speed_dps) {}

    /// Advances by `dt` to a sample where the target is at `target_now` and
    /// the delayed target the smooth system responds to is `target_delayed`.
    double step(double dt, double target_now, double target_delayed) {
        if (in_catchup_) {
            yaw_ = saccade_yaw(yaw_, target_now, dt, speed_);
            if (std::abs(target_now - yaw_) < kCatchupExitDeg) {
                in_catchup_ = false;
                offset_ = yaw_ - gain_ * target_delayed;
            }
        } else {
            yaw_ = smooth_pursuit_yaw(target_delayed, gain_, offset_);
            if (catchup_enabled_ && std::abs(target_now - yaw_) > threshold_) in_catchup_ = true;
        }
        return yaw_;
    }

    double yaw() const noexcept { return yaw_; }
    bool in_catchup() const noexcept { return in_catchup_; }

private:
    double gain_;
    double threshold_;
    bool catchup_enabled_;
    double speed_;
    double yaw_ = 0.0;
    double offset_ = 0.0;
    bool in_catchup_ = false;
};

/// Binocular sample for a head at `head_yaw` whose eyes verge on the point
/// at `distance` along `gaze_yaw`, with per-eye yaw noise.
inline GazeSample make_binocular_sample(double t, double head_yaw, double gaze_yaw, double distance,
                                        const SubjectParams& p, double noise_left = 0.0, double noise_right = 0.0) {
    const Vec3 fixation = point_on_arc(gaze_yaw, distance);
    const Vec3 left_origin = rotate_yaw({-0.5 * p.ipd_m, 0.0, 0.0}, head_yaw);
    const Vec3 right_origin = rotate_yaw({0.5 * p.ipd_m, 0.0, 0.0}, head_yaw);
    GazeSample s;
    s.t = t;
    s.left = GazeRay{left_origin, Direction3::normalized(rotate_yaw(fixation - left_origin, noise_left))};
    s.right = GazeRay{right_origin, Direction3::normalized(rotate_yaw(fixation - right_origin, noise_right))};
    s.pupil_diameter_left = p.pupil_diameter_mm;
    s.pupil_diameter_right = p.pupil_diameter_mm;
    s.eye_openness_left = p.eye_openness;
    s.eye_openness_right = p.eye_openness;
    s.head_yaw = head_yaw;
    return s;
}

class Subject {
public:
    Subject(const SubjectParams& params, const ExamConfig& cfg)
        : p_(params), cfg_(cfg), rng_(params.seed),
          pursuit_(params.pursuit_gain, params.catchup_threshold_deg, params.catchup_enabled,
                   params.saccade_speed_dps) {
        validate(p_);
    }

    /// Sample at time `t`, responding to the stimulus as displayed after the
    /// previous sample was processed.
    GazeSample sample(double t, const StimulusView& view) {
        double head = 0.0;
        double gaze = 0.0;
        switch (view.kind) {
            case TestKind::SaccadeLatency: gaze = saccade_gaze(t, view); break;
            case TestKind::SmoothPursuit: gaze = pursuit_gaze(t); break;
            case TestKind::Vor:
                head = head_yaw_at(t, p_.head_amp_deg, p_.head_freq_hz);
                gaze = head + vor_eye_in_head(head, p_.vor_gain);
                break;
        }
        world_gaze_yaw_ = gaze;
        double nl = 0.0;
        double nr = 0.0;
        if (p_.noise_sd_deg > 0.0) {
            nl = rng_.normal(0.0, p_.noise_sd_deg);
            nr = rng_.normal(0.0, p_.noise_sd_deg);
        }
        last_t_ = t;
        return make_binocular_sample(t, head, gaze, cfg_.target_distance_m, p_, nl, nr);
    }

    /// Noise-free world-frame gaze yaw of the most recent sample.
    double world_gaze_yaw() const noexcept { return world_gaze_yaw_; }

private:
    struct Flight {
        double from;
        double to;
        double start;
    };

    double saccade_gaze(double t, const StimulusView& view) {
        if (view.since_t != goal_since_ && view.target_yaw != goal_yaw_) {
            const double latency = rng_.truncated_normal_nonneg(p_.saccade_latency_mean_s, p_.saccade_latency_sd_s);
            flight_ = Flight{yaw_, view.target_yaw, view.since_t + latency};
            goal_yaw_ = view.target_yaw;
        }
        goal_since_ = view.since_t;
        if (flight_ && t >= flight_->start) {
            yaw_ = saccade_yaw(flight_->from, flight_->to, t - flight_->start, p_.saccade_speed_dps);
            if (yaw_ == flight_->to) flight_.reset();
        }
        return yaw_;
    }

    double pursuit_gaze(double t) {
        const double dt = last_t_ ? t - *last_t_ : 0.0;
        const double now = pursuit_target_yaw(t, cfg_);
        const double delayed = pursuit_target_yaw(std::max(0.0, t - p_.pursuit_lag_s), cfg_);
        return pursuit_.step(dt, now, delayed);
    }

    SubjectParams p_;
    ExamConfig cfg_;
    Rng rng_;
    PursuitTracker pursuit_;
    std::optional<double> last_t_;
    double world_gaze_yaw_ = 0.0;
    double yaw_ = 0.0;
    double goal_yaw_ = 0.0;
    double goal_since_ = 0.0;
    std::optional<Flight> flight_;
};

using StepCallback = std::function<void(const ExamState&, const StepOutput&)>;

/// Drives a session with a synthetic subject at the configured sample rate
/// on a virtual clock (sample k at t = k / rate) until SESSION_END.
inline RawTestOutput run_closed_loop(const ExamConfig& cfg, const SubjectParams& subject,
                                     const StepCallback& on_step = {}) {
    ExamState st = new_session(cfg);
    Subject subj(subject, cfg);
    for (std::uint64_t k = 0; !st.finished; ++k) {
        const double t = static_cast<double>(k) / cfg.sample_rate_hz;
        const GazeSample s = subj.sample(t, stimulus_view(st));
        const StepOutput out = step(st, s);
        if (on_step) on_step(st, out);
    }
    return finalize(std::move(st));
}

}  // namespace oculab
