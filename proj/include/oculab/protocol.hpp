#pragma once

// The three examination tests as sample-driven state machines.
//
//   saccade  centre fixation -> random delay -> peripheral target left or
//            right -> hit or timeout -> back to centre
//   pursuit  target sweeps horizontally, one precision record per sample
//   vor      fixed target while the head rotates, one record per sample
//
// A session consumes GazeSamples in time order and accumulates TrialEvents
// and SampleRecords. Everything is a function of (config, seed, samples).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oculab/error.hpp"
#include "oculab/geometry.hpp"
#include "oculab/random.hpp"

namespace oculab {

enum class TestKind { SaccadeLatency, SmoothPursuit, Vor };

inline std::string_view to_string(TestKind k) {
    switch (k) {
        case TestKind::SaccadeLatency: return "saccade";
        case TestKind::SmoothPursuit: return "pursuit";
        case TestKind::Vor: return "vor";
    }
    return "?";
}

inline TestKind parse_test_kind(std::string_view s) {
    if (s == "saccade" || s == "SACCADE_LATENCY" || s == "1") return TestKind::SaccadeLatency;
    if (s == "pursuit" || s == "SMOOTH_PURSUIT" || s == "2") return TestKind::SmoothPursuit;
    if (s == "vor" || s == "VOR" || s == "3") return TestKind::Vor;
    throw ValidationError("unknown test kind '" + std::string(s) + "' (expected saccade, pursuit or vor)");
}

struct ExamConfig {
    TestKind test_kind = TestKind::SmoothPursuit;
    double duration_s = 20.0;
    double sample_rate_hz = 120.0;
    // saccade test: angle between the centre and each peripheral target
    double eccentricity_deg = 15.0;
    // pursuit test: peak-to-peak sweep and its period
    double travel_deg = 20.0;
    double period_s = 3.0;
    double isi_min_s = 2.0;
    double isi_max_s = 5.0;
    double trial_timeout_s = 5.0;
    double dwell_s = 0.0;
    bool require_hold = false;
    // vor test: instructed head amplitude, sets the cycle-count hysteresis
    double head_amp_deg = 20.0;
    double target_radius_m = 0.1;
    double target_distance_m = 2.0;
    std::uint64_t seed = 1;

    friend bool operator==(const ExamConfig&, const ExamConfig&) = default;

    static ExamConfig defaults_for(TestKind kind) {
        ExamConfig c;
        c.test_kind = kind;
        c.duration_s = kind == TestKind::SaccadeLatency ? 60.0 : 20.0;
        return c;
    }
};

inline bool sample_rate_supported(double hz) { return hz >= 60.0 && hz <= 120.0; }

/// Names of every field that violates its constraint; empty when valid.
inline std::vector<std::string> invalid_fields(const ExamConfig& c) {
    std::vector<std::string> bad;
    auto positive = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) bad.emplace_back(name);
    };
    positive(c.duration_s, "duration_s");
    if (!sample_rate_supported(c.sample_rate_hz)) bad.emplace_back("sample_rate_hz");
    positive(c.eccentricity_deg, "eccentricity_deg");
    positive(c.travel_deg, "travel_deg");
    positive(c.period_s, "period_s");
    positive(c.isi_min_s, "isi_min_s");
    positive(c.isi_max_s, "isi_max_s");
    if (c.isi_min_s > c.isi_max_s) bad.emplace_back("isi_min_s>isi_max_s");
    positive(c.trial_timeout_s, "trial_timeout_s");
    if (!(c.dwell_s >= 0.0) || !std::isfinite(c.dwell_s)) bad.emplace_back("dwell_s");
    positive(c.head_amp_deg, "head_amp_deg");
    positive(c.target_radius_m, "target_radius_m");
    positive(c.target_distance_m, "target_distance_m");
    if (c.target_radius_m >= c.target_distance_m) bad.emplace_back("target_radius_m>=target_distance_m");
    if (c.eccentricity_deg >= 180.0) bad.emplace_back("eccentricity_deg");
    return bad;
}

inline void validate(const ExamConfig& c) {
    if (auto bad = invalid_fields(c); !bad.empty()) throw ConfigError(std::move(bad));
}

enum class Phase { AwaitCenter, Delay, Stimulus, Running };
enum class Side { None, Left, Right };
enum class EventKind { CenterFixated, StimulusOn, StimulusHit, TrialTimeout, FixationBroken, SampleGap, SessionEnd };

inline std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::AwaitCenter: return "AWAIT_CENTER";
        case Phase::Delay: return "DELAY";
        case Phase::Stimulus: return "STIMULUS";
        case Phase::Running: return "RUNNING";
    }
    return "?";
}

inline std::string_view to_string(Side s) {
    switch (s) {
        case Side::None: return "NONE";
        case Side::Left: return "LEFT";
        case Side::Right: return "RIGHT";
    }
    return "?";
}

inline std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::CenterFixated: return "CENTER_FIXATED";
        case EventKind::StimulusOn: return "STIMULUS_ON";
        case EventKind::StimulusHit: return "STIMULUS_HIT";
        case EventKind::TrialTimeout: return "TRIAL_TIMEOUT";
        case EventKind::FixationBroken: return "FIXATION_BROKEN";
        case EventKind::SampleGap: return "SAMPLE_GAP";
        case EventKind::SessionEnd: return "SESSION_END";
    }
    return "?";
}

inline Side parse_side(std::string_view s) {
    if (s == "NONE") return Side::None;
    if (s == "LEFT") return Side::Left;
    if (s == "RIGHT") return Side::Right;
    throw ValidationError("unknown side '" + std::string(s) + "'");
}

inline EventKind parse_event_kind(std::string_view s) {
    for (auto k : {EventKind::CenterFixated, EventKind::StimulusOn, EventKind::StimulusHit, EventKind::TrialTimeout,
                   EventKind::FixationBroken, EventKind::SampleGap, EventKind::SessionEnd}) {
        if (to_string(k) == s) return k;
    }
    throw ValidationError("unknown event kind '" + std::string(s) + "'");
}

struct TrialEvent {
    EventKind kind = EventKind::SessionEnd;
    double t = 0.0;
    Side side = Side::None;
    std::optional<double> latency_s;  // STIMULUS_HIT only
    std::optional<double> gap_s;      // SAMPLE_GAP only
    friend bool operator==(const TrialEvent&, const TrialEvent&) = default;
};

struct SampleRecord {
    double t = 0.0;
    double target_yaw = 0.0;
    double gaze_yaw = 0.0;  // cyclopean, world frame
    double error_left = 0.0;
    double error_right = 0.0;
    double error_cyclopean = 0.0;
    double head_yaw = 0.0;
    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct ExamState {
    ExamConfig config;
    Phase phase = Phase::Running;
    double clock = 0.0;
    bool has_sample = false;
    Rng rng;
    std::optional<double> dwell_start;
    double fixated_t = 0.0;
    double onset_t = 0.0;        // scheduled stimulus onset while in DELAY
    double stimulus_on_t = 0.0;  // actual onset while in STIMULUS
    Side side = Side::None;
    double target_since_t = 0.0;  // when the displayed target last changed
    std::vector<TrialEvent> events;
    std::vector<SampleRecord> records;
    std::vector<GazeSample> samples;
    bool finished = false;

    friend bool operator==(const ExamState&, const ExamState&) = default;
};

/// Immutable product of a finished session.
struct RawTestOutput {
    ExamConfig config;
    std::vector<TrialEvent> events;
    std::vector<SampleRecord> records;
    std::vector<GazeSample> samples;
    friend bool operator==(const RawTestOutput&, const RawTestOutput&) = default;
};

inline double pursuit_target_yaw(double t, const ExamConfig& cfg) {
    return 0.5 * cfg.travel_deg * std::sin(2.0 * std::numbers::pi * t / cfg.period_s);
}

/// Uniform on [isi_min_s, isi_max_s].
inline double draw_isi(Rng& rng, const ExamConfig& cfg) { return rng.uniform(cfg.isi_min_s, cfg.isi_max_s); }

inline Side draw_side(Rng& rng) { return rng.coin() ? Side::Right : Side::Left; }

inline double side_yaw(Side side, const ExamConfig& cfg) {
    switch (side) {
        case Side::Left: return -cfg.eccentricity_deg;
        case Side::Right: return cfg.eccentricity_deg;
        case Side::None: return 0.0;
    }
    return 0.0;
}

inline TargetSphere target_at_yaw(double yaw_deg, const ExamConfig& cfg) {
    return TargetSphere{point_on_arc(yaw_deg, cfg.target_distance_m), cfg.target_radius_m};
}

/// Yaw of the target the subject is supposed to look at in `state`.
inline double displayed_target_yaw(const ExamState& state) {
    switch (state.config.test_kind) {
        case TestKind::SaccadeLatency: return state.phase == Phase::Stimulus ? side_yaw(state.side, state.config) : 0.0;
        case TestKind::SmoothPursuit: return pursuit_target_yaw(state.clock, state.config);
        case TestKind::Vor: return 0.0;
    }
    return 0.0;
}

/// What a subject can perceive of the running protocol.
struct StimulusView {
    TestKind kind = TestKind::SmoothPursuit;
    Phase phase = Phase::Running;
    Side side = Side::None;
    double target_yaw = 0.0;
    double since_t = 0.0;
};

inline StimulusView stimulus_view(const ExamState& state) {
    return StimulusView{state.config.test_kind, state.phase, state.side, displayed_target_yaw(state),
                        state.target_since_t};
}

inline ExamState new_session(const ExamConfig& cfg) {
    validate(cfg);
    ExamState s;
    s.config = cfg;
    s.rng = Rng(cfg.seed);
    s.phase = cfg.test_kind == TestKind::SaccadeLatency ? Phase::AwaitCenter : Phase::Running;
    return s;
}

struct StepOutput {
    std::vector<TrialEvent> events;
    SampleRecord record;
};

namespace detail {

inline constexpr double kEndEpsilon = 1e-9;

inline void step_saccade(ExamState& st, const GazeSample& s, const GazeRay& gaze, std::vector<TrialEvent>& out) {
    const ExamConfig& cfg = st.config;
    auto emit = [&](TrialEvent e) {
        st.events.push_back(e);
        out.push_back(e);
    };
    switch (st.phase) {
        case Phase::AwaitCenter: {
            if (!hit_test(gaze, target_at_yaw(0.0, cfg))) {
                st.dwell_start.reset();
                break;
            }
            if (!st.dwell_start) st.dwell_start = s.t;
            if (s.t - *st.dwell_start + kEndEpsilon < cfg.dwell_s) break;
            st.dwell_start.reset();
            st.fixated_t = s.t;
            st.onset_t = s.t + draw_isi(st.rng, cfg);
            st.side = draw_side(st.rng);
            st.phase = Phase::Delay;
            emit({EventKind::CenterFixated, s.t, Side::None, {}, {}});
            break;
        }
        case Phase::Delay: {
            if (cfg.require_hold && !hit_test(gaze, target_at_yaw(0.0, cfg))) {
                st.phase = Phase::AwaitCenter;
                st.side = Side::None;
                emit({EventKind::FixationBroken, s.t, Side::None, {}, {}});
                break;
            }
            if (s.t >= st.onset_t) {
                st.phase = Phase::Stimulus;
                st.stimulus_on_t = s.t;
                st.target_since_t = s.t;
                emit({EventKind::StimulusOn, s.t, st.side, {}, {}});
            }
            break;
        }
        case Phase::Stimulus: {
            const double elapsed = s.t - st.stimulus_on_t;
            if (hit_test(gaze, target_at_yaw(side_yaw(st.side, cfg), cfg))) {
                emit({EventKind::StimulusHit, s.t, st.side, elapsed, {}});
            } else if (elapsed >= cfg.trial_timeout_s) {
                emit({EventKind::TrialTimeout, s.t, st.side, {}, {}});
            } else {
                break;
            }
            st.phase = Phase::AwaitCenter;
            st.side = Side::None;
            st.target_since_t = s.t;
            break;
        }
        case Phase::Running: break;
    }
}

}  // namespace detail

/// Consumes one sample in place. Throws StreamOrderError for a sample that
/// does not advance the clock or arrives after SESSION_END.
inline StepOutput step(ExamState& st, const GazeSample& s) {
    if (st.finished) throw StreamOrderError("session already finished");
    if (!std::isfinite(s.t) || s.t < 0.0) throw StreamOrderError("sample time must be finite and non-negative");
    if (st.has_sample && !(s.t > st.clock))
        throw StreamOrderError("sample time " + std::to_string(s.t) + " does not advance clock " +
                               std::to_string(st.clock));

    const ExamConfig& cfg = st.config;
    StepOutput out;
    if (st.has_sample) {
        const double gap = s.t - st.clock;
        if (gap > 3.0 / cfg.sample_rate_hz + 1e-12) {
            TrialEvent e{EventKind::SampleGap, s.t, Side::None, {}, gap};
            st.events.push_back(e);
            out.events.push_back(e);
        }
    }

    // Records compare against the target displayed when the sample arrived.
    const double target_yaw = cfg.test_kind == TestKind::SmoothPursuit ? pursuit_target_yaw(s.t, cfg)
                                                                        : displayed_target_yaw(st);
    const TargetSphere target = target_at_yaw(target_yaw, cfg);
    const GazeRay gaze = cyclopean(s);

    SampleRecord rec;
    rec.t = s.t;
    rec.target_yaw = target_yaw;
    rec.gaze_yaw = yaw_of(gaze.dir);
    rec.error_left = angular_error(s.left, target);
    rec.error_right = angular_error(s.right, target);
    rec.error_cyclopean = angular_error(gaze, target);
    rec.head_yaw = s.head_yaw;

    st.clock = s.t;
    st.has_sample = true;

    if (cfg.test_kind == TestKind::SaccadeLatency) detail::step_saccade(st, s, gaze, out.events);

    st.records.push_back(rec);
    st.samples.push_back(s);
    out.record = rec;

    if (s.t + detail::kEndEpsilon >= cfg.duration_s) {
        TrialEvent e{EventKind::SessionEnd, s.t, Side::None, {}, {}};
        st.events.push_back(e);
        out.events.push_back(e);
        st.finished = true;
    }
    return out;
}

struct AdvanceResult {
    ExamState state;
    std::vector<TrialEvent> events;
    SampleRecord record;
};

/// Value-semantics form of step(): the input state is left untouched when
/// passed as an lvalue.
inline AdvanceResult advance(ExamState state, const GazeSample& s) {
    StepOutput o = step(state, s);
    return AdvanceResult{std::move(state), std::move(o.events), o.record};
}

inline RawTestOutput finalize(const ExamState& st) {
    if (!st.finished) throw IncompleteSessionError("session has not reached SESSION_END");
    return RawTestOutput{st.config, st.events, st.records, st.samples};
}

inline RawTestOutput finalize(ExamState&& st) {
    if (!st.finished) throw IncompleteSessionError("session has not reached SESSION_END");
    return RawTestOutput{st.config, std::move(st.events), std::move(st.records), std::move(st.samples)};
}

/// Runs a recorded sample stream through a fresh session (import/replay).
/// Samples after SESSION_END are ignored.
inline RawTestOutput replay(const ExamConfig& cfg, const std::vector<GazeSample>& samples) {
    ExamState st = new_session(cfg);
    for (const auto& s : samples) {
        if (st.finished) break;
        step(st, s);
    }
    if (!st.finished) throw IncompleteSessionError("sample stream ends before the configured duration");
    return finalize(std::move(st));
}

}  // namespace oculab
