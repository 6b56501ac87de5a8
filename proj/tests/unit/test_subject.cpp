#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oculab/metrics.hpp"
#include "oculab/subject.hpp"

using namespace oculab;

namespace {

constexpr double kPi = 3.14159265358979323846;

SubjectParams perfect() { return preset_params(SubjectPreset::Perfect); }

// Horizontal-plane intersection of the two eye rays, returned as the yaw of
// the fixation point seen from the head centre.
double triangulated_yaw(const GazeSample& s) {
    const double ox1 = s.left.origin.x, oz1 = s.left.origin.z, dx1 = s.left.dir.x(), dz1 = s.left.dir.z();
    const double ox2 = s.right.origin.x, oz2 = s.right.origin.z, dx2 = s.right.dir.x(), dz2 = s.right.dir.z();
    // ox1 + a dx1 = ox2 + b dx2, oz1 + a dz1 = oz2 + b dz2 (Cramer's rule for a).
    const double det = dx1 * (-dz2) - (-dx2) * dz1;
    const double a = ((ox2 - ox1) * (-dz2) - (-dx2) * (oz2 - oz1)) / det;
    const double px = ox1 + a * dx1, pz = oz1 + a * dz1;
    return std::atan2(px, pz) * 180.0 / kPi;
}

}  // namespace

TEST(SaccadeYaw, Examples) {
    EXPECT_DOUBLE_EQ(saccade_yaw(0, 15, 0.01875, 400), 400 * 0.01875);
    EXPECT_DOUBLE_EQ(saccade_yaw(0, 15, 0.01875, 400), 7.5);
    EXPECT_EQ(saccade_yaw(0, 15, 1.0, 400), 15.0);
    EXPECT_EQ(saccade_yaw(15, 15, 0.3, 400), 15.0);
    EXPECT_EQ(saccade_yaw(0, -15, 0.01875, 400), -7.5);
    EXPECT_EQ(saccade_yaw(3, 15, 0.0, 400), 3.0);
}

TEST(Pursuit, UnitGainNoLagHasNoError) {
    PursuitTracker tr(1.0, 3.0, true, 400);
    for (int k = 0; k < 600; ++k) {
        const double target = 10 * std::sin(2 * kPi * k / 360.0);
        EXPECT_EQ(tr.step(1 / 120.0, target, target), target);
    }
}

TEST(Pursuit, StaticTargetSteadyError) {
    PursuitTracker tr(0.8, 3.0, false, 400);
    double yaw = 0;
    for (int k = 0; k < 100; ++k) yaw = tr.step(1 / 120.0, 10.0, 10.0);
    EXPECT_NEAR(10.0 - yaw, (1 - 0.8) * 10.0, 1e-12);
}

TEST(Pursuit, CatchupBoundsError) {
    const double dt = 1 / 120.0, speed = 400, threshold = 2.0;
    PursuitTracker tr(0.7, threshold, true, speed);
    double max_err = 0, max_step = 0, prev = 0;
    for (int k = 0; k < 120 * 20; ++k) {
        const double t = k * dt;
        const double target = 10 * std::sin(2 * kPi * t / 3.0);
        max_step = std::max(max_step, std::abs(target - prev));
        prev = target;
        const double yaw = tr.step(k ? dt : 0.0, target, target);
        max_err = std::max(max_err, std::abs(target - yaw));
    }
    EXPECT_GT(max_err, threshold);  // catch-ups actually happen
    EXPECT_LE(max_err, threshold + speed * dt + max_step);
}

TEST(Vor, Examples) {
    EXPECT_EQ(20 + vor_eye_in_head(20, 1.0), 0.0);
    EXPECT_NEAR(20 + vor_eye_in_head(20, 0.6), 8.0, 1e-12);
    EXPECT_NEAR(head_yaw_at(0.5, 20, 0.5), 20.0, 1e-12);
}

TEST(Vor, WorldErrorInvariantByTriangulation) {
    for (double g : {0.0, 0.6, 0.95, 1.0, 1.3}) {
        ExamConfig c = ExamConfig::defaults_for(TestKind::Vor);
        c.duration_s = 5;
        SubjectParams p;
        p.noise_sd_deg = 0;
        p.vor_gain = g;
        const auto raw = run_closed_loop(c, p);
        for (const auto& s : raw.samples) {
            const double head = head_yaw_at(s.t, p.head_amp_deg, p.head_freq_hz);
            EXPECT_NEAR(s.head_yaw, head, 1e-12);
            EXPECT_NEAR(triangulated_yaw(s), (1 - g) * head, 1e-9) << "gain " << g << " t " << s.t;
        }
    }
}

TEST(ClosedLoop, PerfectPursuitWithinOneSampleOfTravel) {
    const ExamConfig c = ExamConfig::defaults_for(TestKind::SmoothPursuit);
    const auto raw = run_closed_loop(c, perfect());
    const double peak_speed = 0.5 * c.travel_deg * 2 * kPi / c.period_s;  // deg/s
    const double bound = peak_speed / c.sample_rate_hz;
    for (const auto& r : raw.records) EXPECT_LE(r.error_cyclopean, bound);
}

TEST(ClosedLoop, LatencyIsReactionPlusFlight) {
    ExamConfig c = ExamConfig::defaults_for(TestKind::SaccadeLatency);
    c.duration_s = 120;
    SubjectParams p;
    p.saccade_latency_mean_s = 0.25;
    p.saccade_latency_sd_s = 0;
    p.noise_sd_deg = 0;
    const auto raw = run_closed_loop(c, p);
    const auto stats = latency_stats(raw.events);
    ASSERT_GE(stats.latencies_s.size(), 10u);
    const double expected = 0.25 + 15.0 / 400.0;
    for (double l : stats.latencies_s) EXPECT_NEAR(l, expected, 1.0 / c.sample_rate_hz);
}

TEST(ClosedLoop, DeterministicForSameSeeds) {
    for (TestKind k : {TestKind::SaccadeLatency, TestKind::SmoothPursuit, TestKind::Vor}) {
        const ExamConfig c = ExamConfig::defaults_for(k);
        SubjectParams p;
        p.seed = 99;
        EXPECT_EQ(run_closed_loop(c, p), run_closed_loop(c, p));
    }
}

TEST(ClosedLoop, SubjectSeedChangesNoise) {
    const ExamConfig c = ExamConfig::defaults_for(TestKind::Vor);
    SubjectParams a, b;
    a.seed = 1;
    b.seed = 2;
    EXPECT_NE(run_closed_loop(c, a).samples, run_closed_loop(c, b).samples);
}

TEST(ClosedLoop, NoiseMonotonicallyRaisesPursuitError) {
    const ExamConfig c = ExamConfig::defaults_for(TestKind::SmoothPursuit);
    double prev = -1;
    for (double sd : {0.0, 0.2, 0.5, 1.0, 2.0}) {
        double sum = 0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            SubjectParams p;
            p.noise_sd_deg = sd;
            p.seed = seed;
            sum += precision_series(run_closed_loop(c, p).records).rms_cyclopean;
        }
        const double mean = sum / 5;
        EXPECT_GT(mean, prev) << "noise " << sd;
        prev = mean;
    }
}

TEST(ClosedLoop, NoiseFreeRunsAreExactlyReproducible) {
    ExamConfig c = ExamConfig::defaults_for(TestKind::SaccadeLatency);
    SubjectParams p;
    p.noise_sd_deg = 0;
    const auto a = run_closed_loop(c, p);
    const auto b = run_closed_loop(c, p);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) ASSERT_EQ(a.samples[i], b.samples[i]);
}

TEST(ClosedLoop, SamplesCarryPupilAndOpenness) {
    const auto raw = run_closed_loop(ExamConfig::defaults_for(TestKind::Vor), SubjectParams{});
    for (const auto& s : raw.samples) {
        EXPECT_EQ(s.pupil_diameter_left, 3.5);
        EXPECT_EQ(s.eye_openness_right, 1.0);
        EXPECT_NEAR(s.right.origin.x - s.left.origin.x, 0.064 * std::cos(s.head_yaw * kPi / 180), 1e-12);
    }
}

TEST(Params, PresetsMatchCalibrationPoints) {
    const auto n = preset_params(SubjectPreset::Normal);
    EXPECT_EQ(n.saccade_latency_mean_s, 0.20);
    EXPECT_EQ(n.pursuit_gain, 0.95);
    EXPECT_EQ(n.vor_gain, 0.95);
    const auto a = preset_params(SubjectPreset::Abnormal);
    EXPECT_EQ(a.saccade_latency_mean_s, 0.35);
    EXPECT_EQ(a.pursuit_gain, 0.70);
    EXPECT_EQ(a.vor_gain, 0.60);
    EXPECT_EQ(parse_preset("abnormal"), SubjectPreset::Abnormal);
    EXPECT_THROW(parse_preset("average"), ValidationError);
}

TEST(Params, InvalidFieldsListed) {
    SubjectParams p;
    p.pursuit_gain = 0;
    p.vor_gain = 1.6;
    p.saccade_speed_dps = -1;
    try {
        validate(p);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.fields(), (std::vector<std::string>{"saccade_speed_dps", "pursuit_gain", "vor_gain"}));
    }
    p = SubjectParams{};
    p.pursuit_gain = 1.0;
    p.vor_gain = 1.5;
    EXPECT_NO_THROW(validate(p));
}

TEST(Rng, TruncatedNormalIsNonNegative) {
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) EXPECT_GE(rng.truncated_normal_nonneg(0.05, 0.1), 0.0);
    EXPECT_EQ(rng.truncated_normal_nonneg(0.3, 0.0), 0.3);
    EXPECT_EQ(rng.truncated_normal_nonneg(-0.3, 0.0), 0.0);
}

TEST(Rng, NormalMoments) {
    Rng rng(2);
    double s = 0, ss = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(1.0, 2.0);
        s += x;
        ss += x * x;
    }
    const double mean = s / n;
    EXPECT_NEAR(mean, 1.0, 0.02);
    EXPECT_NEAR(std::sqrt(ss / n - mean * mean), 2.0, 0.02);
}
