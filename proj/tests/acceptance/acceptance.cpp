// Acceptance suite: one PASS/FAIL line per primary criterion. Exit status is
// nonzero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oculab/geometry.hpp"
#include "oculab/learning_path.hpp"
#include "oculab/metrics.hpp"
#include "oculab/service.hpp"
#include "oculab/store.hpp"
#include "oculab/subject.hpp"
#include "oracles.hpp"

using namespace oculab;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(prec);
    s << v;
    return s.str();
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean(a), mb = mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / random_id("oculab-acceptance-", 12);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

StoreHooks deterministic_hooks() {
    auto p = std::make_shared<int>(0), s = std::make_shared<int>(0), d = std::make_shared<int>(0);
    StoreHooks h;
    h.patient_id = [p] { return "P-" + std::to_string(++*p); };
    h.session_id = [s] { return "S-" + std::to_string(++*s); };
    h.now = [d] { return "2026-06-" + std::string(++*d < 10 ? "0" : "") + std::to_string(*d) + "T08:00:00Z"; };
    return h;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- criteria

Outcome isi_contract() {
    const auto t0 = std::chrono::steady_clock::now();
    ExamConfig c = ExamConfig::defaults_for(TestKind::SaccadeLatency);
    c.duration_s = 5000;
    c.seed = 11;
    SubjectParams p;
    p.seed = 12;
    const auto raw = run_closed_loop(c, p);
    std::vector<double> isi;
    double fixated = -1;
    for (const auto& e : raw.events) {
        if (e.kind == EventKind::CenterFixated) fixated = e.t;
        if (e.kind == EventKind::StimulusOn && fixated >= 0) {
            isi.push_back(e.t - fixated);
            fixated = -1;
        }
        if (isi.size() == 1000) break;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double dt = 1.0 / c.sample_rate_hz;
    const bool enough = isi.size() == 1000;
    const bool in_range = std::all_of(isi.begin(), isi.end(), [&](double x) { return x >= 2.0 - 1e-9 && x <= 5.0 + dt + 1e-9; });
    const double m = enough ? mean(isi) : 0;
    const auto [lo, hi] = std::minmax_element(isi.begin(), isi.end());
    return {enough && in_range && std::abs(m - 3.5) <= 0.1 && secs < 10.0,
            std::to_string(isi.size()) + " trials, range [" + fmt(enough ? *lo : 0, 3) + ", " + fmt(enough ? *hi : 0, 3) +
                "] s, mean " + fmt(m) + " s, runtime " + fmt(secs, 2) + " s"};
}

Outcome latency_pipeline() {
    ExamConfig c = ExamConfig::defaults_for(TestKind::SaccadeLatency);
    c.duration_s = 1200;
    c.eccentricity_deg = 15;
    c.sample_rate_hz = 120;
    c.seed = 21;
    SubjectParams p;
    p.saccade_latency_mean_s = 0.25;
    p.saccade_latency_sd_s = 0.02;
    p.saccade_speed_dps = 400;
    p.seed = 22;
    const auto stats = latency_stats(run_closed_loop(c, p).events);
    if (stats.latencies_s.size() < 200) return {false, "only " + std::to_string(stats.latencies_s.size()) + " completed trials"};
    const std::vector<double> first(stats.latencies_s.begin(), stats.latencies_s.begin() + 200);
    const double m = mean(first);
    const double expected = 0.25 + 15.0 / 400.0;
    const double tol = 3 * 0.02 / std::sqrt(200.0) + 1.0 / 120.0;
    return {std::abs(m - expected) <= tol,
            "200 trials, mean " + fmt(m) + " s, expected " + fmt(expected) + " +/- " + fmt(tol) + " s"};
}

Outcome vor_metrics() {
    bool ok = true;
    std::string detail;
    for (double fs_hz : {60.0, 120.0}) {
        // Direct: the analytic head signal.
        std::vector<double> t, y;
        for (std::size_t k = 0; static_cast<double>(k) / fs_hz <= 20.0 + 1e-12; ++k) {
            t.push_back(static_cast<double>(k) / fs_hz);
            y.push_back(20.0 * std::sin(2 * kPi * 0.5 * t.back()));
        }
        const auto cyc = vor_frequency(t, y, 0.25 * 20.0);
        const auto spd = head_speed(t, y);
        // End to end: simulator head motion through the protocol and report.
        ExamConfig c = ExamConfig::defaults_for(TestKind::Vor);
        c.duration_s = 20;
        c.sample_rate_hz = fs_hz;
        c.head_amp_deg = 20;
        SubjectParams p;
        p.head_amp_deg = 20;
        p.head_freq_hz = 0.5;
        const auto r = compute_report(run_closed_loop(c, p));
        const bool here = cyc.cycles == 10 && std::abs(cyc.hz - 0.5) < 1e-12 && std::abs(spd.peak_dps - 2 * kPi * 0.5 * 20) <= 1.0 &&
                          r.vor_cycles == 10 && std::abs(*r.vor_freq_hz - 0.5) < 1e-12 &&
                          std::abs(*r.head_speed_peak_dps - 2 * kPi * 0.5 * 20) <= 1.0;
        ok = ok && here;
        detail += (detail.empty() ? "" : "; ") + fmt(fs_hz, 0) + " Hz: " + std::to_string(cyc.cycles) + " cycles, " +
                  fmt(cyc.hz, 3) + " Hz, peak " + fmt(spd.peak_dps, 2) + " dps (report " +
                  std::to_string(r.vor_cycles.value_or(-1)) + " cycles, peak " + fmt(r.head_speed_peak_dps.value_or(0), 2) + ")";
    }
    return {ok, detail};
}

Outcome pursuit_figure() {
    const ExamConfig c = ExamConfig::defaults_for(TestKind::SmoothPursuit);
    const SubjectParams p = preset_params(SubjectPreset::Normal);
    const auto raw = run_closed_loop(c, p);
    const double amp = 0.5 * c.travel_deg, w = 2 * kPi / c.period_s;
    std::vector<double> speed, left, right, t;
    for (const auto& r : raw.records) {
        t.push_back(r.t);
        speed.push_back(std::abs(amp * w * std::cos(w * r.t)));
        left.push_back(r.error_left);
        right.push_back(r.error_right);
    }
    const double cl = pearson(left, speed), cr = pearson(right, speed);

    // Error minimum near each direction reversal: the smallest smoothed
    // error within a quarter period on either side of the reversal.
    double worst = 0;
    int reversals = 0;
    for (const auto* series : {&left, &right}) {
        const auto smooth = moving_average(*series, 6);
        for (double rev = c.period_s / 4; rev + c.period_s / 4 <= c.duration_s; rev += c.period_s / 2) {
            std::size_t best = 0;
            double best_v = INFINITY;
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (std::abs(t[i] - rev) > c.period_s / 4) continue;
                if (smooth[i] < best_v) {
                    best_v = smooth[i];
                    best = i;
                }
            }
            worst = std::max(worst, std::abs(t[best] - rev));
            ++reversals;
        }
    }
    return {cl > 0.5 && cr > 0.5 && worst <= 0.25,
            "corr(|error|, |target speed|) left " + fmt(cl, 3) + ", right " + fmt(cr, 3) + "; worst minimum offset " +
                fmt(worst, 3) + " s over " + std::to_string(reversals / 2) + " reversals per eye"};
}

Outcome classifier_separation() {
    int runs = 0, correct = 0;
    std::string misses;
    for (TestKind k : {TestKind::SaccadeLatency, TestKind::SmoothPursuit, TestKind::Vor}) {
        for (SubjectPreset preset : {SubjectPreset::Normal, SubjectPreset::Abnormal}) {
            for (std::uint64_t seed = 1; seed <= 20; ++seed) {
                ExamConfig c = ExamConfig::defaults_for(k);
                c.seed = seed;
                SubjectParams p = preset_params(preset);
                p.seed = 1000 + seed;
                const auto r = classify(compute_report(run_closed_loop(c, p)), Thresholds{});
                const Flag want = preset == SubjectPreset::Normal ? Flag::Normal : Flag::Abnormal;
                ++runs;
                if (r.overall == want) {
                    ++correct;
                } else if (misses.size() < 200) {
                    misses += " " + std::string(to_string(k)) + "/" + (preset == SubjectPreset::Normal ? "normal" : "abnormal") +
                              "/seed" + std::to_string(seed) + "=" + std::string(to_string(r.overall));
                }
            }
        }
    }
    return {correct == runs, std::to_string(correct) + "/" + std::to_string(runs) +
                                 " runs classified as their preset (3 tests x 2 presets x 20 seeds)" + misses};
}

Outcome oracle_equivalence() {
    std::mt19937_64 g(777);
    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> noise(0, 0.15);
    int agree = 0, saccades = 0;
    for (int trace = 0; trace < 100; ++trace) {
        const double fs_hz = trace % 2 ? 60.0 : 120.0;
        const std::size_t n = 200 + static_cast<std::size_t>(u(g) * 400);
        std::vector<double> y(n);
        double pos = 0, target = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (u(g) < 0.02) target = (u(g) - 0.5) * 40;
            pos += std::clamp(target - pos, -400.0 / fs_hz, 400.0 / fs_hz);
            y[i] = pos + noise(g) + (u(g) < 0.01 ? (u(g) - 0.5) * 10 : 0.0);
        }
        const double thr = 20 + u(g) * 40;
        const auto got = detect_saccades(y, fs_hz, thr);
        const auto want = oracle::ivt(y, fs_hz, thr);
        bool same = got.size() == want.size();
        for (std::size_t k = 0; same && k < got.size(); ++k) same = got[k].first == want[k].first && got[k].last == want[k].second;
        agree += same;
        saccades += static_cast<int>(want.size());
    }
    std::size_t graphs = 0, mismatches = 0;
    const std::vector<std::vector<std::string>> labels = {
        {}, {"x"}, {"b", "a"}, {"c", "a", "b"}, {"d", "b", "a", "c"}, {"e", "c", "a", "d", "b"}};
    for (const auto& l : labels) {
        std::size_t n = 0;
        mismatches += oracle::frontier_mismatches(l, &n);
        graphs += n;
    }
    return {agree == 100 && mismatches == 0,
            "detect_saccades " + std::to_string(agree) + "/100 traces (" + std::to_string(saccades) +
                " saccades); frontier walks " + std::to_string(graphs - mismatches) + "/" + std::to_string(graphs) +
                " DAGs with <= 5 nodes"};
}

Outcome determinism_persistence() {
    std::vector<std::string> failures;
    // Batch vs live through the service, on two stores with identical hooks.
    {
        TempDir a, b;
        Store sa(a.path, deterministic_hooks()), sb(b.path, deterministic_hooks());
        Service va(sa), vb(sb);
        va.create_patient("Ana");
        vb.create_patient("Ana");
        for (TestKind k : {TestKind::SaccadeLatency, TestKind::SmoothPursuit, TestKind::Vor}) {
            RunRequest req;
            req.patient_id = "P-1";
            req.config = ExamConfig::defaults_for(k);
            req.config.seed = 31;
            SubjectParams p;
            p.seed = 32;
            req.subject = p;
            const auto batch = va.start_run(req);
            req.live = true;
            const auto live = vb.start_run(req);
            while (vb.session_status(live.session_id) == "running") std::this_thread::sleep_for(std::chrono::milliseconds(5));
            if (sa.session_text(batch.session_id) != sb.session_text(live.session_id))
                failures.push_back(std::string("batch/live differ for ") + std::string(to_string(k)));
            if (read_file(a.path / ("sessions/" + batch.session_id + ".samples.csv")) !=
                read_file(b.path / ("sessions/" + live.session_id + ".samples.csv")))
                failures.push_back(std::string("batch/live samples differ for ") + std::string(to_string(k)));
        }
    }
    // Round trip: loaded record equals the canonical form of what was saved,
    // and saving the loaded record again reproduces the same bytes.
    {
        TempDir a, b;
        Store sa(a.path, deterministic_hooks()), sb(b.path, deterministic_hooks());
        sa.create_patient("Ana");
        sb.create_patient("Ana");
        RunRequest req;
        req.config = ExamConfig::defaults_for(TestKind::SaccadeLatency);
        req.subject = SubjectParams{};
        RunOutput out = execute_run(req);
        out.record.patient_id = "P-1";
        const auto id = sa.save_session(out.record, out.samples);
        const auto loaded = sa.load_session(id);
        SessionRecord expected = out.record;
        expected.session_id = id;
        expected.started_at = loaded.started_at;
        expected.samples_file = loaded.samples_file;
        if (!(loaded == canonical(expected))) failures.push_back("loaded record differs from saved record");
        if (!(canonical(loaded) == loaded)) failures.push_back("loaded record is not a fixed point");
        sb.save_session(loaded, sa.load_samples(id));
        if (sa.session_text(id) != sb.session_text(id)) failures.push_back("re-saved record is not byte-identical");
        if (read_file(a.path / loaded.samples_file) != read_file(b.path / loaded.samples_file))
            failures.push_back("re-saved samples are not byte-identical");
    }
    // Trend over three constructed sessions, inserted out of date order.
    {
        TempDir d;
        Store st(d.path, deterministic_hooks());
        st.create_patient("Ana");
        struct Built {
            const char* when;
            double value;
        };
        const std::vector<Built> built = {{"2026-03-01T09:00:00Z", 0.22}, {"2026-01-01T09:00:00Z", 0.30}, {"2026-02-01T09:00:00Z", 0.25}};
        for (const auto& b : built) {
            SessionRecord r;
            r.patient_id = "P-1";
            r.started_at = b.when;
            r.config = ExamConfig::defaults_for(TestKind::SaccadeLatency);
            r.report.test_kind = TestKind::SaccadeLatency;
            r.report.latencies_s = {b.value};
            r.report.latency_mean_s = b.value;
            st.save_session(r, {});
        }
        const auto pts = st.trend("P-1", "latency_mean_s");
        const std::vector<double> want = {0.30, 0.25, 0.22};
        bool ok = pts.size() == 3;
        for (std::size_t i = 0; ok && i < 3; ++i) ok = pts[i].value == want[i];
        if (!ok) failures.push_back("trend did not return 0.30, 0.25, 0.22 in date order");
    }
    std::string detail = failures.empty() ? "batch == live for 3 tests; round trip lossless and byte-stable; trend ordered"
                                          : failures.front();
    for (std::size_t i = 1; i < failures.size(); ++i) detail += "; " + failures[i];
    return {failures.empty(), detail};
}

Outcome geometry_equivalence() {
    std::mt19937_64 g(99);
    std::uniform_real_distribution<double> pos(-5.0, 5.0), rad(0.01, 1.0), cone(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    auto unit = [&] {
        for (;;) {
            Vec3 v{n(g), n(g), n(g)};
            const double l = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
            if (l > 1e-6) return (1.0 / l) * v;
        }
    };
    int cases = 0, mismatches = 0, boundary = 0, hits = 0;
    while (cases < 10000) {
        const Vec3 o{pos(g), pos(g), pos(g)}, c{pos(g), pos(g), pos(g)};
        const double r = rad(g);
        const Vec3 oc = c - o;
        const double d = std::sqrt(oc.x * oc.x + oc.y * oc.y + oc.z * oc.z);
        if (d <= r * 1.0001) continue;
        Vec3 dir = unit();
        if (cases % 2 == 0) {
            // Aim near the acceptance cone so both outcomes are common.
            const Vec3 axis = (1.0 / d) * oc;
            Vec3 perp = unit();
            const double k = perp.x * axis.x + perp.y * axis.y + perp.z * axis.z;
            perp = perp - k * axis;
            perp = (1.0 / std::sqrt(perp.x * perp.x + perp.y * perp.y + perp.z * perp.z)) * perp;
            const double off = std::asin(r / d) * 2.0 * cone(g);
            dir = std::cos(off) * axis + std::sin(off) * perp;
        }
        ++cases;
        const GazeRay ray{o, Direction3::normalized(dir)};
        const TargetSphere t{c, r};
        const double err = angular_error(ray, t);
        const double half = std::asin(r / d) * 180.0 / kPi;
        const bool hit = hit_test(ray, t);
        hits += hit;
        if (hit != (err <= half)) {
            if (std::abs(err - half) <= 1e-9)
                ++boundary;
            else
                ++mismatches;
        }
    }
    return {mismatches == 0, std::to_string(cases) + " cases, " + std::to_string(hits) + " hits, " +
                                 std::to_string(mismatches) + " mismatches, " + std::to_string(boundary) +
                                 " disagreements within 1e-9 deg of the cone edge"};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"isi-contract", isi_contract},
        {"latency-pipeline", latency_pipeline},
        {"vor-metrics", vor_metrics},
        {"pursuit-error-profile", pursuit_figure},
        {"classifier-separation", classifier_separation},
        {"oracle-equivalence", oracle_equivalence},
        {"determinism-persistence", determinism_persistence},
        {"geometry-hit-test", geometry_equivalence},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << (failed ? "FAILED " : "ALL PASSED ") << criteria.size() - failed << "/" << criteria.size() << std::endl;
    return failed ? 1 : 0;
}
