#pragma once

// Precision-over-time export: per-eye angular error against time, as CSV
// and as a self-contained SVG line chart. Both use the same series.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "oculab/error.hpp"
#include "oculab/protocol.hpp"
#include "oculab/serialization.hpp"

namespace oculab {

inline constexpr const char* kPrecisionCsvHeader = "t,left_error,right_error";

struct PrecisionPoint {
    double t = 0.0;
    double left_error = 0.0;
    double right_error = 0.0;
};

inline std::vector<PrecisionPoint> precision_points(const std::vector<SampleRecord>& records) {
    std::vector<PrecisionPoint> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r.t, r.error_left, r.error_right});
    return out;
}

inline std::string precision_csv(const std::vector<SampleRecord>& records) {
    std::string out = std::string(kPrecisionCsvHeader) + "\n";
    for (const auto& p : precision_points(records))
        out += format_sig9(p.t) + "," + format_sig9(p.left_error) + "," + format_sig9(p.right_error) + "\n";
    return out;
}

namespace detail {

inline std::string fixed(double v, int decimals = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

/// Round step of roughly range/5 from {1, 2, 5} x 10^k.
inline double tick_step(double range) {
    if (!(range > 0.0)) return 1.0;
    const double raw = range / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) return m * mag;
    return 10.0 * mag;
}

}  // namespace detail

/// Minimal SVG line chart of left (blue) and right (red) error in degrees.
inline std::string precision_svg(const std::vector<SampleRecord>& records, const std::string& title = "Precision") {
    if (records.empty()) throw EmptyInputError("no records to chart");
    constexpr double W = 800, H = 400, L = 60, R = 20, T = 40, B = 50;
    const auto pts = precision_points(records);
    const double t0 = pts.front().t;
    const double t1 = std::max(pts.back().t, t0 + 1e-9);
    double ymax = 0.0;
    for (const auto& p : pts) ymax = std::max({ymax, p.left_error, p.right_error});
    const double ystep = detail::tick_step(ymax > 0.0 ? ymax : 1.0);
    ymax = std::ceil((ymax > 0.0 ? ymax : 1.0) / ystep) * ystep;

    auto x = [&](double t) { return L + (t - t0) / (t1 - t0) * (W - L - R); };
    auto y = [&](double v) { return H - B - v / ymax * (H - T - B); };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"400\" viewBox=\"0 0 800 400\" "
         "font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"800\" height=\"400\" fill=\"white\"/>\n";
    s += "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + title + "</text>\n";
    for (double v = 0.0; v <= ymax + 1e-9; v += ystep) {
        const auto yy = detail::fixed(y(v));
        s += "<line x1=\"" + detail::fixed(L) + "\" y1=\"" + yy + "\" x2=\"" + detail::fixed(W - R) + "\" y2=\"" + yy +
             "\" stroke=\"#ddd\"/>\n";
        s += "<text x=\"" + detail::fixed(L - 6) + "\" y=\"" + yy + "\" text-anchor=\"end\" dy=\"4\">" +
             format_sig9(v) + "</text>\n";
    }
    const double tstep = detail::tick_step(t1 - t0);
    for (double t = std::ceil(t0 / tstep) * tstep; t <= t1 + 1e-9; t += tstep) {
        const auto xx = detail::fixed(x(t));
        s += "<text x=\"" + xx + "\" y=\"" + detail::fixed(H - B + 18) + "\" text-anchor=\"middle\">" +
             format_sig9(t) + "</text>\n";
    }
    s += "<line x1=\"60\" y1=\"350\" x2=\"780\" y2=\"350\" stroke=\"black\"/>\n";
    s += "<line x1=\"60\" y1=\"40\" x2=\"60\" y2=\"350\" stroke=\"black\"/>\n";
    s += "<text x=\"420\" y=\"390\" text-anchor=\"middle\">time (s)</text>\n";
    s += "<text x=\"16\" y=\"200\" text-anchor=\"middle\" transform=\"rotate(-90 16 200)\">error (deg)</text>\n";
    auto polyline = [&](auto value, const char* colour) {
        std::string p = "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) p += ' ';
            p += detail::fixed(x(pts[i].t)) + "," + detail::fixed(y(value(pts[i])));
        }
        return p + "\"/>\n";
    };
    s += polyline([](const PrecisionPoint& p) { return p.left_error; }, "#1f77b4");
    s += polyline([](const PrecisionPoint& p) { return p.right_error; }, "#d62728");
    s += "<text x=\"700\" y=\"56\" fill=\"#1f77b4\">left eye</text>\n";
    s += "<text x=\"700\" y=\"72\" fill=\"#d62728\">right eye</text>\n";
    s += "</svg>\n";
    return s;
}

}  // namespace oculab
