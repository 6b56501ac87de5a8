#pragma once

// Directions, gaze rays and gaze-versus-target hit testing.
//
// Frame: right-handed, subject's head centre at the origin, +x to the
// subject's right, +y down, +z straight ahead. Yaw is the rotation about
// the vertical (y) axis; 0 is straight ahead and positive yaw turns to the
// subject's right, so direction_from_yaw(90) == (1, 0, 0).

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oculab/error.hpp"

namespace oculab {

inline constexpr double kDegPerRad = 180.0 / std::numbers::pi;
inline constexpr double kRadPerDeg = std::numbers::pi / 180.0;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(Vec3 a, Vec3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 v) { return std::sqrt(dot(v, v)); }

/// Unit vector. Built only by normalisation or from components already of
/// unit length, so every instance is unit-norm.
class Direction3 {
public:
    Direction3() = default;  // straight ahead

    static Direction3 normalized(Vec3 v) {
        const double n = norm(v);
        if (!(n > 1e-12) || !std::isfinite(n)) throw GeometryError("cannot normalise a zero or non-finite vector");
        return Direction3{Vec3{v.x / n, v.y / n, v.z / n}};
    }

    /// Keeps components that are already unit length to within 1e-8 (as
    /// parsed from 9-digit text) so re-serialising reproduces them;
    /// anything else is normalised.
    static Direction3 from_components(Vec3 v) {
        if (std::abs(norm(v) - 1.0) <= 1e-8) return Direction3{v};
        return normalized(v);
    }

    double x() const noexcept { return v_.x; }
    double y() const noexcept { return v_.y; }
    double z() const noexcept { return v_.z; }
    Vec3 vec() const noexcept { return v_; }

    friend bool operator==(const Direction3&, const Direction3&) = default;

private:
    explicit Direction3(Vec3 v) : v_(v) {}
    Vec3 v_{0.0, 0.0, 1.0};
};

struct GazeRay {
    Vec3 origin;
    Direction3 dir;
    friend bool operator==(const GazeRay&, const GazeRay&) = default;
};

struct TargetSphere {
    Vec3 center;
    double radius = 0.1;
    friend bool operator==(const TargetSphere&, const TargetSphere&) = default;
};

/// One binocular measurement. Angles in degrees, pupils in millimetres.
struct GazeSample {
    double t = 0.0;
    GazeRay left;
    GazeRay right;
    double pupil_diameter_left = 0.0;
    double pupil_diameter_right = 0.0;
    double eye_openness_left = 1.0;
    double eye_openness_right = 1.0;
    double head_yaw = 0.0;
    friend bool operator==(const GazeSample&, const GazeSample&) = default;
};

/// Angle between two directions in degrees, in [0, 180]. atan2 keeps the
/// result accurate near 0 and 180 where acos loses precision.
inline double angle_between(Vec3 a, Vec3 b) {
    return std::atan2(norm(cross(a, b)), dot(a, b)) * kDegPerRad;
}

inline double angular_error(const GazeRay& ray, const TargetSphere& target) {
    const Vec3 to_center = target.center - ray.origin;
    if (!(norm(to_center) > 1e-12)) throw GeometryError("gaze origin coincides with target centre");
    return angle_between(ray.dir.vec(), to_center);
}

/// Half-angle of the cone the sphere subtends from `origin`, in degrees.
/// 90 when the origin is on or inside the sphere.
inline double acceptance_half_angle(Vec3 origin, const TargetSphere& target) {
    const double d = norm(target.center - origin);
    if (d <= target.radius) return 90.0;
    return std::asin(target.radius / d) * kDegPerRad;
}

/// Ray-sphere intersection (boundary counts as a hit). An origin inside the
/// sphere always hits.
inline bool hit_test(const GazeRay& ray, const TargetSphere& target) {
    const Vec3 oc = target.center - ray.origin;
    const double dist2 = dot(oc, oc);
    if (!(dist2 > 1e-24)) throw GeometryError("gaze origin coincides with target centre");
    const double r2 = target.radius * target.radius;
    if (dist2 <= r2) return true;
    const double along = dot(oc, ray.dir.vec());
    if (along < 0.0) return false;
    const double miss2 = dist2 - along * along;
    return miss2 <= r2;
}

inline Direction3 direction_from_yaw(double yaw_deg) {
    const double a = yaw_deg * kRadPerDeg;
    return Direction3::normalized({std::sin(a), 0.0, std::cos(a)});
}

inline double yaw_of(const Direction3& d) {
    if (std::hypot(d.x(), d.z()) < 1e-12) throw GeometryError("yaw undefined for a vertical direction");
    return std::atan2(d.x(), d.z()) * kDegPerRad;
}

/// Rotates `v` about the vertical axis by `yaw_deg`.
inline Vec3 rotate_yaw(Vec3 v, double yaw_deg) {
    const double a = yaw_deg * kRadPerDeg;
    const double c = std::cos(a);
    const double s = std::sin(a);
    return {c * v.x + s * v.z, v.y, -s * v.x + c * v.z};
}

/// Point at `distance` metres from the head centre along `yaw_deg`.
inline Vec3 point_on_arc(double yaw_deg, double distance) {
    return distance * direction_from_yaw(yaw_deg).vec();
}

/// Single ray combined from both eyes: midpoint origin, mean direction.
inline GazeRay cyclopean(const GazeSample& s) {
    const Vec3 sum = s.left.dir.vec() + s.right.dir.vec();
    if (norm(sum) < 1e-6) throw GeometryError("eye directions are nearly opposite");
    return GazeRay{0.5 * (s.left.origin + s.right.origin), Direction3::normalized(sum)};
}

}  // namespace oculab
