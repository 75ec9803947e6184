#pragma once

#include <cmath>

namespace aero {

/// Cartesian coordinate triple in meters.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }

    /// Unit-length copy, or the zero vector when the norm vanishes.
    Vec3 normalized() const {
        double n = norm();
        if (n == 0.0) return {0.0, 0.0, 0.0};
        return *this / n;
    }

    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

} // namespace aero
