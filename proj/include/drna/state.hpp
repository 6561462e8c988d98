#pragma once

#include <array>
#include <cmath>

namespace drna {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }

    double squared_norm() const { return x * x + y * y; }
    double norm() const { return std::sqrt(squared_norm()); }
};

inline double squared_distance(Vec2 a, Vec2 b) { return (a - b).squared_norm(); }

/// Axis-aligned rectangle; closed on all sides.
struct Rect {
    Vec2 lo;
    Vec2 hi;

    bool contains(Vec2 p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    }
};

/// Target state: planar position and velocity (position units per step).
struct StateVector {
    Vec2 r;  // position
    Vec2 v;  // velocity

    std::array<double, 4> coords() const { return {r.x, r.y, v.x, v.y}; }
};

}  // namespace drna
