#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace litmap {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point2&) const = default;
};

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Axis-aligned rectangle, closed on all sides.
struct Bounds {
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();

    bool empty() const noexcept { return !(min_x <= max_x && min_y <= max_y); }
    double width() const noexcept { return max_x - min_x; }
    double height() const noexcept { return max_y - min_y; }
    double diagonal() const noexcept { return empty() ? 0.0 : std::hypot(width(), height()); }

    void extend(const Point2& p) noexcept {
        min_x = std::min(min_x, p.x);
        min_y = std::min(min_y, p.y);
        max_x = std::max(max_x, p.x);
        max_y = std::max(max_y, p.y);
    }
    Bounds expanded(double margin) const noexcept {
        return {min_x - margin, min_y - margin, max_x + margin, max_y + margin};
    }
    bool contains(const Point2& p) const noexcept {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }
    Point2 clamp(const Point2& p) const noexcept {
        return {std::clamp(p.x, min_x, max_x), std::clamp(p.y, min_y, max_y)};
    }

    static Bounds of(std::span<const Point2> pts) noexcept {
        Bounds b;
        for (const auto& p : pts) b.extend(p);
        return b;
    }
};

}  // namespace litmap
