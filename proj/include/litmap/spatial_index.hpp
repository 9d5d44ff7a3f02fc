#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "litmap/common.hpp"
#include "litmap/geometry.hpp"

namespace litmap {

struct IndexedPoint {
    std::string pmid;
    Point2 p;
};

struct QueryStats {
    std::size_t distance_evaluations = 0;
    std::size_t nodes_visited = 0;
};

struct Hit {
    std::string pmid;
    std::size_t index = 0;
    double distance = 0.0;
};

/// Even-odd containment; points on an edge count as inside.
inline bool point_in_polygon(std::span<const Point2> poly, const Point2& p) {
    if (poly.size() < 3) throw ContractError("polygon needs at least 3 vertices");
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Point2 a = poly[j], b = poly[i];
        const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (cross == 0.0 && p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
            p.y <= std::max(a.y, b.y))
            return true;
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

/// Liang-Barsky test of a segment against a closed rectangle.
inline bool segment_touches_box(const Point2& a, const Point2& b, const Bounds& box) {
    double t0 = 0.0, t1 = 1.0;
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.x - box.min_x, box.max_x - a.x, a.y - box.min_y, box.max_y - a.y};
    for (int k = 0; k < 4; ++k) {
        if (p[k] == 0.0) {
            if (q[k] < 0.0) return false;
            continue;
        }
        const double t = q[k] / p[k];
        if (p[k] < 0.0) t0 = std::max(t0, t);
        else t1 = std::min(t1, t);
        if (t0 > t1) return false;
    }
    return true;
}

/// Bucket PR quadtree. Leaves hold up to `capacity` points and split into
/// four quadrants when they overflow, except at max_depth where they keep
/// growing.
class Quadtree {
public:
    struct Node {
        Bounds box;
        int depth = 0;
        std::array<std::int32_t, 4> child{-1, -1, -1, -1};  // SW, SE, NW, NE
        std::vector<std::uint32_t> items;

        bool leaf() const noexcept { return child[0] < 0; }
    };

    Quadtree(const Bounds& bounds, std::size_t capacity = 16, int max_depth = 24)
        : capacity_(capacity), max_depth_(max_depth) {
        if (capacity < 1) throw ContractError("quadtree capacity must be >= 1");
        if (max_depth < 1) throw ContractError("quadtree max_depth must be >= 1");
        if (bounds.empty()) throw ContractError("quadtree bounds are empty");
        nodes_.push_back({bounds, 0, {-1, -1, -1, -1}, {}});
    }

    /// Bounds are the data box expanded by a 1e-6 relative margin.
    static Quadtree build(std::span<const IndexedPoint> points, std::size_t capacity = 16, int max_depth = 24) {
        Bounds b;
        for (const auto& ip : points) {
            if (!std::isfinite(ip.p.x) || !std::isfinite(ip.p.y))
                throw ContractError("quadtree build: non-finite coordinate for pmid " + ip.pmid);
            b.extend(ip.p);
        }
        if (b.empty()) b = {0.0, 0.0, 0.0, 0.0};
        const double extent = std::max({b.width(), b.height(), std::abs(b.min_x), std::abs(b.max_x),
                                        std::abs(b.min_y), std::abs(b.max_y), 1.0});
        Quadtree tree(b.expanded(1e-6 * extent), capacity, max_depth);
        for (const auto& ip : points) tree.insert(ip.pmid, ip.p);
        return tree;
    }

    void insert(std::string pmid, const Point2& p) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw ContractError("quadtree insert: non-finite coordinate for pmid " + pmid);
        if (!nodes_[0].box.contains(p)) throw ContractError("quadtree insert: pmid " + pmid + " lies outside the bounds");
        const auto idx = static_cast<std::uint32_t>(pts_.size());
        pts_.push_back(p);
        ids_.push_back(std::move(pmid));
        place(0, idx);
    }

    std::size_t size() const noexcept { return pts_.size(); }
    const Bounds& bounds() const noexcept { return nodes_[0].box; }
    std::size_t capacity() const noexcept { return capacity_; }
    int max_depth() const noexcept { return max_depth_; }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::string& pmid(std::size_t i) const { return ids_.at(i); }
    const Point2& point(std::size_t i) const { return pts_.at(i); }

    /// Indices of points within `radius` of `center` (inclusive), ascending.
    std::vector<std::size_t> circle_indices(const Point2& center, double radius, QueryStats* stats = nullptr) const {
        if (!(radius >= 0.0)) throw ContractError("query radius must be >= 0");
        std::vector<std::size_t> out;
        QueryStats local;
        std::vector<std::int32_t> stack{0};
        while (!stack.empty()) {
            const auto& node = nodes_[static_cast<std::size_t>(stack.back())];
            stack.pop_back();
            ++local.nodes_visited;
            if (box_distance(node.box, center) > radius) continue;
            if (node.leaf()) {
                for (const auto i : node.items) {
                    ++local.distance_evaluations;
                    if (distance(pts_[i], center) <= radius) out.push_back(i);
                }
            } else {
                for (const auto c : node.child) stack.push_back(c);
            }
        }
        if (stats) *stats = local;
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Sorted pmids within the circle.
    std::vector<std::string> query_circle(const Point2& center, double radius, QueryStats* stats = nullptr) const {
        return to_pmids(circle_indices(center, radius, stats));
    }

    /// Closest point within the radius; ties go to the smaller pmid.
    std::optional<Hit> nearest_in_radius(const Point2& cursor, double radius, QueryStats* stats = nullptr) const {
        if (!(radius > 0.0)) throw ContractError("hover radius must be > 0");
        std::optional<Hit> best;
        QueryStats local;
        std::vector<std::int32_t> stack{0};
        while (!stack.empty()) {
            const auto& node = nodes_[static_cast<std::size_t>(stack.back())];
            stack.pop_back();
            ++local.nodes_visited;
            const double bound = best ? best->distance : radius;
            if (box_distance(node.box, cursor) > bound) continue;
            if (node.leaf()) {
                for (const auto i : node.items) {
                    ++local.distance_evaluations;
                    const double d = distance(pts_[i], cursor);
                    if (d > radius) continue;
                    if (!best || d < best->distance || (d == best->distance && ids_[i] < best->pmid))
                        best = Hit{ids_[i], i, d};
                }
            } else {
                for (const auto c : node.child) stack.push_back(c);
            }
        }
        if (stats) *stats = local;
        return best;
    }

    /// Indices inside the polygon, ascending.
    std::vector<std::size_t> polygon_indices(std::span<const Point2> poly, QueryStats* stats = nullptr) const {
        if (poly.size() < 3) throw ContractError("polygon needs at least 3 vertices");
        const Bounds pb = Bounds::of(poly);
        std::vector<std::size_t> out;
        QueryStats local;
        std::vector<std::int32_t> stack{0};
        while (!stack.empty()) {
            const auto& node = nodes_[static_cast<std::size_t>(stack.back())];
            stack.pop_back();
            ++local.nodes_visited;
            if (node.box.max_x < pb.min_x || node.box.min_x > pb.max_x || node.box.max_y < pb.min_y ||
                node.box.min_y > pb.max_y)
                continue;
            if (!crosses_boundary(poly, node.box)) {
                // Parity is constant over the box, so one corner decides it.
                if (point_in_polygon(poly, {node.box.min_x, node.box.min_y})) collect(node, out);
                continue;
            }
            if (node.leaf()) {
                for (const auto i : node.items) {
                    ++local.distance_evaluations;
                    if (point_in_polygon(poly, pts_[i])) out.push_back(i);
                }
            } else {
                for (const auto c : node.child) stack.push_back(c);
            }
        }
        if (stats) *stats = local;
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<std::string> query_polygon(std::span<const Point2> poly, QueryStats* stats = nullptr) const {
        return to_pmids(polygon_indices(poly, stats));
    }

private:
    static double box_distance(const Bounds& b, const Point2& p) {
        const double dx = std::max({b.min_x - p.x, 0.0, p.x - b.max_x});
        const double dy = std::max({b.min_y - p.y, 0.0, p.y - b.max_y});
        return std::hypot(dx, dy);
    }

    static bool crosses_boundary(std::span<const Point2> poly, const Bounds& box) {
        for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
            if (segment_touches_box(poly[j], poly[i], box)) return true;
        return false;
    }

    void collect(const Node& node, std::vector<std::size_t>& out) const {
        std::vector<const Node*> stack{&node};
        while (!stack.empty()) {
            const Node* n = stack.back();
            stack.pop_back();
            if (n->leaf()) out.insert(out.end(), n->items.begin(), n->items.end());
            else
                for (const auto c : n->child) stack.push_back(&nodes_[static_cast<std::size_t>(c)]);
        }
    }

    std::vector<std::string> to_pmids(const std::vector<std::size_t>& idx) const {
        std::vector<std::string> out;
        out.reserve(idx.size());
        for (const auto i : idx) out.push_back(ids_[i]);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::size_t quadrant(const Node& n, const Point2& p) const {
        const double mx = (n.box.min_x + n.box.max_x) / 2.0;
        const double my = (n.box.min_y + n.box.max_y) / 2.0;
        return (p.x >= mx ? 1u : 0u) + (p.y >= my ? 2u : 0u);
    }

    void place(std::size_t node, std::uint32_t idx) {
        while (!nodes_[node].leaf()) node = static_cast<std::size_t>(nodes_[node].child[quadrant(nodes_[node], pts_[idx])]);
        nodes_[node].items.push_back(idx);
        if (nodes_[node].items.size() > capacity_ && nodes_[node].depth < max_depth_) split(node);
    }

    void split(std::size_t node) {
        const Bounds b = nodes_[node].box;
        const int depth = nodes_[node].depth + 1;
        const double mx = (b.min_x + b.max_x) / 2.0;
        const double my = (b.min_y + b.max_y) / 2.0;
        const Bounds quads[4] = {{b.min_x, b.min_y, mx, my},
                                 {mx, b.min_y, b.max_x, my},
                                 {b.min_x, my, mx, b.max_y},
                                 {mx, my, b.max_x, b.max_y}};
        for (int q = 0; q < 4; ++q) {
            nodes_[node].child[static_cast<std::size_t>(q)] = static_cast<std::int32_t>(nodes_.size());
            nodes_.push_back({quads[q], depth, {-1, -1, -1, -1}, {}});
        }
        auto items = std::move(nodes_[node].items);
        nodes_[node].items.clear();
        for (const auto i : items) place(node, i);
    }

    std::size_t capacity_;
    int max_depth_;
    std::vector<Node> nodes_;
    std::vector<Point2> pts_;
    std::vector<std::string> ids_;
};

}  // namespace litmap
