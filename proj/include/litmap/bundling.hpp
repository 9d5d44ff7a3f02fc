#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "litmap/common.hpp"
#include "litmap/geometry.hpp"

namespace litmap {

struct RawEdge {
    std::string source;
    std::string target;
    double weight = 1.0;

    bool operator==(const RawEdge&) const = default;
};

struct BundledEdge {
    std::string source;
    std::string target;
    double weight = 1.0;
    std::vector<Point2> points;

    bool operator==(const BundledEdge&) const = default;
};

struct Resampled {
    std::vector<Point2> points;
    bool degenerate = false;  // all points coincide; returned unchanged
};

/// Splits every segment longer than max_segment_length into ceil(len / max)
/// equal pieces. Existing vertices are kept bit-for-bit.
inline Resampled resample_polyline(std::span<const Point2> pts, double max_segment_length) {
    if (pts.size() < 2) throw ContractError("resample_polyline: need at least 2 points");
    if (!(max_segment_length > 0.0)) throw ContractError("resample_polyline: max_segment_length must be > 0");
    Resampled out;
    bool all_same = true;
    for (const auto& p : pts) all_same = all_same && p == pts.front();
    if (all_same) {
        out.points.assign(pts.begin(), pts.end());
        out.degenerate = true;
        return out;
    }
    out.points.reserve(pts.size());
    out.points.push_back(pts[0]);
    for (std::size_t s = 1; s < pts.size(); ++s) {
        const Point2 a = pts[s - 1];
        const Point2 b = pts[s];
        const double len = distance(a, b);
        const auto pieces = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / max_segment_length)));
        for (std::size_t k = 1; k < pieces; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(pieces);
            out.points.push_back({a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t});
        }
        out.points.push_back(b);
    }
    return out;
}

/// R×R density field over a square that covers the domain rectangle,
/// centered on it. Grid coordinates put cell centers at integers.
class DensityGrid {
public:
    DensityGrid(const Bounds& domain, int resolution, double bandwidth_cells)
        : r_(resolution), h_(bandwidth_cells) {
        if (resolution < 4) throw ContractError("density grid resolution must be >= 4");
        if (domain.empty()) throw ContractError("density grid domain is empty");
        if (!(bandwidth_cells >= 0.5)) throw ContractError("bandwidth must be >= 0.5 cells");
        const double side = std::max({domain.width(), domain.height(), 1e-12});
        cell_ = side / resolution;
        x0_ = (domain.min_x + domain.max_x) / 2.0 - side / 2.0;
        y0_ = (domain.min_y + domain.max_y) / 2.0 - side / 2.0;
        values_.assign(static_cast<std::size_t>(r_) * static_cast<std::size_t>(r_), 0.0);
    }

    int resolution() const noexcept { return r_; }
    double cell() const noexcept { return cell_; }
    double bandwidth() const noexcept { return h_; }
    void set_bandwidth(double h) {
        if (!(h >= 0.5)) throw ContractError("bandwidth must be >= 0.5 cells");
        h_ = h;
    }
    Point2 origin() const noexcept { return {x0_, y0_}; }

    double at(int i, int j) const { return values_[index(i, j)]; }
    std::span<const double> values() const noexcept { return values_; }
    void clear() { std::fill(values_.begin(), values_.end(), 0.0); }

    Point2 to_grid(const Point2& p) const noexcept { return {(p.x - x0_) / cell_ - 0.5, (p.y - y0_) / cell_ - 0.5}; }
    Point2 cell_center(int i, int j) const noexcept { return {x0_ + (i + 0.5) * cell_, y0_ + (j + 0.5) * cell_}; }

    /// Adds a normalized Gaussian (σ = h cells) truncated at radius 3h.
    void splat(const Point2& p, double weight) { splat_into(values_, 0, 0, r_, r_, p, weight); }

    /// Same kernel accumulated into an external patch covering cells
    /// [i0, i0 + w) × [j0, j0 + hgt).
    void splat_into(std::vector<double>& patch, int i0, int j0, int w, int hgt, const Point2& p, double weight) const {
        const Point2 g = to_grid(p);
        const double rad = 3.0 * h_;
        const double inv2 = 1.0 / (2.0 * h_ * h_);
        const double norm = weight / (2.0 * std::numbers::pi * h_ * h_);
        const int ilo = std::max(i0, static_cast<int>(std::ceil(g.x - rad)));
        const int ihi = std::min(i0 + w - 1, static_cast<int>(std::floor(g.x + rad)));
        const int jlo = std::max(j0, static_cast<int>(std::ceil(g.y - rad)));
        const int jhi = std::min(j0 + hgt - 1, static_cast<int>(std::floor(g.y + rad)));
        if (ilo > ihi || jlo > jhi) return;
        const double r2 = rad * rad;
        thread_local std::vector<double> kx;
        kx.resize(static_cast<std::size_t>(ihi - ilo + 1));
        for (int i = ilo; i <= ihi; ++i) {
            const double dx = i - g.x;
            kx[static_cast<std::size_t>(i - ilo)] = std::exp(-dx * dx * inv2);
        }
        for (int j = jlo; j <= jhi; ++j) {
            const double dy = j - g.y;
            const double ky = norm * std::exp(-dy * dy * inv2);
            auto* row = patch.data() + static_cast<std::size_t>(j - j0) * static_cast<std::size_t>(w);
            for (int i = ilo; i <= ihi; ++i) {
                const double dx = i - g.x;
                if (dx * dx + dy * dy > r2) continue;
                row[i - i0] += kx[static_cast<std::size_t>(i - ilo)] * ky;
            }
        }
    }

    double total_mass() const {
        double s = 0.0;
        for (const double v : values_) s += v;
        return s;
    }

    /// Largest gradient norm over cell centers, in density units per cell.
    double max_gradient() const {
        double m = 0.0;
        for (int j = 0; j < r_; ++j)
            for (int i = 0; i < r_; ++i) {
                const auto g = cell_gradient([this](int a, int b) { return at(a, b); }, i, j);
                m = std::max(m, std::hypot(g.x, g.y));
            }
        return m;
    }

    /// Central differences, one-sided at the border.
    template <class Field>
    Point2 cell_gradient(Field&& f, int i, int j) const {
        Point2 g;
        if (i == 0) g.x = f(1, j) - f(0, j);
        else if (i == r_ - 1) g.x = f(r_ - 1, j) - f(r_ - 2, j);
        else g.x = (f(i + 1, j) - f(i - 1, j)) / 2.0;
        if (j == 0) g.y = f(i, 1) - f(i, 0);
        else if (j == r_ - 1) g.y = f(i, r_ - 1) - f(i, r_ - 2);
        else g.y = (f(i, j + 1) - f(i, j - 1)) / 2.0;
        return g;
    }

    /// Bilinear interpolation of cell gradients at a world position.
    template <class Field>
    Point2 gradient_at(Field&& f, const Point2& world) const {
        const Point2 g = to_grid(world);
        const double u = std::clamp(g.x, 0.0, static_cast<double>(r_ - 1));
        const double v = std::clamp(g.y, 0.0, static_cast<double>(r_ - 1));
        const int i = std::min(static_cast<int>(u), r_ - 2);
        const int j = std::min(static_cast<int>(v), r_ - 2);
        const double tx = u - i;
        const double ty = v - j;
        const auto g00 = cell_gradient(f, i, j);
        const auto g10 = cell_gradient(f, i + 1, j);
        const auto g01 = cell_gradient(f, i, j + 1);
        const auto g11 = cell_gradient(f, i + 1, j + 1);
        auto mix = [&](double a, double b, double c, double d) {
            return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
        };
        return {mix(g00.x, g10.x, g01.x, g11.x), mix(g00.y, g10.y, g01.y, g11.y)};
    }

private:
    std::size_t index(int i, int j) const {
        if (i < 0 || j < 0 || i >= r_ || j >= r_) throw ContractError("density grid index out of range");
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(r_) + static_cast<std::size_t>(i);
    }

    int r_;
    double h_;
    double cell_ = 1.0;
    double x0_ = 0.0;
    double y0_ = 0.0;
    std::vector<double> values_;
};

/// KDE of weighted point sets. Points are added in the given order.
inline DensityGrid splat_density(const std::vector<std::vector<Point2>>& sets, std::span<const double> weights,
                                 const Bounds& domain, int resolution, double bandwidth_cells) {
    if (weights.size() != sets.size()) throw ContractError("splat_density: one weight per point set");
    DensityGrid grid(domain, resolution, bandwidth_cells);
    for (std::size_t s = 0; s < sets.size(); ++s)
        for (const auto& p : sets[s]) grid.splat(p, weights[s]);
    return grid;
}

/// Douglas-Peucker against segment distance. Endpoints are always kept.
inline std::vector<Point2> simplify_polyline(std::span<const Point2> pts, double tolerance) {
    if (pts.size() <= 2) return {pts.begin(), pts.end()};
    auto seg_dist = [](const Point2& p, const Point2& a, const Point2& b) {
        const double vx = b.x - a.x, vy = b.y - a.y;
        const double len2 = vx * vx + vy * vy;
        if (len2 == 0.0) return distance(p, a);
        const double t = std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / len2, 0.0, 1.0);
        return distance(p, {a.x + t * vx, a.y + t * vy});
    };
    std::vector<char> keep(pts.size(), 0);
    keep.front() = keep.back() = 1;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, pts.size() - 1}};
    while (!stack.empty()) {
        const auto [lo, hi] = stack.back();
        stack.pop_back();
        double best = -1.0;
        std::size_t at = lo;
        for (std::size_t k = lo + 1; k < hi; ++k) {
            const double d = seg_dist(pts[k], pts[lo], pts[hi]);
            if (d > best) {
                best = d;
                at = k;
            }
        }
        if (at != lo && best > tolerance) {
            keep[at] = 1;
            stack.push_back({lo, at});
            stack.push_back({at, hi});
        }
    }
    std::vector<Point2> out;
    for (std::size_t k = 0; k < pts.size(); ++k)
        if (keep[k]) out.push_back(pts[k]);
    return out;
}

struct BundleConfig {
    int grid = 256;
    double h0_fraction = 0.05;        // of the map diagonal
    double decay = 0.9;
    int iterations = 10;
    double step = 0.3;                // η
    double smoothing = 0.5;           // λ
    double segment_fraction = 0.02;   // of the map diagonal
    std::optional<double> h0;                  // map units; overrides h0_fraction
    std::optional<double> max_segment_length;  // map units; overrides segment_fraction

    void validate() const {
        if (grid < 4) throw ContractError("bundle: grid must be >= 4");
        if (!(h0_fraction > 0.0) || (h0 && !(*h0 > 0.0))) throw ContractError("bundle: h0 must be > 0");
        if (!(decay > 0.0 && decay <= 1.0)) throw ContractError("bundle: decay must be in (0, 1]");
        if (iterations < 0) throw ContractError("bundle: iterations must be >= 0");
        if (!(step > 0.0)) throw ContractError("bundle: step must be > 0");
        if (!(smoothing >= 0.0 && smoothing <= 1.0)) throw ContractError("bundle: smoothing must be in [0, 1]");
        if (!(segment_fraction > 0.0) || (max_segment_length && !(*max_segment_length > 0.0)))
            throw ContractError("bundle: max segment length must be > 0");
    }
};

struct BundleResult {
    std::vector<BundledEdge> edges;     // input order
    Bounds domain;                      // map bounds expanded by 3·h0
    double cell = 0.0;
    double h0_cells = 0.0;
    double max_segment_length = 0.0;
    std::size_t straight_segments = 0;  // chords resampled at max_segment_length
    std::size_t bundled_segments = 0;   // final polylines before simplification
    std::size_t rendered_segments = 0;  // after simplification
};

namespace detail {

inline std::size_t segment_count(const std::vector<Point2>& pts) { return pts.empty() ? 0 : pts.size() - 1; }

}  // namespace detail

/// Kernel density estimation edge bundling.
///
/// Each interior control point climbs the density of the other edges: an
/// edge's own kernels are subtracted before the gradient is taken, so an
/// edge with no neighbours keeps its shape.
inline BundleResult bundle_edges(std::span<const RawEdge> raw, const std::unordered_map<std::string, Point2>& coords,
                                 const BundleConfig& cfg = {}) {
    cfg.validate();
    BundleResult result;
    Bounds map_bounds;
    for (const auto& [id, p] : coords) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ContractError("bundle: non-finite coordinate for " + id);
        map_bounds.extend(p);
    }
    auto endpoint = [&](const std::string& id) {
        const auto it = coords.find(id);
        if (it == coords.end()) throw ContractError("bundle: unknown endpoint " + id);
        return it->second;
    };
    for (const auto& e : raw) {
        if (e.source == e.target) throw ContractError("bundle: self-loop on " + e.source);
        if (!(e.weight > 0.0) || !std::isfinite(e.weight)) throw ContractError("bundle: edge weight must be > 0");
        endpoint(e.source);
        endpoint(e.target);
    }
    result.edges.resize(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k)
        result.edges[k] = {raw[k].source, raw[k].target, raw[k].weight,
                           {endpoint(raw[k].source), endpoint(raw[k].target)}};
    const double diag = map_bounds.diagonal();
    if (raw.empty() || diag == 0.0) {
        for (const auto& e : result.edges) result.straight_segments += detail::segment_count(e.points);
        result.bundled_segments = result.rendered_segments = result.straight_segments;
        result.domain = map_bounds;
        return result;
    }

    const double h0 = cfg.h0.value_or(cfg.h0_fraction * diag);
    const double max_seg = cfg.max_segment_length.value_or(cfg.segment_fraction * diag);
    result.domain = map_bounds.expanded(3.0 * h0);
    result.max_segment_length = max_seg;
    DensityGrid grid(result.domain, cfg.grid, 0.5);
    const double cell = grid.cell();
    result.cell = cell;
    result.h0_cells = std::max(0.5, h0 / cell);
    grid.set_bandwidth(result.h0_cells);

    // Canonical processing order makes the density sum independent of input order.
    std::vector<std::size_t> order(raw.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(raw[a].source, raw[a].target, raw[a].weight) <
               std::tie(raw[b].source, raw[b].target, raw[b].weight);
    });

    std::vector<char> degenerate(raw.size(), 0);
    for (std::size_t k = 0; k < raw.size(); ++k) {
        auto& e = result.edges[k];
        const auto rs = resample_polyline(e.points, max_seg);
        degenerate[k] = rs.degenerate;
        result.straight_segments += detail::segment_count(rs.points);
    }

    std::vector<double> patch;
    std::vector<Point2> moved;
    const int R = cfg.grid;
    for (int it = 0; it < cfg.iterations; ++it) {
        for (const auto k : order)
            if (!degenerate[k]) result.edges[k].points = resample_polyline(result.edges[k].points, max_seg).points;

        grid.clear();
        for (const auto k : order) {
            const auto& pts = result.edges[k].points;
            for (std::size_t p = 1; p + 1 < pts.size(); ++p) grid.splat(pts[p], raw[k].weight);
        }
        const double eps = 1e-3 * grid.max_gradient();
        const double h = grid.bandwidth();
        const int reach = static_cast<int>(std::ceil(3.0 * h)) + 2;

        for (const auto k : order) {
            auto& pts = result.edges[k].points;
            if (degenerate[k] || pts.size() < 3 || eps == 0.0) continue;
            int i0 = R, j0 = R, i1 = -1, j1 = -1;
            for (std::size_t p = 1; p + 1 < pts.size(); ++p) {
                const Point2 g = grid.to_grid(pts[p]);
                i0 = std::min(i0, static_cast<int>(std::floor(g.x)) - reach);
                j0 = std::min(j0, static_cast<int>(std::floor(g.y)) - reach);
                i1 = std::max(i1, static_cast<int>(std::ceil(g.x)) + reach);
                j1 = std::max(j1, static_cast<int>(std::ceil(g.y)) + reach);
            }
            i0 = std::max(i0, 0);
            j0 = std::max(j0, 0);
            i1 = std::min(i1, R - 1);
            j1 = std::min(j1, R - 1);
            const int w = i1 - i0 + 1;
            const int hgt = j1 - j0 + 1;
            patch.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(hgt), 0.0);
            for (std::size_t p = 1; p + 1 < pts.size(); ++p) grid.splat_into(patch, i0, j0, w, hgt, pts[p], raw[k].weight);
            auto others = [&](int i, int j) {
                double v = grid.at(i, j);
                if (i >= i0 && i <= i1 && j >= j0 && j <= j1)
                    v -= patch[static_cast<std::size_t>(j - j0) * static_cast<std::size_t>(w) + static_cast<std::size_t>(i - i0)];
                return v;
            };

            moved = pts;
            for (std::size_t p = 1; p + 1 < pts.size(); ++p) {
                const Point2 g = grid.gradient_at(others, pts[p]);
                const double norm = std::hypot(g.x, g.y);
                if (norm == 0.0) continue;
                double dx = cfg.step * h * g.x / (norm + eps);
                double dy = cfg.step * h * g.y / (norm + eps);
                const double len = std::hypot(dx, dy);
                if (len > 1.0) {
                    dx /= len;
                    dy /= len;
                }
                moved[p] = result.domain.clamp({pts[p].x + dx * cell, pts[p].y + dy * cell});
            }
            for (std::size_t p = 1; p + 1 < pts.size(); ++p) {
                const Point2 a = moved[p - 1], b = moved[p], c = moved[p + 1];
                const Point2 q{b.x + cfg.smoothing * ((a.x + c.x) / 2.0 - b.x),
                               b.y + cfg.smoothing * ((a.y + c.y) / 2.0 - b.y)};
                if (!std::isfinite(q.x) || !std::isfinite(q.y))
                    throw NumericalError("bundle: edge " + std::to_string(k) + " (" + raw[k].source + " -> " +
                                         raw[k].target + ") non-finite at iteration " + std::to_string(it));
                pts[p] = result.domain.clamp(q);
            }
        }
        grid.set_bandwidth(std::max(0.5, h * cfg.decay));
    }

    const double tolerance = cell / 4.0;
    for (auto& e : result.edges) {
        result.bundled_segments += detail::segment_count(e.points);
        e.points = simplify_polyline(e.points, tolerance);
        result.rendered_segments += detail::segment_count(e.points);
    }
    return result;
}

struct CitationLink {
    std::string citing;
    std::string cited;
};

/// Reads "citing<TAB>cited" rows; a first row naming those columns is skipped.
inline std::vector<CitationLink> read_citation_links(std::istream& in) {
    std::vector<CitationLink> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 2) throw ParseError(lineno, "expected 2 columns: citing, cited");
        const auto a = std::string(trim(cols[0]));
        const auto b = std::string(trim(cols[1]));
        if (lineno == 1 && a == "citing" && b == "cited") continue;
        if (a.empty() || b.empty()) throw ParseError(lineno, "empty pmid");
        out.push_back({a, b});
    }
    return out;
}

/// Links two dataset articles by the number of papers citing both.
inline std::vector<RawEdge> cocitation_edges(std::span<const CitationLink> links,
                                             const std::unordered_set<std::string>& dataset, int min_weight = 2) {
    std::map<std::string, std::set<std::string>> cited_by;
    for (const auto& l : links)
        if (dataset.contains(l.cited)) cited_by[l.citing].insert(l.cited);
    std::map<std::pair<std::string, std::string>, int> counts;
    for (const auto& [citing, cited] : cited_by) {
        const std::vector<std::string> v(cited.begin(), cited.end());
        for (std::size_t a = 0; a < v.size(); ++a)
            for (std::size_t b = a + 1; b < v.size(); ++b) ++counts[{v[a], v[b]}];
    }
    std::vector<RawEdge> out;
    for (const auto& [pair, c] : counts)
        if (c >= min_weight) out.push_back({pair.first, pair.second, static_cast<double>(c)});
    return out;
}

/// Direct citations between dataset articles, weight 1, deduplicated.
inline std::vector<RawEdge> citation_edges(std::span<const CitationLink> links,
                                           const std::unordered_set<std::string>& dataset) {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& l : links)
        if (l.citing != l.cited && dataset.contains(l.citing) && dataset.contains(l.cited))
            seen.insert({l.citing, l.cited});
    std::vector<RawEdge> out;
    for (const auto& [a, b] : seen) out.push_back({a, b, 1.0});
    return out;
}

}  // namespace litmap
