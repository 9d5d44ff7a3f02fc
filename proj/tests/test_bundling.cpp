#include <gtest/gtest.h>

#include <sstream>

#include "litmap/bundling.hpp"
#include "oracles.hpp"

using namespace litmap;

namespace {

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double t = std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

std::unordered_map<std::string, Point2> random_coords(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 100);
    std::unordered_map<std::string, Point2> c;
    for (std::size_t i = 0; i < n; ++i) c["n" + std::to_string(i)] = {u(rng), u(rng)};
    return c;
}

std::vector<RawEdge> random_edges(std::size_t n_nodes, std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::vector<RawEdge> out;
    while (out.size() < m) {
        auto a = rng() % n_nodes, b = rng() % n_nodes;
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        if (!seen.insert({a, b}).second) continue;
        out.push_back({"n" + std::to_string(a), "n" + std::to_string(b), 1.0 + static_cast<double>(rng() % 3)});
    }
    return out;
}

}  // namespace

TEST(Resample, SplitsByCeilingRule) {
    const std::vector<Point2> seg{{0, 0}, {1, 0}};
    const auto half = resample_polyline(seg, 0.5).points;
    ASSERT_EQ(half.size(), 3u);
    EXPECT_DOUBLE_EQ(half[1].x, 0.5);
    const auto r = resample_polyline(seg, 0.3).points;
    ASSERT_EQ(r.size(), 5u);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(r[static_cast<std::size_t>(i)].x, 0.25 * i, 1e-15);
    EXPECT_EQ(r.front(), seg.front());
    EXPECT_EQ(r.back(), seg.back());
}

TEST(Resample, FinePolylineUnchangedAndDegenerateFlagged) {
    const std::vector<Point2> fine{{0, 0}, {0.1, 0.1}, {0.2, 0.1}};
    EXPECT_EQ(resample_polyline(fine, 1.0).points, fine);
    const std::vector<Point2> same{{1, 1}, {1, 1}};
    const auto d = resample_polyline(same, 0.1);
    EXPECT_TRUE(d.degenerate);
    EXPECT_EQ(d.points, same);
    EXPECT_THROW(resample_polyline(fine, 0.0), ContractError);
}

TEST(Density, SinglePointPeaksAtItsCellSymmetrically) {
    const Bounds dom{0, 0, 32, 32};
    DensityGrid g(dom, 32, 2.0);
    const auto c = g.cell_center(10, 20);
    g.splat(c, 1.0);
    double best = -1;
    int bi = -1, bj = -1;
    for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i)
            if (g.at(i, j) > best) {
                best = g.at(i, j);
                bi = i;
                bj = j;
            }
    EXPECT_EQ(bi, 10);
    EXPECT_EQ(bj, 20);
    EXPECT_DOUBLE_EQ(g.at(9, 20), g.at(11, 20));
    EXPECT_DOUBLE_EQ(g.at(10, 19), g.at(10, 21));
    EXPECT_DOUBLE_EQ(g.at(9, 19), g.at(11, 21));
}

TEST(Density, LinearInWeight) {
    const Bounds dom{0, 0, 10, 10};
    const Point2 p{3.3, 6.1};
    const auto one = splat_density({{p}}, std::vector<double>{1.0}, dom, 16, 1.5);
    const auto two = splat_density({{p, p}}, std::vector<double>{1.0}, dom, 16, 1.5);
    for (std::size_t i = 0; i < one.values().size(); ++i) EXPECT_DOUBLE_EQ(two.values()[i], 2 * one.values()[i]);
}

TEST(Simplify, KeepsEndpointsAndBoundsError) {
    std::vector<Point2> wave;
    for (int i = 0; i <= 100; ++i) wave.push_back({i * 0.1, std::sin(i * 0.1)});
    const auto s = simplify_polyline(wave, 0.01);
    EXPECT_EQ(s.front(), wave.front());
    EXPECT_EQ(s.back(), wave.back());
    EXPECT_LT(s.size(), wave.size());
    for (const auto& p : wave) {
        double best = 1e9;
        for (std::size_t i = 0; i + 1 < s.size(); ++i) best = std::min(best, point_segment_distance(p, s[i], s[i + 1]));
        EXPECT_LE(best, 0.01 + 1e-12);
    }
    const std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
    EXPECT_EQ(simplify_polyline(line, 1e-9).size(), 2u);
}

TEST(Bundle, IsolatedEdgeStaysOnChord) {
    const std::unordered_map<std::string, Point2> c{{"a", {0, 0}}, {"b", {10, 3}}, {"x", {0, 10}}, {"y", {10, 10}}};
    const std::vector<RawEdge> e{{"a", "b", 1.0}};
    const auto r = bundle_edges(e, c);
    const auto& pts = r.edges[0].points;
    EXPECT_EQ(pts.front(), (Point2{0, 0}));
    EXPECT_EQ(pts.back(), (Point2{10, 3}));
    for (const auto& p : pts) EXPECT_LE(point_segment_distance(p, pts.front(), pts.back()), 1e-6);
}

TEST(Bundle, ParallelEdgesMoveTogether) {
    const double h0 = 1.0;
    const std::unordered_map<std::string, Point2> c{
        {"a", {0, 0}}, {"b", {20, 0}}, {"c", {0, 2 * h0}}, {"d", {20, 2 * h0}}, {"m", {-5, -10}}, {"n", {25, 12}}};
    const std::vector<RawEdge> e{{"a", "b", 1.0}, {"c", "d", 1.0}};
    BundleConfig cfg;
    cfg.h0 = h0;
    const auto r = bundle_edges(e, c, cfg);
    auto mid_y = [](const std::vector<Point2>& pts) {
        double best = 1e9, y = 0;
        for (const auto& p : pts)
            if (std::abs(p.x - 10) < best) {
                best = std::abs(p.x - 10);
                y = p.y;
            }
        return y;
    };
    const double before = 2 * h0;
    const double after = mid_y(r.edges[1].points) - mid_y(r.edges[0].points);
    EXPECT_LT(std::abs(after), before);
}

TEST(Bundle, EndpointsPinnedAndPermutationInvariant) {
    const auto coords = random_coords(120, 5);
    const auto edges = random_edges(120, 200, 6);
    const auto r = bundle_edges(edges, coords);
    ASSERT_EQ(r.edges.size(), edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        EXPECT_EQ(r.edges[k].points.front(), coords.at(edges[k].source));
        EXPECT_EQ(r.edges[k].points.back(), coords.at(edges[k].target));
        for (const auto& p : r.edges[k].points) EXPECT_TRUE(std::isfinite(p.x) && std::isfinite(p.y));
    }
    std::vector<std::size_t> perm(edges.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(99));
    std::vector<RawEdge> shuffled;
    for (const auto p : perm) shuffled.push_back(edges[p]);
    const auto r2 = bundle_edges(shuffled, coords);
    for (std::size_t k = 0; k < perm.size(); ++k) EXPECT_EQ(r2.edges[k], r.edges[perm[k]]) << k;
    EXPECT_LE(r.rendered_segments, r.bundled_segments);
}

TEST(Bundle, RejectsBadInput) {
    const std::unordered_map<std::string, Point2> c{{"a", {0, 0}}, {"b", {1, 1}}};
    const std::vector<RawEdge> loop{{"a", "a", 1.0}};
    EXPECT_THROW(bundle_edges(loop, c), ContractError);
    const std::vector<RawEdge> unknown{{"a", "z", 1.0}};
    EXPECT_THROW(bundle_edges(unknown, c), ContractError);
    BundleConfig bad;
    bad.decay = 1.5;
    const std::vector<RawEdge> ok{{"a", "b", 1.0}};
    EXPECT_THROW(bundle_edges(ok, c, bad), ContractError);
}

TEST(Citations, CocitationCountsSharedCiters) {
    std::istringstream in("citing\tcited\n9\t1\n9\t2\n8\t1\n8\t2\n8\t3\n7\t2\n7\t3\n7\t99\n");
    const auto links = read_citation_links(in);
    EXPECT_EQ(links.size(), 8u);
    const std::unordered_set<std::string> ds{"1", "2", "3"};
    const auto e = cocitation_edges(links, ds, 2);
    ASSERT_EQ(e.size(), 2u);
    EXPECT_EQ(e[0], (RawEdge{"1", "2", 2.0}));
    EXPECT_EQ(e[1], (RawEdge{"2", "3", 2.0}));
    EXPECT_EQ(cocitation_edges(links, ds, 1).size(), 3u);
}

TEST(Citations, DirectEdgesInsideDataset) {
    std::istringstream in("1\t2\n1\t2\n2\t3\n5\t1\n");
    const auto links = read_citation_links(in);
    const std::unordered_set<std::string> ds{"1", "2", "3"};
    const auto e = citation_edges(links, ds);
    EXPECT_EQ(e.size(), 2u);
    std::istringstream bad("1\t2\t3\n");
    EXPECT_THROW(read_citation_links(bad), ParseError);
}
