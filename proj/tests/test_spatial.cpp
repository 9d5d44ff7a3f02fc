#include <gtest/gtest.h>

#include "litmap/spatial_index.hpp"
#include "oracles.hpp"

using namespace litmap;

namespace {

std::vector<IndexedPoint> random_points(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-50, 50);
    std::vector<IndexedPoint> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({std::to_string(1000000 + i), {u(rng), u(rng)}});
    return pts;
}

std::vector<Point2> star(std::mt19937_64& rng, double cx, double cy, double r) {
    std::uniform_real_distribution<double> u(0.3, 1.0);
    const int k = 5 + static_cast<int>(rng() % 8);
    std::vector<Point2> poly;
    for (int i = 0; i < k; ++i) {
        const double a = 2 * std::numbers::pi * i / k;
        const double rr = r * (i % 2 ? u(rng) * 0.5 : u(rng));
        poly.push_back({cx + rr * std::cos(a), cy + rr * std::sin(a)});
    }
    return poly;
}

}  // namespace

TEST(Quadtree, CapacityAndSplitRules) {
    const std::vector<IndexedPoint> four{{"1", {0, 0}}, {"2", {1, 0}}, {"3", {0, 1}}, {"4", {1, 1}}};
    const auto t4 = Quadtree::build(four, 4);
    EXPECT_EQ(t4.nodes().size(), 1u);
    auto five = four;
    five.push_back({"5", {0.5, 0.5}});
    const auto t5 = Quadtree::build(five, 4);
    EXPECT_EQ(t5.nodes().size(), 5u);
}

TEST(Quadtree, IdenticalPointsStopAtMaxDepth) {
    std::vector<IndexedPoint> pts;
    for (int i = 0; i < 1000; ++i) pts.push_back({std::to_string(i), {3, 3}});
    const auto t = Quadtree::build(pts, 16, 8);
    int depth = 0;
    std::size_t overflow = 0;
    for (const auto& n : t.nodes()) {
        depth = std::max(depth, n.depth);
        if (n.leaf() && n.items.size() > 16) overflow = n.items.size();
    }
    EXPECT_LE(depth, 8);
    EXPECT_EQ(overflow, 1000u);
    const auto hits = t.query_circle({3, 3}, 0.0);
    EXPECT_EQ(hits.size(), 1000u);
}

TEST(Quadtree, CircleExamples) {
    const std::vector<IndexedPoint> pts{{"a", {0, 0}}, {"b", {1, 1}}, {"c", {2, 2}}, {"d", {1, 1}}};
    const auto t = Quadtree::build(pts);
    auto got = t.query_circle({0, 0}, 1.5);
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, (std::vector<std::string>{"a", "b", "d"}));
    got = t.query_circle({1, 1}, 0.0);
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, (std::vector<std::string>{"b", "d"}));
}

TEST(Quadtree, NearestExamples) {
    const std::vector<IndexedPoint> pts{{"9", {1, 0}}, {"2", {-1, 0}}, {"5", {5, 5}}};
    const auto t = Quadtree::build(pts);
    const auto on = t.nearest_in_radius({5, 5}, 1.0);
    ASSERT_TRUE(on);
    EXPECT_EQ(on->pmid, "5");
    EXPECT_EQ(on->distance, 0.0);
    const auto tie = t.nearest_in_radius({0, 0}, 2.0);
    ASSERT_TRUE(tie);
    EXPECT_EQ(tie->pmid, "2");
    EXPECT_FALSE(t.nearest_in_radius({20, 20}, 1.0));
}

TEST(Quadtree, PolygonExamples) {
    const std::vector<Point2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    EXPECT_TRUE(point_in_polygon(square, {0.5, 0.5}));
    EXPECT_FALSE(point_in_polygon(square, {2, 2}));
    EXPECT_TRUE(point_in_polygon(square, {1, 0.5}));
    EXPECT_TRUE(point_in_polygon(square, {0, 0}));
    const std::vector<Point2> two{{0, 0}, {1, 1}};
    EXPECT_THROW(point_in_polygon(two, {0, 0}), ContractError);
}

TEST(Quadtree, RandomQueriesMatchLinearScan) {
    const auto pts = random_points(3000, 17);
    const auto t = Quadtree::build(pts);
    std::mt19937_64 rng(18);
    std::uniform_real_distribution<double> u(-60, 60), r(0, 15);
    for (int q = 0; q < 200; ++q) {
        const Point2 c{u(rng), u(rng)};
        const double rad = r(rng);
        std::set<std::size_t> want;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (std::hypot(pts[i].p.x - c.x, pts[i].p.y - c.y) <= rad) want.insert(i);
        const auto got = t.circle_indices(c, rad);
        EXPECT_EQ(std::set<std::size_t>(got.begin(), got.end()), want);

        std::optional<std::pair<double, std::string>> best;
        for (const auto& p : pts) {
            const double d = std::hypot(p.p.x - c.x, p.p.y - c.y);
            if (d <= rad && (!best || std::make_pair(d, p.pmid) < *best)) best = {d, p.pmid};
        }
        const auto hit = t.nearest_in_radius(c, rad);
        ASSERT_EQ(hit.has_value(), best.has_value());
        if (hit) EXPECT_EQ(hit->pmid, best->second);

        const auto poly = star(rng, c.x, c.y, 5 + rad);
        std::vector<std::pair<double, double>> op;
        for (const auto& v : poly) op.push_back({v.x, v.y});
        std::set<std::size_t> pin;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (oracle::inside_polygon(op, pts[i].p.x, pts[i].p.y)) pin.insert(i);
        const auto pg = t.polygon_indices(poly);
        EXPECT_EQ(std::set<std::size_t>(pg.begin(), pg.end()), pin);
    }
}

TEST(Quadtree, RejectsNonFinitePoint) {
    std::vector<IndexedPoint> pts{{"1", {0, 0}}, {"77", {std::nan(""), 0}}};
    try {
        Quadtree::build(pts);
        FAIL();
    } catch (const ContractError& e) {
        EXPECT_NE(std::string(e.what()).find("77"), std::string::npos);
    }
}

TEST(Quadtree, SegmentBoxTouch) {
    const Bounds box{0, 0, 1, 1};
    EXPECT_TRUE(segment_touches_box({-1, 0.5}, {2, 0.5}, box));
    EXPECT_TRUE(segment_touches_box({0.2, 0.2}, {0.3, 0.3}, box));
    EXPECT_FALSE(segment_touches_box({-1, 2}, {2, 3}, box));
}
