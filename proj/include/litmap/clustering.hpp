#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "litmap/common.hpp"
#include "litmap/geometry.hpp"

namespace litmap {

/// Tie-break ranks: position of each id in sorted order, or the index when
/// no ids are given.
inline std::vector<std::size_t> id_ranks(std::size_t n, std::span<const std::string> ids) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (!ids.empty()) {
        if (ids.size() != n) throw ContractError("id count does not match point count");
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
    }
    std::vector<std::size_t> rank(n);
    for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;
    return rank;
}

/// Distance from each point to its k-th nearest other point.
inline std::vector<double> core_distances(std::span<const Point2> pts, std::size_t k) {
    const std::size_t n = pts.size();
    if (k < 1 || n <= k) throw ContractError("core_distances: need n > k >= 1");
    std::vector<double> core(n);
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) d[c++] = distance(pts[i], pts[j]);
        std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
        core[i] = d[k - 1];
    }
    return core;
}

inline double mutual_reachability(std::span<const Point2> pts, std::span<const double> core, std::size_t a,
                                  std::size_t b) {
    return std::max({core[a], core[b], distance(pts[a], pts[b])});
}

struct MstEdge {
    std::size_t a = 0;
    std::size_t b = 0;
    double weight = 0.0;

    bool operator==(const MstEdge&) const = default;
};

/// Minimum spanning tree of the mutual-reachability graph (dense Prim).
/// Edges are totally ordered by (weight, min rank, max rank), which makes the
/// tree unique; the result is sorted in that order.
inline std::vector<MstEdge> mst_mutual_reachability(std::span<const Point2> pts, std::size_t min_samples,
                                                    std::span<const std::string> ids = {}) {
    const std::size_t n = pts.size();
    if (n < 2) throw ContractError("mst_mutual_reachability: need at least 2 points");
    const auto core = core_distances(pts, min_samples);
    const auto rank = id_ranks(n, ids);
    using Key = std::tuple<double, std::size_t, std::size_t>;
    auto key = [&](std::size_t u, std::size_t v, double w) {
        return Key{w, std::min(rank[u], rank[v]), std::max(rank[u], rank[v])};
    };

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<Key> best(n, Key{inf, 0, 0});
    std::vector<std::size_t> from(n, n);
    std::vector<char> in_tree(n, 0);
    std::size_t current = static_cast<std::size_t>(std::min_element(rank.begin(), rank.end()) - rank.begin());
    in_tree[current] = 1;
    std::vector<MstEdge> edges;
    edges.reserve(n - 1);
    for (std::size_t step = 1; step < n; ++step) {
        std::size_t next = n;
        for (std::size_t v = 0; v < n; ++v) {
            if (in_tree[v]) continue;
            const double w = mutual_reachability(pts, core, current, v);
            const auto k = key(current, v, w);
            if (k < best[v]) {
                best[v] = k;
                from[v] = current;
            }
            if (next == n || best[v] < best[next]) next = v;
        }
        in_tree[next] = 1;
        const auto u = from[next];
        edges.push_back({std::min(u, next), std::max(u, next), std::get<0>(best[next])});
        current = next;
    }
    std::sort(edges.begin(), edges.end(), [&](const MstEdge& x, const MstEdge& y) {
        return key(x.a, x.b, x.weight) < key(y.a, y.b, y.weight);
    });
    return edges;
}

// ---------------------------------------------------------------------------
// Condensed tree and excess-of-mass extraction

struct CondensedRow {
    std::size_t parent = 0;  // cluster index
    std::size_t child = 0;   // cluster index when child_is_cluster, else point index
    bool child_is_cluster = false;
    double lambda = 0.0;
    std::size_t child_size = 0;
};

struct FlatClustering {
    std::vector<int> labels;  // -1 for noise, else 0..n_clusters-1 ordered by min member rank
    std::size_t n_clusters = 0;
    std::vector<double> stability;  // per output cluster
    std::vector<CondensedRow> condensed;
    std::vector<std::string> warnings;
};

namespace detail {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
};

struct Dendrogram {
    // Node ids: 0..n-1 leaves, n..2n-2 merges in edge order.
    std::vector<std::size_t> left, right, size;
    std::vector<double> dist;
};

inline Dendrogram single_linkage(std::span<const MstEdge> mst, std::size_t n) {
    Dendrogram d;
    const std::size_t total = 2 * n - 1;
    d.left.assign(total, 0);
    d.right.assign(total, 0);
    d.size.assign(total, 1);
    d.dist.assign(total, 0.0);
    UnionFind uf(total);
    std::size_t next = n;
    for (const auto& e : mst) {
        const auto ra = uf.find(e.a), rb = uf.find(e.b);
        if (ra == rb) throw ContractError("extract_flat: edge list contains a cycle");
        d.left[next] = ra;
        d.right[next] = rb;
        d.size[next] = d.size[ra] + d.size[rb];
        d.dist[next] = e.weight;
        uf.parent[ra] = next;
        uf.parent[rb] = next;
        ++next;
    }
    if (next != total) throw ContractError("extract_flat: MST must have n-1 edges");
    return d;
}

}  // namespace detail

/// HDBSCAN-style flat extraction: single linkage over the sorted MST,
/// condensation with minimum cluster size m, excess-of-mass selection
/// (a cluster is kept iff its stability is at least the summed stability of
/// its selected descendants). The root may be selected.
inline FlatClustering extract_flat(std::span<const MstEdge> mst, std::size_t n, std::size_t min_cluster_size,
                                   std::span<const std::string> ids = {}) {
    if (min_cluster_size < 2) throw ContractError("extract_flat: min_cluster_size must be >= 2");
    FlatClustering out;
    out.labels.assign(n, -1);
    if (n == 0) return out;
    if (min_cluster_size > n) {
        out.warnings.push_back("min_cluster_size exceeds point count; all points are noise");
        return out;
    }
    if (n == 1) {
        out.warnings.push_back("single point; labelled noise");
        return out;
    }
    const auto dg = detail::single_linkage(mst, n);

    double max_lambda = 0.0;
    for (const auto& e : mst)
        if (e.weight > 0.0) max_lambda = std::max(max_lambda, 1.0 / e.weight);
    // Zero-distance merges get a finite lambda above every real one.
    const double zero_lambda = max_lambda > 0.0 ? 2.0 * max_lambda : 1.0;
    auto lambda_of = [&](std::size_t node) { return dg.dist[node] > 0.0 ? 1.0 / dg.dist[node] : zero_lambda; };

    auto leaves_under = [&](std::size_t node, std::vector<std::size_t>& acc) {
        std::vector<std::size_t> stack{node};
        while (!stack.empty()) {
            const auto v = stack.back();
            stack.pop_back();
            if (v < n)
                acc.push_back(v);
            else {
                stack.push_back(dg.left[v]);
                stack.push_back(dg.right[v]);
            }
        }
    };

    // Condense.
    std::vector<double> birth{0.0};  // per cluster
    std::vector<std::size_t> cluster_parent{0};
    std::vector<std::size_t> cluster_of_node(2 * n - 1, 0);
    std::vector<std::size_t> fallen;
    // Breadth-first; children always get larger indices than their parents.
    std::vector<std::size_t> queue{2 * n - 2};
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const auto node = queue[qi];
        if (node < n) continue;
        const auto cluster = cluster_of_node[node];
        const double lam = lambda_of(node);
        const auto l = dg.left[node], r = dg.right[node];
        const bool big_l = dg.size[l] >= min_cluster_size, big_r = dg.size[r] >= min_cluster_size;
        auto fall_out = [&](std::size_t child) {
            fallen.clear();
            leaves_under(child, fallen);
            std::sort(fallen.begin(), fallen.end());
            for (const auto p : fallen) out.condensed.push_back({cluster, p, false, lam, 1});
        };
        if (big_l && big_r) {
            for (const auto child : {l, r}) {
                const std::size_t c = birth.size();
                birth.push_back(lam);
                cluster_parent.push_back(cluster);
                out.condensed.push_back({cluster, c, true, lam, dg.size[child]});
                cluster_of_node[child] = c;
                queue.push_back(child);
            }
        } else if (big_l) {
            cluster_of_node[l] = cluster;
            queue.push_back(l);
            fall_out(r);
        } else if (big_r) {
            cluster_of_node[r] = cluster;
            queue.push_back(r);
            fall_out(l);
        } else {
            fall_out(l);
            fall_out(r);
        }
    }

    const std::size_t nc = birth.size();
    std::vector<double> stability(nc, 0.0);
    std::vector<std::vector<std::size_t>> children(nc);
    std::vector<std::size_t> point_parent(n, 0);
    for (const auto& row : out.condensed) {
        stability[row.parent] += (row.lambda - birth[row.parent]) * static_cast<double>(row.child_size);
        if (row.child_is_cluster)
            children[row.parent].push_back(row.child);
        else
            point_parent[row.child] = row.parent;
    }

    std::vector<char> selected(nc, 0);
    std::vector<double> subtree(nc, 0.0);
    for (std::size_t c = nc; c-- > 0;) {
        if (children[c].empty()) {
            selected[c] = 1;
            subtree[c] = stability[c];
            continue;
        }
        double child_sum = 0.0;
        for (const auto ch : children[c]) child_sum += subtree[ch];
        if (stability[c] >= child_sum) {
            selected[c] = 1;
            subtree[c] = stability[c];
            std::vector<std::size_t> st(children[c].begin(), children[c].end());
            while (!st.empty()) {
                const auto v = st.back();
                st.pop_back();
                selected[v] = 0;
                st.insert(st.end(), children[v].begin(), children[v].end());
            }
        } else {
            subtree[c] = child_sum;
        }
    }

    // A point belongs to the nearest selected cluster on its ancestor chain.
    std::vector<long> raw(n, -1);
    for (std::size_t p = 0; p < n; ++p) {
        std::size_t c = point_parent[p];
        while (true) {
            if (selected[c]) {
                raw[p] = static_cast<long>(c);
                break;
            }
            if (c == 0) break;
            c = cluster_parent[c];
        }
    }

    const auto rank = id_ranks(n, ids);
    std::vector<std::size_t> min_rank(nc, std::numeric_limits<std::size_t>::max());
    for (std::size_t p = 0; p < n; ++p)
        if (raw[p] >= 0) min_rank[static_cast<std::size_t>(raw[p])] = std::min(min_rank[static_cast<std::size_t>(raw[p])], rank[p]);
    std::vector<std::size_t> used;
    for (std::size_t c = 0; c < nc; ++c)
        if (min_rank[c] != std::numeric_limits<std::size_t>::max()) used.push_back(c);
    std::sort(used.begin(), used.end(), [&](auto a, auto b) { return min_rank[a] < min_rank[b]; });
    std::vector<int> relabel(nc, -1);
    for (std::size_t i = 0; i < used.size(); ++i) {
        relabel[used[i]] = static_cast<int>(i);
        out.stability.push_back(stability[used[i]]);
    }
    for (std::size_t p = 0; p < n; ++p)
        out.labels[p] = raw[p] >= 0 ? relabel[static_cast<std::size_t>(raw[p])] : -1;
    out.n_clusters = used.size();
    return out;
}

// ---------------------------------------------------------------------------
// Multi-level hierarchy

struct LevelSpec {
    std::size_t min_cluster_size = 5;
    std::size_t min_samples = 5;

    bool operator==(const LevelSpec&) const = default;
};

struct ClusterNode {
    int cluster_id = 0;
    int level = 0;  // 0 = finest
    std::vector<std::size_t> members;  // point indices, ascending
    std::optional<int> parent_id;
    std::vector<int> children;
    double stability = 0.0;
    std::string label;
};

struct ClusterTree {
    std::vector<ClusterNode> nodes;           // indexed by cluster_id
    std::vector<std::vector<int>> level_labels;  // per level, per point: cluster_id or -1
    double theta = 0.6;

    std::size_t levels() const noexcept { return level_labels.size(); }

    /// Finest-level cluster id per point (-1 noise).
    std::vector<int> finest_labels(std::size_t n) const {
        return level_labels.empty() ? std::vector<int>(n, -1) : level_labels.front();
    }

    std::vector<int> roots() const {
        std::vector<int> r;
        for (const auto& node : nodes)
            if (!node.parent_id) r.push_back(node.cluster_id);
        return r;
    }

    /// All children of the node's parent, including itself; roots form one
    /// group per level.
    std::vector<int> sibling_group(int cluster_id) const {
        const auto& node = nodes.at(static_cast<std::size_t>(cluster_id));
        if (node.parent_id) return nodes.at(static_cast<std::size_t>(*node.parent_id)).children;
        std::vector<int> g;
        for (const auto& other : nodes)
            if (!other.parent_id && other.level == node.level) g.push_back(other.cluster_id);
        return g;
    }
};

/// Level schedule: min_cluster_size = max(floor, round(n*q)) per fraction q.
inline std::vector<LevelSpec> default_schedule(std::size_t n, std::span<const double> fractions,
                                               std::size_t min_size_floor = 5, std::size_t min_samples = 5) {
    std::vector<LevelSpec> s;
    for (const double q : fractions) {
        const auto m = std::max<std::size_t>(min_size_floor, static_cast<std::size_t>(std::llround(static_cast<double>(n) * q)));
        s.push_back({m, min_samples});
    }
    return s;
}

/// Runs extract_flat per level (fine to coarse) and links each cluster to
/// the next coarser non-empty level's cluster holding the largest fraction
/// of its members, when that fraction is at least theta. Empty levels are
/// dropped and the remaining levels renumbered.
inline ClusterTree build_hierarchy(std::span<const Point2> pts, std::span<const LevelSpec> schedule, double theta,
                                   std::span<const std::string> ids = {}) {
    if (schedule.empty()) throw ContractError("build_hierarchy: empty schedule");
    if (!(theta > 0.5 && theta <= 1.0)) throw ContractError("build_hierarchy: theta must lie in (0.5, 1]");
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i].min_cluster_size < schedule[i - 1].min_cluster_size)
            throw ContractError("build_hierarchy: schedule must be ordered fine to coarse");
    const std::size_t n = pts.size();
    std::vector<FlatClustering> levels;
    for (const auto& spec : schedule) {
        if (n <= spec.min_samples) continue;
        const auto mst = mst_mutual_reachability(pts, spec.min_samples, ids);
        auto flat = extract_flat(mst, n, spec.min_cluster_size, ids);
        if (flat.n_clusters > 0) levels.push_back(std::move(flat));
    }

    ClusterTree tree;
    tree.theta = theta;
    std::vector<int> first_id;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        first_id.push_back(static_cast<int>(tree.nodes.size()));
        const auto& flat = levels[l];
        std::vector<ClusterNode> level_nodes(flat.n_clusters);
        for (std::size_t c = 0; c < flat.n_clusters; ++c) {
            level_nodes[c].cluster_id = first_id.back() + static_cast<int>(c);
            level_nodes[c].level = static_cast<int>(l);
            level_nodes[c].stability = flat.stability[c];
        }
        for (std::size_t p = 0; p < n; ++p)
            if (flat.labels[p] >= 0) level_nodes[static_cast<std::size_t>(flat.labels[p])].members.push_back(p);
        std::vector<int> labels(n, -1);
        for (std::size_t p = 0; p < n; ++p)
            if (flat.labels[p] >= 0) labels[p] = first_id.back() + flat.labels[p];
        tree.level_labels.push_back(std::move(labels));
        for (auto& node : level_nodes) tree.nodes.push_back(std::move(node));
    }

    for (auto& node : tree.nodes) {
        const auto l = static_cast<std::size_t>(node.level);
        if (l + 1 >= tree.level_labels.size()) continue;
        const auto& coarse = tree.level_labels[l + 1];
        std::vector<std::pair<int, std::size_t>> counts;  // (cluster, count)
        for (const auto p : node.members) {
            const int c = coarse[p];
            if (c < 0) continue;
            auto it = std::find_if(counts.begin(), counts.end(), [c](const auto& e) { return e.first == c; });
            if (it == counts.end())
                counts.emplace_back(c, 1);
            else
                ++it->second;
        }
        if (counts.empty()) continue;
        const auto best = *std::min_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        const double frac = static_cast<double>(best.second) / static_cast<double>(node.members.size());
        if (frac >= theta) node.parent_id = best.first;
    }
    for (const auto& node : tree.nodes)
        if (node.parent_id) tree.nodes[static_cast<std::size_t>(*node.parent_id)].children.push_back(node.cluster_id);
    return tree;
}

/// Fraction of the node's members also in its parent; 1 for roots.
inline double parent_overlap(const ClusterTree& tree, const ClusterNode& node) {
    if (!node.parent_id) return 1.0;
    const auto& parent = tree.nodes.at(static_cast<std::size_t>(*node.parent_id));
    std::vector<std::size_t> common;
    std::set_intersection(node.members.begin(), node.members.end(), parent.members.begin(), parent.members.end(),
                          std::back_inserter(common));
    return static_cast<double>(common.size()) / static_cast<double>(node.members.size());
}

}  // namespace litmap
