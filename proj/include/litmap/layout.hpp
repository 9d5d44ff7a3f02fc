#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "litmap/common.hpp"
#include "litmap/embedding.hpp"

namespace litmap {

// ---------------------------------------------------------------------------
// Perplexity-calibrated neighbor probabilities

struct ConditionalRow {
    std::vector<double> p;  // sums to 1
    double sigma = 0.0;     // Gaussian bandwidth; +inf for a uniform row
    double perplexity = 0.0;  // achieved 2^H(p)
    int iterations = 0;
};

namespace detail {

// Fills p for precision beta over shifted squared distances; returns entropy in bits.
inline double gaussian_row(std::span<const double> shifted_sq, double beta, std::vector<double>& p) {
    double z = 0.0;
    for (std::size_t j = 0; j < shifted_sq.size(); ++j) {
        p[j] = std::exp(-beta * shifted_sq[j]);
        z += p[j];
    }
    double h = 0.0;
    for (std::size_t j = 0; j < shifted_sq.size(); ++j) {
        p[j] /= z;
        if (p[j] > 0.0) h -= p[j] * std::log2(p[j]);
    }
    return h;
}

}  // namespace detail

/// p_j ∝ exp(-d_j² / 2σ²) with σ chosen by bisection so that 2^H(p) equals
/// the target perplexity (within 1e-5, at most 50 steps).
///
/// The search runs on log(β·r), β = 1/2σ² and r the spread of squared
/// distances, which brackets every attainable perplexity in [-40, 40].
/// A target equal to the row length yields the uniform row.
inline ConditionalRow conditional_probabilities(std::span<const double> distances, double target_perplexity) {
    const std::size_t m = distances.size();
    if (m < 2) throw ContractError("conditional_probabilities: need at least 2 distances");
    if (!(target_perplexity > 1.0)) throw ContractError("conditional_probabilities: perplexity must exceed 1");
    if (target_perplexity > static_cast<double>(m))
        throw ContractError("conditional_probabilities: perplexity exceeds row length");

    std::vector<double> sq(m);
    double lo_sq = std::numeric_limits<double>::infinity(), hi_sq = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        if (!std::isfinite(distances[j])) throw ContractError("conditional_probabilities: non-finite distance");
        sq[j] = distances[j] * distances[j];
        lo_sq = std::min(lo_sq, sq[j]);
        hi_sq = std::max(hi_sq, sq[j]);
    }
    ConditionalRow row;
    row.p.assign(m, 1.0 / static_cast<double>(m));
    const double spread = hi_sq - lo_sq;
    if (spread == 0.0 || target_perplexity == static_cast<double>(m)) {
        row.sigma = std::numeric_limits<double>::infinity();
        row.perplexity = static_cast<double>(m);
        return row;
    }
    for (auto& v : sq) v -= lo_sq;

    double lo = -40.0, hi = 40.0;  // bounds on t = ln(beta * spread)
    double t = 0.0;
    double perp = 0.0;
    for (int it = 0; it < 50; ++it) {
        t = 0.5 * (lo + hi);
        const double beta = std::exp(t) / spread;
        perp = std::exp2(detail::gaussian_row(sq, beta, row.p));
        row.iterations = it + 1;
        if (std::abs(perp - target_perplexity) < 1e-5) break;
        // Perplexity falls as beta grows.
        if (perp > target_perplexity)
            lo = t;
        else
            hi = t;
    }
    const double beta = std::exp(t) / spread;
    row.sigma = std::sqrt(1.0 / (2.0 * beta));
    row.perplexity = perp;
    return row;
}

// ---------------------------------------------------------------------------
// Weighted kNN graph

struct WeightedEdge {
    std::size_t i = 0;
    std::size_t j = 0;  // i < j
    double w = 0.0;

    bool operator==(const WeightedEdge&) const = default;
};

struct KnnGraph {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<WeightedEdge> edges;             // sorted by (i, j)
    std::vector<double> sigma;                   // per-node bandwidth
    std::vector<std::vector<std::size_t>> knn;   // directed k nearest, nearest first
    std::vector<std::vector<std::size_t>> adjacency;  // symmetric neighbors, sorted

    bool adjacent(std::size_t a, std::size_t b) const {
        const auto& row = adjacency[a];
        return std::binary_search(row.begin(), row.end(), b);
    }
};

/// Builds the graph from an explicit point set (rows of `points`, `dim`
/// columns) with Euclidean distances. `ids` break distance ties.
inline KnnGraph build_knn_graph_from_points(std::span<const double> points, std::size_t dim,
                                            std::span<const std::string> ids, std::size_t k, double perplexity) {
    const std::size_t n = ids.size();
    if (points.size() != n * dim) throw ContractError("build_knn_graph: point buffer size mismatch");
    if (k < 2) throw ContractError("build_knn_graph: k must be >= 2");
    if (n < k + 1) throw ContractError("build_knn_graph: need more than k points");
    if (perplexity > static_cast<double>(k)) throw ContractError("build_knn_graph: perplexity must not exceed k");

    KnnGraph g;
    g.n = n;
    g.k = k;
    g.sigma.resize(n);
    g.knn.resize(n);
    std::vector<std::vector<std::pair<std::size_t, double>>> directed(n);

    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(n);
    std::vector<double> dist(k);
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        const double* a = points.data() + i * dim;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double* b = points.data() + j * dim;
            double s = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double diff = a[c] - b[c];
                s += diff * diff;
            }
            cand.emplace_back(s, j);
        }
        auto closer = [&](const auto& x, const auto& y) {
            if (x.first != y.first) return x.first < y.first;
            return ids[x.second] < ids[y.second];
        };
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(), closer);
        for (std::size_t r = 0; r < k; ++r) {
            dist[r] = std::sqrt(cand[r].first);
            g.knn[i].push_back(cand[r].second);
        }
        const auto row = conditional_probabilities(dist, perplexity);
        g.sigma[i] = row.sigma;
        for (std::size_t r = 0; r < k; ++r) directed[i].emplace_back(cand[r].second, row.p[r]);
    }

    // w_ij = (p_j|i + p_i|j) / 2, accumulated in a fixed order.
    std::vector<std::vector<std::pair<std::size_t, double>>> sym(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [j, p] : directed[i]) {
            const auto a = std::min(i, j), b = std::max(i, j);
            sym[a].emplace_back(b, p);
        }
    }
    g.adjacency.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
        auto& lst = sym[a];
        std::sort(lst.begin(), lst.end());
        for (std::size_t s = 0; s < lst.size();) {
            const std::size_t b = lst[s].first;
            double total = 0.0;
            for (; s < lst.size() && lst[s].first == b; ++s) total += lst[s].second;
            const double w = 0.5 * total;
            if (w > 0.0) {
                g.edges.push_back({a, b, w});
                g.adjacency[a].push_back(b);
                g.adjacency[b].push_back(a);
            }
        }
    }
    for (auto& row : g.adjacency) std::sort(row.begin(), row.end());
    return g;
}

/// kNN graph over L2-normalized embedding rows.
inline KnnGraph build_knn_graph(const EmbeddingMatrix& m, std::size_t k, double perplexity) {
    const auto pts = normalized_rows(m);
    return build_knn_graph_from_points(pts, m.dim(), m.ids(), k, perplexity);
}

// ---------------------------------------------------------------------------
// Layout result

enum class LayoutMethod { largevis, tsne };

inline const char* to_string(LayoutMethod m) { return m == LayoutMethod::largevis ? "largevis" : "tsne"; }

struct Layout2D {
    std::vector<double> coords;  // n x 2, row-major
    std::uint64_t seed = 0;
    LayoutMethod method = LayoutMethod::largevis;
    double final_objective = 0.0;
    std::vector<std::pair<int, double>> objective_trace;  // (iteration, objective)

    std::size_t size() const noexcept { return coords.size() / 2; }
    double x(std::size_t i) const { return coords[2 * i]; }
    double y(std::size_t i) const { return coords[2 * i + 1]; }
};

/// Low-dimensional similarity kernel shared by both methods.
inline double kernel_f(double dist) { return 1.0 / (1.0 + dist * dist); }

// ---------------------------------------------------------------------------
// LargeVis

struct LargeVisConfig {
    std::size_t negatives = 5;   // M
    double gamma = 7.0;          // repulsion weight
    double rho0 = 1.0;           // initial learning rate
    std::uint64_t n_updates = 0;  // 0: update_factor * n * k
    std::uint64_t update_factor = 200;
    double gradient_clip = 5.0;
    int max_negative_attempts = 10;
    unsigned threads = 1;  // >1 enables lock-free asynchronous SGD (not deterministic)
};

/// Alias table (Vose) for O(1) sampling proportional to weights.
class AliasTable {
public:
    AliasTable() = default;

    explicit AliasTable(std::span<const double> weights) {
        const std::size_t n = weights.size();
        if (n == 0) throw ContractError("AliasTable: empty weights");
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        if (!(total > 0.0)) throw ContractError("AliasTable: weights must have positive sum");
        prob_.resize(n);
        alias_.resize(n);
        std::vector<double> scaled(n);
        std::vector<std::size_t> small, large;
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = weights[i] * static_cast<double>(n) / total;
            (scaled[i] < 1.0 ? small : large).push_back(i);
        }
        while (!small.empty() && !large.empty()) {
            const auto s = small.back();
            small.pop_back();
            const auto l = large.back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (const auto i : large) {
            prob_[i] = 1.0;
            alias_[i] = i;
        }
        for (const auto i : small) {
            prob_[i] = 1.0;
            alias_[i] = i;
        }
    }

    std::size_t sample(Rng& rng) const {
        const auto bucket = static_cast<std::size_t>(rng.below(prob_.size()));
        return rng.uniform() < prob_[bucket] ? bucket : alias_[bucket];
    }

    std::size_t size() const noexcept { return prob_.size(); }

private:
    std::vector<double> prob_;
    std::vector<std::size_t> alias_;
};

/// Σ_edges w·log f(d) + γ·Σ_non-edges log(1 − f(d)). Exact for n ≤ 5000,
/// otherwise the non-edge term is a fixed-seed sampled estimate.
inline double largevis_objective(const KnnGraph& g, std::span<const double> coords, double gamma) {
    auto sqd = [&](std::size_t a, std::size_t b) {
        const double dx = coords[2 * a] - coords[2 * b];
        const double dy = coords[2 * a + 1] - coords[2 * b + 1];
        return dx * dx + dy * dy;
    };
    auto log_repel = [](double d2) { return std::log(std::max(d2 / (1.0 + d2), 1e-12)); };
    double attract = 0.0;
    for (const auto& e : g.edges) attract += e.w * std::log(1.0 / (1.0 + sqd(e.i, e.j)));
    double repel = 0.0;
    if (g.n <= 5000) {
        for (std::size_t a = 0; a < g.n; ++a)
            for (std::size_t b = a + 1; b < g.n; ++b)
                if (!g.adjacent(a, b)) repel += log_repel(sqd(a, b));
    } else {
        Rng rng(0x5eed);
        constexpr std::size_t samples = 200000;
        std::size_t used = 0;
        double acc = 0.0;
        for (std::size_t s = 0; s < samples; ++s) {
            const auto a = rng.below(g.n), b = rng.below(g.n);
            if (a == b || g.adjacent(a, b)) continue;
            acc += log_repel(sqd(a, b));
            ++used;
        }
        const double pairs = 0.5 * static_cast<double>(g.n) * static_cast<double>(g.n - 1) -
                             static_cast<double>(g.edges.size());
        repel = used ? acc / static_cast<double>(used) * pairs : 0.0;
    }
    return attract + gamma * repel;
}

namespace detail {

template <bool Atomic>
struct CoordAccess {
    double* base;
    double load(std::size_t i) const {
        if constexpr (Atomic)
            return std::atomic_ref<double>(base[i]).load(std::memory_order_relaxed);
        else
            return base[i];
    }
    void store(std::size_t i, double v) const {
        if constexpr (Atomic)
            std::atomic_ref<double>(base[i]).store(v, std::memory_order_relaxed);
        else
            base[i] = v;
    }
};

template <bool Atomic>
void largevis_worker(const KnnGraph& g, const AliasTable& alias, const LargeVisConfig& cfg, CoordAccess<Atomic> y,
                     std::uint64_t begin, std::uint64_t end, std::uint64_t total, Rng rng) {
    const std::size_t n = g.n;
    const double clip = cfg.gradient_clip;
    auto clamp = [clip](double v) { return std::clamp(v, -clip, clip); };
    for (std::uint64_t t = begin; t < end; ++t) {
        const double lr = cfg.rho0 * (1.0 - static_cast<double>(t) / static_cast<double>(total));
        const auto& e = g.edges[alias.sample(rng)];
        std::size_t i = e.i, j = e.j;
        if (rng.below(2)) std::swap(i, j);

        const double yix = y.load(2 * i), yiy = y.load(2 * i + 1);
        double errx = 0.0, erry = 0.0;

        // Attraction: gradient of log f(d).
        {
            const double dx = yix - y.load(2 * j), dy = yiy - y.load(2 * j + 1);
            const double d2 = dx * dx + dy * dy;
            const double coef = -2.0 / (1.0 + d2);
            const double gx = clamp(coef * dx) * lr, gy = clamp(coef * dy) * lr;
            errx += gx;
            erry += gy;
            y.store(2 * j, y.load(2 * j) - gx);
            y.store(2 * j + 1, y.load(2 * j + 1) - gy);
        }

        // Repulsion from uniformly drawn non-neighbors: γ·gradient of log(1 − f(d)).
        for (std::size_t s = 0; s < cfg.negatives; ++s) {
            std::size_t r = n;
            for (int attempt = 0; attempt < cfg.max_negative_attempts; ++attempt) {
                const auto cand = static_cast<std::size_t>(rng.below(n));
                if (cand != i && !g.adjacent(i, cand)) {
                    r = cand;
                    break;
                }
            }
            if (r == n) continue;
            const double dx = yix - y.load(2 * r), dy = yiy - y.load(2 * r + 1);
            const double d2 = dx * dx + dy * dy;
            const double coef = 2.0 * cfg.gamma / ((1.0 + d2) * (0.1 + d2));
            const double gx = clamp(coef * dx) * lr, gy = clamp(coef * dy) * lr;
            errx += gx;
            erry += gy;
            y.store(2 * r, y.load(2 * r) - gx);
            y.store(2 * r + 1, y.load(2 * r + 1) - gy);
        }

        const double nx = y.load(2 * i) + errx, ny = y.load(2 * i + 1) + erry;
        if (!std::isfinite(nx) || !std::isfinite(ny))
            throw NumericalError("largevis: non-finite coordinate at update " + std::to_string(t) + ", node " +
                                 std::to_string(i));
        y.store(2 * i, nx);
        y.store(2 * i + 1, ny);
    }
}

}  // namespace detail

/// Stochastic layout over the graph: edge sampling proportional to weight,
/// M uniform negatives per positive edge, linearly decaying learning rate.
inline Layout2D fit_largevis(const KnnGraph& g, std::uint64_t seed, const LargeVisConfig& cfg = {}) {
    if (cfg.rho0 <= 0 || cfg.gamma <= 0 || cfg.gradient_clip <= 0)
        throw ContractError("fit_largevis: configuration values must be positive");
    Layout2D out;
    out.seed = seed;
    out.method = LayoutMethod::largevis;
    out.coords.resize(2 * g.n);
    Rng init(seed);
    for (auto& c : out.coords) c = init.uniform(-1.0, 1.0);
    if (g.edges.empty()) {
        out.final_objective = largevis_objective(g, out.coords, cfg.gamma);
        return out;
    }

    std::vector<double> weights;
    weights.reserve(g.edges.size());
    for (const auto& e : g.edges) weights.push_back(e.w);
    const AliasTable alias(weights);
    const std::uint64_t total = cfg.n_updates ? cfg.n_updates : cfg.update_factor * g.n * g.k;

    if (cfg.threads <= 1) {
        detail::largevis_worker<false>(g, alias, cfg, {out.coords.data()}, 0, total, total, Rng(seed ^ 0x9e3779b97f4a7c15ULL));
    } else {
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(cfg.threads);
        const std::uint64_t chunk = total / cfg.threads;
        for (unsigned t = 0; t < cfg.threads; ++t) {
            const std::uint64_t b = t * chunk, e = (t + 1 == cfg.threads) ? total : b + chunk;
            workers.emplace_back([&, t, b, e] {
                try {
                    detail::largevis_worker<true>(g, alias, cfg, {out.coords.data()}, b, e, total,
                                                  Rng(seed ^ (0x9e3779b97f4a7c15ULL * (t + 1))));
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& w : workers) w.join();
        for (const auto& err : errors)
            if (err) std::rethrow_exception(err);
    }
    out.final_objective = largevis_objective(g, out.coords, cfg.gamma);
    return out;
}

// ---------------------------------------------------------------------------
// Exact t-SNE

struct TsneConfig {
    int iterations = 1000;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;
    double learning_rate = 200.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iter = 250;
    std::size_t max_points = 5000;
    int trace_every = 50;
};

/// Dense symmetric joint probabilities, P_ij = (p_j|i + p_i|j) / 2n.
struct JointProbabilities {
    std::size_t n = 0;
    std::vector<double> p;            // n x n, zero diagonal, sums to 1
    std::vector<double> conditional;  // n x n rows p_j|i, each summing to 1
};

inline JointProbabilities joint_probabilities(std::span<const double> points, std::size_t dim, double perplexity) {
    const std::size_t n = dim ? points.size() / dim : 0;
    if (n < 3) throw ContractError("t-SNE needs at least 3 points");
    if (perplexity >= static_cast<double>(n)) throw ContractError("t-SNE: perplexity must be smaller than n");
    JointProbabilities jp;
    jp.n = n;
    jp.conditional.assign(n * n, 0.0);
    std::vector<double> dist(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = points[i * dim + d] - points[j * dim + d];
                s += diff * diff;
            }
            dist[c++] = std::sqrt(s);
        }
        const auto row = conditional_probabilities(dist, std::min(perplexity, static_cast<double>(n - 1)));
        c = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            jp.conditional[i * n + j] = row.p[c++];
        }
    }
    jp.p.assign(n * n, 0.0);
    const double denom = 2.0 * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) jp.p[i * n + j] = (jp.conditional[i * n + j] + jp.conditional[j * n + i]) / denom;
    return jp;
}

/// Q_ij = f(d_ij) / Σ_{k≠l} f(d_kl).
inline std::vector<double> tsne_q(std::span<const double> y, std::size_t n) {
    std::vector<double> q(n * n, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            const double f = 1.0 / (1.0 + dx * dx + dy * dy);
            q[i * n + j] = q[j * n + i] = f;
            z += 2.0 * f;
        }
    for (auto& v : q) v /= z;
    return q;
}

/// KL(P || Q) for a 2D embedding.
inline double tsne_kl(std::span<const double> p, std::span<const double> y, std::size_t n) {
    const auto q = tsne_q(y, n);
    double kl = 0.0;
    for (std::size_t idx = 0; idx < n * n; ++idx)
        if (p[idx] > 0.0) kl += p[idx] * std::log(p[idx] / std::max(q[idx], std::numeric_limits<double>::min()));
    return kl;
}

/// ∂KL/∂y_i = 4 Σ_j (αp_ij − q_ij) f(d_ij) (y_i − y_j), α the exaggeration.
inline std::vector<double> tsne_gradient(std::span<const double> p, std::span<const double> y, std::size_t n,
                                         double exaggeration = 1.0) {
    std::vector<double> num(n * n, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            const double f = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = num[j * n + i] = f;
            z += 2.0 * f;
        }
    std::vector<double> grad(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double gx = 0.0, gy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double f = num[i * n + j];
            const double coef = (exaggeration * p[i * n + j] - f / z) * f;
            gx += coef * (y[2 * i] - y[2 * j]);
            gy += coef * (y[2 * i + 1] - y[2 * j + 1]);
        }
        grad[2 * i] = 4.0 * gx;
        grad[2 * i + 1] = 4.0 * gy;
    }
    return grad;
}

/// Exact O(n²) t-SNE on explicit points with Euclidean input distances.
inline Layout2D fit_tsne_points(std::span<const double> points, std::size_t dim, double perplexity, std::uint64_t seed,
                                const TsneConfig& cfg = {}) {
    const std::size_t n = dim ? points.size() / dim : 0;
    if (n > cfg.max_points)
        throw ContractError("t-SNE exact mode is capped at " + std::to_string(cfg.max_points) + " points");
    const auto jp = joint_probabilities(points, dim, perplexity);

    Layout2D out;
    out.seed = seed;
    out.method = LayoutMethod::tsne;
    out.coords.resize(2 * n);
    Rng rng(seed);
    for (auto& c : out.coords) c = 1e-4 * rng.normal();

    std::vector<double> update(2 * n, 0.0), gains(2 * n, 1.0);
    for (int it = 0; it < cfg.iterations; ++it) {
        const double exaggeration = it < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;
        const double momentum = it < cfg.momentum_switch_iter ? cfg.initial_momentum : cfg.final_momentum;
        const auto grad = tsne_gradient(jp.p, out.coords, n, exaggeration);
        for (std::size_t c = 0; c < 2 * n; ++c) {
            // Delta-bar-delta step-size adaptation.
            gains[c] = (grad[c] > 0.0) != (update[c] > 0.0) ? gains[c] + 0.2 : gains[c] * 0.8;
            gains[c] = std::max(gains[c], 0.01);
            update[c] = momentum * update[c] - cfg.learning_rate * gains[c] * grad[c];
            out.coords[c] += update[c];
            if (!std::isfinite(out.coords[c]))
                throw NumericalError("t-SNE: non-finite coordinate at iteration " + std::to_string(it) + ", node " +
                                     std::to_string(c / 2));
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += out.coords[2 * i];
            my += out.coords[2 * i + 1];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            out.coords[2 * i] -= mx;
            out.coords[2 * i + 1] -= my;
        }
        const int done = it + 1;
        if (cfg.trace_every > 0 && done >= cfg.exaggeration_iters && done % cfg.trace_every == 0)
            out.objective_trace.emplace_back(done, tsne_kl(jp.p, out.coords, n));
    }
    out.final_objective = tsne_kl(jp.p, out.coords, n);
    return out;
}

/// Exact t-SNE on L2-normalized embedding rows.
inline Layout2D fit_tsne_exact(const EmbeddingMatrix& m, double perplexity, std::uint64_t seed,
                               const TsneConfig& cfg = {}) {
    if (m.rows() > cfg.max_points)
        throw ContractError("t-SNE exact mode is capped at " + std::to_string(cfg.max_points) + " points");
    const auto pts = normalized_rows(m);
    return fit_tsne_points(pts, m.dim(), perplexity, seed, cfg);
}

}  // namespace litmap
