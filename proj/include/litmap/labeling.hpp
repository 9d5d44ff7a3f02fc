#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "litmap/clustering.hpp"
#include "litmap/common.hpp"
#include "litmap/corpus.hpp"
#include "litmap/text.hpp"

namespace litmap {

enum class TermSource { mesh, text };

inline const char* to_string(TermSource s) { return s == TermSource::mesh ? "mesh" : "text"; }

struct ClusterTerms {
    int cluster_id = 0;
    int level = 0;
    TermSource source = TermSource::text;
    std::map<std::string, double> tf;

    double total() const {
        double t = 0.0;
        for (const auto& [term, c] : tf) t += c;
        return t;
    }
};

/// Per-cluster term counts plus per-level corpus totals.
///
/// f(t) sums tf(t, c) over the clusters of one level and A is the mean term
/// count per cluster of that level; each level is a partition of the corpus.
class TermStats {
public:
    TermStats() = default;
    explicit TermStats(std::vector<ClusterTerms> clusters) : clusters_(std::move(clusters)) {
        for (std::size_t i = 0; i < clusters_.size(); ++i) by_id_[clusters_[i].cluster_id] = i;
        std::map<int, std::size_t> per_level;
        for (const auto& c : clusters_) {
            auto& lt = levels_[c.level];
            for (const auto& [t, v] : c.tf) lt.f[t] += v;
            lt.mass += c.total();
            ++per_level[c.level];
        }
        for (auto& [level, lt] : levels_) lt.average = lt.mass / static_cast<double>(per_level[level]);
    }

    const ClusterTerms& at(int cluster_id) const {
        const auto it = by_id_.find(cluster_id);
        if (it == by_id_.end()) throw ContractError("no term stats for cluster " + std::to_string(cluster_id));
        return clusters_[it->second];
    }
    bool contains(int cluster_id) const { return by_id_.contains(cluster_id); }
    const std::vector<ClusterTerms>& clusters() const noexcept { return clusters_; }

    double corpus_frequency(int level, const std::string& term) const {
        const auto& f = level_totals(level).f;
        const auto it = f.find(term);
        return it == f.end() ? 0.0 : it->second;
    }
    double average_terms(int level) const { return level_totals(level).average; }

private:
    struct LevelTotals {
        std::map<std::string, double> f;
        double mass = 0.0;
        double average = 0.0;
    };
    const LevelTotals& level_totals(int level) const {
        const auto it = levels_.find(level);
        if (it == levels_.end()) throw ContractError("no clusters at level " + std::to_string(level));
        return it->second;
    }

    std::vector<ClusterTerms> clusters_;
    std::map<int, std::size_t> by_id_;
    std::map<int, LevelTotals> levels_;
};

/// Counts label terms per cluster node. A cluster uses MeSH terms when at
/// least half its articles carry MeSH, otherwise content words of title and
/// abstract.
inline TermStats aggregate_terms(const ClusterTree& tree, std::span<const Article> articles) {
    std::vector<ClusterTerms> out;
    out.reserve(tree.nodes.size());
    for (const auto& node : tree.nodes) {
        ClusterTerms ct;
        ct.cluster_id = node.cluster_id;
        ct.level = node.level;
        std::size_t with_mesh = 0;
        for (const auto p : node.members)
            if (!articles[p].mesh_terms.empty()) ++with_mesh;
        ct.source = 2 * with_mesh >= node.members.size() && with_mesh > 0 ? TermSource::mesh : TermSource::text;
        for (const auto p : node.members) {
            const auto& a = articles[p];
            if (ct.source == TermSource::mesh) {
                for (const auto& m : a.mesh_terms) ct.tf[m] += 1.0;
            } else {
                for (const auto& t : content_terms(a.text())) ct.tf[t] += 1.0;
            }
        }
        out.push_back(std::move(ct));
    }
    return TermStats(std::move(out));
}

struct ScoredTerm {
    std::string term;
    double score = 0.0;

    bool operator==(const ScoredTerm&) const = default;
};

/// W = tf · ln(1 + A / f).
inline double ctfidf_weight(double tf, double average, double frequency) {
    if (tf <= 0.0 || frequency <= 0.0) return 0.0;
    return tf * std::log(1.0 + average / frequency);
}

namespace detail {

inline void sort_scored(std::vector<ScoredTerm>& terms) {
    std::sort(terms.begin(), terms.end(), [](const ScoredTerm& a, const ScoredTerm& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.term < b.term;
    });
}

}  // namespace detail

/// Class-based TF-IDF of one cluster against the other clusters of its level.
inline std::vector<ScoredTerm> ctfidf(const TermStats& stats, int cluster_id) {
    const auto& c = stats.at(cluster_id);
    const double avg = stats.average_terms(c.level);
    std::vector<ScoredTerm> out;
    out.reserve(c.tf.size());
    for (const auto& [term, tf] : c.tf)
        out.push_back({term, ctfidf_weight(tf, avg, stats.corpus_frequency(c.level, term))});
    detail::sort_scored(out);
    return out;
}

/// The same weighting with totals restricted to a sibling group (all
/// children of one parent, including the cluster). Groups smaller than two
/// fall back to ctfidf.
inline std::vector<ScoredTerm> tree_tfidf(const TermStats& stats, int cluster_id, std::span<const int> sibling_group) {
    if (sibling_group.size() < 2) return ctfidf(stats, cluster_id);
    if (std::find(sibling_group.begin(), sibling_group.end(), cluster_id) == sibling_group.end())
        throw ContractError("tree_tfidf: cluster is not in its sibling group");
    std::map<std::string, double> f;
    double mass = 0.0;
    for (const int s : sibling_group) {
        const auto& sc = stats.at(s);
        for (const auto& [t, v] : sc.tf) f[t] += v;
        mass += sc.total();
    }
    const double avg = mass / static_cast<double>(sibling_group.size());
    const auto& c = stats.at(cluster_id);
    std::vector<ScoredTerm> out;
    out.reserve(c.tf.size());
    for (const auto& [term, tf] : c.tf) out.push_back({term, ctfidf_weight(tf, avg, f[term])});
    detail::sort_scored(out);
    return out;
}

inline constexpr std::string_view kUnlabeled = "(unlabeled)";

struct TopicLabel {
    int cluster_id = 0;
    std::string label;
    std::vector<ScoredTerm> terms;
    std::string method;  // "ctfidf" or "tree_tfidf"
};

/// Top-k terms joined with ", ". Zero-score terms are not used.
inline TopicLabel top_labels(std::span<const ScoredTerm> scored, std::size_t k, int cluster_id = 0) {
    if (k < 1) throw ContractError("top_labels: k must be >= 1");
    std::vector<ScoredTerm> sorted(scored.begin(), scored.end());
    detail::sort_scored(sorted);
    TopicLabel out;
    out.cluster_id = cluster_id;
    for (const auto& t : sorted) {
        if (out.terms.size() == k) break;
        if (t.score <= 0.0) break;
        out.terms.push_back(t);
    }
    if (out.terms.empty()) {
        out.label = std::string(kUnlabeled);
        return out;
    }
    for (std::size_t i = 0; i < out.terms.size(); ++i) out.label += (i ? ", " : "") + out.terms[i].term;
    return out;
}

/// Labels every node: sibling-local weighting for non-root nodes with at
/// least one sibling, corpus-level c-TF-IDF otherwise.
inline std::vector<TopicLabel> label_tree(const ClusterTree& tree, std::span<const Article> articles, std::size_t k = 3) {
    const auto stats = aggregate_terms(tree, articles);
    std::vector<TopicLabel> labels;
    labels.reserve(tree.nodes.size());
    for (const auto& node : tree.nodes) {
        const auto group = node.parent_id ? tree.sibling_group(node.cluster_id) : std::vector<int>{};
        const bool local = group.size() >= 2;
        auto scored = local ? tree_tfidf(stats, node.cluster_id, group) : ctfidf(stats, node.cluster_id);
        auto label = top_labels(scored, k, node.cluster_id);
        label.method = local ? "tree_tfidf" : "ctfidf";
        labels.push_back(std::move(label));
    }
    return labels;
}

}  // namespace litmap
