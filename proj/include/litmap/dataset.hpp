#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "litmap/bundling.hpp"
#include "litmap/clustering.hpp"
#include "litmap/corpus.hpp"
#include "litmap/embedding.hpp"
#include "litmap/labeling.hpp"
#include "litmap/retrieval.hpp"
#include "litmap/spatial_index.hpp"

namespace litmap {

/// Everything the agents and the server read for one map, immutable after
/// construction. Cluster node members index into `articles`.
struct Dataset {
    std::string id;
    std::vector<Article> articles;
    ClusterTree tree;
    std::map<int, TopicLabel> labels;
    std::vector<BundledEdge> edges;
    std::optional<EmbeddingMatrix> embeddings;  // rows aligned with articles

    std::unordered_map<std::string, std::size_t> by_pmid;
    std::vector<int> finest;  // finest-level cluster per article, -1 for noise
    Quadtree spatial{Bounds{0, 0, 1, 1}};
    KeywordIndex keywords;

    std::size_t size() const noexcept { return articles.size(); }
    bool has_pmid(const std::string& pmid) const { return by_pmid.contains(pmid); }
    const Article& article(const std::string& pmid) const {
        const auto it = by_pmid.find(pmid);
        if (it == by_pmid.end()) throw ContractError("unknown pmid " + pmid);
        return articles[it->second];
    }
    bool has_cluster(int id) const { return id >= 0 && static_cast<std::size_t>(id) < tree.nodes.size(); }
    const ClusterNode& cluster(int id) const {
        if (!has_cluster(id)) throw ContractError("unknown cluster " + std::to_string(id));
        return tree.nodes[static_cast<std::size_t>(id)];
    }
    std::string cluster_label(int id) const {
        const auto it = labels.find(id);
        return it == labels.end() ? std::string(kUnlabeled) : it->second.label;
    }
};

/// Builds the derived indexes. Articles without coordinates are left out of
/// the spatial index.
inline Dataset make_dataset(std::string id, std::vector<Article> articles, ClusterTree tree = {},
                            std::vector<TopicLabel> labels = {}, std::vector<BundledEdge> edges = {},
                            std::optional<EmbeddingMatrix> embeddings = std::nullopt) {
    Dataset d;
    d.id = std::move(id);
    d.articles = std::move(articles);
    for (std::size_t i = 0; i < d.articles.size(); ++i)
        if (!d.by_pmid.emplace(d.articles[i].pmid, i).second) throw DuplicateRecordError(d.articles[i].pmid);
    for (const auto& node : tree.nodes)
        for (const auto m : node.members)
            if (m >= d.articles.size()) throw ContractError("cluster member index out of range");
    d.tree = std::move(tree);
    for (auto& l : labels) d.labels[l.cluster_id] = std::move(l);
    d.edges = std::move(edges);
    if (embeddings) {
        if (embeddings->rows() != d.articles.size()) throw ContractError("embedding rows do not match articles");
        for (std::size_t i = 0; i < d.articles.size(); ++i)
            if (embeddings->id(i) != d.articles[i].pmid) throw ContractError("embedding rows are not aligned with articles");
        d.embeddings = std::move(embeddings);
    }
    d.finest.assign(d.articles.size(), -1);
    for (const auto& node : d.tree.nodes)
        if (node.level == 0)
            for (const auto m : node.members) d.finest[m] = node.cluster_id;

    std::vector<IndexedPoint> pts;
    for (const auto& a : d.articles)
        if (a.x && a.y) pts.push_back({a.pmid, {*a.x, *a.y}});
    d.spatial = Quadtree::build(pts);
    d.keywords = KeywordIndex(d.articles);
    return d;
}

}  // namespace litmap
