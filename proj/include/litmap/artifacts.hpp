#pragma once

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "litmap/bundling.hpp"
#include "litmap/clustering.hpp"
#include "litmap/corpus.hpp"
#include "litmap/dataset.hpp"
#include "litmap/embedding.hpp"
#include "litmap/labeling.hpp"
#include "litmap/layout.hpp"

namespace litmap {

namespace fs = std::filesystem;

/// File names inside a dataset directory.
namespace artifact {
inline constexpr const char* map = "map.tsv";
inline constexpr const char* clusters = "clusters.json";
inline constexpr const char* labels = "labels.json";
inline constexpr const char* edges = "edges.json";
inline constexpr const char* embeddings = "embeddings.emb";
inline constexpr const char* layout_report = "layout.json";
inline constexpr const char* bundle_report = "bundle.json";
inline constexpr const char* config = "config.txt";
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* stage_marker = "FAILED_STAGE";
}  // namespace artifact

/// Writes through a temporary file and renames, so a crash never leaves a
/// half-written artifact under the final name.
inline void write_file_atomic(const fs::path& path, std::string_view content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json read_json_file(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.filename().string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Cluster tree

inline nlohmann::json tree_to_json(const ClusterTree& tree, std::span<const Article> articles) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : tree.nodes) {
        nlohmann::json members = nlohmann::json::array();
        for (const auto m : node.members) members.push_back(articles[m].pmid);
        nodes.push_back({{"cluster_id", node.cluster_id},
                         {"level", node.level},
                         {"parent_id", node.parent_id ? nlohmann::json(*node.parent_id) : nlohmann::json(nullptr)},
                         {"children", node.children},
                         {"member_pmids", std::move(members)},
                         {"stability", node.stability}});
    }
    return {{"theta", tree.theta}, {"levels", tree.levels()}, {"nodes", std::move(nodes)}};
}

/// Rebuilds the tree, including per-level labels, against the article order
/// of the map. Member pmids must exist; ids must be 0..n-1 in order.
inline ClusterTree tree_from_json(const nlohmann::json& j, std::span<const Article> articles) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < articles.size(); ++i) index.emplace(articles[i].pmid, i);
    ClusterTree tree;
    try {
        tree.theta = j.at("theta").get<double>();
        const auto levels = j.at("levels").get<std::size_t>();
        tree.level_labels.assign(levels, std::vector<int>(articles.size(), -1));
        for (const auto& jn : j.at("nodes")) {
            ClusterNode node;
            node.cluster_id = jn.at("cluster_id").get<int>();
            node.level = jn.at("level").get<int>();
            if (node.cluster_id != static_cast<int>(tree.nodes.size()))
                throw SchemaError("cluster tree: ids must be consecutive from 0");
            if (node.level < 0 || static_cast<std::size_t>(node.level) >= levels)
                throw SchemaError("cluster tree: node " + std::to_string(node.cluster_id) + " has level out of range");
            if (!jn.at("parent_id").is_null()) node.parent_id = jn.at("parent_id").get<int>();
            node.stability = jn.at("stability").get<double>();
            for (const auto& p : jn.at("member_pmids")) {
                const auto it = index.find(p.get<std::string>());
                if (it == index.end())
                    throw SchemaError("cluster tree: node " + std::to_string(node.cluster_id) + " lists unknown pmid " +
                                      p.get<std::string>());
                auto& slot = tree.level_labels[static_cast<std::size_t>(node.level)][it->second];
                if (slot >= 0) throw SchemaError("cluster tree: pmid " + p.get<std::string>() + " in two clusters of one level");
                slot = node.cluster_id;
                node.members.push_back(it->second);
            }
            std::sort(node.members.begin(), node.members.end());
            tree.nodes.push_back(std::move(node));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("cluster tree: ") + e.what());
    }
    for (const auto& node : tree.nodes) {
        if (!node.parent_id) continue;
        const int p = *node.parent_id;
        if (p < 0 || static_cast<std::size_t>(p) >= tree.nodes.size() || tree.nodes[static_cast<std::size_t>(p)].level != node.level + 1)
            throw SchemaError("cluster tree: node " + std::to_string(node.cluster_id) + " has an invalid parent");
    }
    for (const auto& node : tree.nodes)
        if (node.parent_id) tree.nodes[static_cast<std::size_t>(*node.parent_id)].children.push_back(node.cluster_id);
    return tree;
}

// ---------------------------------------------------------------------------
// Labels

inline nlohmann::json labels_to_json(std::span<const TopicLabel> labels) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& l : labels) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& t : l.terms) terms.push_back({{"term", t.term}, {"score", t.score}});
        out.push_back({{"cluster_id", l.cluster_id}, {"label", l.label}, {"method", l.method}, {"terms", std::move(terms)}});
    }
    return out;
}

inline std::vector<TopicLabel> labels_from_json(const nlohmann::json& j) {
    std::vector<TopicLabel> out;
    try {
        for (const auto& jl : j) {
            TopicLabel l;
            l.cluster_id = jl.at("cluster_id").get<int>();
            l.label = jl.at("label").get<std::string>();
            l.method = jl.value("method", "");
            for (const auto& t : jl.at("terms")) l.terms.push_back({t.at("term").get<std::string>(), t.at("score").get<double>()});
            out.push_back(std::move(l));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("labels: ") + e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Edges

inline nlohmann::json edges_to_json(std::span<const BundledEdge> edges) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : edges) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : e.points) pts.push_back({p.x, p.y});
        out.push_back({{"source", e.source}, {"target", e.target}, {"weight", e.weight}, {"points", std::move(pts)}});
    }
    return out;
}

inline std::vector<BundledEdge> edges_from_json(const nlohmann::json& j) {
    std::vector<BundledEdge> out;
    try {
        for (const auto& je : j) {
            BundledEdge e;
            e.source = je.at("source").get<std::string>();
            e.target = je.at("target").get<std::string>();
            e.weight = je.at("weight").get<double>();
            for (const auto& p : je.at("points")) e.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            if (e.points.size() < 2) throw SchemaError("edges: edge " + e.source + "-" + e.target + " has fewer than 2 points");
            out.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("edges: ") + e.what());
    }
    return out;
}

inline nlohmann::json bundle_report_json(const BundleResult& r) {
    return {{"edges", r.edges.size()},
            {"domain", {r.domain.min_x, r.domain.min_y, r.domain.max_x, r.domain.max_y}},
            {"cell", r.cell},
            {"h0_cells", r.h0_cells},
            {"max_segment_length", r.max_segment_length},
            {"straight_segments", r.straight_segments},
            {"bundled_segments", r.bundled_segments},
            {"rendered_segments", r.rendered_segments}};
}

// ---------------------------------------------------------------------------
// Layout report

inline nlohmann::json layout_report_json(const Layout2D& layout) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& [it, obj] : layout.objective_trace) trace.push_back({it, obj});
    return {{"method", to_string(layout.method)},
            {"seed", layout.seed},
            {"n_points", layout.size()},
            {"final_objective", layout.final_objective},
            {"objective_trace", std::move(trace)}};
}

// ---------------------------------------------------------------------------
// Manifest

struct DatasetManifest {
    std::string dataset_id;
    std::size_t n_articles = 0;
    std::map<std::string, std::string> artifacts;  // role -> file name relative to the manifest
    std::string pipeline_config_digest;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        return {{"dataset_id", dataset_id},
                {"n_articles", n_articles},
                {"artifacts", artifacts},
                {"pipeline_config_digest", pipeline_config_digest},
                {"seed", seed}};
    }

    static DatasetManifest from_json(const nlohmann::json& j) {
        DatasetManifest m;
        try {
            m.dataset_id = j.at("dataset_id").get<std::string>();
            m.n_articles = j.at("n_articles").get<std::size_t>();
            m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
            m.pipeline_config_digest = j.at("pipeline_config_digest").get<std::string>();
            m.seed = j.at("seed").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(std::string("manifest: ") + e.what());
        }
        if (m.dataset_id.empty()) throw SchemaError("manifest: empty dataset_id");
        if (!m.artifacts.contains("map")) throw SchemaError("manifest: no map artifact");
        for (const auto& [role, file] : m.artifacts)
            if (file.empty() || fs::path(file).is_absolute() || file.find("..") != std::string::npos)
                throw SchemaError("manifest: artifact " + role + " must be a plain relative file name");
        return m;
    }
};

inline DatasetManifest read_manifest(const fs::path& dir) {
    return DatasetManifest::from_json(read_json_file(dir / artifact::manifest));
}

// ---------------------------------------------------------------------------
// Binary point block: "PTS1", u32 n, f32 x[n], f32 y[n], u16 year[n],
// i32 cluster[n], f32 size[n]; little-endian. Missing year is 0, missing
// coordinate NaN, noise cluster -1.

struct PointBlock {
    std::vector<float> x, y, size;
    std::vector<std::uint16_t> year;
    std::vector<std::int32_t> cluster;

    std::size_t size_n() const noexcept { return x.size(); }
};

namespace detail {
template <typename T>
void put(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}
template <typename T>
T take(std::string_view in, std::size_t& at) {
    if (at + sizeof(T) > in.size()) throw SchemaError("PTS1 block truncated");
    T v;
    std::memcpy(&v, in.data() + at, sizeof(T));
    at += sizeof(T);
    return v;
}
}  // namespace detail

inline std::string encode_points(std::span<const Article> articles, std::span<const int> cluster) {
    if (cluster.size() != articles.size()) throw ContractError("encode_points: cluster column length mismatch");
    std::string out = "PTS1";
    out.reserve(8 + articles.size() * 18);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(articles.size()));
    const float nan = std::numeric_limits<float>::quiet_NaN();
    for (const auto& a : articles) detail::put<float>(out, a.x ? static_cast<float>(*a.x) : nan);
    for (const auto& a : articles) detail::put<float>(out, a.y ? static_cast<float>(*a.y) : nan);
    for (const auto& a : articles)
        detail::put<std::uint16_t>(out, a.year ? static_cast<std::uint16_t>(std::clamp(*a.year, 0, 65535)) : 0);
    for (const int c : cluster) detail::put<std::int32_t>(out, c);
    for (const auto& a : articles) detail::put<float>(out, static_cast<float>(a.size));
    return out;
}

inline PointBlock decode_points(std::string_view bytes) {
    if (bytes.size() < 8 || bytes.substr(0, 4) != "PTS1") throw SchemaError("not a PTS1 block");
    std::size_t at = 4;
    const auto n = detail::take<std::uint32_t>(bytes, at);
    if (bytes.size() != 8 + static_cast<std::size_t>(n) * 18) throw SchemaError("PTS1 block has the wrong length for n");
    PointBlock b;
    for (std::uint32_t i = 0; i < n; ++i) b.x.push_back(detail::take<float>(bytes, at));
    for (std::uint32_t i = 0; i < n; ++i) b.y.push_back(detail::take<float>(bytes, at));
    for (std::uint32_t i = 0; i < n; ++i) b.year.push_back(detail::take<std::uint16_t>(bytes, at));
    for (std::uint32_t i = 0; i < n; ++i) b.cluster.push_back(detail::take<std::int32_t>(bytes, at));
    for (std::uint32_t i = 0; i < n; ++i) b.size.push_back(detail::take<float>(bytes, at));
    return b;
}

// ---------------------------------------------------------------------------
// Dataset directory

/// Loads every artifact the manifest lists. Throws on anything missing or
/// malformed; the caller decides whether that skips the dataset.
inline Dataset load_dataset_dir(const fs::path& dir) {
    const auto manifest = read_manifest(dir);
    auto file = [&](const std::string& role) { return dir / manifest.artifacts.at(role); };
    auto corpus = read_tsv_file(file("map"));
    if (corpus.size() != manifest.n_articles)
        throw SchemaError("map has " + std::to_string(corpus.size()) + " articles, manifest says " +
                          std::to_string(manifest.n_articles));
    for (const auto& a : corpus.articles)
        if (!a.x || !a.y) throw SchemaError("map: pmid " + a.pmid + " has no coordinates");
    ClusterTree tree;
    if (manifest.artifacts.contains("clusters")) tree = tree_from_json(read_json_file(file("clusters")), corpus.articles);
    std::vector<TopicLabel> labels;
    if (manifest.artifacts.contains("labels")) {
        labels = labels_from_json(read_json_file(file("labels")));
        for (const auto& l : labels)
            if (l.cluster_id < 0 || static_cast<std::size_t>(l.cluster_id) >= tree.nodes.size())
                throw SchemaError("labels: unknown cluster " + std::to_string(l.cluster_id));
    }
    std::vector<BundledEdge> edges;
    if (manifest.artifacts.contains("edges")) edges = edges_from_json(read_json_file(file("edges")));
    std::optional<EmbeddingMatrix> emb;
    if (manifest.artifacts.contains("embeddings")) emb = load_embeddings(file("embeddings"), corpus.pmids());
    return make_dataset(manifest.dataset_id, std::move(corpus.articles), std::move(tree), std::move(labels), std::move(edges),
                        std::move(emb));
}

}  // namespace litmap
