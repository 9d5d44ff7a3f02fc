#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "litmap/artifacts.hpp"
#include "litmap/config.hpp"

namespace litmap {

enum class Stage { ingest, embed, layout, cluster, label, bundle };

inline const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> s = {Stage::ingest, Stage::embed, Stage::layout, Stage::cluster, Stage::label, Stage::bundle};
    return s;
}

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::ingest: return "ingest";
        case Stage::embed: return "embed";
        case Stage::layout: return "layout";
        case Stage::cluster: return "cluster";
        case Stage::label: return "label";
        case Stage::bundle: return "bundle";
    }
    return "?";
}

inline std::optional<Stage> parse_stage(std::string_view name) {
    if (name == "bundling") return Stage::bundle;
    for (const auto s : all_stages())
        if (name == to_string(s)) return s;
    return std::nullopt;
}

/// A stage could not start because an earlier stage's output is absent.
class MissingArtifactError : public Error {
public:
    MissingArtifactError(Stage stage, const std::string& file, Stage producer)
        : Error(std::string(to_string(stage)) + " requires " + file + " (run " + to_string(producer) + " first)") {}
};

/// Wraps whatever a stage threw, remembering which stage it was.
class StageError : public Error {
public:
    StageError(Stage stage, const std::string& what)
        : Error(std::string("stage ") + to_string(stage) + " failed: " + what), stage_(stage) {}
    Stage stage() const noexcept { return stage_; }

private:
    Stage stage_;
};

struct PipelineInputs {
    std::filesystem::path input;                      // corpus TSV
    std::optional<std::filesystem::path> embeddings;  // EMB1 or TSV
    bool test_embedder = false;
    std::optional<std::filesystem::path> citations;   // citing<TAB>cited
    std::optional<std::filesystem::path> metrics_dir; // <pmid>.json citation metrics
};

namespace detail {

inline void log_to(const LogFn& log, const std::string& msg) {
    if (log) log(msg);
}

inline Corpus load_map(const fs::path& out, Stage stage) {
    const auto path = out / artifact::map;
    if (!fs::exists(path)) throw MissingArtifactError(stage, artifact::map, Stage::ingest);
    return read_tsv_file(path);
}

inline Corpus load_placed_map(const fs::path& out, Stage stage) {
    auto corpus = load_map(out, stage);
    for (const auto& a : corpus.articles)
        if (!a.x || !a.y) throw MissingArtifactError(stage, std::string(artifact::map) + " coordinates", Stage::layout);
    return corpus;
}

inline std::vector<Point2> points_of(const Corpus& c) {
    std::vector<Point2> pts;
    pts.reserve(c.size());
    for (const auto& a : c.articles) pts.push_back({*a.x, *a.y});
    return pts;
}

inline std::string dump(const nlohmann::json& j) { return j.dump(1) + "\n"; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages. Each reads its prerequisites from the output directory and writes
// its own artifacts there, so any stage can be rerun on its own.

inline void stage_ingest(const PipelineInputs& in, const PipelineConfig& cfg, const fs::path& out, const LogFn& log = {}) {
    auto corpus = read_tsv_file(in.input);
    normalize_corpus(corpus);
    if (in.metrics_dir) {
        FixtureClient client(*in.metrics_dir);
        const auto fetched = fetch_bibliographic(corpus.pmids(), client);
        auto merged = merge_sources(std::move(corpus.articles), fetched.records);
        corpus.articles = std::move(merged.articles);
        for (const auto& c : merged.conflicts)
            detail::log_to(log, "ingest: pmid " + c.pmid + " " + c.field + " keeps " + c.base_value + " over " + c.enrichment_value);
        if (!fetched.unresolved.empty())
            detail::log_to(log, "ingest: no citation metrics for " + std::to_string(fetched.unresolved.size()) + " articles");
    }
    fs::create_directories(out);
    std::ostringstream ss;
    write_tsv(ss, corpus);
    write_file_atomic(out / artifact::map, ss.str());
    write_file_atomic(out / artifact::config, cfg.canonical());
    detail::log_to(log, "ingest: " + std::to_string(corpus.size()) + " articles");
}

inline void stage_embed(const PipelineInputs& in, const PipelineConfig& cfg, const fs::path& out, const LogFn& log = {}) {
    const auto corpus = detail::load_map(out, Stage::embed);
    EmbeddingMatrix m;
    if (in.embeddings) {
        if (!fs::exists(*in.embeddings)) throw Error("embeddings file not found: " + in.embeddings->string());
        m = load_embeddings(*in.embeddings, corpus.pmids());
    } else if (in.test_embedder) {
        auto h = embed_hashed_tfidf(corpus.articles, cfg.embedding_dim, *cfg.seed);
        if (!h.empty_text_ids.empty())
            detail::log_to(log, "embed: " + std::to_string(h.empty_text_ids.size()) + " articles without text got zero vectors");
        m = std::move(h.matrix);
    } else {
        throw Error("no embeddings source: pass an embeddings file or select the test embedder");
    }
    write_embeddings_binary(out / artifact::embeddings, m);
    detail::log_to(log, "embed: " + std::to_string(m.rows()) + " x " + std::to_string(m.dim()));
}

inline void stage_layout(const PipelineConfig& cfg, const fs::path& out, const LogFn& log = {}) {
    auto corpus = detail::load_map(out, Stage::layout);
    if (!fs::exists(out / artifact::embeddings)) throw MissingArtifactError(Stage::layout, artifact::embeddings, Stage::embed);
    const auto m = load_embeddings(out / artifact::embeddings, corpus.pmids());
    const std::size_t n = m.rows();
    if (n < 3) throw Error("layout needs at least 3 articles, got " + std::to_string(n));
    Layout2D layout;
    if (cfg.layout_method == LayoutMethod::tsne) {
        layout = fit_tsne_exact(m, std::min(cfg.layout_perplexity, static_cast<double>(n - 1) / 3.0), *cfg.seed, cfg.tsne);
    } else {
        const std::size_t k = std::min(cfg.layout_k, n - 1);
        const double perplexity = std::min(cfg.layout_perplexity, static_cast<double>(k));
        if (k != cfg.layout_k) detail::log_to(log, "layout: k reduced to " + std::to_string(k) + " for a small corpus");
        const auto g = build_knn_graph(m, k, perplexity);
        layout = fit_largevis(g, *cfg.seed, cfg.largevis);
    }
    for (std::size_t i = 0; i < n; ++i) {
        corpus.articles[i].x = layout.x(i);
        corpus.articles[i].y = layout.y(i);
    }
    std::ostringstream ss;
    write_tsv(ss, corpus);
    write_file_atomic(out / artifact::map, ss.str());
    write_file_atomic(out / artifact::layout_report, detail::dump(layout_report_json(layout)));
    detail::log_to(log, std::string("layout: ") + to_string(layout.method) + " objective " + format_double(layout.final_objective));
}

inline void stage_cluster(const PipelineConfig& cfg, const fs::path& out, const LogFn& log = {}) {
    auto corpus = detail::load_placed_map(out, Stage::cluster);
    const auto pts = detail::points_of(corpus);
    const auto ids = corpus.pmids();
    const auto schedule = default_schedule(corpus.size(), cfg.cluster_fractions, cfg.cluster_min_size_floor, cfg.cluster_min_samples);
    const auto tree = build_hierarchy(pts, schedule, cfg.cluster_theta, ids);
    const auto finest = tree.finest_labels(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) corpus.articles[i].color = std::to_string(finest[i]);
    std::ostringstream ss;
    write_tsv(ss, corpus);
    write_file_atomic(out / artifact::clusters, detail::dump(tree_to_json(tree, corpus.articles)));
    write_file_atomic(out / artifact::map, ss.str());
    detail::log_to(log, "cluster: " + std::to_string(tree.nodes.size()) + " clusters over " + std::to_string(tree.levels()) + " levels");
}

inline void stage_label(const PipelineConfig& cfg, const fs::path& out, const LogFn& log = {}) {
    if (!fs::exists(out / artifact::clusters)) throw MissingArtifactError(Stage::label, artifact::clusters, Stage::cluster);
    const auto corpus = detail::load_placed_map(out, Stage::label);
    const auto tree = tree_from_json(read_json_file(out / artifact::clusters), corpus.articles);
    const auto labels = label_tree(tree, corpus.articles, cfg.label_k);
    write_file_atomic(out / artifact::labels, detail::dump(labels_to_json(labels)));
    detail::log_to(log, "label: " + std::to_string(labels.size()) + " labels");
}

inline void stage_bundle(const PipelineInputs& in, const PipelineConfig& cfg, const fs::path& out, const LogFn& log = {}) {
    const auto corpus = detail::load_placed_map(out, Stage::bundle);
    if (!in.citations) throw Error("bundle needs a citation link file");
    std::ifstream cin(*in.citations);
    if (!cin) throw Error("cannot open " + in.citations->string());
    const auto links = read_citation_links(cin);
    std::unordered_set<std::string> ids;
    std::unordered_map<std::string, Point2> coords;
    for (const auto& a : corpus.articles) {
        ids.insert(a.pmid);
        coords.emplace(a.pmid, Point2{*a.x, *a.y});
    }
    const auto raw = cfg.edge_kind == "citation" ? citation_edges(links, ids) : cocitation_edges(links, ids, cfg.cocitation_min_weight);
    const auto result = bundle_edges(raw, coords, cfg.bundling);
    write_file_atomic(out / artifact::edges, edges_to_json(result.edges).dump() + "\n");
    write_file_atomic(out / artifact::bundle_report, detail::dump(bundle_report_json(result)));
    detail::log_to(log, "bundle: " + std::to_string(result.edges.size()) + " edges, " + std::to_string(result.rendered_segments) +
                            " rendered segments");
}

// ---------------------------------------------------------------------------
// Manifest and orchestration

/// Lists whichever artifacts are present. Edges are included only when
/// `with_edges` is set.
inline DatasetManifest write_manifest(const PipelineConfig& cfg, const fs::path& out, bool with_edges = true) {
    cfg.validate();
    const auto corpus = detail::load_placed_map(out, Stage::layout);
    DatasetManifest m;
    m.dataset_id = cfg.dataset_id.empty() ? fs::absolute(out).lexically_normal().filename().string() : cfg.dataset_id;
    if (m.dataset_id.empty()) m.dataset_id = "dataset";
    m.n_articles = corpus.size();
    m.pipeline_config_digest = cfg.digest();
    m.seed = *cfg.seed;
    write_file_atomic(out / artifact::config, cfg.canonical());
    const std::pair<const char*, const char*> roles[] = {
        {"map", artifact::map},           {"clusters", artifact::clusters},           {"labels", artifact::labels},
        {"edges", artifact::edges},       {"embeddings", artifact::embeddings},       {"layout_report", artifact::layout_report},
        {"config", artifact::config},     {"bundle_report", artifact::bundle_report},
    };
    for (const auto& [role, file] : roles) {
        if (!with_edges && (std::string_view(role) == "edges" || std::string_view(role) == "bundle_report")) continue;
        if (fs::exists(out / file)) m.artifacts[role] = file;
    }
    write_file_atomic(out / artifact::manifest, detail::dump(m.to_json()));
    return m;
}

/// Artifacts made stale when `stage` reruns.
inline std::vector<const char*> downstream_artifacts(Stage stage) {
    switch (stage) {
        case Stage::ingest:
            return {artifact::embeddings, artifact::layout_report, artifact::clusters, artifact::labels, artifact::edges,
                    artifact::bundle_report};
        case Stage::embed:
        case Stage::layout:
            return {artifact::layout_report, artifact::clusters, artifact::labels, artifact::edges, artifact::bundle_report};
        case Stage::cluster: return {artifact::labels};
        case Stage::label:
        case Stage::bundle: return {};
    }
    return {};
}

/// Runs one stage with failure bookkeeping: the manifest and any artifacts
/// the stage invalidates are removed up front, and a failure leaves a
/// marker naming the stage.
inline void run_stage(Stage stage, const PipelineInputs& in, const PipelineConfig& cfg, const fs::path& out, const LogFn& log = {}) {
    cfg.validate();
    fs::create_directories(out);
    fs::remove(out / artifact::manifest);
    for (const auto* file : downstream_artifacts(stage))
        if (stage != Stage::layout || std::string_view(file) != artifact::layout_report) fs::remove(out / file);
    try {
        switch (stage) {
            case Stage::ingest: stage_ingest(in, cfg, out, log); break;
            case Stage::embed: stage_embed(in, cfg, out, log); break;
            case Stage::layout: stage_layout(cfg, out, log); break;
            case Stage::cluster: stage_cluster(cfg, out, log); break;
            case Stage::label: stage_label(cfg, out, log); break;
            case Stage::bundle: stage_bundle(in, cfg, out, log); break;
        }
    } catch (const MissingArtifactError&) {
        throw;
    } catch (const std::exception& e) {
        write_file_atomic(out / artifact::stage_marker, std::string(to_string(stage)) + "\n" + e.what() + "\n");
        throw StageError(stage, e.what());
    }
    const auto marker = out / artifact::stage_marker;
    if (fs::exists(marker) && read_file(marker).starts_with(std::string(to_string(stage)) + "\n")) fs::remove(marker);
}

struct PipelineOptions {
    std::vector<Stage> skip;
    std::optional<Stage> from;  // resume: earlier stages are assumed done
};

/// ingest, embed, layout, cluster, label, bundle, then the manifest. Bundling
/// runs only when citation links are supplied and it is not skipped.
inline DatasetManifest run_pipeline(const PipelineInputs& in, const PipelineConfig& cfg, const fs::path& out,
                                    const PipelineOptions& opts = {}, const LogFn& log = {}) {
    cfg.validate();
    auto skipped = [&](Stage s) { return std::find(opts.skip.begin(), opts.skip.end(), s) != opts.skip.end(); };
    for (const auto s : opts.skip)
        if (s != Stage::bundle) throw ConfigError(std::string("stage ") + to_string(s) + " cannot be skipped");
    bool started = !opts.from;
    for (const auto s : all_stages()) {
        if (!started && s == *opts.from) started = true;
        if (!started) continue;
        if (s == Stage::bundle) {
            if (skipped(s) || !in.citations) {
                detail::log_to(log, skipped(s) ? "bundle: skipped" : "bundle: no citation links, skipped");
                fs::remove(out / artifact::edges);
                fs::remove(out / artifact::bundle_report);
                continue;
            }
        }
        run_stage(s, in, cfg, out, log);
    }
    return write_manifest(cfg, out);
}

}  // namespace litmap
