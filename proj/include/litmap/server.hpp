#pragma once

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "litmap/agents.hpp"
#include "litmap/artifacts.hpp"

namespace litmap {

inline constexpr std::size_t kArticlePageSize = 100;

/// One loaded dataset plus the response bodies that never change.
struct ServedDataset {
    std::shared_ptr<const Dataset> data;
    DatasetManifest manifest;
    std::string points_tsv;
    std::string points_binary;
    std::string clusters_json;
    std::string labels_json;
    std::string edges_json;
};

struct SkippedDataset {
    std::filesystem::path dir;
    std::string reason;
};

inline nlohmann::json article_json(const Dataset& ds, std::size_t i) {
    const auto& a = ds.articles[i];
    return {{"pmid", a.pmid},
            {"date", a.date},
            {"year", a.year ? nlohmann::json(*a.year) : nlohmann::json(nullptr)},
            {"journal", a.journal},
            {"title", a.title},
            {"abstract", a.abstract},
            {"mesh_terms", a.mesh_terms},
            {"x", a.x ? nlohmann::json(*a.x) : nlohmann::json(nullptr)},
            {"y", a.y ? nlohmann::json(*a.y) : nlohmann::json(nullptr)},
            {"citation_count", a.citation_count},
            {"size", a.size},
            {"cluster_id", ds.finest[i]}};
}

inline ServedDataset serve_dataset(const std::filesystem::path& dir) {
    ServedDataset s;
    s.manifest = read_manifest(dir);
    auto ds = std::make_shared<Dataset>(load_dataset_dir(dir));
    s.points_tsv = read_file(dir / s.manifest.artifacts.at("map"));
    s.points_binary = encode_points(ds->articles, ds->finest);
    auto tree = tree_to_json(ds->tree, ds->articles);
    for (auto& node : tree["nodes"]) node["label"] = ds->cluster_label(node["cluster_id"].get<int>());
    s.clusters_json = tree.dump();
    std::vector<TopicLabel> labels;
    for (const auto& [id, l] : ds->labels) labels.push_back(l);
    s.labels_json = labels_to_json(labels).dump();
    s.edges_json = edges_to_json(ds->edges).dump();
    s.data = std::move(ds);
    return s;
}

/// Datasets found under data_dir: the directory itself if it holds a
/// manifest, then every immediate subdirectory that does, in name order.
/// Datasets that fail to load are skipped and reported.
class DatasetRegistry {
public:
    static DatasetRegistry load(const std::filesystem::path& data_dir, const LogFn& log = {}) {
        namespace fs = std::filesystem;
        if (!fs::is_directory(data_dir)) throw Error("data directory not found: " + data_dir.string());
        std::vector<fs::path> dirs;
        if (fs::exists(data_dir / artifact::manifest)) dirs.push_back(data_dir);
        std::vector<fs::path> subs;
        for (const auto& e : fs::directory_iterator(data_dir))
            if (e.is_directory() && fs::exists(e.path() / artifact::manifest)) subs.push_back(e.path());
        std::sort(subs.begin(), subs.end());
        dirs.insert(dirs.end(), subs.begin(), subs.end());
        if (dirs.empty()) throw Error("no dataset manifest under " + data_dir.string());

        DatasetRegistry reg;
        for (const auto& dir : dirs) {
            try {
                auto served = serve_dataset(dir);
                const auto id = served.data->id;
                if (reg.datasets_.contains(id)) throw Error("duplicate dataset id " + id);
                reg.datasets_.emplace(id, std::move(served));
                if (log) log("loaded dataset " + id + " from " + dir.string());
            } catch (const std::exception& e) {
                reg.skipped_.push_back({dir, e.what()});
                if (log) log("skipped dataset at " + dir.string() + ": " + e.what());
            }
        }
        return reg;
    }

    void add(ServedDataset s) {
        const auto id = s.data->id;
        if (!datasets_.emplace(id, std::move(s)).second) throw ContractError("duplicate dataset id " + id);
    }

    const ServedDataset* find(const std::string& id) const {
        const auto it = datasets_.find(id);
        return it == datasets_.end() ? nullptr : &it->second;
    }
    const std::map<std::string, ServedDataset>& datasets() const noexcept { return datasets_; }
    const std::vector<SkippedDataset>& skipped() const noexcept { return skipped_; }
    std::size_t size() const noexcept { return datasets_.size(); }

private:
    std::map<std::string, ServedDataset> datasets_;
    std::vector<SkippedDataset> skipped_;
};

/// HTTP front end. The registry is read-only once the server exists;
/// handlers run concurrently on the httplib thread pool.
class MapServer {
public:
    MapServer(DatasetRegistry registry, std::shared_ptr<ModelClient> client, LogFn log = {},
              std::shared_ptr<OpenRetrievalClient> open = nullptr)
        : registry_(std::move(registry)), client_(std::move(client)), open_(std::move(open)), log_(std::move(log)) {
        if (!client_) throw ContractError("server needs a model client");
        routes();
    }

    /// Binds, port 0 picks a free port. Throws if the port is taken.
    int bind(const std::string& host, int port) {
        int bound = port;
        if (port == 0) bound = svr_.bind_to_any_port(host);
        else if (!svr_.bind_to_port(host, port)) bound = -1;
        if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
        port_ = bound;
        return bound;
    }

    /// Blocks until stop().
    void run() {
        if (port_ < 0) throw ContractError("server is not bound");
        svr_.listen_after_bind();
    }

    void stop() { svr_.stop(); }
    void wait_until_ready() const { svr_.wait_until_ready(); }
    int port() const noexcept { return port_; }
    const DatasetRegistry& registry() const noexcept { return registry_; }

private:
    static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }
    static void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
        send_json(res, status, {{"error", kind}, {"message", message}});
    }

    const ServedDataset* dataset_or_404(const httplib::Request& req, httplib::Response& res) const {
        const auto id = req.matches[1].str();
        const auto* s = registry_.find(id);
        if (!s) send_error(res, 404, "not_found", "unknown dataset " + id);
        return s;
    }

    void routes() {
        // No SO_REUSEPORT, so a port already in use fails to bind.
        svr_.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
        });
        svr_.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
            if (log_) log_(req.method + " " + req.path + " -> " + std::to_string(res.status) + " (" + std::to_string(res.body.size()) + " bytes)");
        });
        svr_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what());
            } catch (...) {
                send_error(res, 500, "internal", "unknown error");
            }
        });

        svr_.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}, {"datasets", registry_.size()}, {"model_client", client_->mode()}});
        });

        svr_.Get("/api/datasets", [this](const httplib::Request&, httplib::Response& res) {
            auto arr = nlohmann::json::array();
            for (const auto& [id, s] : registry_.datasets())
                arr.push_back({{"dataset_id", id},
                               {"n_articles", s.data->size()},
                               {"n_clusters", s.data->tree.nodes.size()},
                               {"levels", s.data->tree.levels()},
                               {"n_edges", s.data->edges.size()},
                               {"has_embeddings", s.data->embeddings.has_value()},
                               {"pipeline_config_digest", s.manifest.pipeline_config_digest},
                               {"seed", s.manifest.seed}});
            send_json(res, 200, {{"datasets", arr}});
        });

        svr_.Get(R"(/api/datasets/([^/]+)/points)", [this](const httplib::Request& req, httplib::Response& res) {
            const auto* s = dataset_or_404(req, res);
            if (!s) return;
            const auto format = req.has_param("format") ? req.get_param_value("format") : "tsv";
            if (format == "tsv") res.set_content(s->points_tsv, "text/tab-separated-values; charset=utf-8");
            else if (format == "binary") res.set_content(s->points_binary, "application/octet-stream");
            else send_json(res, 400, ValidationError("format", "expected tsv or binary").to_json());
        });

        svr_.Get(R"(/api/datasets/([^/]+)/clusters)", [this](const httplib::Request& req, httplib::Response& res) {
            if (const auto* s = dataset_or_404(req, res)) res.set_content(s->clusters_json, "application/json");
        });
        svr_.Get(R"(/api/datasets/([^/]+)/labels)", [this](const httplib::Request& req, httplib::Response& res) {
            if (const auto* s = dataset_or_404(req, res)) res.set_content(s->labels_json, "application/json");
        });
        svr_.Get(R"(/api/datasets/([^/]+)/edges)", [this](const httplib::Request& req, httplib::Response& res) {
            if (const auto* s = dataset_or_404(req, res)) res.set_content(s->edges_json, "application/json");
        });

        svr_.Get(R"(/api/datasets/([^/]+)/articles)", [this](const httplib::Request& req, httplib::Response& res) {
            const auto* s = dataset_or_404(req, res);
            if (!s) return;
            const auto& ds = *s->data;
            std::size_t page = 0;
            if (req.has_param("page")) {
                const auto p = parse_int<std::size_t>(req.get_param_value("page"));
                if (!p) return send_json(res, 400, ValidationError("page", "expected a non-negative integer").to_json());
                page = *p;
            }
            std::vector<std::size_t> rows;
            std::vector<std::string> unknown;
            if (req.has_param("pmids")) {
                const auto list = req.get_param_value("pmids");
                for (const auto part : split(list, ',')) {
                    const auto id = std::string(trim(part));
                    if (id.empty()) continue;
                    const auto it = ds.by_pmid.find(id);
                    if (it == ds.by_pmid.end()) unknown.push_back(id);
                    else rows.push_back(it->second);
                }
            } else {
                rows.resize(ds.size());
                std::iota(rows.begin(), rows.end(), std::size_t{0});
            }
            auto arr = nlohmann::json::array();
            for (std::size_t i = page * kArticlePageSize; i < rows.size() && i < (page + 1) * kArticlePageSize; ++i)
                arr.push_back(article_json(ds, rows[i]));
            send_json(res, 200,
                      {{"articles", arr}, {"page", page}, {"page_size", kArticlePageSize}, {"total", rows.size()}, {"unknown", unknown}});
        });

        svr_.Post(R"(/api/datasets/([^/]+)/selection/polygon)", [this](const httplib::Request& req, httplib::Response& res) {
            const auto* s = dataset_or_404(req, res);
            if (!s) return;
            std::vector<Point2> poly;
            try {
                const auto body = nlohmann::json::parse(req.body);
                const auto& verts = body.at("vertices");
                if (!verts.is_array()) throw ValidationError("vertices", "must be an array of [x, y] pairs");
                for (const auto& v : verts) {
                    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
                        throw ValidationError("vertices", "must be an array of [x, y] pairs");
                    poly.push_back({v[0].get<double>(), v[1].get<double>()});
                    if (!std::isfinite(poly.back().x) || !std::isfinite(poly.back().y))
                        throw ValidationError("vertices", "must be finite");
                }
                if (poly.size() < 3) throw ValidationError("vertices", "needs at least 3 vertices");
            } catch (const ValidationError& e) {
                return send_json(res, 400, e.to_json());
            } catch (const nlohmann::json::exception& e) {
                return send_json(res, 400, ValidationError("vertices", e.what()).to_json());
            }
            const auto pmids = s->data->spatial.query_polygon(poly);
            send_json(res, 200, {{"pmids", pmids}, {"count", pmids.size()}});
        });

        svr_.Post("/api/agent/query", [this](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception& e) {
                return send_json(res, 400, ValidationError("body", std::string("invalid JSON: ") + e.what()).to_json());
            }
            try {
                const auto payload = payload_from_json(body);
                if (payload.dataset_id.empty()) throw ValidationError("dataset_id", "required");
                const auto* s = registry_.find(payload.dataset_id);
                if (!s) return send_error(res, 404, "not_found", "unknown dataset " + payload.dataset_id);
                const auto response = handle_query(*s->data, payload, *client_, open_.get());
                if (log_) log_("agent query on " + payload.dataset_id + ": " + body.dump() + " -> " + to_json(response).dump());
                send_json(res, 200, to_json(response));
            } catch (const ValidationError& e) {
                send_json(res, 400, e.to_json());
            } catch (const ModelError& e) {
                send_error(res, 502, "model", e.what());
            }
        });
    }

    DatasetRegistry registry_;
    std::shared_ptr<ModelClient> client_;
    std::shared_ptr<OpenRetrievalClient> open_;
    LogFn log_;
    httplib::Server svr_;
    int port_ = -1;
};

}  // namespace litmap
