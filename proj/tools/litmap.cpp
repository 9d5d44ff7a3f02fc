// litmap: build map datasets from a corpus and serve them.

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "litmap/pipeline.hpp"
#include "litmap/server.hpp"

namespace {

using namespace litmap;

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string dataset_id;
    bool quiet = false;
};

LogFn stderr_log(bool quiet) {
    if (quiet) return {};
    return [](const std::string& msg) { std::cerr << "[litmap] " << msg << '\n'; };
}

/// --config wins; otherwise the config.txt left in the output directory.
PipelineConfig load_config(const Common& c) {
    PipelineConfig cfg;
    if (!c.config.empty()) cfg = read_config_file(c.config);
    else if (fs::exists(fs::path(c.out) / artifact::config)) cfg = read_config_file(fs::path(c.out) / artifact::config);
    if (c.seed) cfg.seed = c.seed;
    if (!c.dataset_id.empty()) cfg.set("dataset_id", c.dataset_id);
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* app, Common& c, bool config_required) {
    auto* opt = app->add_option("--config", c.config, "key=value config file")->check(CLI::ExistingFile);
    if (config_required) opt->required();
    app->add_option("--out", c.out, "output dataset directory")->required();
    app->add_option("--seed", c.seed, "overrides the config seed");
    app->add_option("--dataset-id", c.dataset_id, "overrides the config dataset_id");
    app->add_flag("--quiet", c.quiet, "no progress messages");
}

int serve(const std::string& data, const std::string& host, int port, const std::string& mode, const std::string& replay,
          const std::string& model_url, const std::string& model_name, bool quiet) {
    const auto log = stderr_log(quiet);
    std::shared_ptr<ModelClient> client;
    if (mode == "stub") {
        client = std::make_shared<StubModelClient>();
    } else if (mode == "replay") {
        if (replay.empty()) throw ConfigError("--replay-file is required with --model-client replay");
        client = std::make_shared<ReplayModelClient>(replay);
    } else {
        LiveModelConfig lc;
        lc.base_url = model_url;
        lc.model = model_name;
        if (const char* key = std::getenv("LITMAP_MODEL_API_KEY")) lc.api_key = key;
        if (lc.base_url.empty()) throw ConfigError("--model-url is required with --model-client live");
        client = std::make_shared<LiveModelClient>(lc);
    }

    // Signals are taken synchronously by a watcher thread so shutdown runs
    // outside a signal handler.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    MapServer server(DatasetRegistry::load(data, [&](const std::string& m) { std::cerr << "[litmap] " << m << '\n'; }), client,
                     log);
    if (server.registry().size() == 0) std::cerr << "[litmap] warning: no dataset could be loaded\n";
    const int bound = server.bind(host, port);
    std::cerr << "[litmap] serving " << server.registry().size() << " dataset(s) on http://" << host << ":" << bound
              << " with the " << client->mode() << " model client\n";
    std::thread([&server, set] {
        int sig = 0;
        sigwait(&set, &sig);
        std::cerr << "[litmap] shutting down\n";
        server.stop();
    }).detach();
    server.run();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"litmap: literature map pipeline and server"};
    app.require_subcommand(1);

    PipelineInputs in;
    Common common;
    std::string embeddings, citations, metrics, from;
    std::vector<std::string> skip;

    auto* pipeline = app.add_subcommand("pipeline", "run every stage and write the manifest");
    pipeline->add_option("--input", in.input, "corpus TSV")->required()->check(CLI::ExistingFile);
    auto* emb_opt = pipeline->add_option("--embeddings", embeddings, "embedding file (EMB1 binary or TSV)");
    pipeline->add_flag("--test-embedder", in.test_embedder, "hashed tf-idf embedder instead of an embedding file")->excludes(emb_opt);
    pipeline->add_option("--citations", citations, "citation links, citing<TAB>cited")->check(CLI::ExistingFile);
    pipeline->add_option("--metrics", metrics, "directory of <pmid>.json citation metrics")->check(CLI::ExistingDirectory);
    pipeline->add_option("--skip", skip, "stages to skip (only bundling)")->delimiter(',');
    pipeline->add_option("--from", from, "resume at this stage");
    add_common(pipeline, common, true);

    struct StageCmd {
        Stage stage;
        CLI::App* cmd;
    };
    std::vector<StageCmd> stage_cmds;
    for (const auto stage : all_stages()) {
        auto* cmd = app.add_subcommand(to_string(stage), std::string("run only the ") + to_string(stage) + " stage");
        add_common(cmd, common, stage == Stage::ingest);
        if (stage == Stage::ingest) {
            cmd->add_option("--input", in.input, "corpus TSV")->required()->check(CLI::ExistingFile);
            cmd->add_option("--metrics", metrics, "directory of <pmid>.json citation metrics")->check(CLI::ExistingDirectory);
        }
        if (stage == Stage::embed) {
            auto* e = cmd->add_option("--embeddings", embeddings, "embedding file (EMB1 binary or TSV)");
            cmd->add_flag("--test-embedder", in.test_embedder, "hashed tf-idf embedder")->excludes(e);
        }
        if (stage == Stage::bundle)
            cmd->add_option("--citations", citations, "citation links, citing<TAB>cited")->required()->check(CLI::ExistingFile);
        stage_cmds.push_back({stage, cmd});
    }
    bool no_edges = false;
    auto* manifest_cmd = app.add_subcommand("manifest", "write the manifest for the artifacts present");
    add_common(manifest_cmd, common, false);
    manifest_cmd->add_flag("--no-edges", no_edges, "leave edges out of the manifest");

    std::string data, host = "127.0.0.1", mode = "stub", replay, model_url, model_name;
    int port = 8080;
    bool serve_quiet = false;
    auto* serve_cmd = app.add_subcommand("serve", "serve datasets over HTTP");
    serve_cmd->add_option("--data", data, "dataset directory, or a directory of dataset directories")->required();
    serve_cmd->add_option("--port", port, "TCP port, 0 for any free port")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", host, "bind address");
    serve_cmd->add_option("--model-client", mode, "stub, replay or live")->check(CLI::IsMember({"stub", "replay", "live"}));
    serve_cmd->add_option("--replay-file", replay, "recorded model replies (JSON lines)");
    serve_cmd->add_option("--model-url", model_url, "chat-completions endpoint base URL; key from LITMAP_MODEL_API_KEY");
    serve_cmd->add_option("--model-name", model_name, "model name sent to the endpoint");
    serve_cmd->add_flag("--quiet", serve_quiet, "no request log");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitValidation;
    }

    if (!embeddings.empty()) in.embeddings = embeddings;
    if (!citations.empty()) in.citations = citations;
    if (!metrics.empty()) in.metrics_dir = metrics;

    try {
        if (*serve_cmd) return serve(data, host, port, mode, replay, model_url, model_name, serve_quiet);

        const auto cfg = load_config(common);
        const auto log = stderr_log(common.quiet);
        const fs::path out = common.out;
        if (*pipeline) {
            PipelineOptions opts;
            for (const auto& s : skip) {
                const auto st = parse_stage(s);
                if (!st) throw ConfigError("unknown stage " + s);
                opts.skip.push_back(*st);
            }
            if (!from.empty()) {
                opts.from = parse_stage(from);
                if (!opts.from) throw ConfigError("unknown stage " + from);
            }
            const auto m = run_pipeline(in, cfg, out, opts, log);
            std::cout << (out / artifact::manifest).string() << '\n';
            if (log) log("dataset " + m.dataset_id + ": " + std::to_string(m.n_articles) + " articles, config " + m.pipeline_config_digest);
            return 0;
        }
        if (*manifest_cmd) {
            write_manifest(cfg, out, !no_edges);
            std::cout << (out / artifact::manifest).string() << '\n';
            return 0;
        }
        for (const auto& sc : stage_cmds) {
            if (!*sc.cmd) continue;
            run_stage(sc.stage, in, cfg, out, log);
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "litmap: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ValidationError& e) {
        std::cerr << "litmap: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "litmap: " << e.what() << '\n';
        return kExitStage;
    }
    return 0;
}
