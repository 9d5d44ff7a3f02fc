#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "litmap/bundling.hpp"
#include "litmap/common.hpp"
#include "litmap/digest.hpp"
#include "litmap/layout.hpp"
#include "litmap/text.hpp"

namespace litmap {

/// Bad configuration value or missing mandatory key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Every tunable of the pipeline. Serialized as sorted key=value lines;
/// the SHA-256 of that text is the config digest.
struct PipelineConfig {
    std::optional<std::uint64_t> seed;
    std::string dataset_id;

    std::size_t embedding_dim = 256;  // test embedder only

    LayoutMethod layout_method = LayoutMethod::largevis;
    std::size_t layout_k = 15;
    double layout_perplexity = 10.0;
    LargeVisConfig largevis;
    TsneConfig tsne;

    std::vector<double> cluster_fractions = {0.005, 0.02, 0.08};
    std::size_t cluster_min_size_floor = 5;
    std::size_t cluster_min_samples = 5;
    double cluster_theta = 0.6;

    std::size_t label_k = 3;
    std::string stopwords = std::string(kStopwordsVersion);

    BundleConfig bundling;
    int cocitation_min_weight = 2;
    std::string edge_kind = "cocitation";  // or "citation"

    std::map<std::string, std::string> to_map() const {
        std::map<std::string, std::string> m;
        auto num = [](double v) { return format_double(v); };
        m["seed"] = seed ? std::to_string(*seed) : "";
        m["dataset_id"] = dataset_id;
        m["embedding.dim"] = std::to_string(embedding_dim);
        m["layout.method"] = to_string(layout_method);
        m["layout.k"] = std::to_string(layout_k);
        m["layout.perplexity"] = num(layout_perplexity);
        m["layout.negatives"] = std::to_string(largevis.negatives);
        m["layout.gamma"] = num(largevis.gamma);
        m["layout.rho0"] = num(largevis.rho0);
        m["layout.n_updates"] = std::to_string(largevis.n_updates);
        m["layout.update_factor"] = std::to_string(largevis.update_factor);
        m["tsne.iterations"] = std::to_string(tsne.iterations);
        m["tsne.early_exaggeration"] = num(tsne.early_exaggeration);
        m["tsne.learning_rate"] = num(tsne.learning_rate);
        std::string fr;
        for (std::size_t i = 0; i < cluster_fractions.size(); ++i) fr += (i ? "," : "") + num(cluster_fractions[i]);
        m["clustering.fractions"] = fr;
        m["clustering.min_size_floor"] = std::to_string(cluster_min_size_floor);
        m["clustering.min_samples"] = std::to_string(cluster_min_samples);
        m["clustering.theta"] = num(cluster_theta);
        m["labeling.k"] = std::to_string(label_k);
        m["labeling.stopwords"] = stopwords;
        m["bundling.grid"] = std::to_string(bundling.grid);
        m["bundling.h0_fraction"] = num(bundling.h0_fraction);
        m["bundling.decay"] = num(bundling.decay);
        m["bundling.iterations"] = std::to_string(bundling.iterations);
        m["bundling.step"] = num(bundling.step);
        m["bundling.smoothing"] = num(bundling.smoothing);
        m["bundling.segment_fraction"] = num(bundling.segment_fraction);
        m["bundling.min_cocitation"] = std::to_string(cocitation_min_weight);
        m["bundling.edge_kind"] = edge_kind;
        return m;
    }

    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : to_map()) out += k + "=" + v + "\n";
        return out;
    }

    std::string digest() const { return sha256_hex(canonical()); }

    void set(const std::string& key, const std::string& value) {
        auto fail = [&](const std::string& why) { throw ConfigError("config " + key + "=" + value + ": " + why); };
        auto as_size = [&](std::size_t lo, std::size_t hi) {
            const auto parsed = parse_int<std::size_t>(value);
            if (!parsed) fail("expected an integer");
            const std::size_t v = *parsed;
            if (v < lo || v > hi) fail("out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
            return v;
        };
        auto as_double = [&](double lo, double hi) {
            const auto parsed = parse_double(value);
            if (!parsed) fail("expected a number");
            const double v = *parsed;
            if (!(v >= lo && v <= hi)) fail("out of range [" + format_double(lo) + ", " + format_double(hi) + "]");
            return v;
        };
        if (key == "seed") {
            seed = parse_int<std::uint64_t>(value);
            if (!seed) fail("expected a non-negative integer");
        } else if (key == "dataset_id") {
            for (const char c : value)
                if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
                    fail("use letters, digits, '-', '_' or '.'");
            dataset_id = value;
        } else if (key == "embedding.dim") embedding_dim = as_size(16, 1 << 16);
        else if (key == "layout.method") {
            if (value == "largevis") layout_method = LayoutMethod::largevis;
            else if (value == "tsne") layout_method = LayoutMethod::tsne;
            else fail("expected largevis or tsne");
        } else if (key == "layout.k") layout_k = as_size(2, 1000);
        else if (key == "layout.perplexity") layout_perplexity = as_double(1.0001, 1000);
        else if (key == "layout.negatives") largevis.negatives = as_size(1, 100);
        else if (key == "layout.gamma") largevis.gamma = as_double(1e-6, 1e6);
        else if (key == "layout.rho0") largevis.rho0 = as_double(1e-9, 100);
        else if (key == "layout.n_updates") largevis.n_updates = as_size(0, std::size_t(1) << 40);
        else if (key == "layout.update_factor") largevis.update_factor = as_size(1, 100000);
        else if (key == "tsne.iterations") tsne.iterations = static_cast<int>(as_size(1, 100000));
        else if (key == "tsne.early_exaggeration") tsne.early_exaggeration = as_double(1, 1000);
        else if (key == "tsne.learning_rate") tsne.learning_rate = as_double(1e-6, 1e6);
        else if (key == "clustering.fractions") {
            std::vector<double> fr;
            for (const auto part : split(value, ',')) {
                const auto parsed = parse_double(trim(part));
                if (!parsed) fail("expected comma-separated numbers");
                const double v = *parsed;
                if (!(v > 0.0 && v < 1.0)) fail("fractions lie in (0, 1)");
                if (!fr.empty() && v < fr.back()) fail("fractions must be non-decreasing");
                fr.push_back(v);
            }
            if (fr.empty()) fail("need at least one fraction");
            cluster_fractions = fr;
        } else if (key == "clustering.min_size_floor") cluster_min_size_floor = as_size(2, 1 << 20);
        else if (key == "clustering.min_samples") cluster_min_samples = as_size(1, 1000);
        else if (key == "clustering.theta") {
            cluster_theta = as_double(0.5, 1.0);
            if (cluster_theta == 0.5) fail("theta must exceed 0.5");
        } else if (key == "labeling.k") label_k = as_size(1, 100);
        else if (key == "labeling.stopwords") {
            if (value != kStopwordsVersion) fail("only stopword list " + std::string(kStopwordsVersion) + " is available");
            stopwords = value;
        } else if (key == "bundling.grid") bundling.grid = static_cast<int>(as_size(8, 4096));
        else if (key == "bundling.h0_fraction") bundling.h0_fraction = as_double(1e-6, 1);
        else if (key == "bundling.decay") bundling.decay = as_double(1e-6, 1);
        else if (key == "bundling.iterations") bundling.iterations = static_cast<int>(as_size(0, 1000));
        else if (key == "bundling.step") bundling.step = as_double(1e-9, 100);
        else if (key == "bundling.smoothing") bundling.smoothing = as_double(0, 1);
        else if (key == "bundling.segment_fraction") bundling.segment_fraction = as_double(1e-6, 1);
        else if (key == "bundling.min_cocitation") cocitation_min_weight = static_cast<int>(as_size(1, 1 << 20));
        else if (key == "bundling.edge_kind") {
            if (value != "cocitation" && value != "citation") fail("expected cocitation or citation");
            edge_kind = value;
        } else
            throw ConfigError("unknown config key " + key);
    }

    void validate() const {
        if (!seed) throw ConfigError("config: seed is mandatory");
        if (layout_perplexity > static_cast<double>(layout_k)) throw ConfigError("config: layout.perplexity must not exceed layout.k");
    }
};

/// Flat "key = value" text; '#' starts a comment line.
inline PipelineConfig parse_config(std::istream& in) {
    PipelineConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        const auto key = std::string(trim(t.substr(0, eq)));
        const auto value = std::string(trim(t.substr(eq + 1)));
        if (key == "seed" && value.empty()) continue;
        cfg.set(key, value);
    }
    return cfg;
}

inline PipelineConfig read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    return parse_config(in);
}

}  // namespace litmap
