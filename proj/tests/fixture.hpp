// The 200-article fixture run through the whole pipeline once per process.
#pragma once

#include "litmap/pipeline.hpp"
#include "litmap/server.hpp"
#include "oracles.hpp"

namespace fixture {

inline litmap::PipelineConfig config(std::uint64_t seed = 42) {
    litmap::PipelineConfig cfg;
    cfg.seed = seed;
    return cfg;
}

inline litmap::PipelineInputs inputs(bool with_citations = true) {
    litmap::PipelineInputs in;
    in.input = oracle::data_dir() / "corpus200.tsv";
    in.test_embedder = true;
    if (with_citations) in.citations = oracle::data_dir() / "citations200.tsv";
    in.metrics_dir = oracle::data_dir() / "icite";
    return in;
}

/// Directory holding the built dataset "fixture200".
inline const std::filesystem::path& dataset_dir() {
    static oracle::TempDir root;
    static const auto dir = [] {
        const auto d = root / "fixture200";
        litmap::run_pipeline(inputs(), config(), d, {});
        return d;
    }();
    return dir;
}

inline const litmap::Dataset& dataset() {
    static const litmap::Dataset ds = litmap::load_dataset_dir(dataset_dir());
    return ds;
}

}  // namespace fixture
