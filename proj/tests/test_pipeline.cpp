#include <gtest/gtest.h>

#include "fixture.hpp"
#include "litmap/pipeline.hpp"
#include "oracles.hpp"

using namespace litmap;
using nlohmann::json;

TEST(Pipeline, FullRunWritesEveryArtifact) {
    const auto& dir = fixture::dataset_dir();
    for (const char* f : {"map.tsv", "clusters.json", "labels.json", "edges.json", "embeddings.emb", "layout.json",
                          "bundle.json", "config.txt", "manifest.json"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_FALSE(fs::exists(dir / "FAILED_STAGE"));
    const auto m = read_manifest(dir);
    EXPECT_EQ(m.dataset_id, "fixture200");
    EXPECT_EQ(m.n_articles, 200u);
    EXPECT_EQ(m.seed, 42u);
    EXPECT_EQ(m.pipeline_config_digest, fixture::config().digest());
    for (const auto& [role, file] : m.artifacts) EXPECT_TRUE(fs::exists(dir / file)) << role;
    EXPECT_EQ(oracle::slurp(dir / "config.txt"), fixture::config().canonical());

    const auto& ds = fixture::dataset();
    EXPECT_GE(ds.tree.levels(), 2u);
    for (const auto& a : ds.articles) {
        ASSERT_TRUE(a.x && a.y);
        EXPECT_TRUE(std::isfinite(*a.x) && std::isfinite(*a.y));
    }
    for (const auto& node : ds.tree.nodes) EXPECT_TRUE(ds.labels.contains(node.cluster_id));
}

TEST(Pipeline, SameSeedSameBytes) {
    oracle::TempDir a, b;
    run_pipeline(fixture::inputs(), fixture::config(), a / "fixture200");
    const auto first = oracle::snapshot(a / "fixture200");
    EXPECT_EQ(first, oracle::snapshot(fixture::dataset_dir()));
    run_pipeline(fixture::inputs(), fixture::config(7), b / "fixture200");
    EXPECT_NE(oracle::snapshot(b / "fixture200").at("map.tsv"), first.at("map.tsv"));
}

TEST(Pipeline, StageByStageMatchesFullRun) {
    oracle::TempDir root;
    const auto out = root / "fixture200";
    for (const auto s : all_stages()) run_stage(s, fixture::inputs(), fixture::config(), out);
    write_manifest(fixture::config(), out);
    EXPECT_EQ(oracle::snapshot(out), oracle::snapshot(fixture::dataset_dir()));
}

TEST(Pipeline, MissingEmbeddingsFailsAtEmbed) {
    oracle::TempDir root;
    auto in = fixture::inputs();
    in.test_embedder = false;
    try {
        run_pipeline(in, fixture::config(), root / "d");
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), Stage::embed);
    }
    EXPECT_TRUE(fs::exists(root / "d" / "map.tsv"));
    EXPECT_FALSE(fs::exists(root / "d" / "manifest.json"));
    EXPECT_TRUE(oracle::slurp(root / "d" / "FAILED_STAGE").starts_with("embed\n"));

    in.embeddings = root / "absent.emb";
    EXPECT_THROW(run_stage(Stage::embed, in, fixture::config(), root / "d"), StageError);
}

TEST(Pipeline, StagesNeedTheirInputs) {
    oracle::TempDir root;
    const auto out = root / "d";
    run_stage(Stage::ingest, fixture::inputs(), fixture::config(), out);
    try {
        run_stage(Stage::label, fixture::inputs(), fixture::config(), out);
        FAIL();
    } catch (const MissingArtifactError& e) {
        EXPECT_NE(std::string(e.what()).find("clusters.json"), std::string::npos);
    }
    EXPECT_THROW(run_stage(Stage::layout, fixture::inputs(), fixture::config(), out), MissingArtifactError);
    EXPECT_FALSE(fs::exists(out / "FAILED_STAGE"));
}

TEST(Pipeline, RerunningAStageDropsStaleOutputs) {
    oracle::TempDir root;
    const auto out = root / "d";
    fs::copy(fixture::dataset_dir(), out, fs::copy_options::recursive);
    run_stage(Stage::cluster, fixture::inputs(), fixture::config(), out);
    EXPECT_TRUE(fs::exists(out / "clusters.json"));
    EXPECT_FALSE(fs::exists(out / "labels.json"));
    EXPECT_FALSE(fs::exists(out / "manifest.json"));
    EXPECT_TRUE(fs::exists(out / "edges.json"));
}

TEST(Pipeline, ResumeFromALaterStage) {
    oracle::TempDir root;
    const auto out = root / "fixture200";
    fs::copy(fixture::dataset_dir(), out, fs::copy_options::recursive);
    fs::remove(out / "labels.json");
    PipelineOptions opts;
    opts.from = Stage::label;
    run_pipeline(fixture::inputs(), fixture::config(), out, opts);
    EXPECT_EQ(oracle::snapshot(out), oracle::snapshot(fixture::dataset_dir()));
}

TEST(Pipeline, SkippingBundleLeavesEdgesOut) {
    oracle::TempDir root;
    const auto out = root / "d";
    PipelineOptions opts;
    opts.skip = {Stage::bundle};
    const auto m = run_pipeline(fixture::inputs(), fixture::config(), out, opts);
    EXPECT_FALSE(m.artifacts.contains("edges"));
    EXPECT_FALSE(fs::exists(out / "edges.json"));
    EXPECT_TRUE(load_dataset_dir(out).edges.empty());
    opts.skip = {Stage::layout};
    EXPECT_THROW(run_pipeline(fixture::inputs(), fixture::config(), out, opts), ConfigError);
}

TEST(Pipeline, ManifestWithoutEdges) {
    oracle::TempDir root;
    const auto out = root / "d";
    fs::copy(fixture::dataset_dir(), out, fs::copy_options::recursive);
    const auto m = write_manifest(fixture::config(), out, false);
    EXPECT_FALSE(m.artifacts.contains("edges"));
    EXPECT_FALSE(m.artifacts.contains("bundle_report"));
    EXPECT_TRUE(m.artifacts.contains("labels"));
    EXPECT_EQ(m.dataset_id, "d");
}

TEST(Artifacts, JsonRoundTrips) {
    const auto& ds = fixture::dataset();
    const auto tree = tree_to_json(ds.tree, ds.articles);
    EXPECT_EQ(tree_to_json(tree_from_json(tree, ds.articles), ds.articles), tree);
    std::vector<TopicLabel> labels;
    for (const auto& [id, l] : ds.labels) labels.push_back(l);
    EXPECT_EQ(labels_to_json(labels_from_json(labels_to_json(labels))), labels_to_json(labels));
    EXPECT_EQ(edges_to_json(edges_from_json(edges_to_json(ds.edges))), edges_to_json(ds.edges));
    EXPECT_EQ(json::parse(oracle::slurp(fixture::dataset_dir() / "clusters.json")), tree);
}

TEST(Artifacts, MalformedFilesAreRejected) {
    const auto& ds = fixture::dataset();
    auto tree = tree_to_json(ds.tree, ds.articles);
    tree["nodes"][0]["member_pmids"].push_back("not-a-pmid");
    EXPECT_THROW(tree_from_json(tree, ds.articles), Error);
    EXPECT_THROW(DatasetManifest::from_json(json::parse(R"({"dataset_id":"x","n_articles":1,"artifacts":{"map":"../m.tsv"},
        "pipeline_config_digest":"d","seed":1})")),
                 SchemaError);
    EXPECT_THROW(edges_from_json(json::parse(R"([{"source":"1"}])")), Error);
}

namespace {

oracle::RunResult cli(const std::string& args) { return oracle::run(oracle::quote(oracle::cli_path()) + " " + args); }

std::string write_config(const oracle::TempDir& dir, const std::string& text) {
    oracle::spit(dir / "cfg.txt", text);
    return oracle::quote(dir / "cfg.txt");
}

}  // namespace

TEST(Cli, PipelineRunMatchesLibrary) {
    oracle::TempDir root;
    const auto cfg = write_config(root, "seed=42\n");
    const auto out = root / "fixture200";
    const auto r = cli("pipeline --quiet --input " + oracle::quote(oracle::data_dir() / "corpus200.tsv") +
                       " --test-embedder --citations " + oracle::quote(oracle::data_dir() / "citations200.tsv") +
                       " --metrics " + oracle::quote(oracle::data_dir() / "icite") + " --config " + cfg + " --out " +
                       oracle::quote(out));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(oracle::snapshot(out), oracle::snapshot(fixture::dataset_dir()));

    const auto m = cli("manifest --no-edges --out " + oracle::quote(out));
    ASSERT_EQ(m.code, 0) << m.output;
    EXPECT_FALSE(read_manifest(out).artifacts.contains("edges"));
}

TEST(Cli, ExitCodes) {
    oracle::TempDir root;
    const auto input = oracle::quote(oracle::data_dir() / "corpus200.tsv");
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("frobnicate").code, 2);
    EXPECT_EQ(cli("pipeline --input " + input + " --out x").code, 2);
    const auto bad = write_config(root, "seed=abc\n");
    EXPECT_EQ(cli("pipeline --input " + input + " --test-embedder --config " + bad + " --out " + oracle::quote(root / "a")).code, 2);
    const auto unknown = write_config(root, "seed=1\nlayout.colour=red\n");
    EXPECT_EQ(cli("pipeline --input " + input + " --test-embedder --config " + unknown + " --out " + oracle::quote(root / "a")).code, 2);

    const auto cfg = write_config(root, "seed=1\n");
    const auto fail = cli("pipeline --quiet --input " + input + " --config " + cfg + " --out " + oracle::quote(root / "b"));
    EXPECT_EQ(fail.code, 3) << fail.output;
    EXPECT_NE(fail.output.find("embed"), std::string::npos);
    EXPECT_TRUE(oracle::slurp(root / "b" / "FAILED_STAGE").starts_with("embed\n"));

    const auto missing = cli("label --quiet --out " + oracle::quote(root / "b"));
    EXPECT_EQ(missing.code, 3);
    EXPECT_NE(missing.output.find("clusters.json"), std::string::npos);
    EXPECT_EQ(cli("--help").code, 0);
}
