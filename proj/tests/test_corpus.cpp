#include <gtest/gtest.h>

#include <sstream>

#include "litmap/artifacts.hpp"
#include "litmap/config.hpp"
#include "litmap/corpus.hpp"
#include "litmap/embedding.hpp"
#include "oracles.hpp"

using namespace litmap;

namespace {

Corpus parse(const std::string& s) {
    std::istringstream in(s);
    return parse_tsv(in);
}

const std::string kHeader = "pmid\tdate\tjournal\ttitle\tabstract\tmesh_terms\tx\ty\tcitation_count\tsize\tcolor\n";

}  // namespace

TEST(Corpus, ParsesFullRow) {
    const auto c = parse(kHeader + "101\t2020\tJ1\tT\tA\tcancer;mice\t0.5\t-1.2\t10\t1.5\t3\n");
    ASSERT_EQ(c.articles.size(), 1u);
    const auto& a = c.articles[0];
    EXPECT_EQ(a.pmid, "101");
    EXPECT_EQ(a.year, 2020);
    EXPECT_EQ(a.mesh_terms, (std::vector<std::string>{"cancer", "mice"}));
    EXPECT_DOUBLE_EQ(*a.x, 0.5);
    EXPECT_DOUBLE_EQ(*a.y, -1.2);
    EXPECT_EQ(a.citation_count, 10);
    EXPECT_DOUBLE_EQ(a.size, 1.5);
    EXPECT_EQ(a.color, "3");
}

TEST(Corpus, EmptyMeshCell) {
    const auto c = parse(kHeader + "101\t2020\tJ1\tT\tA\t\t0.5\t-1.2\t10\t1.5\t3\n");
    EXPECT_TRUE(c.articles[0].mesh_terms.empty());
}

TEST(Corpus, DuplicatePmidNamesIt) {
    try {
        parse(kHeader + "101\t2020\tJ\tT\tA\t\t0\t0\t1\t1\t1\n101\t2021\tJ\tT\tA\t\t0\t0\t1\t1\t1\n");
        FAIL() << "expected DuplicateRecordError";
    } catch (const DuplicateRecordError& e) {
        EXPECT_EQ(e.pmid(), "101");
    }
}

TEST(Corpus, MissingPmidColumn) { EXPECT_THROW(parse("date\ttitle\n2020\tT\n"), SchemaError); }

TEST(Corpus, NonNumericCoordinateReportsLine) {
    try {
        parse(kHeader + "1\t2020\tJ\tT\tA\t\t0\t0\t1\t1\t1\n2\t2020\tJ\tT\tA\t\tabc\t0\t1\t1\t1\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(parse(kHeader + "1\t2020\tJ\tT\tA\t\t0\t0\tmany\t1\t1\n"), ParseError);
}

TEST(Corpus, ExtraColumnsSurviveRoundTrip) {
    const auto c = parse("pmid\ttitle\tsource\n5\tHello\tfixture\n");
    std::ostringstream out;
    write_tsv(out, c);
    const auto again = parse(out.str());
    ASSERT_EQ(again.articles.size(), 1u);
    EXPECT_EQ(again.articles[0].title, "Hello");
    EXPECT_EQ(again.extra_columns, std::vector<std::string>{"source"});
    EXPECT_EQ(again.articles[0].extra, std::vector<std::string>{"fixture"});
}

TEST(Corpus, FixtureParses) {
    const auto c = read_tsv_file(oracle::data_dir() / "corpus200.tsv");
    EXPECT_EQ(c.articles.size(), 200u);
    for (const auto& a : c.articles) EXPECT_TRUE(a.year.has_value()) << a.pmid;
}

TEST(Text, NormalizeStripsTagsAndCollapsesSpace) {
    EXPECT_EQ(normalize_text("<b>Glioma  therapy</b>\n"), "Glioma therapy");
    EXPECT_EQ(normalize_text(""), "");
}

TEST(Text, NormalizeComposesDecomposedAccent) {
    // U+0065 U+0301 composes to U+00E9 (UnicodeData.txt canonical decomposition of U+00E9).
    EXPECT_EQ(normalize_text("cafe\xcc\x81"), "caf\xc3\xa9");
    EXPECT_EQ(normalize_text("caf\xc3\xa9"), "caf\xc3\xa9");
}

TEST(Text, NormalizeIsIdempotent) {
    for (const std::string s : {"  a <i>b</i>  c ", "x\t\ty", "<<b>>", "Tumor growth", "e\xcc\x81t\xc3\xa9"}) {
        const auto once = normalize_text(s);
        EXPECT_EQ(normalize_text(once), once) << s;
    }
}

TEST(Merge, FillsMissingValues) {
    Article a;
    a.pmid = "1";
    const std::vector<CitationRecord> enr{{"1", 42, 2.0}};
    const auto r = merge_sources({a}, enr);
    EXPECT_EQ(r.articles[0].citation_count, 42);
    EXPECT_DOUBLE_EQ(r.articles[0].size, 2.0);
    EXPECT_TRUE(r.conflicts.empty());
}

TEST(Merge, ReportsUnmatchedAndConflicts) {
    Article a;
    a.pmid = "1";
    a.citation_count = 5;
    const std::vector<CitationRecord> enr{{"999", 3, std::nullopt}, {"1", 7, std::nullopt}};
    const auto r = merge_sources({a}, enr);
    EXPECT_EQ(r.unmatched, std::vector<std::string>{"999"});
    ASSERT_EQ(r.conflicts.size(), 1u);
    EXPECT_EQ(r.conflicts[0].field, "citation_count");
    EXPECT_EQ(r.articles[0].citation_count, 5);
}

TEST(Merge, EmptyEnrichmentIsIdentity) {
    const auto base = read_tsv_file(oracle::data_dir() / "corpus200.tsv").articles;
    const auto r = merge_sources(base, {});
    ASSERT_EQ(r.articles.size(), base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        EXPECT_EQ(r.articles[i].citation_count, base[i].citation_count);
        EXPECT_EQ(r.articles[i].size, base[i].size);
    }
}

TEST(Fetch, FixtureReplay) {
    oracle::TempDir dir;
    oracle::spit(dir / "1.json", R"({"pmid": 1, "citation_count": 4, "relative_citation_ratio": 1.5})");
    oracle::spit(dir / "2.json", R"({"pmid": "2", "citation_count": 0})");
    oracle::spit(dir / "3.json", R"({"pmid": 3, "citation_count": null})");
    FixtureClient client(dir.path());
    const std::vector<std::string> ids{"1", "2", "3", "7"};
    const auto r = fetch_bibliographic(ids, client);
    ASSERT_EQ(r.records.size(), 3u);
    EXPECT_EQ(r.records[0], (CitationRecord{"1", 4, 1.5}));
    EXPECT_EQ(r.records[1], (CitationRecord{"2", 0, std::nullopt}));
    EXPECT_EQ(r.records[2], (CitationRecord{"3", std::nullopt, std::nullopt}));
    EXPECT_EQ(r.unresolved, std::vector<std::string>{"7"});
    EXPECT_TRUE(fetch_bibliographic({}, client).records.empty());
}

TEST(Fetch, MalformedRecordNamesPmid) {
    oracle::TempDir dir;
    oracle::spit(dir / "8.json", "{not json");
    FixtureClient client(dir.path());
    const std::vector<std::string> ids{"8"};
    try {
        fetch_bibliographic(ids, client);
        FAIL();
    } catch (const DecodeError& e) {
        EXPECT_EQ(e.pmid(), "8");
    }
}

TEST(Embedding, CosineValues) {
    const std::vector<double> e1{1, 0}, e2{0, 1}, d{1, 1};
    EXPECT_DOUBLE_EQ(litmap::cosine(e1, e1), 1.0);
    EXPECT_DOUBLE_EQ(litmap::cosine(e1, e2), 0.0);
    EXPECT_NEAR(litmap::cosine(e1, d), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_THROW(litmap::cosine(e1, std::vector<double>{1, 2, 3}), ContractError);
}

TEST(Embedding, KnnIdenticalRows) {
    EmbeddingMatrix m(3, 2, {1, 1, 1, 1, 1, 1}, {"a", "b", "c"});
    const auto r = knn_exact(m, 0, 2);
    ASSERT_EQ(r.neighbors.size(), 2u);
    EXPECT_EQ(r.neighbors[0].id, "b");
    EXPECT_EQ(r.neighbors[1].id, "c");
    EXPECT_NEAR(r.neighbors[0].similarity, 1.0, 1e-12);
}

TEST(Embedding, KnnTieBreaksOnSmallerId) {
    EmbeddingMatrix m(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, {"10", "30", "20"});
    const auto r = knn_exact(m, 0, 1);
    ASSERT_EQ(r.neighbors.size(), 1u);
    EXPECT_EQ(r.neighbors[0].id, "20");
    EXPECT_EQ(r.neighbors[0].similarity, 0.0);
}

TEST(Embedding, KnnShortResult) {
    EmbeddingMatrix m(2, 2, {1, 0, 0, 1}, {"a", "b"});
    const auto r = knn_exact(m, 0, 5);
    EXPECT_TRUE(r.short_result);
    EXPECT_EQ(r.neighbors.size(), 1u);
}

TEST(Embedding, KnnMatchesBruteForce) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    const std::size_t n = 50, d = 16;
    std::vector<float> vals;
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back("p" + std::to_string(1000 + i));
        for (std::size_t j = 0; j < d; ++j) {
            const auto v = static_cast<float>(nd(rng));
            vals.push_back(v);
            rows[i][j] = v;
        }
    }
    EmbeddingMatrix m(n, d, vals, ids);
    for (std::size_t q = 0; q < n; ++q) {
        const auto r = knn_exact(m, q, 5);
        std::vector<std::string> got;
        for (const auto& nb : r.neighbors) got.push_back(nb.id);
        EXPECT_EQ(got, oracle::brute_top_k(rows, ids, rows[q], 5, {ids[q]})) << q;
    }
}

TEST(Embedding, BinaryAndTsvLoadReorder) {
    oracle::TempDir dir;
    EmbeddingMatrix m(3, 2, {1, 2, 3, 4, 5, 6}, {"a", "b", "c"});
    write_embeddings_binary(dir / "e.emb", m);
    const std::vector<std::string> order{"c", "a", "b"};
    const auto back = load_embeddings(dir / "e.emb", order);
    EXPECT_EQ(back.ids(), order);
    EXPECT_EQ(back.values(), (std::vector<float>{5, 6, 1, 2, 3, 4}));

    oracle::spit(dir / "e.tsv", "pmid\tv0\tv1\na\t1\t2\nb\t3\t4\nc\t5\t6\n");
    const std::vector<std::string> abc{"a", "b", "c"};
    EXPECT_EQ(load_embeddings(dir / "e.tsv", abc), m);
}

TEST(Embedding, LoadErrors) {
    oracle::TempDir dir;
    oracle::spit(dir / "e.tsv", "pmid\tv0\n1\t0.5\n3\t0.25\n");
    const std::vector<std::string> want{"1", "2", "3"};
    try {
        load_embeddings(dir / "e.tsv", want);
        FAIL();
    } catch (const AlignmentError& e) {
        EXPECT_EQ(e.missing(), std::vector<std::string>{"2"});
    }
    oracle::spit(dir / "nan.tsv", "pmid\tv0\n1\tnan\n2\t0\n3\t0\n");
    try {
        load_embeddings(dir / "nan.tsv", want);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(e.row(), 0u);
    }
}

TEST(Embedding, HashedTfidfProperties) {
    Article a, b, c, e;
    a.pmid = "1";
    a.title = "glioma therapy outcomes";
    b.pmid = "2";
    b.title = "glioma therapy outcomes";
    c.pmid = "3";
    c.title = "influenza vaccination seasonal";
    e.pmid = "4";
    const std::vector<Article> arts{a, b, c, e};
    const auto h = embed_hashed_tfidf(arts, 4096, 42);
    EXPECT_NEAR(litmap::cosine(h.matrix.row(0), h.matrix.row(1)), 1.0, 1e-6);
    EXPECT_LT(std::abs(litmap::cosine(h.matrix.row(0), h.matrix.row(2))), 0.1);
    EXPECT_EQ(h.empty_text_ids, std::vector<std::string>{"4"});
    for (const float v : h.matrix.row(3)) EXPECT_EQ(v, 0.0f);
    EXPECT_EQ(embed_hashed_tfidf(arts, 4096, 42).matrix, h.matrix);
}

TEST(Embedding, HashedTfidfMatchesHandBuiltVector) {
    // One article alone: idf = ln(2/2) + 1 = 1, so each bucket holds ±count.
    Article a;
    a.pmid = "1";
    a.title = "alpha beta alpha";
    const std::vector<Article> arts{a};
    const std::size_t d = 4096;
    const auto h = embed_hashed_tfidf(arts, d, 7);
    std::vector<double> expect(d, 0.0);
    for (const auto& [tok, cnt] : std::vector<std::pair<std::string, int>>{{"alpha", 2}, {"beta", 1}}) {
        const auto hv = hash_token(tok, 7);
        expect[hv % d] += ((hv >> 63) ? -1.0 : 1.0) * cnt;
    }
    double norm = 0;
    for (const double v : expect) norm += v * v;
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(h.matrix.row(0)[j], expect[j] / norm, 1e-7);
}

TEST(Config, CanonicalDigestStableAndSensitive) {
    PipelineConfig a;
    a.seed = 42;
    PipelineConfig b = a;
    EXPECT_EQ(a.canonical(), b.canonical());
    EXPECT_EQ(a.digest(), b.digest());
    EXPECT_EQ(a.digest().size(), 64u);
    b.set("layout.k", "12");
    EXPECT_NE(a.digest(), b.digest());
    std::istringstream in(a.canonical());
    EXPECT_EQ(parse_config(in).canonical(), a.canonical());
}

TEST(Config, RejectsBadKeysAndValues) {
    PipelineConfig c;
    EXPECT_THROW(c.set("no.such.key", "1"), ConfigError);
    EXPECT_THROW(c.set("layout.k", "abc"), ConfigError);
    EXPECT_THROW(c.set("clustering.theta", "0.4"), ConfigError);
    EXPECT_THROW(c.validate(), ConfigError);  // no seed
    c.seed = 1;
    c.set("layout.k", "5");
    c.set("layout.perplexity", "9");
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Digest, Sha256KnownVector) {
    // FIPS 180-2 example "abc".
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Points, BinaryRoundTrip) {
    std::vector<Article> arts(3);
    arts[0].pmid = "1";
    arts[0].x = 1.5;
    arts[0].y = -2;
    arts[0].year = 2019;
    arts[0].size = 2.5;
    arts[1].pmid = "2";
    arts[1].x = 0;
    arts[1].y = 0;
    arts[2].pmid = "3";
    const std::vector<int> cl{4, -1, 0};
    const auto bytes = encode_points(arts, cl);
    EXPECT_EQ(bytes.size(), 8u + 18u * 3u);
    EXPECT_EQ(bytes.substr(0, 4), "PTS1");
    const auto p = decode_points(bytes);
    ASSERT_EQ(p.x.size(), 3u);
    EXPECT_EQ(p.x[0], 1.5f);
    EXPECT_EQ(p.y[0], -2.0f);
    EXPECT_EQ(p.year[0], 2019);
    EXPECT_EQ(p.cluster[0], 4);
    EXPECT_EQ(p.size[0], 2.5f);
    EXPECT_EQ(p.year[1], 0);
    EXPECT_EQ(p.cluster[1], -1);
    EXPECT_TRUE(std::isnan(p.x[2]));
    EXPECT_THROW(decode_points(bytes.substr(0, bytes.size() - 1)), SchemaError);
}
