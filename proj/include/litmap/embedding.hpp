#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "litmap/common.hpp"
#include "litmap/corpus.hpp"
#include "litmap/text.hpp"

namespace litmap {

static_assert(std::endian::native == std::endian::little, "binary artifact IO assumes a little-endian host");

/// Dense row-major float vectors, one row per article.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;

    EmbeddingMatrix(std::size_t n, std::size_t d, std::vector<float> values, std::vector<std::string> ids)
        : n_(n), d_(d), values_(std::move(values)), ids_(std::move(ids)) {
        if (values_.size() != n_ * d_) throw ContractError("embedding value count does not equal n*d");
        if (ids_.size() != n_) throw ContractError("embedding id count does not equal n");
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < d_; ++j)
                if (!std::isfinite(values_[i * d_ + j])) throw DataError(i, "non-finite embedding entry");
    }

    std::size_t rows() const noexcept { return n_; }
    std::size_t dim() const noexcept { return d_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::string& id(std::size_t i) const { return ids_.at(i); }
    std::span<const float> row(std::size_t i) const { return {values_.data() + i * d_, d_}; }
    const std::vector<float>& values() const noexcept { return values_; }

    bool operator==(const EmbeddingMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::size_t d_ = 0;
    std::vector<float> values_;
    std::vector<std::string> ids_;
};

/// u·v / (|u||v|); 0 when either vector is zero.
template <typename T, typename U>
double cosine(std::span<const T> u, std::span<const U> v) {
    if (u.size() != v.size()) throw ContractError("cosine: dimension mismatch");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double a = u[i], b = v[i];
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::clamp(c, -1.0, 1.0);
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    return cosine(std::span<const double>(u), std::span<const double>(v));
}

struct Neighbor {
    std::string id;
    std::size_t row = 0;
    double similarity = 0.0;

    bool operator==(const Neighbor&) const = default;
};

struct KnnResult {
    std::vector<Neighbor> neighbors;  // descending similarity, ties by ascending id
    bool short_result = false;        // fewer than k candidates were available
};

namespace detail {

inline void rank_top_k(std::vector<Neighbor>& cands, std::size_t k) {
    auto better = [](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.id < b.id;
    };
    if (k < cands.size()) {
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(), better);
        cands.resize(k);
    } else {
        std::sort(cands.begin(), cands.end(), better);
    }
}

}  // namespace detail

/// Top-k rows by cosine similarity to an arbitrary query vector, skipping
/// rows whose id is in `exclude`.
inline KnnResult knn_by_vector(const EmbeddingMatrix& m, std::span<const double> query, std::size_t k,
                               const std::unordered_set<std::string>& exclude) {
    std::vector<Neighbor> cands;
    cands.reserve(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (exclude.contains(m.id(i))) continue;
        cands.push_back({m.id(i), i, cosine(query, m.row(i))});
    }
    KnnResult r;
    r.short_result = cands.size() < k;
    detail::rank_top_k(cands, k);
    r.neighbors = std::move(cands);
    return r;
}

/// Exact k nearest rows to `query_row` by cosine similarity, excluding the
/// row itself and any id in `exclude`.
inline KnnResult knn_exact(const EmbeddingMatrix& m, std::size_t query_row, std::size_t k,
                           const std::unordered_set<std::string>& exclude = {}) {
    if (query_row >= m.rows()) throw ContractError("knn_exact: query row out of range");
    if (k == 0) throw ContractError("knn_exact: k must be positive");
    std::vector<Neighbor> cands;
    cands.reserve(m.rows());
    const auto q = m.row(query_row);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (i == query_row || exclude.contains(m.id(i))) continue;
        cands.push_back({m.id(i), i, cosine(q, m.row(i))});
    }
    KnnResult r;
    r.short_result = cands.size() < k;
    detail::rank_top_k(cands, k);
    r.neighbors = std::move(cands);
    return r;
}

/// Rows scaled to unit L2 norm, in double precision. Zero rows stay zero.
inline std::vector<double> normalized_rows(const EmbeddingMatrix& m) {
    std::vector<double> out(m.rows() * m.dim());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        double norm = 0.0;
        for (const float v : r) norm += static_cast<double>(v) * v;
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < m.dim(); ++j) out[i * m.dim() + j] = norm > 0 ? r[j] / norm : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

/// Binary layout: "EMB1", u32 n, u32 d, n*d f32, then n newline-terminated ids.
/// All integers and floats little-endian.
inline void write_embeddings_binary(const std::filesystem::path& path, const EmbeddingMatrix& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write("EMB1", 4);
    const auto n = static_cast<std::uint32_t>(m.rows());
    const auto d = static_cast<std::uint32_t>(m.dim());
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&d), 4);
    out.write(reinterpret_cast<const char*>(m.values().data()), static_cast<std::streamsize>(m.values().size() * 4));
    for (const auto& id : m.ids()) out << id << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

namespace detail {

struct RawEmbeddings {
    std::size_t n = 0, d = 0;
    std::vector<float> values;
    std::vector<std::string> ids;
};

inline RawEmbeddings read_binary_embeddings(std::istream& in, const std::string& name) {
    RawEmbeddings raw;
    std::uint32_t n = 0, d = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    in.read(reinterpret_cast<char*>(&d), 4);
    if (!in) throw SchemaError(name + ": truncated header");
    raw.n = n;
    raw.d = d;
    raw.values.resize(static_cast<std::size_t>(n) * d);
    in.read(reinterpret_cast<char*>(raw.values.data()), static_cast<std::streamsize>(raw.values.size() * 4));
    if (!in) throw SchemaError(name + ": truncated value block");
    std::string line;
    while (raw.ids.size() < n && std::getline(in, line)) raw.ids.push_back(detail::strip_cr(line));
    if (raw.ids.size() != n) throw SchemaError(name + ": expected " + std::to_string(n) + " ids");
    return raw;
}

inline RawEmbeddings read_tsv_embeddings(std::istream& in, const std::string& name) {
    RawEmbeddings raw;
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(name + ": empty file");
    line = detail::strip_cr(line);
    const auto header = split(line, '\t');
    if (header.empty() || trim(header[0]) != "pmid") throw SchemaError(name + ": first column must be 'pmid'");
    raw.d = header.size() - 1;
    while (std::getline(in, line)) {
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split(line, '\t');
        if (cells.size() != header.size()) throw DataError(raw.n, "wrong number of fields");
        raw.ids.emplace_back(trim(cells[0]));
        for (std::size_t j = 1; j < cells.size(); ++j) {
            const auto v = parse_double(trim(cells[j]));
            if (!v) throw DataError(raw.n, "unparseable entry '" + std::string(cells[j]) + "'");
            raw.values.push_back(static_cast<float>(*v));
        }
        ++raw.n;
    }
    return raw;
}

}  // namespace detail

/// Loads an EMB1 binary or `pmid\tv0...` TSV file and reorders rows to
/// match `expected_ids`.
inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path, std::span<const std::string> expected_ids) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    detail::RawEmbeddings raw;
    if (in && std::memcmp(magic, "EMB1", 4) == 0) {
        raw = detail::read_binary_embeddings(in, path.string());
    } else {
        in.clear();
        in.seekg(0);
        raw = detail::read_tsv_embeddings(in, path.string());
    }
    for (std::size_t i = 0; i < raw.n; ++i)
        for (std::size_t j = 0; j < raw.d; ++j)
            if (!std::isfinite(raw.values[i * raw.d + j])) throw DataError(i, "non-finite embedding entry");

    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < raw.n; ++i)
        if (!pos.emplace(raw.ids[i], i).second) throw DuplicateRecordError(raw.ids[i]);

    std::vector<std::string> missing, extra;
    std::unordered_set<std::string> expected(expected_ids.begin(), expected_ids.end());
    for (const auto& id : expected_ids)
        if (!pos.contains(id)) missing.push_back(id);
    for (const auto& id : raw.ids)
        if (!expected.contains(id)) extra.push_back(id);
    if (!missing.empty() || !extra.empty()) throw AlignmentError(std::move(missing), std::move(extra));

    std::vector<float> values(expected_ids.size() * raw.d);
    for (std::size_t i = 0; i < expected_ids.size(); ++i) {
        const auto src = pos.at(expected_ids[i]);
        std::copy_n(raw.values.begin() + static_cast<std::ptrdiff_t>(src * raw.d), raw.d,
                    values.begin() + static_cast<std::ptrdiff_t>(i * raw.d));
    }
    return EmbeddingMatrix(expected_ids.size(), raw.d, std::move(values),
                           std::vector<std::string>(expected_ids.begin(), expected_ids.end()));
}

// ---------------------------------------------------------------------------
// Hashed TF-IDF test embedder

/// Seeded 64-bit token hash: FNV-1a over the bytes, finished with the
/// splitmix64 mixer. The low bits pick a bucket and the top bit a sign.
inline std::uint64_t hash_token(std::string_view token, std::uint64_t seed) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = 0xcbf29ce484222325ULL ^ mix(seed);
    for (const char c : token) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return mix(h);
}

struct HashedEmbedding {
    EmbeddingMatrix matrix;
    std::vector<std::string> empty_text_ids;  // rows left at zero
};

/// Deterministic stand-in for a neural text embedder: token counts times
/// smoothed idf, feature-hashed to `dim` signed buckets, rows L2-normalized.
inline HashedEmbedding embed_hashed_tfidf(std::span<const Article> articles, std::size_t dim, std::uint64_t seed) {
    if (dim < 16) throw ContractError("embed_hashed_tfidf: dimension must be >= 16");
    const std::size_t n = articles.size();
    std::vector<std::map<std::string, int>> counts(n);
    std::map<std::string, int> df;
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& t : tokenize_words(articles[i].text())) ++counts[i][t];
        for (const auto& [t, c] : counts[i]) ++df[t];
    }

    HashedEmbedding out;
    std::vector<float> values(n * dim, 0.0f);
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(articles[i].pmid);
        if (counts[i].empty()) {
            out.empty_text_ids.push_back(articles[i].pmid);
            continue;
        }
        std::vector<double> acc(dim, 0.0);
        for (const auto& [t, c] : counts[i]) {
            const double idf = std::log((1.0 + static_cast<double>(n)) / (1.0 + df[t])) + 1.0;
            const auto h = hash_token(t, seed);
            const double sign = (h >> 63) ? -1.0 : 1.0;
            acc[h % dim] += sign * c * idf;
        }
        double norm = 0.0;
        for (const double v : acc) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            // Every token cancelled out through sign collisions.
            out.empty_text_ids.push_back(articles[i].pmid);
            continue;
        }
        for (std::size_t j = 0; j < dim; ++j) values[i * dim + j] = static_cast<float>(acc[j] / norm);
    }
    out.matrix = EmbeddingMatrix(n, dim, std::move(values), std::move(ids));
    return out;
}

}  // namespace litmap
