#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "litmap/common.hpp"
#include "litmap/text.hpp"

namespace litmap {

/// One corpus record, one row of the map TSV.
struct Article {
    std::string pmid;
    std::string date;  // as given: YYYY or YYYY-MM-DD, possibly empty
    std::optional<int> year;
    std::string journal;
    std::string title;
    std::string abstract;
    std::vector<std::string> mesh_terms;
    std::optional<double> x;
    std::optional<double> y;
    std::int64_t citation_count = 0;
    double size = 0.0;
    std::string color;
    // Values of non-schema columns, aligned with Corpus::extra_columns.
    std::vector<std::string> extra;

    std::string text() const {
        if (title.empty()) return abstract;
        if (abstract.empty()) return title;
        return title + " " + abstract;
    }

    bool operator==(const Article&) const = default;
};

/// Column names of the default map TSV, in canonical order.
inline const std::vector<std::string>& schema_columns() {
    static const std::vector<std::string> cols = {
        "pmid", "date", "journal", "title", "abstract", "mesh_terms",
        "x", "y", "citation_count", "size", "color"};
    return cols;
}

/// An ordered, pmid-unique table of articles.
struct Corpus {
    std::vector<Article> articles;
    std::vector<std::string> extra_columns;

    std::size_t size() const noexcept { return articles.size(); }

    /// pmid -> row index. Throws DuplicateRecordError.
    std::unordered_map<std::string, std::size_t> index() const {
        std::unordered_map<std::string, std::size_t> idx;
        idx.reserve(articles.size());
        for (std::size_t i = 0; i < articles.size(); ++i) {
            if (!idx.emplace(articles[i].pmid, i).second) throw DuplicateRecordError(articles[i].pmid);
        }
        return idx;
    }

    std::vector<std::string> pmids() const {
        std::vector<std::string> ids;
        ids.reserve(articles.size());
        for (const auto& a : articles) ids.push_back(a.pmid);
        return ids;
    }
};

inline int max_plausible_year() {
    const auto now = std::chrono::system_clock::now();
    const std::chrono::year_month_day ymd{std::chrono::floor<std::chrono::days>(now)};
    return static_cast<int>(ymd.year()) + 1;
}

/// Year of a YYYY or YYYY-MM-DD date. nullopt for an empty string; throws
/// ContractError for malformed dates or years outside [1800, current+1].
inline std::optional<int> parse_year(std::string_view date) {
    date = trim(date);
    if (date.empty()) return std::nullopt;
    const bool plain = date.size() == 4;
    const bool full = date.size() == 10 && date[4] == '-' && date[7] == '-';
    if (!plain && !full) throw ContractError("date must be YYYY or YYYY-MM-DD: '" + std::string(date) + "'");
    const auto year = parse_int<int>(date.substr(0, 4));
    if (!year) throw ContractError("bad year in date '" + std::string(date) + "'");
    if (full) {
        const auto month = parse_int<int>(date.substr(5, 2));
        const auto day = parse_int<int>(date.substr(8, 2));
        if (!month || !day || *month < 1 || *month > 12 || *day < 1 || *day > 31)
            throw ContractError("bad month/day in date '" + std::string(date) + "'");
    }
    if (*year < 1800 || *year > max_plausible_year())
        throw ContractError("year out of range: " + std::to_string(*year));
    return year;
}

/// Splits a mesh_terms cell. Semicolon is the primary separator; a cell
/// without semicolons is split on commas.
inline std::vector<std::string> split_mesh(std::string_view cell) {
    std::vector<std::string> out;
    const char sep = cell.find(';') != std::string_view::npos ? ';' : ',';
    for (auto part : split(cell, sep)) {
        part = trim(part);
        if (!part.empty()) out.emplace_back(part);
    }
    return out;
}

namespace detail {

inline std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace detail

/// Parses a map TSV. The header must contain `pmid`; any other schema column
/// is optional and unknown columns are preserved in order.
inline Corpus parse_tsv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty input: header row required");
    line = detail::strip_cr(std::move(line));
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    const auto header = split(line, '\t');
    std::unordered_map<std::string, std::size_t> col;
    Corpus corpus;
    std::vector<std::size_t> extra_pos;
    const auto& known = schema_columns();
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string name(trim(header[i]));
        if (!col.emplace(name, i).second) throw SchemaError("duplicate column '" + name + "'");
        if (std::find(known.begin(), known.end(), name) == known.end()) {
            corpus.extra_columns.push_back(name);
            extra_pos.push_back(i);
        }
    }
    if (!col.contains("pmid")) throw SchemaError("header has no 'pmid' column");

    std::unordered_set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(std::move(line));
        if (line.empty()) continue;
        const auto cells = split(line, '\t');
        if (cells.size() != header.size())
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                          std::to_string(cells.size()));
        auto cell = [&](const char* name) -> std::string_view {
            const auto it = col.find(name);
            return it == col.end() ? std::string_view{} : cells[it->second];
        };

        Article a;
        a.pmid = std::string(trim(cell("pmid")));
        if (a.pmid.empty()) throw ParseError(line_no, "empty pmid");
        if (!seen.insert(a.pmid).second) throw DuplicateRecordError(a.pmid);
        a.date = std::string(trim(cell("date")));
        try {
            a.year = parse_year(a.date);
        } catch (const ContractError& e) {
            throw ParseError(line_no, e.what());
        }
        a.journal = std::string(cell("journal"));
        a.title = std::string(cell("title"));
        a.abstract = std::string(cell("abstract"));
        a.mesh_terms = split_mesh(cell("mesh_terms"));

        auto coord = [&](const char* name) -> std::optional<double> {
            const auto v = trim(cell(name));
            if (v.empty()) return std::nullopt;
            const auto d = parse_double(v);
            if (!d || !std::isfinite(*d)) throw ParseError(line_no, std::string("non-numeric ") + name + " '" + std::string(v) + "'");
            return d;
        };
        a.x = coord("x");
        a.y = coord("y");
        if (const auto v = trim(cell("citation_count")); !v.empty()) {
            const auto cc = parse_int<std::int64_t>(v);
            if (!cc || *cc < 0) throw ParseError(line_no, "non-numeric citation_count '" + std::string(v) + "'");
            a.citation_count = *cc;
        }
        if (const auto v = trim(cell("size")); !v.empty()) {
            const auto sz = parse_double(v);
            if (!sz || !std::isfinite(*sz) || *sz < 0) throw ParseError(line_no, "bad size '" + std::string(v) + "'");
            a.size = *sz;
        }
        a.color = std::string(trim(cell("color")));
        for (const auto pos : extra_pos) a.extra.emplace_back(cells[pos]);
        corpus.articles.push_back(std::move(a));
    }
    return corpus;
}

inline Corpus read_tsv_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return parse_tsv(in);
}

namespace detail {

// Tabs and newlines cannot appear inside a TSV cell.
inline std::string sanitize_cell(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    return out;
}

}  // namespace detail

/// Writes the canonical map TSV: schema columns followed by extra columns.
inline void write_tsv(std::ostream& out, const Corpus& corpus) {
    const auto& cols = schema_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "\t" : "") << cols[i];
    for (const auto& e : corpus.extra_columns) out << '\t' << e;
    out << '\n';
    for (const auto& a : corpus.articles) {
        out << detail::sanitize_cell(a.pmid) << '\t' << detail::sanitize_cell(a.date) << '\t'
            << detail::sanitize_cell(a.journal) << '\t' << detail::sanitize_cell(a.title) << '\t'
            << detail::sanitize_cell(a.abstract) << '\t';
        for (std::size_t i = 0; i < a.mesh_terms.size(); ++i)
            out << (i ? ";" : "") << detail::sanitize_cell(a.mesh_terms[i]);
        out << '\t' << (a.x ? format_double(*a.x) : "") << '\t' << (a.y ? format_double(*a.y) : "") << '\t'
            << a.citation_count << '\t' << format_double(a.size) << '\t' << detail::sanitize_cell(a.color);
        for (std::size_t i = 0; i < corpus.extra_columns.size(); ++i)
            out << '\t' << (i < a.extra.size() ? detail::sanitize_cell(a.extra[i]) : "");
        out << '\n';
    }
}

inline void write_tsv_file(const std::filesystem::path& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    write_tsv(out, corpus);
    if (!out) throw Error("write failed: " + path.string());
}

/// Normalizes the free-text fields of every article in place.
inline void normalize_corpus(Corpus& corpus) {
    for (auto& a : corpus.articles) {
        a.title = normalize_text(a.title);
        a.abstract = normalize_text(a.abstract);
        a.journal = normalize_text(a.journal);
        for (auto& m : a.mesh_terms) m = normalize_text(m);
    }
}

// ---------------------------------------------------------------------------
// Citation-metric enrichment

struct CitationRecord {
    std::string pmid;
    std::optional<std::int64_t> citation_count;
    std::optional<double> rcr;

    bool operator==(const CitationRecord&) const = default;
};

struct MergeConflict {
    std::string pmid;
    std::string field;
    std::string base_value;
    std::string enrichment_value;
};

struct MergeResult {
    std::vector<Article> articles;
    std::vector<std::string> unmatched;  // enrichment pmids absent from base
    std::vector<MergeConflict> conflicts;
};

/// Fills citation_count and size (RCR) from enrichment records. Values the
/// base already carries win; disagreements are reported as conflicts.
inline MergeResult merge_sources(std::vector<Article> base, std::span<const CitationRecord> enrichment) {
    MergeResult result;
    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < base.size(); ++i) idx.emplace(base[i].pmid, i);

    for (const auto& rec : enrichment) {
        const auto it = idx.find(rec.pmid);
        if (it == idx.end()) {
            result.unmatched.push_back(rec.pmid);
            continue;
        }
        Article& a = base[it->second];
        if (rec.citation_count) {
            if (a.citation_count == 0) {
                a.citation_count = *rec.citation_count;
            } else if (a.citation_count != *rec.citation_count) {
                result.conflicts.push_back({a.pmid, "citation_count", std::to_string(a.citation_count),
                                            std::to_string(*rec.citation_count)});
            }
        }
        if (rec.rcr) {
            if (a.size == 0.0) {
                a.size = *rec.rcr;
            } else if (a.size != *rec.rcr) {
                result.conflicts.push_back({a.pmid, "size", format_double(a.size), format_double(*rec.rcr)});
            }
        }
    }
    result.articles = std::move(base);
    return result;
}

struct FetchResult {
    std::vector<CitationRecord> records;
    std::vector<std::string> unresolved;
};

/// Source of citation metrics. Implementations respect `max_batch()` and
/// their own rate limits.
class BibliographicClient {
public:
    virtual ~BibliographicClient() = default;
    virtual std::size_t max_batch() const { return 200; }
    /// Throws RetryableError on transport failure, DecodeError on a malformed
    /// record.
    virtual FetchResult fetch_batch(std::span<const std::string> pmids) = 0;
};

/// Decodes one iCite-style publication object.
inline CitationRecord decode_citation_record(const nlohmann::json& j, const std::string& expected_pmid) {
    try {
        if (!j.is_object()) throw DecodeError(expected_pmid, "not an object");
        CitationRecord r;
        const auto& p = j.at("pmid");
        r.pmid = p.is_string() ? p.get<std::string>() : std::to_string(p.get<std::int64_t>());
        if (const auto it = j.find("citation_count"); it != j.end() && !it->is_null())
            r.citation_count = it->get<std::int64_t>();
        if (const auto it = j.find("relative_citation_ratio"); it != j.end() && !it->is_null())
            r.rcr = it->get<double>();
        if (r.citation_count && *r.citation_count < 0) throw DecodeError(expected_pmid, "negative citation_count");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError(expected_pmid, e.what());
    }
}

/// Replays recorded responses: one JSON document per pmid, named
/// `<pmid>.json`, inside a fixture directory.
class FixtureClient : public BibliographicClient {
public:
    explicit FixtureClient(std::filesystem::path dir) : dir_(std::move(dir)) {}

    FetchResult fetch_batch(std::span<const std::string> pmids) override {
        FetchResult out;
        for (const auto& pmid : pmids) {
            const auto path = dir_ / (pmid + ".json");
            std::ifstream in(path, std::ios::binary);
            if (!in) {
                out.unresolved.push_back(pmid);
                continue;
            }
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw DecodeError(pmid, e.what());
            }
            out.records.push_back(decode_citation_record(j, pmid));
        }
        return out;
    }

private:
    std::filesystem::path dir_;
};

/// Fetches metrics for every pmid, in batches of the client's size.
inline FetchResult fetch_bibliographic(std::span<const std::string> pmids, BibliographicClient& client) {
    FetchResult all;
    const std::size_t batch = std::max<std::size_t>(1, client.max_batch());
    for (std::size_t i = 0; i < pmids.size(); i += batch) {
        const auto n = std::min(batch, pmids.size() - i);
        auto part = client.fetch_batch(pmids.subspan(i, n));
        for (auto& r : part.records) all.records.push_back(std::move(r));
        for (auto& u : part.unresolved) all.unresolved.push_back(std::move(u));
    }
    return all;
}

}  // namespace litmap
