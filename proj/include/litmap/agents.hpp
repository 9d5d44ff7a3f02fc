#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "litmap/common.hpp"
#include "litmap/dataset.hpp"
#include "litmap/model_client.hpp"
#include "litmap/text.hpp"

namespace litmap {

// ---------------------------------------------------------------------------
// Errors

/// Field-level problems with a request.
class ValidationError : public Error {
public:
    struct Issue {
        std::string field;
        std::string message;
    };

    explicit ValidationError(std::vector<Issue> issues) : Error(describe(issues)), issues_(std::move(issues)) {}
    ValidationError(std::string field, std::string message)
        : ValidationError(std::vector<Issue>{{std::move(field), std::move(message)}}) {}
    const std::vector<Issue>& issues() const noexcept { return issues_; }

    nlohmann::json to_json() const {
        auto arr = nlohmann::json::array();
        for (const auto& i : issues_) arr.push_back({{"field", i.field}, {"message", i.message}});
        return {{"error", "validation"}, {"issues", arr}};
    }

private:
    static std::string describe(const std::vector<Issue>& issues) {
        std::string s = "invalid request:";
        for (const auto& i : issues) s += " " + i.field + ": " + i.message + ";";
        return s;
    }
    std::vector<Issue> issues_;
};

class EmptySelectionError : public Error {
public:
    EmptySelectionError() : Error("the selection is empty") {}
};

/// Retrieval mode not available in this deployment.
class ModeError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Wire types

struct Selection {
    std::vector<std::string> pmids;
    std::optional<std::vector<Point2>> polygon;
    std::vector<int> cluster_ids;
    std::optional<std::pair<int, int>> year_range;

    bool empty() const noexcept { return pmids.empty() && !polygon && cluster_ids.empty() && !year_range; }
};

struct ContextPayload {
    std::string dataset_id;
    Selection selection;
    std::string query_text;
    nlohmann::json interaction_state = nlohmann::json::object();
    nlohmann::json options = nlohmann::json::object();
};

namespace detail {

template <class F>
void field(std::vector<ValidationError::Issue>& issues, const std::string& name, F&& f) {
    try {
        f();
    } catch (const nlohmann::json::exception&) {
        issues.push_back({name, "wrong type"});
    }
}

}  // namespace detail

inline ContextPayload payload_from_json(const nlohmann::json& j) {
    std::vector<ValidationError::Issue> issues;
    ContextPayload p;
    if (!j.is_object()) throw ValidationError("", "payload must be an object");
    detail::field(issues, "dataset_id", [&] { p.dataset_id = j.value("dataset_id", std::string()); });
    detail::field(issues, "query_text", [&] { p.query_text = j.value("query_text", std::string()); });
    if (j.contains("interaction_state") && !j["interaction_state"].is_null()) p.interaction_state = j["interaction_state"];
    if (j.contains("options") && !j["options"].is_null()) {
        if (!j["options"].is_object()) issues.push_back({"options", "must be an object"});
        else p.options = j["options"];
    }
    if (j.contains("selection") && !j["selection"].is_null()) {
        const auto& s = j["selection"];
        if (!s.is_object()) {
            issues.push_back({"selection", "must be an object"});
        } else {
            detail::field(issues, "selection.pmids", [&] {
                if (s.contains("pmids") && !s["pmids"].is_null())
                    for (const auto& v : s.at("pmids")) p.selection.pmids.push_back(v.get<std::string>());
            });
            detail::field(issues, "selection.cluster_ids", [&] {
                if (s.contains("cluster_ids") && !s["cluster_ids"].is_null())
                    for (const auto& v : s.at("cluster_ids")) {
                        if (!v.is_number_integer()) throw nlohmann::json::type_error::create(302, "integer", nullptr);
                        p.selection.cluster_ids.push_back(v.get<int>());
                    }
            });
            detail::field(issues, "selection.polygon", [&] {
                if (s.contains("polygon") && !s["polygon"].is_null()) {
                    std::vector<Point2> poly;
                    for (const auto& v : s.at("polygon")) {
                        if (!v.is_array() || v.size() != 2) throw nlohmann::json::type_error::create(302, "pair", nullptr);
                        poly.push_back({v[0].get<double>(), v[1].get<double>()});
                    }
                    p.selection.polygon = std::move(poly);
                }
            });
            detail::field(issues, "selection.year_range", [&] {
                if (s.contains("year_range") && !s["year_range"].is_null()) {
                    const auto& y = s.at("year_range");
                    if (!y.is_array() || y.size() != 2 || !y[0].is_number_integer() || !y[1].is_number_integer())
                        throw nlohmann::json::type_error::create(302, "pair", nullptr);
                    p.selection.year_range = std::pair{y[0].get<int>(), y[1].get<int>()};
                }
            });
        }
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return p;
}

inline nlohmann::json to_json(const ContextPayload& p) {
    nlohmann::json sel = {{"pmids", p.selection.pmids}, {"cluster_ids", p.selection.cluster_ids}};
    if (p.selection.polygon) {
        auto poly = nlohmann::json::array();
        for (const auto& v : *p.selection.polygon) poly.push_back({v.x, v.y});
        sel["polygon"] = poly;
    } else {
        sel["polygon"] = nullptr;
    }
    sel["year_range"] = p.selection.year_range
                            ? nlohmann::json{p.selection.year_range->first, p.selection.year_range->second}
                            : nlohmann::json(nullptr);
    return {{"dataset_id", p.dataset_id},
            {"selection", sel},
            {"query_text", p.query_text},
            {"interaction_state", p.interaction_state},
            {"options", p.options}};
}

struct UIAction {
    std::string action_type;
    nlohmann::json parameters = nlohmann::json::object();

    bool operator==(const UIAction&) const = default;

    static UIAction highlight_clusters(std::vector<int> ids) { return {"highlight_clusters", {{"cluster_ids", ids}}}; }
    static UIAction select_pmids(std::vector<std::string> pmids) { return {"select_pmids", {{"pmids", pmids}}}; }
    static UIAction set_year_filter(int lo, int hi) { return {"set_year_filter", {{"year_range", {lo, hi}}}}; }
    static UIAction pin_papers(std::vector<std::string> pmids) { return {"pin_papers", {{"pmids", pmids}}}; }
    static UIAction annotate(double x, double y, std::string text) {
        return {"annotate", {{"x", x}, {"y", y}, {"text", std::move(text)}}};
    }
    static UIAction fly_to(double x, double y, double zoom) { return {"fly_to", {{"x", x}, {"y", y}, {"zoom", zoom}}}; }
    static UIAction clear_highlight() { return {"clear_highlight", nlohmann::json::object()}; }
};

inline const std::vector<std::string>& action_types() {
    static const std::vector<std::string> t = {"highlight_clusters", "select_pmids", "set_year_filter", "pin_papers",
                                               "annotate",           "fly_to",       "clear_highlight"};
    return t;
}

inline nlohmann::json to_json(const UIAction& a) { return {{"action_type", a.action_type}, {"parameters", a.parameters}}; }

inline UIAction action_from_json(const nlohmann::json& j) {
    UIAction a;
    a.action_type = j.at("action_type").get<std::string>();
    a.parameters = j.value("parameters", nlohmann::json::object());
    return a;
}

/// Schema check of one action; ids are checked against the dataset when
/// one is given. Returns the problems found, empty when valid.
inline std::vector<std::string> action_problems(const UIAction& a, const Dataset* ds = nullptr) {
    std::vector<std::string> bad;
    const auto& p = a.parameters;
    if (!p.is_object()) return {"parameters must be an object"};
    auto only = [&](std::initializer_list<const char*> keys) {
        for (const auto& [k, v] : p.items())
            if (std::none_of(keys.begin(), keys.end(), [&](const char* key) { return k == key; }))
                bad.push_back("unexpected parameter " + k);
        for (const char* k : keys)
            if (!p.contains(k)) bad.push_back(std::string("missing parameter ") + k);
    };
    auto finite = [&](const char* k) {
        if (p.contains(k) && !(p[k].is_number() && std::isfinite(p[k].get<double>())))
            bad.push_back(std::string(k) + " must be a finite number");
    };
    auto pmid_list = [&](bool nonempty) {
        if (!p.contains("pmids")) return;
        const auto& l = p["pmids"];
        if (!l.is_array()) return bad.push_back("pmids must be an array");
        if (nonempty && l.empty()) bad.push_back("pmids must not be empty");
        for (const auto& v : l) {
            if (!v.is_string()) bad.push_back("pmids must be strings");
            else if (ds && !ds->has_pmid(v.get<std::string>())) bad.push_back("unknown pmid " + v.get<std::string>());
        }
    };
    const auto& t = a.action_type;
    if (t == "highlight_clusters") {
        only({"cluster_ids"});
        if (p.contains("cluster_ids")) {
            const auto& l = p["cluster_ids"];
            if (!l.is_array() || l.empty()) bad.push_back("cluster_ids must be a non-empty array");
            else
                for (const auto& v : l) {
                    if (!v.is_number_integer()) bad.push_back("cluster_ids must be integers");
                    else if (ds && !ds->has_cluster(v.get<int>()))
                        bad.push_back("unknown cluster " + std::to_string(v.get<int>()));
                }
        }
    } else if (t == "select_pmids") {
        only({"pmids"});
        pmid_list(false);
    } else if (t == "pin_papers") {
        only({"pmids"});
        pmid_list(true);
    } else if (t == "set_year_filter") {
        only({"year_range"});
        if (p.contains("year_range")) {
            const auto& y = p["year_range"];
            if (!y.is_array() || y.size() != 2 || !y[0].is_number_integer() || !y[1].is_number_integer())
                bad.push_back("year_range must be [min, max] integers");
            else if (y[0].get<int>() > y[1].get<int>())
                bad.push_back("year_range min exceeds max");
        }
    } else if (t == "annotate") {
        only({"x", "y", "text"});
        finite("x");
        finite("y");
        if (p.contains("text") && !(p["text"].is_string() && !p["text"].get<std::string>().empty()))
            bad.push_back("text must be a non-empty string");
    } else if (t == "fly_to") {
        only({"x", "y", "zoom"});
        finite("x");
        finite("y");
        finite("zoom");
        if (p.contains("zoom") && p["zoom"].is_number() && !(p["zoom"].get<double>() > 0.0))
            bad.push_back("zoom must be > 0");
    } else if (t == "clear_highlight") {
        only({});
    } else {
        bad.push_back("unknown action_type " + t);
    }
    return bad;
}

struct Provenance {
    std::string pmid;
    std::string snippet;
    std::string source_type;

    bool operator==(const Provenance&) const = default;
};

struct TraceEntry {
    std::string agent;
    std::string tool;
    nlohmann::json input;
    std::string output;
};

struct AgentResponse {
    std::string text;
    std::vector<UIAction> actions;
    std::vector<Provenance> provenance;
    std::vector<TraceEntry> agent_trace;
    nlohmann::json table;  // {"columns": [...], "rows": [[...]]} or null
    nlohmann::json data;   // specialist-specific structured output or null
    std::vector<std::string> notices;
};

inline nlohmann::json to_json(const AgentResponse& r) {
    auto actions = nlohmann::json::array();
    for (const auto& a : r.actions) actions.push_back(to_json(a));
    auto prov = nlohmann::json::array();
    for (const auto& p : r.provenance) prov.push_back({{"pmid", p.pmid}, {"snippet", p.snippet}, {"source_type", p.source_type}});
    auto trace = nlohmann::json::array();
    for (const auto& t : r.agent_trace)
        trace.push_back({{"agent", t.agent}, {"tool", t.tool}, {"input", t.input}, {"output", t.output}});
    return {{"text", r.text},     {"actions", actions}, {"provenance", prov}, {"agent_trace", trace},
            {"table", r.table},   {"data", r.data},     {"notices", r.notices}};
}

/// PMIDs cited in text as "[PMID id]", in order of first appearance.
inline std::vector<std::string> cited_pmids(const std::string& text) {
    static const std::regex cite(R"(\[PMID ([^\]\s]+)\])");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), cite); it != std::sregex_iterator(); ++it) {
        auto id = (*it)[1].str();
        if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(std::move(id));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Context validation

struct ValidatedContext {
    ContextPayload payload;               // selection.pmids now includes the polygon's points
    std::vector<std::string> effective;   // sorted
    bool constrained = false;             // any selection constraint was given
    bool empty_selection() const noexcept { return effective.empty(); }
};

inline ValidatedContext validate_context(const ContextPayload& payload, const Dataset& ds) {
    std::vector<ValidationError::Issue> issues;
    const auto& sel = payload.selection;
    if (!payload.dataset_id.empty() && payload.dataset_id != ds.id)
        issues.push_back({"dataset_id", "unknown dataset " + payload.dataset_id});
    std::vector<std::string> unknown;
    for (const auto& p : sel.pmids)
        if (!ds.has_pmid(p)) unknown.push_back(p);
    if (!unknown.empty()) {
        std::string m = "unknown pmids:";
        for (const auto& u : unknown) m += " " + u;
        issues.push_back({"selection.pmids", m});
    }
    std::vector<int> bad_clusters;
    for (const int c : sel.cluster_ids)
        if (!ds.has_cluster(c)) bad_clusters.push_back(c);
    if (!bad_clusters.empty()) {
        std::string m = "unknown cluster ids:";
        for (const int c : bad_clusters) m += " " + std::to_string(c);
        issues.push_back({"selection.cluster_ids", m});
    }
    if (sel.polygon) {
        if (sel.polygon->size() < 3) issues.push_back({"selection.polygon", "needs at least 3 vertices"});
        for (const auto& v : *sel.polygon)
            if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
                issues.push_back({"selection.polygon", "vertices must be finite"});
                break;
            }
    }
    if (sel.year_range && sel.year_range->first > sel.year_range->second)
        issues.push_back({"selection.year_range", "min exceeds max"});
    if (trim(payload.query_text).empty() && sel.empty())
        issues.push_back({"query_text", "query_text and selection are both empty"});
    if (!issues.empty()) throw ValidationError(std::move(issues));

    ValidatedContext v;
    v.payload = payload;
    v.constrained = !sel.empty();
    std::vector<std::string> polygon_pmids;
    if (sel.polygon) polygon_pmids = ds.spatial.query_polygon(*sel.polygon);
    std::set<std::string> merged(sel.pmids.begin(), sel.pmids.end());
    merged.insert(polygon_pmids.begin(), polygon_pmids.end());
    v.payload.selection.pmids.assign(merged.begin(), merged.end());

    if (!v.constrained) return v;
    std::set<std::string> explicit_set(sel.pmids.begin(), sel.pmids.end());
    std::set<std::string> polygon_set(polygon_pmids.begin(), polygon_pmids.end());
    std::set<std::string> cluster_set;
    for (const int c : sel.cluster_ids)
        for (const auto m : ds.cluster(c).members) cluster_set.insert(ds.articles[m].pmid);
    for (const auto& a : ds.articles) {
        if (!sel.pmids.empty() && !explicit_set.contains(a.pmid)) continue;
        if (sel.polygon && !polygon_set.contains(a.pmid)) continue;
        if (!sel.cluster_ids.empty() && !cluster_set.contains(a.pmid)) continue;
        if (sel.year_range && !(a.year && *a.year >= sel.year_range->first && *a.year <= sel.year_range->second))
            continue;
        v.effective.push_back(a.pmid);
    }
    std::sort(v.effective.begin(), v.effective.end());
    return v;
}

// ---------------------------------------------------------------------------
// Routing

enum class Specialist { scholar, evidence, analytical, discovery };

inline const char* to_string(Specialist s) {
    switch (s) {
        case Specialist::scholar: return "scholar";
        case Specialist::evidence: return "evidence";
        case Specialist::analytical: return "analytical";
        case Specialist::discovery: return "discovery";
    }
    return "scholar";
}

inline std::optional<Specialist> parse_specialist(std::string_view s) {
    const auto t = trim(s);
    if (t == "scholar") return Specialist::scholar;
    if (t == "evidence") return Specialist::evidence;
    if (t == "analytical") return Specialist::analytical;
    if (t == "discovery") return Specialist::discovery;
    return std::nullopt;
}

namespace detail {

inline bool has_keyword(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase,
                        const std::set<std::string>& last_forms) {
    const auto n = phrase.size();
    if (tokens.size() < n) return false;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        bool ok = true;
        for (std::size_t k = 0; k + 1 < n && ok; ++k) ok = tokens[i + k] == phrase[k];
        if (ok && last_forms.contains(tokens[i + n - 1])) return true;
    }
    return false;
}

struct RouteRule {
    Specialist target;
    std::vector<std::string> prefix;  // leading words of a phrase
    std::set<std::string> forms;      // accepted forms of the final word
};

inline const std::vector<RouteRule>& route_rules() {
    using S = Specialist;
    static const std::vector<RouteRule> rules = {
        {S::analytical, {}, {"trend", "trends", "trending", "trended"}},
        {S::analytical, {}, {"count", "counts", "counting", "counted"}},
        {S::analytical, {"how"}, {"many"}},
        {S::analytical, {}, {"compare", "compared", "compares", "comparing", "comparison", "comparisons"}},
        {S::analytical, {}, {"distribution", "distributions"}},
        {S::analytical, {}, {"statistics", "statistic", "statistical", "stats"}},
        {S::discovery, {}, {"similar", "similarity", "similarities"}},
        {S::discovery, {}, {"related", "relate", "relates", "relatedness"}},
        {S::discovery, {}, {"nearby"}},
        {S::discovery, {}, {"gap", "gaps"}},
        {S::discovery, {}, {"underexplored", "unexplored"}},
        {S::discovery, {}, {"hypothesis", "hypotheses", "hypothesize", "hypothesise"}},
        {S::evidence, {}, {"extract", "extracts", "extracted", "extracting", "extraction"}},
        {S::evidence, {}, {"table", "tables", "tabulate"}},
        {S::evidence, {}, {"population", "populations"}},
        {S::evidence, {}, {"intervention", "interventions"}},
        {S::evidence, {}, {"outcome", "outcomes"}},
        {S::evidence, {"study"}, {"design", "designs"}},
    };
    return rules;
}

}  // namespace detail

/// Keyword router. Precedence when several groups match: analytical,
/// discovery, evidence; scholar when none does.
inline Specialist route_keywords(std::string_view query) {
    const auto tokens = tokenize_words(query);
    for (const auto target : {Specialist::analytical, Specialist::discovery, Specialist::evidence})
        for (const auto& rule : detail::route_rules()) {
            if (rule.target != target) continue;
            auto phrase = rule.prefix;
            phrase.push_back("");
            if (detail::has_keyword(tokens, phrase, rule.forms)) return target;
        }
    return Specialist::scholar;
}

/// The client may override the keyword route with a valid specialist name.
inline Specialist route_intent(std::string_view query, ModelClient* client = nullptr) {
    const auto baseline = route_keywords(query);
    if (!client) return baseline;
    try {
        const auto reply = client->complete({"route", {{"query", std::string(query)}}});
        if (const auto s = parse_specialist(reply.text)) return *s;
    } catch (const ModelError&) {
    }
    return baseline;
}

/// Splits a composite request on ";" and the word "then".
inline std::vector<std::string> plan_subtasks(std::string_view query) {
    static const std::regex sep(R"(\s*;\s*|\s+then\s+)", std::regex::icase);
    const std::string q(query);
    std::vector<std::string> parts;
    for (std::sregex_token_iterator it(q.begin(), q.end(), sep, -1), end; it != end; ++it) {
        const auto t = std::string(trim(it->str()));
        if (!t.empty()) parts.push_back(t);
    }
    return parts;
}

// ---------------------------------------------------------------------------
// Specialists

namespace detail {

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::vector<std::size_t> rows_of(const Dataset& ds, std::span<const std::string> pmids) {
    std::set<std::size_t> rows;
    for (const auto& p : pmids) {
        const auto it = ds.by_pmid.find(p);
        if (it == ds.by_pmid.end()) throw ContractError("unknown pmid " + p);
        rows.insert(it->second);
    }
    return {rows.begin(), rows.end()};
}

inline std::string first_sentence(const std::string& text) {
    if (text.empty()) return {};
    return sentence_at(text, 0);
}

}  // namespace detail

enum class Analysis { trend_by_year, citation_histogram, cluster_compare, journal_top };

inline const char* to_string(Analysis a) {
    switch (a) {
        case Analysis::trend_by_year: return "trend_by_year";
        case Analysis::citation_histogram: return "citation_histogram";
        case Analysis::cluster_compare: return "cluster_compare";
        case Analysis::journal_top: return "journal_top";
    }
    return "trend_by_year";
}

inline std::optional<Analysis> parse_analysis(std::string_view s) {
    for (const auto a : {Analysis::trend_by_year, Analysis::citation_histogram, Analysis::cluster_compare, Analysis::journal_top})
        if (s == to_string(a)) return a;
    return std::nullopt;
}

/// Picks the analysis a free-text request asks for.
inline Analysis infer_analysis(std::string_view query) {
    const auto tokens = tokenize_words(query);
    auto any = [&](std::initializer_list<const char*> words) {
        return std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) {
            return std::any_of(words.begin(), words.end(), [&](const char* w) { return t == w; });
        });
    };
    if (any({"citation", "citations", "cited", "citing"})) return Analysis::citation_histogram;
    if (any({"compare", "compared", "compares", "comparing", "comparison", "comparisons"})) return Analysis::cluster_compare;
    if (any({"journal", "journals", "venue", "venues"})) return Analysis::journal_top;
    return Analysis::trend_by_year;
}

struct YearCount {
    int year = 0;
    std::size_t count = 0;

    bool operator==(const YearCount&) const = default;
};

/// Counts per year from the earliest to the latest year present, zero-filled.
inline std::vector<YearCount> trend_by_year(const Dataset& ds, std::span<const std::string> pmids) {
    std::map<int, std::size_t> counts;
    for (const auto r : detail::rows_of(ds, pmids))
        if (ds.articles[r].year) ++counts[*ds.articles[r].year];
    std::vector<YearCount> out;
    if (counts.empty()) return out;
    for (int y = counts.begin()->first; y <= counts.rbegin()->first; ++y) {
        const auto it = counts.find(y);
        out.push_back({y, it == counts.end() ? 0 : it->second});
    }
    return out;
}

inline const std::vector<std::pair<std::string, std::pair<std::int64_t, std::int64_t>>>& citation_bins() {
    static const std::vector<std::pair<std::string, std::pair<std::int64_t, std::int64_t>>> bins = {
        {"[0,1)", {0, 1}}, {"[1,5)", {1, 5}}, {"[5,20)", {5, 20}}, {"[20,100)", {20, 100}}, {"[100,inf)", {100, -1}}};
    return bins;
}

inline std::vector<std::size_t> citation_histogram(const Dataset& ds, std::span<const std::string> pmids) {
    std::vector<std::size_t> counts(citation_bins().size(), 0);
    for (const auto r : detail::rows_of(ds, pmids)) {
        const auto c = ds.articles[r].citation_count;
        for (std::size_t b = 0; b < citation_bins().size(); ++b) {
            const auto [lo, hi] = citation_bins()[b].second;
            if (c >= lo && (hi < 0 || c < hi)) {
                ++counts[b];
                break;
            }
        }
    }
    return counts;
}

inline AgentResponse run_analytical(const Dataset& ds, std::span<const std::string> pmids, Analysis analysis,
                                    std::span<const int> clusters = {}) {
    AgentResponse r;
    if (analysis == Analysis::cluster_compare) {
        if (clusters.size() < 2) throw ContractError("cluster_compare needs at least two cluster ids");
        auto rows = nlohmann::json::array();
        std::string text = "Cluster comparison:";
        for (const int c : clusters) {
            const auto& node = ds.cluster(c);
            std::vector<int> years;
            for (const auto m : node.members)
                if (ds.articles[m].year) years.push_back(*ds.articles[m].year);
            std::sort(years.begin(), years.end());
            nlohmann::json median = nullptr;
            if (!years.empty()) {
                const auto h = years.size() / 2;
                median = years.size() % 2 ? static_cast<double>(years[h]) : (years[h - 1] + years[h]) / 2.0;
            }
            std::vector<std::string> terms;
            if (const auto it = ds.labels.find(c); it != ds.labels.end())
                for (std::size_t k = 0; k < it->second.terms.size() && k < 3; ++k) terms.push_back(it->second.terms[k].term);
            rows.push_back({c, ds.cluster_label(c), node.members.size(), median, terms});
            text += " cluster " + std::to_string(c) + " (" + ds.cluster_label(c) + "): " +
                    std::to_string(node.members.size()) + " articles, median year " +
                    (median.is_null() ? std::string("n/a") : detail::fixed(median.get<double>(), 1)) + ";";
        }
        text.back() = '.';
        r.text = text;
        r.table = {{"columns", {"cluster_id", "label", "size", "year_median", "top_terms"}}, {"rows", rows}};
        r.actions.push_back(UIAction::highlight_clusters({clusters.begin(), clusters.end()}));
        r.agent_trace.push_back({"analytical", "cluster_compare", {{"cluster_ids", std::vector<int>(clusters.begin(), clusters.end())}},
                                 std::to_string(clusters.size()) + " clusters"});
        return r;
    }
    if (pmids.empty()) throw EmptySelectionError();
    const auto n = pmids.size();
    if (analysis == Analysis::trend_by_year) {
        const auto trend = trend_by_year(ds, pmids);
        auto rows = nlohmann::json::array();
        std::string text = "Publications per year across " + std::to_string(n) + " articles:";
        for (const auto& yc : trend) {
            rows.push_back({yc.year, yc.count});
            text += " " + std::to_string(yc.year) + ": " + std::to_string(yc.count) + ",";
        }
        if (trend.empty()) text += " no publication years recorded.";
        else text.back() = '.';
        r.text = text;
        r.table = {{"columns", {"year", "count"}}, {"rows", rows}};
        if (!trend.empty()) r.actions.push_back(UIAction::set_year_filter(trend.front().year, trend.back().year));
        r.agent_trace.push_back({"analytical", "trend_by_year", {{"n", n}}, std::to_string(trend.size()) + " rows"});
    } else if (analysis == Analysis::citation_histogram) {
        const auto counts = citation_histogram(ds, pmids);
        auto rows = nlohmann::json::array();
        std::string text = "Citation counts across " + std::to_string(n) + " articles:";
        for (std::size_t b = 0; b < counts.size(); ++b) {
            rows.push_back({citation_bins()[b].first, counts[b]});
            text += " " + citation_bins()[b].first + ": " + std::to_string(counts[b]) + (b + 1 < counts.size() ? "," : ".");
        }
        r.text = text;
        r.table = {{"columns", {"bin", "count"}}, {"rows", rows}};
        r.agent_trace.push_back({"analytical", "citation_histogram", {{"n", n}}, std::to_string(counts.size()) + " bins"});
    } else {
        std::map<std::string, std::size_t> counts;
        for (const auto row : detail::rows_of(ds, pmids)) {
            const auto& j = ds.articles[row].journal;
            ++counts[j.empty() ? "(unknown)" : j];
        }
        std::vector<std::pair<std::string, std::size_t>> v(counts.begin(), counts.end());
        std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        if (v.size() > 10) v.resize(10);
        auto rows = nlohmann::json::array();
        std::string text = "Most frequent journals across " + std::to_string(n) + " articles:";
        for (const auto& [j, c] : v) {
            rows.push_back({j, c});
            text += " " + j + " (" + std::to_string(c) + "),";
        }
        text.back() = '.';
        r.text = text;
        r.table = {{"columns", {"journal", "count"}}, {"rows", rows}};
        r.agent_trace.push_back({"analytical", "journal_top", {{"n", n}}, std::to_string(v.size()) + " rows"});
    }
    return r;
}

struct GapCell {
    Point2 center;
    double distance = 0.0;
};

/// Empty cells of a 16×16 occupancy grid over the square of half-width 2r
/// around the selection centroid, r being the largest centroid distance.
inline std::vector<GapCell> find_gaps(const Dataset& ds, std::span<const std::size_t> rows, std::size_t limit = 5) {
    std::vector<Point2> pts;
    for (const auto r : rows)
        if (ds.articles[r].x && ds.articles[r].y) pts.push_back({*ds.articles[r].x, *ds.articles[r].y});
    if (pts.empty()) return {};
    Point2 c{0, 0};
    for (const auto& p : pts) {
        c.x += p.x;
        c.y += p.y;
    }
    c.x /= static_cast<double>(pts.size());
    c.y /= static_cast<double>(pts.size());
    double radius = 0.0;
    for (const auto& p : pts) radius = std::max(radius, distance(p, c));
    if (radius == 0.0) radius = std::max(1e-3 * ds.spatial.bounds().diagonal(), 1e-9);
    constexpr int G = 16;
    const double side = 4.0 * radius / G;
    const double x0 = c.x - 2.0 * radius, y0 = c.y - 2.0 * radius;
    std::vector<char> occupied(G * G, 0);
    const std::vector<Point2> box = {{x0, y0}, {x0 + 4 * radius, y0}, {x0 + 4 * radius, y0 + 4 * radius}, {x0, y0 + 4 * radius}};
    for (const auto i : ds.spatial.polygon_indices(box)) {
        const auto& p = ds.spatial.point(i);
        const int gx = std::clamp(static_cast<int>(std::floor((p.x - x0) / side)), 0, G - 1);
        const int gy = std::clamp(static_cast<int>(std::floor((p.y - y0) / side)), 0, G - 1);
        occupied[gy * G + gx] = 1;
    }
    std::vector<std::pair<double, int>> empty;
    for (int cell = 0; cell < G * G; ++cell) {
        if (occupied[cell]) continue;
        const Point2 center{x0 + (cell % G + 0.5) * side, y0 + (cell / G + 0.5) * side};
        empty.push_back({distance(center, c), cell});
    }
    std::sort(empty.begin(), empty.end());
    std::vector<GapCell> out;
    for (std::size_t i = 0; i < empty.size() && i < limit; ++i) {
        const int cell = empty[i].second;
        out.push_back({{x0 + (cell % G + 0.5) * side, y0 + (cell / G + 0.5) * side}, empty[i].first});
    }
    return out;
}

inline AgentResponse run_discovery(const Dataset& ds, std::span<const std::string> pmids, std::size_t k = 10) {
    if (pmids.empty()) throw EmptySelectionError();
    if (!ds.embeddings) throw ContractError("discovery needs embeddings for dataset " + ds.id);
    if (k == 0) throw ContractError("discovery: k must be positive");
    const auto rows = detail::rows_of(ds, pmids);
    const auto& m = *ds.embeddings;
    std::vector<double> centroid(m.dim(), 0.0);
    for (const auto r : rows) {
        const auto v = m.row(r);
        double norm = 0.0;
        for (const float x : v) norm += static_cast<double>(x) * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        for (std::size_t j = 0; j < m.dim(); ++j) centroid[j] += v[j] / norm;
    }
    std::unordered_set<std::string> exclude(pmids.begin(), pmids.end());
    const auto knn = knn_by_vector(m, centroid, k, exclude);

    AgentResponse r;
    r.agent_trace.push_back({"discovery", "knn_centroid", {{"selection", rows.size()}, {"k", k}},
                             std::to_string(knn.neighbors.size()) + " neighbors"});
    std::map<int, std::size_t> adjacent;
    auto neighbors = nlohmann::json::array();
    auto table_rows = nlohmann::json::array();
    std::string text;
    if (knn.neighbors.empty()) {
        r.notices.push_back("the selection covers every article; no neighbors outside it");
        text = "The selection covers the whole dataset, so there are no articles outside it to suggest.";
    } else {
        text = "Nearest articles outside the selection:";
        for (std::size_t i = 0; i < knn.neighbors.size(); ++i) {
            const auto& nb = knn.neighbors[i];
            const auto& a = ds.articles[nb.row];
            const int cl = ds.finest[nb.row];
            if (cl >= 0) ++adjacent[cl];
            text += std::string(i ? ";" : "") + " [PMID " + a.pmid + "] " + a.title + " (similarity " +
                    detail::fixed(nb.similarity, 3) + ")";
            r.provenance.push_back({a.pmid, a.title, "embedding_neighbor"});
            neighbors.push_back({{"pmid", a.pmid}, {"similarity", nb.similarity}, {"cluster_id", cl}});
            table_rows.push_back({a.pmid, a.title, nb.similarity, cl});
        }
        text += ".";
    }
    std::vector<std::pair<int, std::size_t>> ranked(adjacent.begin(), adjacent.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    auto adj = nlohmann::json::array();
    if (!ranked.empty()) {
        text += " Adjacent clusters:";
        std::vector<int> ids;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            const auto [c, cnt] = ranked[i];
            ids.push_back(c);
            adj.push_back({{"cluster_id", c}, {"label", ds.cluster_label(c)}, {"neighbors", cnt}});
            text += std::string(i ? "," : "") + " " + std::to_string(c) + " (" + ds.cluster_label(c) + ", " +
                    std::to_string(cnt) + ")";
        }
        text += ".";
        r.actions.push_back(UIAction::highlight_clusters(ids));
    }
    r.agent_trace.push_back({"discovery", "adjacent_clusters", nullptr, std::to_string(ranked.size()) + " clusters"});

    const auto gaps = find_gaps(ds, rows);
    auto gap_json = nlohmann::json::array();
    if (!gaps.empty()) {
        text += " Unoccupied regions nearest the selection:";
        for (std::size_t i = 0; i < gaps.size(); ++i) {
            gap_json.push_back({{"x", gaps[i].center.x}, {"y", gaps[i].center.y}, {"distance", gaps[i].distance}});
            text += std::string(i ? "," : "") + " (" + detail::fixed(gaps[i].center.x, 3) + ", " +
                    detail::fixed(gaps[i].center.y, 3) + ")";
        }
        text += ".";
    }
    r.agent_trace.push_back({"discovery", "gap_grid", nullptr, std::to_string(gaps.size()) + " empty cells"});
    r.text = text;
    r.table = {{"columns", {"pmid", "title", "similarity", "cluster_id"}}, {"rows", table_rows}};
    r.data = {{"neighbors", neighbors}, {"adjacent_clusters", adj}, {"gaps", gap_json}};
    return r;
}

inline AgentResponse run_evidence(const Dataset& ds, std::span<const std::string> pmids,
                                  const std::vector<FieldSpec>& fields, ModelClient& client,
                                  std::size_t max_articles = 50) {
    if (pmids.empty()) throw EmptySelectionError();
    if (fields.empty()) throw ContractError("evidence: field schema is empty");
    auto rows = detail::rows_of(ds, pmids);
    AgentResponse r;
    if (rows.size() > max_articles) {
        r.notices.push_back("extraction limited to the first " + std::to_string(max_articles) + " of " +
                            std::to_string(rows.size()) + " articles");
        rows.resize(max_articles);
    }
    auto field_json = nlohmann::json::array();
    for (const auto& f : fields) field_json.push_back({{"name", f.name}, {"description", f.description}});
    std::vector<std::string> columns{"pmid"};
    for (const auto& f : fields) columns.push_back(f.name);

    auto records = nlohmann::json::array();
    auto table_rows = nlohmann::json::array();
    std::string lines;
    std::size_t found = 0, failed = 0;
    for (const auto row : rows) {
        const auto& a = ds.articles[row];
        nlohmann::json reply;
        try {
            reply = client.complete({"extract", {{"pmid", a.pmid}, {"abstract", a.abstract}, {"fields", field_json}}}).data;
            if (!reply.is_object()) throw ModelError("extraction reply is not an object");
        } catch (const Error& e) {
            ++failed;
            records.push_back({{"pmid", a.pmid}, {"error", e.what()}});
            r.agent_trace.push_back({"evidence", "extract", {{"pmid", a.pmid}}, std::string("error: ") + e.what()});
            continue;
        }
        nlohmann::json rec = {{"pmid", a.pmid}, {"fields", nlohmann::json::object()}};
        nlohmann::json trow = nlohmann::json::array({a.pmid});
        std::string line;
        for (const auto& f : fields) {
            std::string value(kNotReported), snippet;
            if (reply.contains(f.name) && reply[f.name].is_object()) {
                value = reply[f.name].value("value", std::string(kNotReported));
                snippet = reply[f.name].value("snippet", std::string());
                if (trim(value).empty()) value = kNotReported;
            }
            rec["fields"][f.name] = {{"value", value}, {"snippet", snippet}};
            trow.push_back(value);
            if (value != kNotReported) {
                ++found;
                r.provenance.push_back({a.pmid, snippet.empty() ? value : snippet, "abstract"});
                line += (line.empty() ? "" : "; ") + f.name + ": " + value;
            }
        }
        if (!line.empty()) lines += " [PMID " + a.pmid + "] " + line + ".";
        records.push_back(rec);
        table_rows.push_back(trow);
        r.agent_trace.push_back({"evidence", "extract", {{"pmid", a.pmid}}, "ok"});
    }
    r.text = "Extracted " + std::to_string(found) + " field values from " + std::to_string(rows.size() - failed) +
             " articles" + (failed ? " (" + std::to_string(failed) + " failed)" : std::string()) + "." + lines;
    r.table = {{"columns", columns}, {"rows", table_rows}};
    r.data = {{"records", records}};
    return r;
}

enum class RetrievalMode { in_collection, open };

inline std::optional<RetrievalMode> parse_retrieval_mode(std::string_view s) {
    if (s == "in_collection") return RetrievalMode::in_collection;
    if (s == "open") return RetrievalMode::open;
    return std::nullopt;
}

struct OpenDocument {
    std::string pmid;
    std::string title;
    std::string snippet;
};

/// Retrieval beyond the loaded dataset.
class OpenRetrievalClient {
public:
    virtual ~OpenRetrievalClient() = default;
    virtual std::vector<OpenDocument> search(const std::string& query, std::size_t m) = 0;
};

/// Words that describe the request rather than its subject.
inline bool is_instruction_word(std::string_view t) {
    static const std::set<std::string_view> words = {
        "summarize", "summarise", "summary", "summaries", "overview", "paper", "papers", "article", "articles",
        "study",     "studies",   "selection", "selected", "find",  "show",  "list",  "give",  "tell",
        "explain",   "describe",  "main",      "key",      "topics", "topic", "please", "region", "regions",
        "cluster",   "clusters",  "literature", "publications", "publication", "say", "discuss", "discussed"};
    return words.contains(t);
}

inline AgentResponse run_scholar(const Dataset& ds, const std::string& query, std::span<const std::string> scope,
                                 RetrievalMode mode, ModelClient& client, OpenRetrievalClient* open = nullptr,
                                 std::size_t m = 5) {
    AgentResponse r;
    std::vector<nlohmann::json> evidence;
    std::map<std::string, std::string> titles;
    if (mode == RetrievalMode::open) {
        if (!open) throw ModeError("open retrieval is not available in this deployment");
        for (const auto& d : open->search(query, m)) {
            evidence.push_back({{"pmid", d.pmid}, {"title", d.title}, {"snippet", d.snippet}});
            titles[d.pmid] = d.title;
        }
        r.agent_trace.push_back({"scholar", "open_search", {{"query", query}}, std::to_string(evidence.size()) + " documents"});
    } else {
        std::vector<std::string> terms;
        for (auto& t : content_terms(query))
            if (!is_instruction_word(t)) terms.push_back(std::move(t));
        const std::unordered_set<std::string> restriction(scope.begin(), scope.end());
        std::vector<RankedDoc> keyword;
        if (!terms.empty()) keyword = ds.keywords.search(terms, &restriction);
        r.agent_trace.push_back({"scholar", "keyword_search", {{"terms", terms}}, std::to_string(keyword.size()) + " hits"});
        if (!terms.empty() && keyword.empty()) {
            r.text = "No articles in the selection match the query.";
            r.notices.push_back("no evidence found in the selection");
            return r;
        }
        // Vector ranking of the scope against the centroid of the keyword
        // hits, or of the whole scope when the query has no subject terms.
        std::vector<RankedDoc> vector_rank;
        const auto scope_rows = detail::rows_of(ds, scope);
        if (ds.embeddings) {
            const auto& em = *ds.embeddings;
            std::vector<std::size_t> seeds;
            if (keyword.empty()) seeds = scope_rows;
            else
                for (std::size_t i = 0; i < keyword.size() && i < m; ++i) seeds.push_back(ds.by_pmid.at(keyword[i].pmid));
            std::vector<double> centroid(em.dim(), 0.0);
            for (const auto s : seeds) {
                const auto v = em.row(s);
                double norm = 0.0;
                for (const float x : v) norm += static_cast<double>(x) * x;
                if (norm == 0.0) continue;
                norm = std::sqrt(norm);
                for (std::size_t j = 0; j < em.dim(); ++j) centroid[j] += v[j] / norm;
            }
            for (const auto s : scope_rows) vector_rank.push_back({ds.articles[s].pmid, cosine(std::span<const double>(centroid), em.row(s))});
        } else {
            for (const auto s : scope_rows)
                vector_rank.push_back({ds.articles[s].pmid, static_cast<double>(ds.articles[s].citation_count)});
        }
        std::sort(vector_rank.begin(), vector_rank.end(), [](const RankedDoc& a, const RankedDoc& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.pmid < b.pmid;
        });
        r.agent_trace.push_back({"scholar", "vector_rank", {{"scope", scope_rows.size()}}, std::to_string(vector_rank.size()) + " ranked"});
        std::vector<RankedDoc> fused;
        if (keyword.empty()) {
            fused = vector_rank;
        } else {
            const std::vector<std::vector<RankedDoc>> lists{keyword, vector_rank};
            fused = fuse_rankings(lists);
        }
        for (std::size_t i = 0; i < fused.size() && evidence.size() < m; ++i) {
            const auto& a = ds.article(fused[i].pmid);
            evidence.push_back({{"pmid", a.pmid}, {"title", a.title}, {"snippet", detail::first_sentence(a.abstract)}});
            titles[a.pmid] = a.title;
        }
        if (evidence.empty()) {
            r.text = "No articles in the selection match the query.";
            r.notices.push_back("no evidence found in the selection");
            return r;
        }
    }
    auto reply = client.complete({"answer", {{"query", query}, {"evidence", evidence}}});
    r.agent_trace.push_back({"scholar", "compose_answer", {{"evidence", evidence.size()}}, client.mode()});

    // Citations of anything outside the evidence set are not kept.
    std::string text = reply.text;
    for (const auto& id : cited_pmids(text))
        if (!titles.contains(id)) {
            const std::string tag = "[PMID " + id + "]";
            for (auto pos = text.find(tag); pos != std::string::npos; pos = text.find(tag, pos)) text.replace(pos, tag.size(), "[unverified]");
        }
    r.text = text;
    const auto cited = cited_pmids(text);
    for (const auto& id : cited) {
        std::string snippet = titles[id];
        for (const auto& e : evidence)
            if (e["pmid"] == id && !e["snippet"].get<std::string>().empty()) snippet = e["snippet"].get<std::string>();
        r.provenance.push_back({id, snippet, mode == RetrievalMode::open ? "open" : "in_collection"});
    }
    if (mode == RetrievalMode::in_collection && !cited.empty()) r.actions.push_back(UIAction::pin_papers(cited));
    return r;
}

// ---------------------------------------------------------------------------
// Orchestration

struct AgentOptions {
    RetrievalMode mode = RetrievalMode::in_collection;
    std::size_t k = 10;
    std::size_t m = 5;
    std::optional<Analysis> analysis;
    std::vector<FieldSpec> fields = default_evidence_fields();
    std::vector<int> compare_clusters;
};

inline AgentOptions options_from_json(const nlohmann::json& o, const Dataset& ds) {
    AgentOptions opt;
    std::vector<ValidationError::Issue> issues;
    if (!o.is_object()) throw ValidationError("options", "must be an object");
    for (const auto& [key, v] : o.items()) {
        if (key == "retrieval_mode") {
            const auto mode = v.is_string() ? parse_retrieval_mode(v.get<std::string>()) : std::nullopt;
            if (!mode) issues.push_back({"options.retrieval_mode", "must be in_collection or open"});
            else opt.mode = *mode;
        } else if (key == "k" || key == "m") {
            if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 1000)
                issues.push_back({"options." + key, "must be an integer in [1, 1000]"});
            else (key == "k" ? opt.k : opt.m) = v.get<std::size_t>();
        } else if (key == "analysis") {
            const auto a = v.is_string() ? parse_analysis(v.get<std::string>()) : std::nullopt;
            if (!a) issues.push_back({"options.analysis", "unknown analysis"});
            else opt.analysis = a;
        } else if (key == "fields") {
            if (!v.is_array() || v.empty()) {
                issues.push_back({"options.fields", "must be a non-empty array"});
                continue;
            }
            opt.fields.clear();
            for (const auto& f : v) {
                if (f.is_string() && !f.get<std::string>().empty()) opt.fields.push_back({f.get<std::string>(), ""});
                else if (f.is_object() && f.contains("name") && f["name"].is_string())
                    opt.fields.push_back({f["name"].get<std::string>(), f.value("description", std::string())});
                else issues.push_back({"options.fields", "each field is a name or {name, description}"});
            }
        } else if (key == "compare_clusters") {
            if (!v.is_array()) {
                issues.push_back({"options.compare_clusters", "must be an array of cluster ids"});
                continue;
            }
            for (const auto& c : v) {
                if (!c.is_number_integer() || !ds.has_cluster(c.get<int>()))
                    issues.push_back({"options.compare_clusters", "unknown cluster " + c.dump()});
                else opt.compare_clusters.push_back(c.get<int>());
            }
        } else {
            issues.push_back({"options." + key, "unknown option"});
        }
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return opt;
}

namespace detail {

inline void merge_into(AgentResponse& into, AgentResponse&& part) {
    if (!part.text.empty()) into.text += (into.text.empty() ? "" : "\n\n") + part.text;
    for (auto& a : part.actions)
        if (std::find(into.actions.begin(), into.actions.end(), a) == into.actions.end()) into.actions.push_back(std::move(a));
    for (auto& p : part.provenance)
        if (std::find(into.provenance.begin(), into.provenance.end(), p) == into.provenance.end())
            into.provenance.push_back(std::move(p));
    for (auto& t : part.agent_trace) into.agent_trace.push_back(std::move(t));
    if (!part.table.is_null()) into.table = std::move(part.table);
    if (!part.data.is_null()) into.data = std::move(part.data);
    for (auto& n : part.notices) into.notices.push_back(std::move(n));
}

}  // namespace detail

/// Pmids the agents may draw on: the effective selection, or the whole
/// dataset when the payload carries no selection at all.
inline std::vector<std::string> agent_scope(const ValidatedContext& v, const Dataset& ds) {
    if (v.constrained) return v.effective;
    std::vector<std::string> all;
    all.reserve(ds.size());
    for (const auto& a : ds.articles) all.push_back(a.pmid);
    std::sort(all.begin(), all.end());
    return all;
}

/// validate_context, then route each sub-request to its specialist in
/// order and merge the results.
inline AgentResponse handle_query(const Dataset& ds, const ContextPayload& payload, ModelClient& client,
                                  OpenRetrievalClient* open = nullptr) {
    const auto v = validate_context(payload, ds);
    const auto opt = options_from_json(payload.options, ds);
    const auto scope = agent_scope(v, ds);

    AgentResponse out;
    if (!v.constrained) out.notices.push_back("no selection; using all " + std::to_string(ds.size()) + " articles");
    else if (v.empty_selection()) out.notices.push_back("the selection is empty");

    auto parts = plan_subtasks(payload.query_text);
    if (parts.empty()) parts.push_back("");
    for (const auto& part : parts) {
        const auto who = part.empty() ? Specialist::scholar : route_intent(part, &client);
        out.agent_trace.push_back({"scholar", "route", {{"query", part}}, to_string(who)});
        AgentResponse res;
        try {
            switch (who) {
                case Specialist::analytical: {
                    const auto analysis = opt.analysis.value_or(infer_analysis(part));
                    auto clusters = opt.compare_clusters.empty() ? payload.selection.cluster_ids : opt.compare_clusters;
                    res = run_analytical(ds, scope, analysis, clusters);
                    break;
                }
                case Specialist::discovery: res = run_discovery(ds, scope, opt.k); break;
                case Specialist::evidence: res = run_evidence(ds, scope, opt.fields, client); break;
                case Specialist::scholar: res = run_scholar(ds, part, scope, opt.mode, client, open, opt.m); break;
            }
        } catch (const EmptySelectionError&) {
            res.text = "No articles match the current selection.";
            res.agent_trace.push_back({to_string(who), "run", {{"query", part}}, "empty selection"});
        } catch (const ModeError& e) {
            res.text = e.what();
            res.notices.push_back(e.what());
            res.agent_trace.push_back({to_string(who), "run", {{"query", part}}, std::string("error: ") + e.what()});
        } catch (const ContractError& e) {
            res.text = std::string("Unable to complete this request: ") + e.what() + ".";
            res.notices.push_back(e.what());
            res.agent_trace.push_back({to_string(who), "run", {{"query", part}}, std::string("error: ") + e.what()});
        }
        detail::merge_into(out, std::move(res));
    }
    return out;
}

}  // namespace litmap
