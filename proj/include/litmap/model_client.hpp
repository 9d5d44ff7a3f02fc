#pragma once

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "litmap/common.hpp"
#include "litmap/digest.hpp"

namespace litmap {

/// A language-model call failed or returned something unusable.
class ModelError : public Error {
public:
    using Error::Error;
};

/// task is one of "route", "extract", "answer".
struct ModelRequest {
    std::string task;
    nlohmann::json input;

    std::string key() const { return sha256_hex(nlohmann::json{{"task", task}, {"input", input}}.dump()); }
};

struct ModelReply {
    std::string text;
    nlohmann::json data;  // structured output, null when the task has none
};

class ModelClient {
public:
    virtual ~ModelClient() = default;
    virtual ModelReply complete(const ModelRequest& request) = 0;
    virtual std::string mode() const = 0;
};

struct FieldSpec {
    std::string name;
    std::string description;

    bool operator==(const FieldSpec&) const = default;
};

inline const std::vector<FieldSpec>& default_evidence_fields() {
    static const std::vector<FieldSpec> f = {
        {"population", "who was studied and how many"},
        {"intervention", "treatment or exposure given"},
        {"outcome", "primary outcome or endpoint"},
        {"study_design", "type of study"},
    };
    return f;
}

inline constexpr std::string_view kNotReported = "not reported";

namespace detail {

/// The sentence of `text` around byte offset `at`.
inline std::string sentence_at(const std::string& text, std::size_t at) {
    std::size_t begin = 0;
    for (std::size_t i = at; i > 0; --i) {
        const char c = text[i - 1];
        if ((c == '.' || c == '?' || c == '!') && (i < text.size() && text[i] == ' ')) {
            begin = i + 1;
            break;
        }
    }
    std::size_t end = text.size();
    for (std::size_t i = at; i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '.' || c == '?' || c == '!') && (i + 1 == text.size() || text[i + 1] == ' ')) {
            end = i + 1;
            break;
        }
    }
    return std::string(trim(std::string_view(text).substr(begin, end - begin)));
}

inline std::string regex_escape(const std::string& s) {
    static const std::regex special(R"([.^$|()\[\]{}*+?\\])");
    return std::regex_replace(s, special, R"(\$&)");
}

}  // namespace detail

/// Deterministic pattern extraction used by the stub client. Returns one
/// entry per field: {value, snippet}, value "not reported" when no rule fires.
inline nlohmann::json extract_by_rules(const std::string& abstract, const std::vector<FieldSpec>& fields) {
    using std::regex;
    const auto flags = regex::ECMAScript | regex::icase;
    static const regex population(
        R"(\b(\d[\d,]*)\s+(patients|participants|subjects|adults|children|women|men|individuals|volunteers|infants|mice|rats)\b)",
        flags);
    static const regex intervention(
        R"(\b(?:treated with|randomi[sz]ed to receive|randomi[sz]ed to|received|were given|administered)\s+([^.,;]+))", flags);
    static const regex outcome(
        R"(\b(?:primary (?:outcome|endpoint) was|primary (?:outcomes|endpoints) were|outcomes? (?:was|were|included))\s+([^.;]+))",
        flags);
    static const std::vector<std::string> designs = {
        "randomized controlled trial", "randomised controlled trial", "systematic review", "meta-analysis",
        "case-control study", "cross-sectional study", "cohort study", "case report", "retrospective", "prospective"};

    nlohmann::json out = nlohmann::json::object();
    for (const auto& f : fields) {
        std::smatch m;
        std::string value;
        std::size_t at = 0;
        if (f.name == "population" && std::regex_search(abstract, m, population)) {
            value = m[1].str() + " " + m[2].str();
            at = static_cast<std::size_t>(m.position(0));
        } else if (f.name == "intervention" && std::regex_search(abstract, m, intervention)) {
            value = std::string(trim(m[1].str()));
            at = static_cast<std::size_t>(m.position(0));
        } else if (f.name == "outcome" && std::regex_search(abstract, m, outcome)) {
            value = std::string(trim(m[1].str()));
            at = static_cast<std::size_t>(m.position(0));
        } else if (f.name == "study_design") {
            std::string lower = abstract;
            for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            for (const auto& d : designs) {
                const auto pos = lower.find(d);
                if (pos != std::string::npos) {
                    value = d;
                    at = pos;
                    break;
                }
            }
        } else if (f.name != "population" && f.name != "intervention" && f.name != "outcome") {
            std::string label = f.name;
            std::replace(label.begin(), label.end(), '_', ' ');
            const regex generic("\\b" + detail::regex_escape(label) + R"(\s*(?::|was|were|is|are)\s+([^.;]+))", flags);
            if (std::regex_search(abstract, m, generic)) {
                value = std::string(trim(m[1].str()));
                at = static_cast<std::size_t>(m.position(0));
            }
        }
        if (value.empty())
            out[f.name] = {{"value", kNotReported}, {"snippet", ""}};
        else
            out[f.name] = {{"value", value}, {"snippet", detail::sentence_at(abstract, at)}};
    }
    return out;
}

/// Offline deterministic client. Routing defers to the keyword router,
/// extraction applies extract_by_rules, and answers list the first three
/// evidence items as "[PMID id] Title".
class StubModelClient : public ModelClient {
public:
    ModelReply complete(const ModelRequest& request) override {
        if (request.task == "route") return {};
        if (request.task == "extract") {
            std::vector<FieldSpec> fields;
            for (const auto& f : request.input.at("fields")) fields.push_back({f.at("name"), f.value("description", "")});
            return {"", extract_by_rules(request.input.at("abstract").get<std::string>(), fields)};
        }
        if (request.task == "answer") {
            const auto& ev = request.input.at("evidence");
            std::string text = "Most relevant articles in the selection:";
            const std::size_t n = std::min<std::size_t>(3, ev.size());
            for (std::size_t i = 0; i < n; ++i)
                text += std::string(i ? ";" : "") + " [PMID " + ev[i].at("pmid").get<std::string>() + "] " +
                        ev[i].at("title").get<std::string>();
            return {text + ".", nullptr};
        }
        throw ModelError("stub model client: unknown task " + request.task);
    }
    std::string mode() const override { return "stub"; }
};

/// Replays replies recorded as JSON lines {"key", "task", "reply": {"text", "data"}}.
class ReplayModelClient : public ModelClient {
public:
    explicit ReplayModelClient(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open replay file " + path.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                const auto& r = j.at("reply");
                replies_[j.at("key").get<std::string>()] = {r.value("text", ""), r.value("data", nlohmann::json())};
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(lineno, std::string("bad replay record: ") + e.what());
            }
        }
    }
    ModelReply complete(const ModelRequest& request) override {
        const auto it = replies_.find(request.key());
        if (it == replies_.end()) throw ModelError("no recorded reply for " + request.task + " request " + request.key());
        return it->second;
    }
    std::string mode() const override { return "replay"; }

private:
    std::map<std::string, ModelReply> replies_;
};

/// Wraps another client and keeps every exchange for later replay.
class RecordingModelClient : public ModelClient {
public:
    explicit RecordingModelClient(ModelClient& inner) : inner_(inner) {}
    ModelReply complete(const ModelRequest& request) override {
        auto reply = inner_.complete(request);
        records_[request.key()] = {request.task, reply};
        return reply;
    }
    std::string mode() const override { return "recording:" + inner_.mode(); }
    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        for (const auto& [key, rec] : records_)
            out << nlohmann::json{{"key", key}, {"task", rec.first}, {"reply", {{"text", rec.second.text}, {"data", rec.second.data}}}}.dump()
                << '\n';
        if (!out) throw Error("cannot write replay file " + path.string());
    }

private:
    ModelClient& inner_;
    std::map<std::string, std::pair<std::string, ModelReply>> records_;
};

struct LiveModelConfig {
    std::string base_url;  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string api_key;
    std::string model;
    int timeout_seconds = 60;
    int max_attempts = 3;
};

/// Chat-completions style HTTP endpoint.
class LiveModelClient : public ModelClient {
public:
    explicit LiveModelClient(LiveModelConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.base_url.empty()) throw ContractError("live model client needs a base url");
    }

    ModelReply complete(const ModelRequest& request) override {
        const nlohmann::json body = {
            {"model", cfg_.model},
            {"temperature", 0},
            {"messages",
             {{{"role", "system"}, {"content", system_prompt(request.task)}},
              {{"role", "user"}, {"content", request.input.dump()}}}},
        };
        std::string last_error;
        for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
            if (attempt) std::this_thread::sleep_for(std::chrono::milliseconds(200 << attempt));
            try {
                return parse(request.task, post(body.dump()));
            } catch (const RetryableError& e) {
                last_error = e.what();
            }
        }
        throw ModelError("model endpoint failed after retries: " + last_error);
    }
    std::string mode() const override { return "live"; }

private:
    static std::string system_prompt(const std::string& task) {
        if (task == "route")
            return "Classify the user request for a literature map. Reply with exactly one word: "
                   "scholar, evidence, analytical or discovery.";
        if (task == "extract")
            return "Extract the requested fields from the abstract. Reply with a JSON object mapping each field "
                   "name to {\"value\": string, \"snippet\": supporting sentence}; use \"not reported\" when absent.";
        if (task == "answer")
            return "Answer the query using only the evidence items. Cite every item you use as [PMID id].";
        throw ModelError("live model client: unknown task " + task);
    }

    std::string post(const std::string& payload) {
        httplib::Client cli(cfg_.base_url);
        cli.set_connection_timeout(cfg_.timeout_seconds, 0);
        cli.set_read_timeout(cfg_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        const auto res = cli.Post(cfg_.path, headers, payload, "application/json");
        if (!res) throw RetryableError("model endpoint unreachable: " + httplib::to_string(res.error()));
        if (res->status == 429 || res->status >= 500)
            throw RetryableError("model endpoint returned " + std::to_string(res->status));
        if (res->status != 200) throw ModelError("model endpoint returned " + std::to_string(res->status));
        return res->body;
    }

    static ModelReply parse(const std::string& task, const std::string& body) {
        std::string content;
        try {
            content = nlohmann::json::parse(body).at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ModelError(std::string("malformed model response: ") + e.what());
        }
        if (task != "extract") return {std::string(trim(content)), nullptr};
        const auto open = content.find('{');
        const auto close = content.rfind('}');
        if (open == std::string::npos || close == std::string::npos || close < open)
            throw ModelError("model extraction reply is not a JSON object");
        try {
            return {"", nlohmann::json::parse(content.substr(open, close - open + 1))};
        } catch (const nlohmann::json::exception& e) {
            throw ModelError(std::string("model extraction reply is not valid JSON: ") + e.what());
        }
    }

    LiveModelConfig cfg_;
};

}  // namespace litmap
