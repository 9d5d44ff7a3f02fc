#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace litmap {

/// Progress and diagnostics sink; an empty function discards messages.
using LogFn = std::function<void(const std::string&)>;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Input is missing a required column or has the wrong layout.
class SchemaError : public Error {
public:
    using Error::Error;
};

class DuplicateRecordError : public Error {
public:
    explicit DuplicateRecordError(std::string pmid)
        : Error("duplicate record for pmid '" + pmid + "'"), pmid_(std::move(pmid)) {}
    const std::string& pmid() const noexcept { return pmid_; }

private:
    std::string pmid_;
};

/// Row-level parse failure. Line numbers are 1-based and count the header.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class AlignmentError : public Error {
public:
    AlignmentError(std::vector<std::string> missing, std::vector<std::string> extra)
        : Error(describe(missing, extra)), missing_(std::move(missing)), extra_(std::move(extra)) {}
    const std::vector<std::string>& missing() const noexcept { return missing_; }
    const std::vector<std::string>& extra() const noexcept { return extra_; }

private:
    static std::string describe(const std::vector<std::string>& missing,
                                const std::vector<std::string>& extra) {
        std::string s = "embedding ids do not match corpus;";
        auto list = [&](const char* tag, const std::vector<std::string>& ids) {
            if (ids.empty()) return;
            s += std::string(" ") + tag + ":";
            for (std::size_t i = 0; i < ids.size() && i < 20; ++i) s += " " + ids[i];
            if (ids.size() > 20) s += " ...";
        };
        list("missing", missing);
        list("extra", extra);
        return s;
    }
    std::vector<std::string> missing_;
    std::vector<std::string> extra_;
};

/// Non-finite or otherwise unusable numeric data.
class DataError : public Error {
public:
    DataError(std::size_t row, const std::string& what)
        : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// A transient failure (network, rate limit). Safe to retry.
class RetryableError : public Error {
public:
    using Error::Error;
};

class DecodeError : public Error {
public:
    DecodeError(std::string pmid, const std::string& what)
        : Error("cannot decode record for pmid '" + pmid + "': " + what), pmid_(std::move(pmid)) {}
    const std::string& pmid() const noexcept { return pmid_; }

private:
    std::string pmid_;
};

/// Optimizer produced a non-finite value.
class NumericalError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic random numbers.
//
// std::mt19937_64 output is fully specified by the standard; the distribution
// classes are not, so conversions are done here to keep runs bit-identical
// across standard libraries.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift with rejection.
        std::uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Number formatting and parsing. Shortest round-trip representation keeps
// text artifacts byte-stable.

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw Error("cannot format number");
    return std::string(buf, ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    Int v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace litmap
