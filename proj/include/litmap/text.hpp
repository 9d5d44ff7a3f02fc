#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "litmap/common.hpp"

namespace litmap {

namespace detail {

inline bool starts_tag(std::string_view s, std::size_t i) {
    if (s[i] != '<' || i + 1 >= s.size()) return false;
    const char c = s[i + 1];
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '/' || c == '!' || c == '?';
}

// One pass of tag removal. Returns true if anything was removed.
inline bool strip_tags_once(std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool changed = false;
    std::size_t i = 0;
    while (i < s.size()) {
        if (starts_tag(s, i)) {
            const auto close = s.find('>', i + 1);
            if (close != std::string::npos) {
                // A tag separates words; keep a space so "a<br>b" stays two tokens.
                out.push_back(' ');
                i = close + 1;
                changed = true;
                continue;
            }
        }
        out.push_back(s[i++]);
    }
    s.swap(out);
    return changed;
}

}  // namespace detail

/// Strips markup tags, applies Unicode NFC, collapses whitespace runs to a
/// single space and trims. Idempotent.
inline std::string normalize_text(std::string_view raw) {
    std::string s(raw);
    while (detail::strip_tags_once(s)) {
    }

    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
    const icu::UnicodeString in = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    const icu::UnicodeString norm = nfc->normalize(in, status);
    if (U_FAILURE(status)) throw Error("unicode normalization failed");

    icu::UnicodeString collapsed;
    bool pending_space = false;
    for (int32_t i = 0; i < norm.length();) {
        const UChar32 c = norm.char32At(i);
        i += U16_LENGTH(c);
        if (u_isUWhiteSpace(c)) {
            pending_space = !collapsed.isEmpty();
            continue;
        }
        if (pending_space) collapsed.append(static_cast<UChar>(' '));
        pending_space = false;
        collapsed.append(c);
    }
    std::string out;
    collapsed.toUTF8String(out);
    return out;
}

/// Lowercased word unigrams: maximal runs of ASCII alphanumerics or non-ASCII
/// bytes. Non-ASCII text passes through unchanged.
inline std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) tokens.push_back(std::move(cur));
        cur.clear();
    };
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z')) {
            cur.push_back(ch);
        } else if (c >= 'A' && c <= 'Z') {
            cur.push_back(static_cast<char>(c - 'A' + 'a'));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

inline constexpr std::string_view kStopwordsVersion = "v1";

// Sorted for binary search.
inline constexpr std::array<std::string_view, 128> kStopwordsV1 = {
    "a",       "about",   "above",   "after",   "again",   "against", "all",     "also",
    "am",      "among",   "an",      "and",     "any",     "are",     "as",      "at",
    "be",      "because", "been",    "before",  "being",   "below",   "between", "both",
    "but",     "by",      "can",     "could",   "did",     "do",      "does",    "doing",
    "down",    "during",  "each",    "either",  "few",     "for",     "from",    "further",
    "had",     "has",     "have",    "having",  "he",      "her",     "here",    "hers",
    "him",     "his",     "how",     "however", "i",       "if",      "in",      "into",
    "is",      "it",      "its",     "itself",  "just",    "may",     "me",      "might",
    "more",    "most",    "much",    "must",    "my",      "no",      "nor",     "not",
    "of",      "off",     "on",      "once",    "only",    "or",      "other",   "our",
    "ours",    "out",     "over",    "own",     "same",    "she",     "should",  "so",
    "some",    "such",    "than",    "that",    "the",     "their",   "theirs",  "them",
    "then",    "there",   "these",   "they",    "this",    "those",   "through", "thus",
    "to",      "too",     "under",   "until",   "up",      "upon",    "using",   "very",
    "was",     "we",      "were",    "what",    "when",    "where",   "whether", "which",
    "while",   "who",     "whom",    "why",     "will",    "with",    "within",  "would",
};

inline bool is_stopword(std::string_view token) {
    return std::binary_search(kStopwordsV1.begin(), kStopwordsV1.end(), token);
}

/// Tokens usable as label terms: stopwords, single characters and pure
/// numbers removed.
inline std::vector<std::string> content_terms(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : tokenize_words(text)) {
        if (t.size() < 2 || is_stopword(t)) continue;
        if (std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace litmap
