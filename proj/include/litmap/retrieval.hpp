#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "litmap/corpus.hpp"
#include "litmap/text.hpp"

namespace litmap {

struct RankedDoc {
    std::string pmid;
    double score = 0.0;

    bool operator==(const RankedDoc&) const = default;
};

/// Inverted index over title + abstract content terms.
class KeywordIndex {
public:
    KeywordIndex() = default;
    explicit KeywordIndex(std::span<const Article> articles) {
        for (const auto& a : articles) {
            std::map<std::string, int> tf;
            for (auto& t : content_terms(a.text())) ++tf[t];
            for (const auto& [t, c] : tf) postings_[t].push_back({a.pmid, c});
        }
    }

    const std::vector<std::pair<std::string, int>>* postings(const std::string& term) const {
        const auto it = postings_.find(term);
        return it == postings_.end() ? nullptr : &it->second;
    }

    /// Sum of term frequencies over the distinct query terms; ties by pmid.
    /// A non-null restriction drops every other pmid before ranking.
    std::vector<RankedDoc> search(std::span<const std::string> terms,
                                  const std::unordered_set<std::string>* restriction = nullptr) const {
        std::map<std::string, double> score;
        const std::set<std::string> unique(terms.begin(), terms.end());
        for (const auto& t : unique) {
            const auto* p = postings(t);
            if (!p) continue;
            for (const auto& [pmid, c] : *p)
                if (!restriction || restriction->contains(pmid)) score[pmid] += c;
        }
        std::vector<RankedDoc> out;
        out.reserve(score.size());
        for (const auto& [pmid, s] : score) out.push_back({pmid, s});
        std::stable_sort(out.begin(), out.end(), [](const RankedDoc& a, const RankedDoc& b) { return a.score > b.score; });
        return out;
    }

    std::vector<RankedDoc> search(std::string_view query, const std::unordered_set<std::string>* restriction = nullptr) const {
        const auto terms = content_terms(query);
        return search(terms, restriction);
    }

private:
    std::unordered_map<std::string, std::vector<std::pair<std::string, int>>> postings_;
};

/// Reciprocal rank fusion, 1 / (c + rank) summed over the lists, rank from 1.
inline std::vector<RankedDoc> fuse_rankings(std::span<const std::vector<RankedDoc>> lists, double c = 60.0) {
    std::map<std::string, double> score;
    for (const auto& list : lists)
        for (std::size_t r = 0; r < list.size(); ++r) score[list[r].pmid] += 1.0 / (c + static_cast<double>(r + 1));
    std::vector<RankedDoc> out;
    for (const auto& [pmid, s] : score) out.push_back({pmid, s});
    std::stable_sort(out.begin(), out.end(), [](const RankedDoc& a, const RankedDoc& b) { return a.score > b.score; });
    return out;
}

}  // namespace litmap
