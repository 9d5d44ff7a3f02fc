// Router phrasing suite and random context payloads shared by the agent
// tests and the acceptance binary.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "litmap/agents.hpp"

namespace agent_cases {

struct RouteCase {
    std::string query;
    litmap::Specialist expected;
};

inline const std::vector<RouteCase>& router_suite() {
    using litmap::Specialist;
    static const std::vector<RouteCase> cases = {
        {"How many papers per year in this region?", Specialist::analytical},
        {"Show the publication trend for this cluster", Specialist::analytical},
        {"Count the articles by journal", Specialist::analytical},
        {"Compare these two clusters", Specialist::analytical},
        {"What is the distribution of citation counts?", Specialist::analytical},
        {"Give me summary statistics for the selection", Specialist::analytical},
        {"Find papers similar to my selection", Specialist::discovery},
        {"What related work sits nearby?", Specialist::discovery},
        {"Are there gaps around this region of the map?", Specialist::discovery},
        {"Which areas are underexplored?", Specialist::discovery},
        {"Suggest a hypothesis linking these topics", Specialist::discovery},
        {"Papers related to checkpoint inhibitors", Specialist::discovery},
        {"Extract the study design of each trial", Specialist::evidence},
        {"Make a table of sample sizes", Specialist::evidence},
        {"What population was enrolled in these studies?", Specialist::evidence},
        {"List the intervention used in every paper", Specialist::evidence},
        {"Pull out the primary outcome of each study", Specialist::evidence},
        {"Summarize these papers", Specialist::scholar},
        {"What do these articles say about melanoma?", Specialist::scholar},
        {"Explain the main findings on semaglutide", Specialist::scholar},
        {"Give an overview of tuberculosis treatment", Specialist::scholar},
        {"Why does levodopa cause dyskinesia?", Specialist::scholar},
        {"Count trials then summarize them", Specialist::analytical},
        {"How many similar papers exist?", Specialist::analytical},
    };
    return cases;
}

/// A valid payload with a random mix of selection components and a query
/// drawn from the router suite.
inline litmap::ContextPayload random_payload(const litmap::Dataset& ds, std::mt19937_64& rng) {
    litmap::ContextPayload p;
    p.dataset_id = ds.id;
    const auto& suite = router_suite();
    p.query_text = suite[rng() % suite.size()].query;
    const auto pick = [&](int in) { return static_cast<int>(rng() % 100) < in; };
    if (pick(60)) {
        const auto n = 1 + rng() % 40;
        for (std::size_t i = 0; i < n; ++i) p.selection.pmids.push_back(ds.articles[rng() % ds.size()].pmid);
    }
    if (pick(30) && !ds.tree.nodes.empty()) p.selection.cluster_ids.push_back(static_cast<int>(rng() % ds.tree.nodes.size()));
    if (pick(30)) {
        const int lo = 2000 + static_cast<int>(rng() % 20);
        p.selection.year_range = std::pair{lo, lo + static_cast<int>(rng() % 10)};
    }
    if (pick(30)) {
        const auto& a = ds.articles[rng() % ds.size()];
        std::uniform_real_distribution<double> r(0.5, 8.0);
        const double cx = *a.x, cy = *a.y, w = r(rng), h = r(rng);
        p.selection.polygon = std::vector<litmap::Point2>{{cx - w, cy - h}, {cx + w, cy - h}, {cx + w, cy + h}, {cx - w, cy + h}};
    }
    return p;
}

}  // namespace agent_cases
