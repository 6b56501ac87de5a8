// Independent reference implementations used by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "oculab/learning_path.hpp"

namespace oracle {

/// I-VT by exhaustive per-sample scan: its own median-3 and difference code,
/// per-sample threshold labels, one-sample gaps filled, maximal runs read off.
inline std::vector<std::pair<std::size_t, std::size_t>> ivt(const std::vector<double>& y, double fs, double thr) {
    const std::size_t n = y.size();
    std::vector<double> m = y;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        double w[3] = {y[i - 1], y[i], y[i + 1]};
        std::sort(w, w + 3);
        m[i] = w[1];
    }
    std::vector<double> v(n);
    v[0] = (m[1] - m[0]) * fs;
    v[n - 1] = (m[n - 1] - m[n - 2]) * fs;
    for (std::size_t i = 1; i + 1 < n; ++i) v[i] = (m[i + 1] - m[i - 1]) * fs / 2.0;
    std::vector<bool> fast(n);
    for (std::size_t i = 0; i < n; ++i) fast[i] = std::abs(v[i]) > thr;
    std::vector<bool> filled = fast;
    for (std::size_t i = 1; i + 1 < n; ++i)
        if (!fast[i] && fast[i - 1] && fast[i + 1]) filled[i] = true;
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    for (std::size_t i = 0; i < n; ++i) {
        if (!filled[i]) continue;
        std::size_t j = i;
        while (j + 1 < n && filled[j + 1]) ++j;
        runs.emplace_back(i, j);
        i = j;
    }
    return runs;
}

/// Every DAG on n labelled nodes whose edges respect the order of `labels`:
/// one per subset of the n(n-1)/2 forward pairs.
inline void for_each_forward_dag(const std::vector<std::string>& labels,
                                 const std::function<void(const oculab::Dag&)>& fn) {
    const std::size_t n = labels.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    oculab::Dag base;
    for (const auto& l : labels) base = base.with_node(l, l);
    for (std::size_t mask = 0; mask < (std::size_t{1} << pairs.size()); ++mask) {
        oculab::Dag g = base;
        for (std::size_t b = 0; b < pairs.size(); ++b)
            if (mask & (std::size_t{1} << b)) g = oculab::add_dependency(g, labels[pairs[b].first], labels[pairs[b].second]);
        fn(g);
    }
}

/// All complete sequences reachable by repeatedly picking from the frontier
/// and marking the pick complete.
inline void frontier_walks(const oculab::TopicGraph& g, oculab::StudentProgress p, std::vector<std::string>& prefix,
                           std::set<std::vector<std::string>>& out) {
    const auto f = oculab::topic_frontier(g, p);
    if (f.empty()) {
        out.insert(prefix);
        return;
    }
    for (const auto& node : f) {
        prefix.push_back(node);
        frontier_walks(g, oculab::mark_complete(p, g, node), prefix, out);
        prefix.pop_back();
    }
}

/// Compares frontier walks with valid_orderings for every forward DAG on the
/// given labels. Returns the number of graphs that disagree.
inline std::size_t frontier_mismatches(const std::vector<std::string>& labels, std::size_t* graphs = nullptr) {
    std::size_t bad = 0, count = 0;
    for_each_forward_dag(labels, [&](const oculab::Dag& d) {
        ++count;
        oculab::TopicGraph g;
        g.topics = d;
        std::set<std::vector<std::string>> walks;
        std::vector<std::string> prefix;
        frontier_walks(g, {}, prefix, walks);
        const auto orders = oculab::valid_orderings(d);
        if (walks != std::set<std::vector<std::string>>(orders.begin(), orders.end())) ++bad;
    });
    if (graphs) *graphs = count;
    return bad;
}

}  // namespace oracle
