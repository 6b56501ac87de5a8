#pragma once

// Student-centred learning paths. Course content is a dependency DAG of
// topics; each topic may hold its own DAG of components. A student may take
// any item whose prerequisites are complete (the frontier), so the order
// differs per student. A topic with components completes when all of its
// components do.

#include <algorithm>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "oculab/error.hpp"

namespace oculab {

/// Directed acyclic graph of content items. Edge (from, to) means `from`
/// must be completed before `to`. Immutable in use: mutators return copies.
class Dag {
public:
    using Edge = std::pair<std::string, std::string>;

    Dag with_node(const std::string& id, std::string title) const {
        if (id.empty()) throw ValidationError("node id must be non-empty");
        if (nodes_.count(id)) throw ValidationError("duplicate node '" + id + "'");
        Dag g = *this;
        g.nodes_.emplace(id, std::move(title));
        return g;
    }

    bool has_node(const std::string& id) const { return nodes_.count(id) != 0; }
    std::size_t size() const noexcept { return nodes_.size(); }
    const std::map<std::string, std::string>& nodes() const noexcept { return nodes_; }
    const std::set<Edge>& edges() const noexcept { return edges_; }

    std::vector<std::string> node_ids() const {
        std::vector<std::string> ids;
        for (const auto& [id, _] : nodes_) ids.push_back(id);
        return ids;
    }

    std::vector<std::string> prerequisites(const std::string& id) const {
        std::vector<std::string> out;
        for (const auto& [from, to] : edges_)
            if (to == id) out.push_back(from);
        return out;
    }

    /// Shortest path from `start` to `goal` along edges, if any.
    std::optional<std::vector<std::string>> path(const std::string& start, const std::string& goal) const {
        std::map<std::string, std::string> parent;
        std::deque<std::string> queue{start};
        std::set<std::string> seen{start};
        while (!queue.empty()) {
            const std::string cur = queue.front();
            queue.pop_front();
            if (cur == goal) {
                std::vector<std::string> p{goal};
                for (std::string n = goal; n != start;) {
                    n = parent.at(n);
                    p.push_back(n);
                }
                std::reverse(p.begin(), p.end());
                return p;
            }
            for (const auto& [from, to] : edges_) {
                if (from == cur && seen.insert(to).second) {
                    parent[to] = cur;
                    queue.push_back(to);
                }
            }
        }
        return std::nullopt;
    }

    friend bool operator==(const Dag&, const Dag&) = default;

    friend Dag add_dependency(const Dag& g, const std::string& from, const std::string& to);

private:
    std::map<std::string, std::string> nodes_;
    std::set<Edge> edges_;
};

/// Adds edge from -> to. Throws ValidationError for unknown nodes and
/// CycleError (with the closing path) when the edge would create a cycle.
inline Dag add_dependency(const Dag& g, const std::string& from, const std::string& to) {
    for (const auto* id : {&from, &to})
        if (!g.has_node(*id)) throw ValidationError("unknown node '" + *id + "'");
    if (from == to) throw CycleError({from, to});
    if (auto back = g.path(to, from)) {
        std::vector<std::string> cycle{from};
        cycle.insert(cycle.end(), back->begin(), back->end());
        throw CycleError(std::move(cycle));
    }
    Dag out = g;
    out.edges_.emplace(from, to);
    return out;
}

/// Every completed node must exist and have all its prerequisites completed.
inline void check_completed(const Dag& g, const std::set<std::string>& completed) {
    for (const auto& id : completed) {
        if (!g.has_node(id)) throw ValidationError("completed node '" + id + "' is not in the graph");
        for (const auto& pre : g.prerequisites(id))
            if (!completed.count(pre))
                throw ValidationError("completed node '" + id + "' has incomplete prerequisite '" + pre + "'");
    }
}

/// Nodes not yet completed whose prerequisites are all completed.
inline std::set<std::string> frontier(const Dag& g, const std::set<std::string>& completed) {
    check_completed(g, completed);
    std::set<std::string> out;
    for (const auto& [id, _] : g.nodes()) {
        if (completed.count(id)) continue;
        const auto pre = g.prerequisites(id);
        if (std::all_of(pre.begin(), pre.end(), [&](const std::string& p) { return completed.count(p) != 0; }))
            out.insert(id);
    }
    return out;
}

inline constexpr std::size_t kMaxEnumerableNodes = 8;

/// All topological orders, by filtering every permutation of the nodes.
/// Limited to small graphs; used as an oracle for frontier walks.
inline std::vector<std::vector<std::string>> valid_orderings(const Dag& g) {
    if (g.size() > kMaxEnumerableNodes)
        throw SizeError("valid_orderings supports at most " + std::to_string(kMaxEnumerableNodes) + " nodes");
    std::vector<std::string> perm = g.node_ids();  // sorted, as required by next_permutation
    std::vector<std::vector<std::string>> out;
    do {
        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < perm.size(); ++i) pos[perm[i]] = i;
        bool ok = true;
        for (const auto& [from, to] : g.edges()) {
            if (pos[from] > pos[to]) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

/// Two-level structure: a DAG of topics, and per topic an optional DAG of
/// components. Edges never cross levels or topics.
struct TopicGraph {
    Dag topics;
    std::map<std::string, Dag> components;

    friend bool operator==(const TopicGraph&, const TopicGraph&) = default;

    const Dag* components_of(const std::string& topic) const {
        auto it = components.find(topic);
        return it == components.end() || it->second.size() == 0 ? nullptr : &it->second;
    }
};

/// Every component map key must name a topic.
inline void validate(const TopicGraph& g) {
    for (const auto& [topic, _] : g.components)
        if (!g.topics.has_node(topic)) throw ValidationError("components given for unknown topic '" + topic + "'");
}

/// The three examination tests as independent components of one topic.
inline TopicGraph default_topic_graph() {
    TopicGraph g;
    g.topics = g.topics.with_node("oculomotor-examination", "Oculomotor examination");
    g.components["oculomotor-examination"] = Dag{}
                                                 .with_node("saccade-latency", "Test 1: saccade latency")
                                                 .with_node("smooth-pursuit", "Test 2: smooth pursuit precision")
                                                 .with_node("vor", "Test 3: head rotation frequency and speed");
    return g;
}

struct StudentProgress {
    std::string student_id;
    std::set<std::string> completed;                             // topics
    std::map<std::string, std::set<std::string>> components;  // topic -> completed components
    friend bool operator==(const StudentProgress&, const StudentProgress&) = default;
};

/// Topics available to start or continue.
inline std::set<std::string> topic_frontier(const TopicGraph& g, const StudentProgress& p) {
    return frontier(g.topics, p.completed);
}

/// Components available within `topic`; empty while the topic is locked.
inline std::set<std::string> component_frontier(const TopicGraph& g, const StudentProgress& p,
                                                const std::string& topic) {
    if (!g.topics.has_node(topic)) throw ValidationError("unknown topic '" + topic + "'");
    const Dag* comps = g.components_of(topic);
    if (!comps || p.completed.count(topic)) return {};
    if (!topic_frontier(g, p).count(topic)) return {};
    auto it = p.components.find(topic);
    return frontier(*comps, it == p.components.end() ? std::set<std::string>{} : it->second);
}

namespace detail {

inline std::vector<std::string> missing_prerequisites(const Dag& g, const std::set<std::string>& done,
                                                      const std::string& node) {
    std::vector<std::string> missing;
    for (const auto& pre : g.prerequisites(node))
        if (!done.count(pre)) missing.push_back(pre);
    return missing;
}

}  // namespace detail

/// Completes a topic. A topic with components only completes once every
/// component is done; those are reported as missing otherwise. Idempotent.
inline StudentProgress mark_complete(StudentProgress p, const TopicGraph& g, const std::string& topic) {
    if (!g.topics.has_node(topic)) throw ValidationError("unknown topic '" + topic + "'");
    if (p.completed.count(topic)) return p;
    auto missing = detail::missing_prerequisites(g.topics, p.completed, topic);
    if (const Dag* comps = g.components_of(topic)) {
        const auto& done = p.components[topic];
        for (const auto& c : comps->node_ids())
            if (!done.count(c)) missing.push_back(topic + "/" + c);
    }
    if (!missing.empty()) throw LockedError(topic, std::move(missing));
    p.completed.insert(topic);
    return p;
}

/// Completes one component; completing the last one completes the topic.
inline StudentProgress mark_component_complete(StudentProgress p, const TopicGraph& g, const std::string& topic,
                                               const std::string& component) {
    if (!g.topics.has_node(topic)) throw ValidationError("unknown topic '" + topic + "'");
    const Dag* comps = g.components_of(topic);
    if (!comps || !comps->has_node(component))
        throw ValidationError("unknown component '" + component + "' in topic '" + topic + "'");
    auto& done = p.components[topic];
    if (done.count(component)) return p;
    auto missing = detail::missing_prerequisites(g.topics, p.completed, topic);
    for (const auto& pre : detail::missing_prerequisites(*comps, done, component)) missing.push_back(topic + "/" + pre);
    if (!missing.empty()) throw LockedError(topic + "/" + component, std::move(missing));
    done.insert(component);
    if (done.size() == comps->size()) p.completed.insert(topic);
    return p;
}

}  // namespace oculab
