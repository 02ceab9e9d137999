#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sopcc/error.hpp"
#include "sopcc/instance.hpp"
#include "sopcc/rng.hpp"
#include "sopcc/stochastic.hpp"

namespace sopcc {

/// Tunables of one planning call. Defaults follow the published experiments.
struct PlannerConfig {
    std::size_t iterations = 350;            ///< K, tree expansions per call
    std::size_t rollouts = 100;              ///< S, rollouts per expanded leaf
    std::size_t feasibility_samples = 100;   ///< M, samples per feasibility check
    double random_branch_probability = 0.3;  ///< P_R
    double exploration = 3.0;                ///< z
    double failure_bound = 0.1;              ///< P_f
    SaaMode saa_mode = SaaMode::binomial;

    void validate() const {
        if (iterations < 1 || rollouts < 1 || feasibility_samples < 1) {
            throw ParameterError("K, S and M must be at least 1");
        }
        if (!(random_branch_probability >= 0.0 && random_branch_probability <= 1.0)) {
            throw ParameterError("P_R must lie in [0, 1]");
        }
        if (!(exploration >= 0.0) || !std::isfinite(exploration)) {
            throw ParameterError("z must be a finite non-negative number");
        }
        if (!(failure_bound > 0.0 && failure_bound < 1.0)) {
            throw ParameterError("P_f must lie in (0, 1)");
        }
    }

    bool operator==(const PlannerConfig&) const = default;
};

/// Per-child statistics stored in the parent node.
struct ChildStats {
    std::uint64_t visits = 0;  ///< N
    double q = 0.0;            ///< reward of the best known continuation
    double f = 0.0;            ///< failure estimate of that continuation

    bool operator==(const ChildStats&) const = default;
};

inline bool is_feasible(double failure, double failure_bound) { return failure <= failure_bound; }

/**
 * UCT with failures: Q(1-F) + z*sqrt(ln t / N), +infinity for N = 0.
 * `total` is the visit count summed over the siblings.
 */
inline double uctf_score(const ChildStats& stats, std::uint64_t total, double exploration) {
    if (total < stats.visits) {
        throw std::logic_error("sibling visit total " + std::to_string(total) + " below child count " +
                               std::to_string(stats.visits));
    }
    if (stats.visits == 0) {
        return std::numeric_limits<double>::infinity();
    }
    return stats.q * (1.0 - stats.f) +
           exploration * std::sqrt(std::log(static_cast<double>(total)) / static_cast<double>(stats.visits));
}

/**
 * Search tree over graph vertices. A vertex may occur at several nodes,
 * one per distinct root path. Nodes live in an arena; index 0 is the root.
 */
class SearchTree {
public:
    using NodeId = std::size_t;
    static constexpr NodeId kNone = std::numeric_limits<NodeId>::max();

    struct Child {
        VertexId vertex;
        NodeId node;
        ChildStats stats;
    };

    struct Node {
        VertexId vertex;
        NodeId parent;
        std::size_t slot;  ///< index of this node in parent's children
        std::vector<Child> children;
    };

    explicit SearchTree(VertexId root_vertex) { nodes_.push_back({root_vertex, kNone, 0, {}}); }

    NodeId root() const { return 0; }
    std::size_t size() const { return nodes_.size(); }
    const Node& node(NodeId id) const { return nodes_.at(id); }
    NodeId parent(NodeId id) const { return nodes_.at(id).parent; }
    VertexId vertex(NodeId id) const { return nodes_.at(id).vertex; }

    NodeId add_child(NodeId parent, VertexId vertex, ChildStats stats) {
        if (find_child(parent, vertex) != kNone) {
            throw std::logic_error("vertex " + std::to_string(vertex) + " is already a child");
        }
        const NodeId id = nodes_.size();
        auto& siblings = nodes_.at(parent).children;
        siblings.push_back({vertex, id, stats});
        nodes_.push_back({vertex, parent, siblings.size() - 1, {}});
        return id;
    }

    NodeId find_child(NodeId parent, VertexId vertex) const {
        for (const auto& c : nodes_.at(parent).children) {
            if (c.vertex == vertex) {
                return c.node;
            }
        }
        return kNone;
    }

    /// Stats held by the parent of `id` for it. `id` must not be the root.
    ChildStats& stats_in_parent(NodeId id) {
        const auto& n = nodes_.at(id);
        return nodes_[n.parent].children[n.slot].stats;
    }
    const ChildStats& stats_in_parent(NodeId id) const {
        const auto& n = nodes_.at(id);
        return nodes_[n.parent].children[n.slot].stats;
    }

    std::uint64_t visit_total(NodeId id) const {
        std::uint64_t t = 0;
        for (const auto& c : nodes_.at(id).children) {
            t += c.stats.visits;
        }
        return t;
    }

    std::size_t depth(NodeId id) const {
        std::size_t d = 0;
        for (; nodes_.at(id).parent != kNone; id = nodes_[id].parent) {
            ++d;
        }
        return d;
    }

    /// Vertices from the root down to `id`, inclusive.
    std::vector<VertexId> path_to(NodeId id) const {
        std::vector<VertexId> path;
        for (NodeId cur = id; cur != kNone; cur = nodes_.at(cur).parent) {
            path.push_back(nodes_[cur].vertex);
        }
        std::reverse(path.begin(), path.end());
        return path;
    }

    /// Vertices a child of `id` may not be: ancestors, `id` itself, and `visited`.
    VertexSet excluded(NodeId id, const VertexSet& visited) const {
        VertexSet out = visited;
        for (NodeId cur = id; cur != kNone; cur = nodes_.at(cur).parent) {
            out.insert(nodes_[cur].vertex);
        }
        return out;
    }

private:
    std::vector<Node> nodes_;
};

/// Where one iteration of the tree policy ends.
struct Descent {
    SearchTree::NodeId parent = SearchTree::kNone;
    VertexId child = 0;
    SearchTree::NodeId existing = SearchTree::kNone;  ///< node of `child` if already in the tree
    std::vector<VertexId> path;                        ///< root ... child
    VertexSet excluded;                                ///< visited set for a rollout from `child`
};

/**
 * Walks down from the root by maximum UCTF until it picks a vertex that is
 * not yet a child (unvisited children score +infinity, lowest id first) or
 * the goal, which is terminal and is re-evaluated in place.
 */
inline Descent tree_policy_descend(const SearchTree& tree, const ProblemInstance& instance,
                                   const VertexSet& visited, double exploration) {
    const auto n = static_cast<VertexId>(instance.size());
    const VertexId goal = instance.goal();
    Descent d;
    d.excluded = visited;
    SearchTree::NodeId cur = tree.root();
    d.path.push_back(tree.vertex(cur));
    d.excluded.insert(tree.vertex(cur));

    while (true) {
        const VertexId here = tree.vertex(cur);
        for (VertexId v = 0; v < n; ++v) {
            if (!d.excluded.contains(v) && instance.has_edge(here, v) && tree.find_child(cur, v) == SearchTree::kNone) {
                d.parent = cur;
                d.child = v;
                break;
            }
        }
        if (d.parent != SearchTree::kNone) {
            break;
        }
        const auto& children = tree.node(cur).children;
        if (children.empty()) {
            // Nothing admissible left; fall back to the goal.
            d.parent = cur;
            d.child = goal;
            d.existing = tree.find_child(cur, goal);
            break;
        }
        const std::uint64_t total = tree.visit_total(cur);
        const SearchTree::Child* best = nullptr;
        double best_score = -std::numeric_limits<double>::infinity();
        for (const auto& c : children) {
            const double s = uctf_score(c.stats, total, exploration);
            if (best == nullptr || s > best_score || (s == best_score && c.vertex < best->vertex)) {
                best = &c;
                best_score = s;
            }
        }
        if (best->vertex == goal) {
            d.parent = cur;
            d.child = goal;
            d.existing = best->node;
            break;
        }
        cur = best->node;
        d.path.push_back(best->vertex);
        d.excluded.insert(best->vertex);
    }
    d.path.push_back(d.child);
    d.excluded.insert(d.child);
    return d;
}

/**
 * Candidate order for the greedy rollout step: for each vertex, its
 * neighbours by decreasing reward / expected cost, ties by lower id.
 */
class GreedyOrder {
public:
    explicit GreedyOrder(const ProblemInstance& instance) : order_(instance.size()) {
        const auto n = static_cast<VertexId>(instance.size());
        for (VertexId i = 0; i < n; ++i) {
            std::vector<std::pair<double, VertexId>> ranked;
            for (VertexId j = 0; j < n; ++j) {
                if (instance.has_edge(i, j)) {
                    ranked.emplace_back(instance.reward(j) / instance.mean_unchecked(i, j), j);
                }
            }
            std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
                return a.first > b.first || (a.first == b.first && a.second < b.second);
            });
            for (const auto& r : ranked) {
                order_[i].push_back(r.second);
            }
        }
    }

    std::span<const VertexId> from(VertexId v) const { return order_[v]; }

private:
    std::vector<std::vector<VertexId>> order_;
};

namespace detail {

/// SAA screen of the path (from, via, goal) against the residual budget.
inline bool passes_screen(const ProblemInstance& instance, VertexId from, VertexId via, double residual,
                          const PlannerConfig& cfg, Rng& rng) {
    const auto m = static_cast<std::uint64_t>(cfg.feasibility_samples);
    const auto count = count_two_leg_exceedances(instance, from, via, residual, m, rng, cfg.saa_mode);
    return is_feasible(static_cast<double>(count) / static_cast<double>(m), cfg.failure_bound);
}

inline VertexId greedy_step(const ProblemInstance& instance, const GreedyOrder& order, VertexId current,
                            const std::vector<char>& visited, double residual, const PlannerConfig& cfg,
                            Rng& rng) {
    // Scanning in ratio order and stopping at the first survivor selects the
    // same vertex as screening every candidate first.
    for (VertexId k : order.from(current)) {
        if (visited[k]) {
            continue;
        }
        if (passes_screen(instance, current, k, residual, cfg, rng)) {
            return k;
        }
    }
    return instance.goal();
}

inline VertexId random_child(const ProblemInstance& instance, VertexId current, const std::vector<char>& visited,
                             std::vector<VertexId>& scratch, Rng& rng) {
    scratch.clear();
    const auto n = static_cast<VertexId>(instance.size());
    for (VertexId k = 0; k < n; ++k) {
        if (!visited[k] && k != current && instance.has_edge(current, k)) {
            scratch.push_back(k);
        }
    }
    if (scratch.empty()) {
        return instance.goal();
    }
    return scratch[rng.index(scratch.size())];
}

/**
 * Rollout into caller-owned buffers. Marks path vertices in `visited` and
 * returns the realized cost of the whole path, final edge to the goal included.
 */
inline double rollout_into(const ProblemInstance& instance, const GreedyOrder& order, VertexId start,
                           double residual, const PlannerConfig& cfg, std::vector<char>& visited,
                           std::vector<VertexId>& path, std::vector<VertexId>& scratch, Rng& rng) {
    const VertexId goal = instance.goal();
    path.clear();
    path.push_back(start);
    visited[start] = 1;
    if (start == goal) {
        return 0.0;
    }
    const std::size_t rejection_cap = 3 * instance.size();
    std::size_t rejections = 0;
    bool forced_greedy = false;
    double cost = 0.0;
    VertexId current = start;
    while (true) {
        const bool random_branch = !forced_greedy && rng.uniform01() < cfg.random_branch_probability;
        const VertexId next = random_branch ? random_child(instance, current, visited, scratch, rng)
                                            : greedy_step(instance, order, current, visited, residual, cfg, rng);
        if (next != goal && passes_screen(instance, current, next, residual, cfg, rng)) {
            const double c = sample_edge_cost(instance, current, next, rng);
            residual -= c;
            cost += c;
            path.push_back(next);
            visited[next] = 1;
            current = next;
            rejections = 0;
            forced_greedy = false;
            continue;
        }
        // A rejected forced-greedy pick ends the rollout at the goal.
        if (next == goal || forced_greedy) {
            cost += sample_edge_cost(instance, current, goal, rng);
            path.push_back(goal);
            return cost;
        }
        if (++rejections >= rejection_cap) {
            forced_greedy = true;
        }
    }
}

inline double distinct_reward(const ProblemInstance& instance, std::span<const VertexId> path) {
    double total = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) {
        if (std::find(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(k), path[k]) ==
            path.begin() + static_cast<std::ptrdiff_t>(k)) {
            total += instance.reward(path[k]);
        }
    }
    return total;
}

} // namespace detail

/**
 * Greedy rollout step: among vertices not in `visited` (and not `current`),
 * drop those whose M-sample estimate of Pr[c(current,k) + c(k,goal) > B']
 * exceeds P_f, and return the survivor with the best reward / expected cost
 * ratio; the goal when nothing survives.
 */
inline VertexId greedy_step(const ProblemInstance& instance, VertexId current, const VertexSet& visited,
                            double residual, const PlannerConfig& cfg, Rng& rng) {
    VertexSet mask = visited;
    mask.insert(current);
    return detail::greedy_step(instance, GreedyOrder(instance), current, mask.mask(), residual, cfg, rng);
}

struct RolloutPath {
    std::vector<VertexId> path;
    double cost = 0.0;  ///< realized cost of the whole path
};

/**
 * Builds a path from `start` to the goal mixing random (probability P_R) and
 * greedy extensions. A non-goal extension is admitted only if the M-sample
 * estimate of Pr[cost(current, new, goal) > B'] is at most P_f; an admitted
 * edge decrements B' by a fresh cost draw. After 3n consecutive rejections
 * the greedy branch is forced; if its pick is rejected too the rollout ends
 * at the goal.
 */
inline RolloutPath rollout(const ProblemInstance& instance, VertexId start, double residual_budget,
                           const PlannerConfig& cfg, const VertexSet& visited, Rng& rng) {
    if (visited.contains(start)) {
        throw ParameterError("rollout start vertex is already visited");
    }
    std::vector<char> mask = visited.mask();
    mask.resize(instance.size(), 0);
    RolloutPath out;
    std::vector<VertexId> scratch;
    out.cost = detail::rollout_into(instance, GreedyOrder(instance), start, residual_budget, cfg, mask, out.path,
                                    scratch, rng);
    return out;
}

/// (Q, F) estimated from a batch of rollouts.
struct RolloutEstimate {
    double q = 0.0;
    double f = 0.0;
};

/// Running reduction of rollout outcomes into a RolloutEstimate.
class RolloutTally {
public:
    void add(double reward, double realized_cost, double residual_budget) {
        reward_sum_ += reward;
        failures_ += realized_cost > residual_budget;
        ++count_;
    }

    RolloutEstimate estimate() const {
        if (count_ == 0) {
            throw ParameterError("no rollouts to evaluate");
        }
        const auto s = static_cast<double>(count_);
        return {reward_sum_ / s, static_cast<double>(failures_) / s};
    }

private:
    double reward_sum_ = 0.0;
    std::uint64_t failures_ = 0;
    std::uint64_t count_ = 0;
};

/**
 * Q is the mean distinct-vertex reward of the paths; F is the fraction of
 * paths whose realized cost exceeds their residual budget.
 */
inline RolloutEstimate evaluate_rollouts(const ProblemInstance& instance, std::span<const std::vector<VertexId>> paths,
                                         std::span<const double> budgets, std::span<const double> costs) {
    if (paths.empty()) {
        throw ParameterError("no rollouts to evaluate");
    }
    if (paths.size() != budgets.size() || paths.size() != costs.size()) {
        throw ParameterError("rollout paths, budgets and costs differ in length");
    }
    RolloutTally tally;
    for (std::size_t s = 0; s < paths.size(); ++s) {
        tally.add(detail::distinct_reward(instance, paths[s]), costs[s], budgets[s]);
    }
    return tally.estimate();
}

/**
 * Replaces `stored` with the candidate continuation when it is better:
 * a feasible entry only moves to a feasible candidate with larger Q, an
 * infeasible entry moves to any candidate with lower F. Returns whether
 * anything changed.
 */
inline bool improve_stats(ChildStats& stored, double q, double f, double failure_bound) {
    if (is_feasible(stored.f, failure_bound)) {
        if (is_feasible(f, failure_bound) && stored.q < q) {
            stored.q = q;
            stored.f = f;
            return true;
        }
        return false;
    }
    if (stored.f > f) {
        stored.f = f;
        stored.q = q;
        return true;
    }
    return false;
}

/**
 * Propagates the leaf's stored (Q, F) towards the root. At each level the
 * grandparent's entry for the parent is offered the parent's entry for the
 * child plus the parent vertex's reward. No-op for the root or its children.
 */
inline void backup(SearchTree& tree, const ProblemInstance& instance, SearchTree::NodeId leaf,
                   double failure_bound) {
    SearchTree::NodeId child = leaf;
    SearchTree::NodeId mid = tree.parent(child);
    if (mid == SearchTree::kNone) {
        return;
    }
    while (tree.parent(mid) != SearchTree::kNone) {
        const ChildStats below = tree.stats_in_parent(child);
        improve_stats(tree.stats_in_parent(mid), below.q + instance.reward(tree.vertex(mid)), below.f,
                      failure_bound);
        child = mid;
        mid = tree.parent(mid);
    }
}

/// N += 1 on every (parent, child) pair from the root down to `leaf`.
inline void backup_visit_counts(SearchTree& tree, SearchTree::NodeId leaf) {
    for (SearchTree::NodeId cur = leaf; tree.parent(cur) != SearchTree::kNone; cur = tree.parent(cur)) {
        ++tree.stats_in_parent(cur).visits;
    }
}

/// Feasible root child with the largest Q (lowest id on ties); the goal if none.
inline VertexId action_selection(const SearchTree& tree, double failure_bound, VertexId goal) {
    const SearchTree::Child* best = nullptr;
    for (const auto& c : tree.node(tree.root()).children) {
        if (!is_feasible(c.stats.f, failure_bound)) {
            continue;
        }
        if (best == nullptr || c.stats.q > best->stats.q || (c.stats.q == best->stats.q && c.vertex < best->vertex)) {
            best = &c;
        }
    }
    return best == nullptr ? goal : best->vertex;
}

struct PlanResult {
    VertexId action;
    SearchTree tree;
};

/**
 * One planning call: K iterations of descend / S rollouts / insert-or-update /
 * backup, then action selection at the root. Each rollout draws its own
 * root-to-leaf traversal time t and starts with residual budget B - t.
 */
inline PlanResult plan(const ProblemInstance& instance, VertexId current, double budget, const VertexSet& visited,
                       const PlannerConfig& cfg, Rng& rng) {
    cfg.validate();
    if (current == instance.goal()) {
        throw ParameterError("planning from the goal vertex");
    }
    const GreedyOrder order(instance);
    SearchTree tree(current);
    std::vector<char> base_mask;
    std::vector<char> mask;
    std::vector<VertexId> path;
    std::vector<VertexId> scratch;

    for (std::size_t k = 0; k < cfg.iterations; ++k) {
        Descent d = tree_policy_descend(tree, instance, visited, cfg.exploration);
        base_mask = d.excluded.mask();
        base_mask.resize(instance.size(), 0);
        // The rollout marks its own start.
        base_mask[d.child] = 0;

        RolloutTally tally;
        for (std::size_t s = 0; s < cfg.rollouts; ++s) {
            double t = 0.0;
            for (std::size_t e = 0; e + 1 < d.path.size(); ++e) {
                t += sample_edge_cost(instance, d.path[e], d.path[e + 1], rng);
            }
            const double residual = budget - t;
            mask = base_mask;
            const double cost =
                detail::rollout_into(instance, order, d.child, residual, cfg, mask, path, scratch, rng);
            double reward = 0.0;
            for (VertexId v : path) {
                reward += instance.reward(v);
            }
            tally.add(reward, cost, residual);
        }
        const RolloutEstimate est = tally.estimate();

        SearchTree::NodeId leaf = d.existing;
        if (leaf == SearchTree::kNone) {
            leaf = tree.add_child(d.parent, d.child, {0, est.q, est.f});
        } else {
            improve_stats(tree.stats_in_parent(leaf), est.q, est.f, cfg.failure_bound);
        }
        backup(tree, instance, leaf, cfg.failure_bound);
        backup_visit_counts(tree, leaf);
    }
    const VertexId action = action_selection(tree, cfg.failure_bound, instance.goal());
    return {action, std::move(tree)};
}

/// Next vertex to move to from `current` with remaining budget `budget`.
inline VertexId mcts_sopcc(const ProblemInstance& instance, VertexId current, double budget,
                           const VertexSet& visited, const PlannerConfig& cfg, Rng& rng) {
    return plan(instance, current, budget, visited, cfg, rng).action;
}

} // namespace sopcc
