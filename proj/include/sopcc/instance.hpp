#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sopcc/error.hpp"
#include "sopcc/rng.hpp"

namespace sopcc {

using VertexId = std::uint32_t;

struct Vertex {
    VertexId id = 0;
    double x = 0.0;
    double y = 0.0;
    double reward = 0.0;

    bool operator==(const Vertex&) const = default;
};

/// Directed edge with a given expected traversal cost.
struct ExplicitEdge {
    VertexId from = 0;
    VertexId to = 0;
    double mean = 0.0;

    bool operator==(const ExplicitEdge&) const = default;
};

enum class CostModelKind { euclidean_exponential, explicit_edges };

/**
 * Stochastic edge cost: a segment with expected cost d costs
 * kappa*d + Exp(mean (1-kappa)*d), so its expectation is exactly d.
 *
 * For `euclidean_exponential` d is the Euclidean distance between the
 * endpoints and the graph is complete. For `explicit_edges` d is the
 * listed mean of each directed edge; missing pairs are filled in by
 * `complete_graph_closure`.
 */
struct EdgeCostModel {
    CostModelKind kind = CostModelKind::euclidean_exponential;
    double kappa = 0.5;
    std::vector<ExplicitEdge> edges;

    static EdgeCostModel euclidean(double kappa) {
        return {CostModelKind::euclidean_exponential, kappa, {}};
    }
    static EdgeCostModel explicit_edges(std::vector<ExplicitEdge> edges, double kappa = 0.5) {
        return {CostModelKind::explicit_edges, kappa, std::move(edges)};
    }

    bool operator==(const EdgeCostModel&) const = default;
};

/// Set of vertex ids over a fixed universe 0..n-1.
class VertexSet {
public:
    VertexSet() = default;
    explicit VertexSet(std::size_t universe) : bits_(universe, 0) {}
    VertexSet(std::size_t universe, std::initializer_list<VertexId> members) : bits_(universe, 0) {
        for (auto v : members) {
            insert(v);
        }
    }

    void insert(VertexId v) {
        count_ += !bits_[v];
        bits_[v] = 1;
    }
    bool contains(VertexId v) const { return v < bits_.size() && bits_[v]; }
    std::size_t size() const { return count_; }
    std::size_t universe() const { return bits_.size(); }
    const std::vector<char>& mask() const { return bits_; }

    bool operator==(const VertexSet&) const = default;

private:
    std::vector<char> bits_;
    std::size_t count_ = 0;
};

class ProblemInstance;
ProblemInstance complete_graph_closure(const ProblemInstance& instance);

/**
 * Immutable SOPCC instance: vertices with rewards, a start and a goal, and
 * the stochastic cost model. Construction never throws on bad data so that
 * `validate` can report it; algorithms assume a valid instance.
 *
 * An instance is complete when every ordered pair (i, j) the planner can
 * use has an expected cost. Pairs entering the start or leaving the goal
 * are never traversed and are not required.
 */
class ProblemInstance {
public:
    ProblemInstance() = default;

    ProblemInstance(std::string name, std::vector<Vertex> vertices, VertexId start, VertexId goal,
                    EdgeCostModel model)
        : name_(std::move(name)),
          vertices_(std::move(vertices)),
          start_(start),
          goal_(goal),
          model_(std::move(model)) {
        const std::size_t n = vertices_.size();
        mean_.assign(n * n, kUndefined);
        if (model_.kind == CostModelKind::euclidean_exponential) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (i != j) {
                        mean_[i * n + j] = std::hypot(vertices_[i].x - vertices_[j].x,
                                                      vertices_[i].y - vertices_[j].y);
                    }
                }
            }
        } else {
            route_.assign(n * n, {});
            for (const auto& e : model_.edges) {
                if (e.from < n && e.to < n && e.from != e.to) {
                    mean_[e.from * n + e.to] = e.mean;
                }
            }
        }
        complete_ = all_required_pairs_defined();
    }

    const std::string& name() const { return name_; }
    const std::vector<Vertex>& vertices() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }
    VertexId start() const { return start_; }
    VertexId goal() const { return goal_; }
    double reward(VertexId v) const { return vertices_[v].reward; }
    const EdgeCostModel& cost_model() const { return model_; }
    double kappa() const { return model_.kappa; }
    bool is_complete() const { return complete_; }

    /// True when the pair must carry a cost in a complete instance.
    bool is_required_pair(VertexId i, VertexId j) const {
        return i != j && i != goal_ && j != start_;
    }

    bool has_edge(VertexId i, VertexId j) const {
        return i < size() && j < size() && i != j && !std::isnan(mean_[index(i, j)]);
    }

    double expected_cost(VertexId i, VertexId j) const {
        if (i == j) {
            throw InvalidEdgeError("self edge " + std::to_string(i));
        }
        if (!has_edge(i, j)) {
            throw InvalidEdgeError("no edge " + std::to_string(i) + " -> " + std::to_string(j));
        }
        return mean_[index(i, j)];
    }

    /// Unchecked variant for hot loops; the pair must be a defined edge.
    double mean_unchecked(VertexId i, VertexId j) const { return mean_[index(i, j)]; }

    /// Vertex sequence (i ... j) of a closure-added edge; empty for direct edges.
    std::span<const VertexId> route(VertexId i, VertexId j) const {
        if (route_.empty()) {
            return {};
        }
        return route_[index(i, j)];
    }

    bool operator==(const ProblemInstance& other) const {
        auto same_means = [&] {
            return std::equal(mean_.begin(), mean_.end(), other.mean_.begin(), other.mean_.end(),
                              [](double a, double b) {
                                  return a == b || (std::isnan(a) && std::isnan(b));
                              });
        };
        return name_ == other.name_ && vertices_ == other.vertices_ && start_ == other.start_ &&
               goal_ == other.goal_ && model_ == other.model_ && complete_ == other.complete_ &&
               route_ == other.route_ && same_means();
    }

private:
    friend ProblemInstance complete_graph_closure(const ProblemInstance& instance);

    static constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

    std::size_t index(VertexId i, VertexId j) const { return std::size_t{i} * size() + j; }

    bool all_required_pairs_defined() const {
        const auto n = static_cast<VertexId>(size());
        for (VertexId i = 0; i < n; ++i) {
            for (VertexId j = 0; j < n; ++j) {
                if (is_required_pair(i, j) && std::isnan(mean_[index(i, j)])) {
                    return false;
                }
            }
        }
        return true;
    }

    std::string name_;
    std::vector<Vertex> vertices_;
    VertexId start_ = 0;
    VertexId goal_ = 0;
    EdgeCostModel model_;
    std::vector<double> mean_;
    std::vector<std::vector<VertexId>> route_;
    bool complete_ = false;
};

/**
 * Random instance in the unit square. Vertices are drawn in order, each as
 * (x, y, reward); the first vertex is the start and the last the goal.
 */
inline ProblemInstance generate_random_instance(std::size_t n, std::uint64_t seed,
                                                double reward_low, double reward_high,
                                                double kappa) {
    if (n < 3) {
        throw InvalidInstanceError("random instance needs at least 3 vertices, got " +
                                   std::to_string(n));
    }
    if (!(kappa > 0.0 && kappa < 1.0)) {
        throw ParameterError("kappa must lie in (0, 1), got " + std::to_string(kappa));
    }
    if (!(reward_low <= reward_high) || reward_low < 0.0) {
        throw ParameterError("reward range must satisfy 0 <= low <= high");
    }
    Rng rng(seed);
    std::vector<Vertex> vertices(n);
    for (std::size_t k = 0; k < n; ++k) {
        vertices[k].id = static_cast<VertexId>(k);
        vertices[k].x = rng.uniform01();
        vertices[k].y = rng.uniform01();
        vertices[k].reward = rng.uniform(reward_low, reward_high);
    }
    return ProblemInstance("random-n" + std::to_string(n) + "-s" + std::to_string(seed),
                           std::move(vertices), 0, static_cast<VertexId>(n - 1),
                           EdgeCostModel::euclidean(kappa));
}

/**
 * Fills every missing required pair with the shortest path over the
 * explicit edges. Explicit edges are kept as given; added edges remember
 * their hop sequence so sampling draws each segment independently.
 */
inline ProblemInstance complete_graph_closure(const ProblemInstance& instance) {
    if (instance.cost_model().kind == CostModelKind::euclidean_exponential ||
        instance.is_complete()) {
        return instance;
    }
    const std::size_t n = instance.size();
    const auto inf = std::numeric_limits<double>::infinity();
    ProblemInstance closed = instance;

    // Dijkstra from every source over the direct explicit edges.
    std::vector<double> dist(n);
    std::vector<VertexId> pred(n);
    std::vector<char> done(n);
    for (VertexId src = 0; src < n; ++src) {
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(done.begin(), done.end(), 0);
        dist[src] = 0.0;
        pred[src] = src;
        for (std::size_t iter = 0; iter < n; ++iter) {
            VertexId u = 0;
            double best = inf;
            for (VertexId v = 0; v < n; ++v) {
                if (!done[v] && dist[v] < best) {
                    best = dist[v];
                    u = v;
                }
            }
            if (best == inf) {
                break;
            }
            done[u] = 1;
            for (VertexId v = 0; v < n; ++v) {
                if (u != v && instance.has_edge(u, v)) {
                    const double cand = dist[u] + instance.mean_unchecked(u, v);
                    if (cand < dist[v]) {
                        dist[v] = cand;
                        pred[v] = u;
                    }
                }
            }
        }
        for (VertexId dst = 0; dst < n; ++dst) {
            if (!instance.is_required_pair(src, dst) || instance.has_edge(src, dst)) {
                continue;
            }
            if (dist[dst] == inf) {
                throw ClosureError("vertex " + std::to_string(dst) + " is unreachable from vertex " +
                                   std::to_string(src));
            }
            std::vector<VertexId> hops;
            for (VertexId v = dst; v != src; v = pred[v]) {
                hops.push_back(v);
            }
            hops.push_back(src);
            std::reverse(hops.begin(), hops.end());
            closed.mean_[closed.index(src, dst)] = dist[dst];
            closed.route_[closed.index(src, dst)] = std::move(hops);
        }
    }
    closed.complete_ = true;
    return closed;
}

struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

inline ValidationReport validate(const ProblemInstance& instance) {
    ValidationReport report;
    auto add = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
    const std::size_t n = instance.size();

    if (n < 2) {
        add("instance needs at least 2 vertices");
    }
    for (std::size_t k = 0; k < n; ++k) {
        const auto& v = instance.vertices()[k];
        if (v.id != k) {
            add("vertex at position " + std::to_string(k) + " has id " + std::to_string(v.id) +
                " (ids must be dense 0..n-1)");
        }
        if (!(v.reward >= 0.0) || !std::isfinite(v.reward)) {
            add("vertex " + std::to_string(k) + " has invalid reward " + std::to_string(v.reward));
        }
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
            add("vertex " + std::to_string(k) + " has non-finite coordinates");
        }
    }
    if (instance.start() >= n) {
        add("start " + std::to_string(instance.start()) + " is not a vertex");
    }
    if (instance.goal() >= n) {
        add("goal " + std::to_string(instance.goal()) + " is not a vertex");
    }
    if (instance.start() == instance.goal()) {
        add("start and goal coincide");
    }

    const auto& model = instance.cost_model();
    if (model.kind == CostModelKind::euclidean_exponential) {
        if (!(model.kappa > 0.0 && model.kappa < 1.0)) {
            add("kappa must lie in (0, 1), got " + std::to_string(model.kappa));
        }
    } else {
        if (!(model.kappa >= 0.0 && model.kappa < 1.0)) {
            add("kappa must lie in [0, 1), got " + std::to_string(model.kappa));
        }
        std::vector<char> seen(n * n, 0);
        for (const auto& e : model.edges) {
            const std::string label = std::to_string(e.from) + " -> " + std::to_string(e.to);
            if (e.from >= n || e.to >= n || e.from == e.to) {
                add("edge " + label + " has invalid endpoints");
                continue;
            }
            if (seen[e.from * n + e.to]++) {
                add("edge " + label + " is listed twice");
            }
            if (!(e.mean > 0.0) || !std::isfinite(e.mean)) {
                add("edge " + label + " has non-positive or non-finite mean");
            }
        }
    }

    // Explicit means were checked above; closure edges are sums of them.
    if (model.kind == CostModelKind::euclidean_exponential) {
        const auto count = static_cast<VertexId>(n);
        for (VertexId i = 0; i < count; ++i) {
            for (VertexId j = 0; j < count; ++j) {
                if (i == j || !instance.has_edge(i, j)) {
                    continue;
                }
                const double c = instance.mean_unchecked(i, j);
                if (!(c > 0.0) || !std::isfinite(c)) {
                    add("expected cost " + std::to_string(i) + " -> " + std::to_string(j) +
                        " is not finite and positive");
                }
            }
        }
    }
    return report;
}

} // namespace sopcc
