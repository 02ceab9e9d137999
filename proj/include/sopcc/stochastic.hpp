#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>

#include "sopcc/error.hpp"
#include "sopcc/instance.hpp"
#include "sopcc/rng.hpp"

namespace sopcc {

/// Sample-average estimate of Pr[cost > budget].
struct ExceedanceEstimate {
    double p_hat = 0.0;
    std::uint64_t exceed_count = 0;
    std::uint64_t n_samples = 0;
};

/**
 * How the planner's feasibility checks draw their M-sample estimate.
 *
 * `sampled` draws M path costs and counts exceedances. `binomial` draws
 * the exceedance count directly from Binomial(M, p) with p the exact tail
 * probability, which has the same distribution as the sampled count; it
 * falls back to `sampled` whenever p has no closed form (closure edges).
 */
enum class SaaMode { sampled, binomial };

namespace detail {

inline double sample_segment(double mean, double kappa, Rng& rng) {
    return kappa * mean + rng.exponential((1.0 - kappa) * mean);
}

/// Pr[kappa*(d1+d2) + Exp(m1) + Exp(m2) > budget], mi = (1-kappa)*di; d2 may be 0.
inline double shifted_exponential_tail(double d1, double d2, double kappa, double budget) {
    const double x = budget - kappa * (d1 + d2);
    if (!(x > 0.0)) {
        return 1.0;
    }
    if (std::isinf(x)) {
        return 0.0;
    }
    const double m1 = (1.0 - kappa) * d1;
    const double m2 = (1.0 - kappa) * d2;
    if (m2 == 0.0) {
        return std::exp(-x / m1);
    }
    if (m1 == 0.0) {
        return std::exp(-x / m2);
    }
    if (std::abs(m1 - m2) <= 1e-7 * std::max(m1, m2)) {
        const double m = 0.5 * (m1 + m2);
        return std::exp(-x / m) * (1.0 + x / m);
    }
    return (m1 * std::exp(-x / m1) - m2 * std::exp(-x / m2)) / (m1 - m2);
}

} // namespace detail

/// Binomial(n, p) variate: inversion for small n*min(p,1-p), counting otherwise.
inline std::uint64_t sample_binomial(Rng& rng, std::uint64_t n, double p) {
    if (!(p > 0.0) || n == 0) {
        return 0;
    }
    if (p >= 1.0) {
        return n;
    }
    if (p > 0.5) {
        return n - sample_binomial(rng, n, 1.0 - p);
    }
    if (static_cast<double>(n) * p > 30.0) {
        std::uint64_t count = 0;
        for (std::uint64_t k = 0; k < n; ++k) {
            count += rng.uniform01() < p;
        }
        return count;
    }
    const double q = 1.0 - p;
    const double s = p / q;
    const double a = static_cast<double>(n + 1) * s;
    double r = std::pow(q, static_cast<double>(n));
    double u = rng.uniform01();
    std::uint64_t x = 0;
    while (u > r) {
        u -= r;
        ++x;
        if (x > n) {
            // Round-off exhausted the mass; extremely rare.
            return n;
        }
        r *= a / static_cast<double>(x) - s;
    }
    return x;
}

/**
 * One draw of the cost of edge (i, j). Direct edges cost
 * kappa*d + Exp(mean (1-kappa)*d); closure edges sum one such draw per
 * explicit segment of their stored route.
 */
inline double sample_edge_cost(const ProblemInstance& instance, VertexId i, VertexId j, Rng& rng) {
    if (i == j) {
        throw InvalidEdgeError("self edge " + std::to_string(i));
    }
    if (!instance.has_edge(i, j)) {
        throw InvalidEdgeError("no edge " + std::to_string(i) + " -> " + std::to_string(j));
    }
    const double kappa = instance.kappa();
    const auto route = instance.route(i, j);
    if (route.empty()) {
        return detail::sample_segment(instance.mean_unchecked(i, j), kappa, rng);
    }
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < route.size(); ++k) {
        total += detail::sample_segment(instance.mean_unchecked(route[k], route[k + 1]), kappa, rng);
    }
    return total;
}

/// Sum of one fresh draw per consecutive edge.
inline double sample_path_cost(const ProblemInstance& instance, std::span<const VertexId> path, Rng& rng) {
    if (path.size() < 2) {
        throw InvalidPathError("path needs at least 2 vertices");
    }
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        total += sample_edge_cost(instance, path[k], path[k + 1], rng);
    }
    return total;
}

/// Fraction of `costs` strictly above `budget`.
inline ExceedanceEstimate exceedance_from_samples(std::span<const double> costs, double budget) {
    if (costs.empty()) {
        throw ParameterError("exceedance needs at least one sample");
    }
    std::uint64_t count = 0;
    for (double c : costs) {
        count += c > budget;
    }
    return {static_cast<double>(count) / static_cast<double>(costs.size()), count, costs.size()};
}

/// SAA estimate of Pr[C(path) > budget] from n independent path-cost draws.
inline ExceedanceEstimate estimate_exceedance(const ProblemInstance& instance, std::span<const VertexId> path,
                                              double budget, std::uint64_t n_samples, Rng& rng) {
    if (n_samples == 0) {
        throw ParameterError("n_samples must be positive");
    }
    if (path.size() < 2) {
        throw InvalidPathError("path needs at least 2 vertices");
    }
    std::uint64_t count = 0;
    for (std::uint64_t s = 0; s < n_samples; ++s) {
        count += sample_path_cost(instance, path, rng) > budget;
    }
    return {static_cast<double>(count) / static_cast<double>(n_samples), count, n_samples};
}

/**
 * Exact Pr[C(path) > budget] for paths of one or two direct edges, where
 * the cost is a shifted (hypo)exponential. Empty for longer paths or
 * closure edges.
 */
inline std::optional<double> exceedance_probability(const ProblemInstance& instance,
                                                    std::span<const VertexId> path, double budget) {
    if (path.size() < 2) {
        throw InvalidPathError("path needs at least 2 vertices");
    }
    if (path.size() > 3) {
        return std::nullopt;
    }
    double legs[2] = {0.0, 0.0};
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        legs[k] = instance.expected_cost(path[k], path[k + 1]);
        if (!instance.route(path[k], path[k + 1]).empty()) {
            return std::nullopt;
        }
    }
    return detail::shifted_exponential_tail(legs[0], legs[1], instance.kappa(), budget);
}

/**
 * M-sample exceedance count for the path (from, via, goal), or (from, goal)
 * when via == goal. Used by the planner's feasibility screening.
 */
inline std::uint64_t count_two_leg_exceedances(const ProblemInstance& instance, VertexId from, VertexId via,
                                               double budget, std::uint64_t m, Rng& rng, SaaMode mode) {
    const VertexId goal = instance.goal();
    const bool single = via == goal;
    if (mode == SaaMode::binomial && instance.route(from, via).empty() &&
        (single || instance.route(via, goal).empty())) {
        const double p = detail::shifted_exponential_tail(instance.mean_unchecked(from, via),
                                                          single ? 0.0 : instance.mean_unchecked(via, goal),
                                                          instance.kappa(), budget);
        return sample_binomial(rng, m, p);
    }
    std::uint64_t count = 0;
    for (std::uint64_t s = 0; s < m; ++s) {
        double c = sample_edge_cost(instance, from, via, rng);
        if (!single) {
            c += sample_edge_cost(instance, via, goal, rng);
        }
        count += c > budget;
    }
    return count;
}

} // namespace sopcc
