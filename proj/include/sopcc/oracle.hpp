#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sopcc/error.hpp"
#include "sopcc/instance.hpp"
#include "sopcc/rng.hpp"
#include "sopcc/stochastic.hpp"

namespace sopcc {

inline constexpr std::size_t kDefaultEnumerationCap = 10;

/// Number of simple start-to-goal paths in a complete graph on n vertices.
inline std::uint64_t simple_path_count(std::size_t n) {
    if (n < 2) {
        return 0;
    }
    const std::uint64_t m = n - 2;
    std::uint64_t total = 0;
    std::uint64_t term = 1;  // m! / (m-k)!
    for (std::uint64_t k = 0; k <= m; ++k) {
        total += term;
        term *= m - k;
    }
    return total;
}

namespace detail {

template <typename Fn>
void extend_paths(const ProblemInstance& instance, std::vector<VertexId>& path, std::vector<char>& used, Fn& visit) {
    const VertexId goal = instance.goal();
    const VertexId last = path.back();
    if (instance.has_edge(last, goal)) {
        path.push_back(goal);
        visit(std::span<const VertexId>(path));
        path.pop_back();
    }
    const auto n = static_cast<VertexId>(instance.size());
    for (VertexId v = 0; v < n; ++v) {
        if (used[v] || v == goal || !instance.has_edge(last, v)) {
            continue;
        }
        used[v] = 1;
        path.push_back(v);
        extend_paths(instance, path, used, visit);
        path.pop_back();
        used[v] = 0;
    }
}

inline void check_enumerable(const ProblemInstance& instance, std::size_t cap) {
    if (instance.size() > cap) {
        throw SizeCapError("instance has " + std::to_string(instance.size()) +
                           " vertices, enumeration cap is " + std::to_string(cap));
    }
    if (!instance.is_complete()) {
        throw ParameterError("path enumeration needs a complete instance");
    }
}

} // namespace detail

/**
 * Streams every simple path start ... goal to `visit` as a span, each
 * exactly once: the direct path first, then depth-first by vertex id.
 */
template <typename Fn>
void enumerate_paths(const ProblemInstance& instance, Fn&& visit, std::size_t cap = kDefaultEnumerationCap) {
    detail::check_enumerable(instance, cap);
    std::vector<char> used(instance.size(), 0);
    std::vector<VertexId> path{instance.start()};
    used[instance.start()] = 1;
    detail::extend_paths(instance, path, used, visit);
}

struct PathEvaluation {
    std::vector<VertexId> path;
    double expected_reward = 0.0;
    ExceedanceEstimate exceedance;
};

/**
 * Exact best fixed path by exhaustion: every enumerated path's exceedance
 * is estimated with `n_eval` samples, and the maximum-reward path with
 * p_hat <= P_f wins (ties: lower p_hat, then lexicographically smaller).
 * Paths that cannot beat the incumbent's reward are not sampled.
 *
 * P_f = 0 admits nothing: shifted-exponential costs have unbounded
 * support, so every path exceeds any budget with positive probability.
 */
inline std::optional<PathEvaluation> oracle_best_feasible(const ProblemInstance& instance, double budget,
                                                          double failure_bound, std::uint64_t n_eval, Rng& rng,
                                                          std::size_t cap = kDefaultEnumerationCap) {
    detail::check_enumerable(instance, cap);
    if (n_eval < 1000) {
        throw ParameterError("oracle needs at least 1000 samples per path");
    }
    if (!(failure_bound >= 0.0 && failure_bound < 1.0)) {
        throw ParameterError("P_f must lie in [0, 1)");
    }
    if (failure_bound <= 0.0) {
        return std::nullopt;
    }
    std::optional<PathEvaluation> best;
    std::vector<VertexId> order;
    enumerate_paths(
        instance,
        [&](std::span<const VertexId> path) {
            // Summed in id order so that permutations of one vertex set tie exactly.
            order.assign(path.begin(), path.end());
            std::sort(order.begin(), order.end());
            double reward = 0.0;
            for (VertexId v : order) {
                reward += instance.reward(v);
            }
            if (best && reward < best->expected_reward) {
                return;
            }
            const auto est = estimate_exceedance(instance, path, budget, n_eval, rng);
            if (est.p_hat > failure_bound) {
                return;
            }
            const bool better = !best || reward > best->expected_reward ||
                                (reward == best->expected_reward &&
                                 (est.p_hat < best->exceedance.p_hat ||
                                  (est.p_hat == best->exceedance.p_hat &&
                                   std::lexicographical_compare(path.begin(), path.end(), best->path.begin(),
                                                                best->path.end()))));
            if (better) {
                best = PathEvaluation{{path.begin(), path.end()}, reward, est};
            }
        },
        cap);
    return best;
}

/// Empirical frequency against a theoretical bound.
struct BoundCheck {
    double empirical = 0.0;
    double std_error = 0.0;  ///< binomial standard error of `empirical`
    double bound = 0.0;
    std::uint64_t replications = 0;

    // Concentration check: true failure probability, threshold, samples.
    double f = 0.0;
    double failure_bound = 0.0;
    std::uint64_t n = 0;
    double delta = 0.0;

    // Selection check: expected returns, sample counts, gap, variance of z.
    double q1 = 0.0;
    double q2 = 0.0;
    std::uint64_t n1 = 0;
    std::uint64_t n2 = 0;
    double gap = 0.0;
    double sigma_z2 = 0.0;
};

/**
 * Bound on Pr[F > P_f] when F averages n Bernoulli(f) draws and
 * delta = P_f - f > 0:
 *   sqrt(f(1-f) / (2 pi n delta^2)) * exp(-n delta^2 / (2 f(1-f))).
 */
inline double concentration_bound(double f, double failure_bound, std::uint64_t n) {
    const double delta = failure_bound - f;
    const double var = f * (1.0 - f);
    const double nd2 = static_cast<double>(n) * delta * delta;
    return std::sqrt(var / (2.0 * std::numbers::pi * nd2)) * std::exp(-nd2 / (2.0 * var));
}

/// Frequency over replications that the mean of n Bernoulli(f) draws exceeds P_f.
inline BoundCheck check_concentration_bound(double f, double failure_bound, std::uint64_t n,
                                            std::uint64_t replications, Rng& rng) {
    if (!(f > 0.0 && f < failure_bound && failure_bound < 1.0)) {
        throw ParameterError("need 0 < f < P_f < 1 (delta must be positive)");
    }
    if (n < 1 || replications < 1) {
        throw ParameterError("sample and replication counts must be positive");
    }
    std::uint64_t hits = 0;
    for (std::uint64_t r = 0; r < replications; ++r) {
        std::uint64_t ones = 0;
        for (std::uint64_t k = 0; k < n; ++k) {
            ones += rng.bernoulli(f);
        }
        hits += static_cast<double>(ones) / static_cast<double>(n) > failure_bound;
    }
    BoundCheck out;
    out.replications = replications;
    out.empirical = static_cast<double>(hits) / static_cast<double>(replications);
    out.std_error = std::sqrt(out.empirical * (1.0 - out.empirical) / static_cast<double>(replications));
    out.bound = concentration_bound(f, failure_bound, n);
    out.f = f;
    out.failure_bound = failure_bound;
    out.n = n;
    out.delta = failure_bound - f;
    return out;
}

/// Gaussian return distribution for the selection-error validator.
struct ReturnSampler {
    double mean = 0.0;
    double stddev = 1.0;

    double draw(Rng& rng) const { return mean + stddev * rng.normal(); }
    double variance() const { return stddev * stddev; }
};

/// sigma_z^2 / (min(n1, n2) * G) with G = q1 - q2.
inline double selection_error_bound(double sigma_z2, std::uint64_t n1, std::uint64_t n2, double gap) {
    return sigma_z2 / (static_cast<double>(std::min(n1, n2)) * gap);
}

/**
 * Frequency over replications that the mean of n2 draws of the second
 * return beats the mean of n1 draws of the first. sigma_z^2 is the variance
 * of one draw of the difference, i.e. the sum of both variances.
 */
inline BoundCheck check_selection_error_bound(const ReturnSampler& first, const ReturnSampler& second,
                                              std::uint64_t n1, std::uint64_t n2, std::uint64_t replications,
                                              Rng& rng) {
    if (!(first.mean > second.mean)) {
        throw ParameterError("need q1 > q2");
    }
    if (n1 < 1 || n2 < 1 || replications < 1) {
        throw ParameterError("sample and replication counts must be positive");
    }
    std::uint64_t hits = 0;
    for (std::uint64_t r = 0; r < replications; ++r) {
        double s1 = 0.0, s2 = 0.0;
        for (std::uint64_t k = 0; k < n1; ++k) {
            s1 += first.draw(rng);
        }
        for (std::uint64_t k = 0; k < n2; ++k) {
            s2 += second.draw(rng);
        }
        hits += s2 / static_cast<double>(n2) > s1 / static_cast<double>(n1);
    }
    BoundCheck out;
    out.replications = replications;
    out.empirical = static_cast<double>(hits) / static_cast<double>(replications);
    out.std_error = std::sqrt(out.empirical * (1.0 - out.empirical) / static_cast<double>(replications));
    out.q1 = first.mean;
    out.q2 = second.mean;
    out.n1 = n1;
    out.n2 = n2;
    out.gap = first.mean - second.mean;
    out.sigma_z2 = first.variance() + second.variance();
    out.bound = selection_error_bound(out.sigma_z2, n1, n2, out.gap);
    return out;
}

} // namespace sopcc
