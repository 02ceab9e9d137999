#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "sopcc/error.hpp"
#include "sopcc/instance.hpp"
#include "sopcc/mcts.hpp"
#include "sopcc/rng.hpp"
#include "sopcc/stochastic.hpp"

namespace sopcc {

enum class Outcome { success, failure };

struct EpisodeResult {
    std::vector<VertexId> path;
    std::vector<double> realized_costs;
    double collected_reward = 0.0;
    Outcome outcome = Outcome::failure;
    double initial_budget = 0.0;
    double final_budget = 0.0;
    double wall_time = 0.0;      ///< seconds, whole plan/execute loop
    double planning_time = 0.0;  ///< seconds spent inside the planner
    std::size_t planning_calls = 0;
    std::uint64_t seed = 0;

    bool failed() const { return outcome == Outcome::failure; }
};

/**
 * Alternates planning and execution from the start vertex until the goal is
 * reached or the budget is spent. Realized costs are drawn from
 * `environment`, which defaults to the planning instance itself.
 *
 * The episode succeeds iff it ends at the goal with budget > 0; a budget of
 * exactly 0 is a failure.
 */
inline EpisodeResult run_episode(const ProblemInstance& instance, const ProblemInstance& environment, double budget,
                                 const PlannerConfig& cfg, Rng& rng) {
    if (!(budget > 0.0)) {
        throw ParameterError("episode budget must be positive");
    }
    if (environment.size() != instance.size() || environment.goal() != instance.goal() ||
        environment.start() != instance.start()) {
        throw ParameterError("environment does not match the planning instance");
    }
    cfg.validate();
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    EpisodeResult result;
    result.initial_budget = budget;
    VertexId v = instance.start();
    VertexSet visited(instance.size());
    visited.insert(v);
    result.path.push_back(v);

    while (budget > 0.0 && v != instance.goal()) {
        const auto p0 = clock::now();
        const VertexId next = mcts_sopcc(instance, v, budget, visited, cfg, rng);
        result.planning_time += std::chrono::duration<double>(clock::now() - p0).count();
        ++result.planning_calls;

        const double cost = sample_edge_cost(environment, v, next, rng);
        budget -= cost;
        result.realized_costs.push_back(cost);
        result.path.push_back(next);
        visited.insert(next);
        v = next;
    }
    result.final_budget = budget;
    result.outcome = (v == instance.goal() && budget > 0.0) ? Outcome::success : Outcome::failure;
    result.collected_reward = detail::distinct_reward(instance, result.path);
    result.wall_time = std::chrono::duration<double>(clock::now() - t0).count();
    return result;
}

inline EpisodeResult run_episode(const ProblemInstance& instance, double budget, const PlannerConfig& cfg, Rng& rng) {
    return run_episode(instance, instance, budget, cfg, rng);
}

/// Invariant violations of an episode record; empty when consistent.
inline std::vector<std::string> check_episode(const ProblemInstance& instance, const EpisodeResult& e) {
    std::vector<std::string> out;
    if (e.path.empty() || e.path.front() != instance.start()) {
        out.emplace_back("path does not begin at the start vertex");
    }
    if (e.realized_costs.size() + 1 != e.path.size()) {
        out.emplace_back("realized cost count does not match path length");
    }
    VertexSet seen(instance.size());
    for (VertexId v : e.path) {
        if (seen.contains(v)) {
            out.emplace_back("vertex " + std::to_string(v) + " visited twice");
        }
        seen.insert(v);
    }
    double b = e.initial_budget;
    for (double c : e.realized_costs) {
        b -= c;
    }
    if (b != e.final_budget) {
        out.emplace_back("final budget differs from budget minus realized costs");
    }
    const bool at_goal = !e.path.empty() && e.path.back() == instance.goal();
    if ((e.outcome == Outcome::success) != (at_goal && e.final_budget > 0.0)) {
        out.emplace_back("outcome inconsistent with final vertex and budget");
    }
    if (std::abs(e.collected_reward - detail::distinct_reward(instance, e.path)) > 1e-12) {
        out.emplace_back("collected reward differs from distinct-vertex reward sum");
    }
    return out;
}

struct BatchResult {
    std::vector<EpisodeResult> episodes;  ///< ordered by seed
    double mean_reward = 0.0;
    double stddev_reward = 0.0;  ///< sample standard deviation, 0 for one trial
    std::size_t failures = 0;
    double failure_rate = 0.0;
    double mean_wall_time = 0.0;
    double stddev_wall_time = 0.0;
    double mean_planning_time_per_call = 0.0;
    double mean_final_budget = 0.0;
    double mean_planning_calls = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_and_stddev(const std::vector<double>& xs) {
    if (xs.empty()) {
        return {0.0, 0.0};
    }
    double mean = 0.0;
    for (double x : xs) {
        mean += x;
    }
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

/// Runs fn(k) for k in [0, count) on up to `threads` workers (0 = hardware).
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t k = 0; k < count; ++k) {
            fn(k);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
        workers.emplace_back([&] {
            for (std::size_t k = next++; k < count; k = next++) {
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    workers.clear();
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace detail

inline BatchResult summarize(std::vector<EpisodeResult> episodes) {
    BatchResult b;
    b.episodes = std::move(episodes);
    std::vector<double> rewards, times;
    double per_call = 0.0, final_budget = 0.0, calls = 0.0;
    for (const auto& e : b.episodes) {
        rewards.push_back(e.collected_reward);
        times.push_back(e.wall_time);
        b.failures += e.failed();
        per_call += e.planning_calls ? e.planning_time / static_cast<double>(e.planning_calls) : 0.0;
        final_budget += e.final_budget;
        calls += static_cast<double>(e.planning_calls);
    }
    const auto n = static_cast<double>(b.episodes.size());
    std::tie(b.mean_reward, b.stddev_reward) = detail::mean_and_stddev(rewards);
    std::tie(b.mean_wall_time, b.stddev_wall_time) = detail::mean_and_stddev(times);
    if (n > 0) {
        b.failure_rate = static_cast<double>(b.failures) / n;
        b.mean_planning_time_per_call = per_call / n;
        b.mean_final_budget = final_budget / n;
        b.mean_planning_calls = calls / n;
    }
    return b;
}

/**
 * `trials` independent episodes, episode k seeded with base_seed + k.
 * Episodes may run on several threads; results do not depend on it.
 */
inline BatchResult run_batch(const ProblemInstance& instance, double budget, const PlannerConfig& cfg,
                             std::size_t trials, std::uint64_t base_seed, std::size_t threads = 1) {
    if (trials < 1) {
        throw ParameterError("trials must be at least 1");
    }
    cfg.validate();
    std::vector<EpisodeResult> episodes(trials);
    detail::parallel_for(trials, threads, [&](std::size_t k) {
        Rng rng(base_seed + k);
        episodes[k] = run_episode(instance, budget, cfg, rng);
        episodes[k].seed = base_seed + k;
    });
    return summarize(std::move(episodes));
}

} // namespace sopcc
