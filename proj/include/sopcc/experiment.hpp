#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sopcc/error.hpp"
#include "sopcc/executor.hpp"
#include "sopcc/instance.hpp"
#include "sopcc/instance_io.hpp"
#include "sopcc/mcts.hpp"
#include "sopcc/oracle.hpp"

namespace sopcc {

/// Input file could not be opened or read.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct InstanceFile {
    std::string path;
    bool operator==(const InstanceFile&) const = default;
};

struct TsplibSource {
    std::string path;
    std::uint64_t reward_seed = 0;
    double reward_low = 0.0;
    double reward_high = 1.0;
    double kappa = 0.5;
    bool operator==(const TsplibSource&) const = default;
};

struct RandomSource {
    std::size_t n = 20;
    std::uint64_t seed = 0;
    double reward_low = 0.0;
    double reward_high = 1.0;
    double kappa = 0.5;
    bool operator==(const RandomSource&) const = default;
};

using InstanceSource = std::variant<InstanceFile, TsplibSource, RandomSource>;

enum class SweepAxis { none, K, S, PR, Pf };

struct CompareSettings {
    std::vector<double> budgets;         ///< absolute budgets
    std::vector<double> budget_factors;  ///< budgets as multiples of the direct start-goal expected cost
    std::vector<double> pf_values;       ///< empty: the planner's P_f
    std::uint64_t n_eval = 10000;
    bool operator==(const CompareSettings&) const = default;
};

struct ExperimentConfig {
    InstanceSource instance = RandomSource{};
    double budget = 2.0;
    PlannerConfig planner;
    std::size_t trials = 50;
    std::uint64_t base_seed = 0;
    SweepAxis sweep_axis = SweepAxis::none;
    std::vector<double> sweep_values;
    std::string output;
    bool record_wall_time = false;  ///< planning seconds per call; off keeps the CSV byte-identical across reruns
    CompareSettings compare;

    bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline const char* axis_name(SweepAxis a) {
    switch (a) {
    case SweepAxis::K: return "K";
    case SweepAxis::S: return "S";
    case SweepAxis::PR: return "PR";
    case SweepAxis::Pf: return "Pf";
    case SweepAxis::none: break;
    }
    return "none";
}

inline SweepAxis parse_axis(const std::string& s) {
    for (auto a : {SweepAxis::none, SweepAxis::K, SweepAxis::S, SweepAxis::PR, SweepAxis::Pf}) {
        if (s == axis_name(a)) {
            return a;
        }
    }
    throw ParseError("unknown sweep axis '" + s + "'", 0);
}

inline std::size_t as_count(double v, const char* what) {
    if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
        throw ParameterError(std::string(what) + " sweep values must be positive integers");
    }
    return static_cast<std::size_t>(v);
}

/// Shortest round-trip decimal form of a double.
inline std::string fmt(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline std::string join_path(std::span<const VertexId> path) {
    std::string out;
    for (std::size_t k = 0; k < path.size(); ++k) {
        if (k) {
            out += '-';
        }
        out += std::to_string(path[k]);
    }
    return out;
}

inline double seconds_per_call(const EpisodeResult& e) {
    return e.planning_calls ? e.planning_time / static_cast<double>(e.planning_calls) : 0.0;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace detail

inline nlohmann::json to_json(const PlannerConfig& p) {
    return {{"K", p.iterations},
            {"S", p.rollouts},
            {"M", p.feasibility_samples},
            {"PR", p.random_branch_probability},
            {"z", p.exploration},
            {"Pf", p.failure_bound},
            {"saa", p.saa_mode == SaaMode::binomial ? "binomial" : "sampled"}};
}

inline PlannerConfig planner_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, {"K", "S", "M", "PR", "z", "Pf", "saa"}, "planner");
    PlannerConfig p;
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) {
            field = detail::required<std::decay_t<decltype(field)>>(j, key, "planner");
        }
    };
    opt("K", p.iterations);
    opt("S", p.rollouts);
    opt("M", p.feasibility_samples);
    opt("PR", p.random_branch_probability);
    opt("z", p.exploration);
    opt("Pf", p.failure_bound);
    if (j.contains("saa")) {
        const auto mode = detail::required<std::string>(j, "saa", "planner");
        if (mode != "binomial" && mode != "sampled") {
            throw ParseError("planner.saa must be 'binomial' or 'sampled'", 0);
        }
        p.saa_mode = mode == "binomial" ? SaaMode::binomial : SaaMode::sampled;
    }
    return p;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json source;
    if (const auto* f = std::get_if<InstanceFile>(&c.instance)) {
        source = {{"file", f->path}};
    } else if (const auto* t = std::get_if<TsplibSource>(&c.instance)) {
        source = {{"tsplib", t->path},
                  {"reward_seed", t->reward_seed},
                  {"reward_low", t->reward_low},
                  {"reward_high", t->reward_high},
                  {"kappa", t->kappa}};
    } else {
        const auto& r = std::get<RandomSource>(c.instance);
        source = {{"random",
                   {{"n", r.n},
                    {"seed", r.seed},
                    {"reward_low", r.reward_low},
                    {"reward_high", r.reward_high},
                    {"kappa", r.kappa}}}};
    }
    return {{"instance", std::move(source)},
            {"budget", c.budget},
            {"planner", to_json(c.planner)},
            {"trials", c.trials},
            {"base_seed", c.base_seed},
            {"sweep", {{"axis", detail::axis_name(c.sweep_axis)}, {"values", c.sweep_values}}},
            {"output", c.output},
            {"record_wall_time", c.record_wall_time},
            {"compare",
             {{"budgets", c.compare.budgets},
              {"budget_factors", c.compare.budget_factors},
              {"pf_values", c.compare.pf_values},
              {"n_eval", c.compare.n_eval}}}};
}

/// Config document to ExperimentConfig; missing fields keep their defaults, unknown ones are rejected.
inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
    using detail::required;
    detail::reject_unknown_keys(
        j, {"instance", "budget", "planner", "trials", "base_seed", "sweep", "output", "record_wall_time", "compare"},
        "config");
    ExperimentConfig c;
    if (j.contains("instance")) {
        const auto& s = j.at("instance");
        if (s.contains("file")) {
            detail::reject_unknown_keys(s, {"file"}, "instance");
            c.instance = InstanceFile{required<std::string>(s, "file", "instance")};
        } else if (s.contains("tsplib")) {
            detail::reject_unknown_keys(s, {"tsplib", "reward_seed", "reward_low", "reward_high", "kappa"},
                                        "instance");
            TsplibSource t;
            t.path = required<std::string>(s, "tsplib", "instance");
            if (s.contains("reward_seed")) t.reward_seed = required<std::uint64_t>(s, "reward_seed", "instance");
            if (s.contains("reward_low")) t.reward_low = required<double>(s, "reward_low", "instance");
            if (s.contains("reward_high")) t.reward_high = required<double>(s, "reward_high", "instance");
            if (s.contains("kappa")) t.kappa = required<double>(s, "kappa", "instance");
            c.instance = t;
        } else if (s.contains("random")) {
            detail::reject_unknown_keys(s, {"random"}, "instance");
            const auto& r = s.at("random");
            detail::reject_unknown_keys(r, {"n", "seed", "reward_low", "reward_high", "kappa"}, "instance.random");
            RandomSource g;
            if (r.contains("n")) g.n = required<std::size_t>(r, "n", "instance.random");
            if (r.contains("seed")) g.seed = required<std::uint64_t>(r, "seed", "instance.random");
            if (r.contains("reward_low")) g.reward_low = required<double>(r, "reward_low", "instance.random");
            if (r.contains("reward_high")) g.reward_high = required<double>(r, "reward_high", "instance.random");
            if (r.contains("kappa")) g.kappa = required<double>(r, "kappa", "instance.random");
            c.instance = g;
        } else {
            throw ParseError("instance needs one of 'file', 'tsplib', 'random'", 0);
        }
    }
    if (j.contains("budget")) c.budget = required<double>(j, "budget", "config");
    if (j.contains("planner")) c.planner = planner_from_json(j.at("planner"));
    if (j.contains("trials")) c.trials = required<std::size_t>(j, "trials", "config");
    if (j.contains("base_seed")) c.base_seed = required<std::uint64_t>(j, "base_seed", "config");
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        detail::reject_unknown_keys(s, {"axis", "values"}, "sweep");
        c.sweep_axis = detail::parse_axis(required<std::string>(s, "axis", "sweep"));
        if (s.contains("values")) c.sweep_values = required<std::vector<double>>(s, "values", "sweep");
    }
    if (j.contains("output")) c.output = required<std::string>(j, "output", "config");
    if (j.contains("record_wall_time")) c.record_wall_time = required<bool>(j, "record_wall_time", "config");
    if (j.contains("compare")) {
        const auto& s = j.at("compare");
        detail::reject_unknown_keys(s, {"budgets", "budget_factors", "pf_values", "n_eval"}, "compare");
        if (s.contains("budgets")) c.compare.budgets = required<std::vector<double>>(s, "budgets", "compare");
        if (s.contains("budget_factors"))
            c.compare.budget_factors = required<std::vector<double>>(s, "budget_factors", "compare");
        if (s.contains("pf_values")) c.compare.pf_values = required<std::vector<double>>(s, "pf_values", "compare");
        if (s.contains("n_eval")) c.compare.n_eval = required<std::uint64_t>(s, "n_eval", "compare");
    }
    return c;
}

inline ExperimentConfig read_experiment_config(const std::string& path) {
    const std::string text = detail::read_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid JSON in '") + path + "': " + e.what(), 0);
    }
    return experiment_from_json(doc);
}

/// Planner settings for one sweep point.
inline PlannerConfig apply_sweep(PlannerConfig p, SweepAxis axis, double value) {
    switch (axis) {
    case SweepAxis::K: p.iterations = detail::as_count(value, "K"); break;
    case SweepAxis::S: p.rollouts = detail::as_count(value, "S"); break;
    case SweepAxis::PR: p.random_branch_probability = value; break;
    case SweepAxis::Pf: p.failure_bound = value; break;
    case SweepAxis::none: break;
    }
    return p;
}

/**
 * Loads the configured instance, applies closure to incomplete explicit
 * graphs and rejects instances that fail validation (InvariantViolation).
 */
inline ProblemInstance load_instance(const InstanceSource& source) {
    ProblemInstance inst;
    if (const auto* f = std::get_if<InstanceFile>(&source)) {
        std::istringstream in(detail::read_file(f->path));
        inst = read_instance_json(in);
    } else if (const auto* t = std::get_if<TsplibSource>(&source)) {
        std::istringstream in(detail::read_file(t->path));
        inst = parse_tsplib(in, t->reward_seed, t->reward_low, t->reward_high, t->kappa);
    } else {
        const auto& r = std::get<RandomSource>(source);
        inst = generate_random_instance(r.n, r.seed, r.reward_low, r.reward_high, r.kappa);
    }
    const auto report = validate(inst);
    if (!report.ok()) {
        throw InvariantViolation("invalid instance: " + report.violations.front());
    }
    return complete_graph_closure(inst);
}

inline constexpr const char* kRunCsvHeader =
    "kind,instance,n,B,Pf,K,S,M,PR,z,seed,trial,reward,failed,final_budget,planning_calls,wall_time_s,path\n";

namespace detail {

inline std::string row_prefix(const char* kind, const ProblemInstance& inst, double budget, const PlannerConfig& p) {
    return std::string(kind) + ',' + inst.name() + ',' + std::to_string(inst.size()) + ',' + fmt(budget) + ',' +
           fmt(p.failure_bound) + ',' + std::to_string(p.iterations) + ',' + std::to_string(p.rollouts) + ',' +
           std::to_string(p.feasibility_samples) + ',' + fmt(p.random_branch_probability) + ',' +
           fmt(p.exploration) + ',';
}

} // namespace detail

/// Mean reward of one sweep point, as reported in its summary row.
struct SweepSummary {
    double value = 0.0;
    BatchResult batch;
};

struct ExperimentResult {
    std::string csv;
    std::vector<SweepSummary> points;
};

/**
 * For every sweep value (or once without a sweep) runs a batch and emits
 * one episode row per trial followed by a summary row. Summary rows hold
 * means in the value columns, the failure rate in `failed`, the trial count
 * in `trial`, and an empty path.
 */
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1) {
    const ProblemInstance inst = load_instance(cfg.instance);
    if (!(cfg.budget > 0.0)) {
        throw ParameterError("budget must be positive");
    }
    if (cfg.trials < 1) {
        throw ParameterError("trials must be at least 1");
    }
    std::vector<double> values = cfg.sweep_values;
    if (cfg.sweep_axis == SweepAxis::none) {
        values = {0.0};
    } else if (values.empty()) {
        throw ParameterError("sweep axis given without values");
    }

    ExperimentResult out;
    out.csv = kRunCsvHeader;
    for (double value : values) {
        const PlannerConfig planner = apply_sweep(cfg.planner, cfg.sweep_axis, value);
        planner.validate();
        BatchResult batch = run_batch(inst, cfg.budget, planner, cfg.trials, cfg.base_seed, threads);
        const std::string prefix = detail::row_prefix("episode", inst, cfg.budget, planner);
        for (std::size_t k = 0; k < batch.episodes.size(); ++k) {
            const auto& e = batch.episodes[k];
            const auto problems = check_episode(inst, e);
            if (!problems.empty()) {
                throw InvariantViolation("episode " + std::to_string(k) + ": " + problems.front());
            }
            out.csv += prefix + std::to_string(e.seed) + ',' + std::to_string(k) + ',' +
                       detail::fmt(e.collected_reward) + ',' + (e.failed() ? "1" : "0") + ',' +
                       detail::fmt(e.final_budget) + ',' + std::to_string(e.planning_calls) + ',' +
                       (cfg.record_wall_time ? detail::fmt(detail::seconds_per_call(e)) : "") + ',' +
                       detail::join_path(e.path) + '\n';
        }
        out.csv += detail::row_prefix("summary", inst, cfg.budget, planner) + std::to_string(cfg.base_seed) + ',' +
                   std::to_string(cfg.trials) + ',' + detail::fmt(batch.mean_reward) + ',' +
                   detail::fmt(batch.failure_rate) + ',' + detail::fmt(batch.mean_final_budget) + ',' +
                   detail::fmt(batch.mean_planning_calls) + ',' +
                   (cfg.record_wall_time ? detail::fmt(batch.mean_planning_time_per_call) : "") + ",\n";
        out.points.push_back({value, std::move(batch)});
    }
    return out;
}

/**
 * Per sweep point: mean reward over the largest mean reward of the sweep
 * (best point scores 1), and its reciprocal.
 */
inline std::string normalized_reward_csv(const ExperimentResult& result, SweepAxis axis) {
    double best = 0.0;
    for (const auto& p : result.points) {
        best = std::max(best, p.batch.mean_reward);
    }
    std::string csv = std::string(detail::axis_name(axis)) + ",mean_reward,normalized_reward,max_over_reward\n";
    for (const auto& p : result.points) {
        const double r = p.batch.mean_reward;
        csv += detail::fmt(p.value) + ',' + detail::fmt(r) + ',' + detail::fmt(best > 0.0 ? r / best : 0.0) + ',' +
               (r > 0.0 ? detail::fmt(best / r) : "") + '\n';
    }
    return csv;
}

inline constexpr const char* kCompareCsvHeader =
    "instance,n,B,Pf,oracle_reward,oracle_exceedance,oracle_path,mcts_reward,mcts_reward_se,ratio,"
    "oracle_failure_rate,mcts_failure_rate,oracle_wall_time_s,mcts_wall_time_s\n";

struct ComparisonRow {
    double budget = 0.0;
    double failure_bound = 0.0;
    std::optional<PathEvaluation> oracle;
    double oracle_failure_rate = 0.0;
    BatchResult mcts;
    double ratio = 0.0;  ///< mcts mean reward / oracle reward; 0 without an oracle path
    double oracle_seconds = 0.0;
    double mcts_seconds = 0.0;
};

struct ComparisonResult {
    std::string csv;
    std::vector<ComparisonRow> rows;
};

/**
 * MCTS against the exhaustive fixed-path oracle for every (B, P_f)
 * combination. The oracle path's empirical failure rate comes from
 * executing it `trials` times.
 */
inline ComparisonResult compare_with_oracle(const ExperimentConfig& cfg, std::size_t cap = kDefaultEnumerationCap,
                                            std::size_t threads = 1) {
    const ProblemInstance inst = load_instance(cfg.instance);
    if (inst.size() > cap) {
        throw SizeCapError("instance has " + std::to_string(inst.size()) + " vertices, enumeration cap is " +
                           std::to_string(cap));
    }
    std::vector<double> budgets = cfg.compare.budgets;
    for (double factor : cfg.compare.budget_factors) {
        budgets.push_back(factor * inst.expected_cost(inst.start(), inst.goal()));
    }
    if (budgets.empty()) {
        budgets.push_back(cfg.budget);
    }
    std::vector<double> pfs = cfg.compare.pf_values;
    if (pfs.empty()) {
        pfs.push_back(cfg.planner.failure_bound);
    }

    using clock = std::chrono::steady_clock;
    ComparisonResult out;
    out.csv = kCompareCsvHeader;
    std::uint64_t point = 0;
    for (double budget : budgets) {
        for (double pf : pfs) {
            ComparisonRow row;
            row.budget = budget;
            row.failure_bound = pf;
            Rng oracle_rng(Rng::mix(cfg.base_seed) ^ point++);

            const auto t0 = clock::now();
            row.oracle = oracle_best_feasible(inst, budget, pf, cfg.compare.n_eval, oracle_rng, cap);
            row.oracle_seconds = std::chrono::duration<double>(clock::now() - t0).count();
            if (row.oracle) {
                std::size_t failures = 0;
                for (std::size_t k = 0; k < cfg.trials; ++k) {
                    failures += !(budget - sample_path_cost(inst, row.oracle->path, oracle_rng) > 0.0);
                }
                row.oracle_failure_rate = static_cast<double>(failures) / static_cast<double>(cfg.trials);
            }

            PlannerConfig planner = cfg.planner;
            planner.failure_bound = pf;
            const auto t1 = clock::now();
            row.mcts = run_batch(inst, budget, planner, cfg.trials, cfg.base_seed, threads);
            row.mcts_seconds = std::chrono::duration<double>(clock::now() - t1).count();
            for (const auto& e : row.mcts.episodes) {
                const auto problems = check_episode(inst, e);
                if (!problems.empty()) {
                    throw InvariantViolation(problems.front());
                }
            }
            const double se = row.mcts.stddev_reward / std::sqrt(static_cast<double>(cfg.trials));
            if (row.oracle && row.oracle->expected_reward > 0.0) {
                row.ratio = row.mcts.mean_reward / row.oracle->expected_reward;
            }
            out.csv += inst.name() + ',' + std::to_string(inst.size()) + ',' + detail::fmt(budget) + ',' +
                       detail::fmt(pf) + ',' + (row.oracle ? detail::fmt(row.oracle->expected_reward) : "") + ',' +
                       (row.oracle ? detail::fmt(row.oracle->exceedance.p_hat) : "") + ',' +
                       (row.oracle ? detail::join_path(row.oracle->path) : "") + ',' +
                       detail::fmt(row.mcts.mean_reward) + ',' + detail::fmt(se) + ',' +
                       (row.oracle ? detail::fmt(row.ratio) : "") + ',' +
                       (row.oracle ? detail::fmt(row.oracle_failure_rate) : "") + ',' +
                       detail::fmt(row.mcts.failure_rate) + ',' +
                       (cfg.record_wall_time ? detail::fmt(row.oracle_seconds) : "") + ',' +
                       (cfg.record_wall_time ? detail::fmt(row.mcts.mean_wall_time) : "") + '\n';
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

inline constexpr const char* kBoundsCsvHeader =
    "check,f,Pf,N,q1,q2,N1,N2,sigma_z2,replications,empirical,std_error,bound\n";

/**
 * Runs both bound validators: the concentration bound over
 * {0.05, 0.1} x {0.1, 0.2} x {50, 100} (f < P_f only) and the selection
 * bound for unit-variance Gaussian returns with gap 1 at N in {25, 50, 100}.
 */
inline std::string run_bounds(std::uint64_t seed, std::uint64_t replications) {
    Rng rng(seed);
    std::string csv = kBoundsCsvHeader;
    for (double f : {0.05, 0.1}) {
        for (double pf : {0.1, 0.2}) {
            if (!(f < pf)) {
                continue;
            }
            for (std::uint64_t n : {50u, 100u}) {
                const auto b = check_concentration_bound(f, pf, n, replications, rng);
                csv += "concentration," + detail::fmt(f) + ',' + detail::fmt(pf) + ',' + std::to_string(n) +
                       ",,,,,," + std::to_string(replications) + ',' + detail::fmt(b.empirical) + ',' +
                       detail::fmt(b.std_error) + ',' + detail::fmt(b.bound) + '\n';
            }
        }
    }
    for (std::uint64_t n : {25u, 50u, 100u}) {
        const auto b = check_selection_error_bound({1.0, 1.0}, {0.0, 1.0}, n, n, replications, rng);
        csv += "selection,,,," + detail::fmt(b.q1) + ',' + detail::fmt(b.q2) + ',' + std::to_string(n) + ',' +
               std::to_string(n) + ',' + detail::fmt(b.sigma_z2) + ',' + std::to_string(replications) + ',' +
               detail::fmt(b.empirical) + ',' + detail::fmt(b.std_error) + ',' + detail::fmt(b.bound) + '\n';
    }
    return csv;
}

} // namespace sopcc
