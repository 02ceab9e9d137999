#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "sopcc/experiment.hpp"

using namespace sopcc;

namespace {

std::vector<std::string> lines(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream in(csv);
    for (std::string line; std::getline(in, line);) {
        out.push_back(line);
    }
    return out;
}

std::vector<std::string> fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

ExperimentConfig quick_config() {
    ExperimentConfig cfg;
    cfg.instance = RandomSource{8, 3, 0.0, 1.0, 0.5};
    cfg.budget = 1.5;
    cfg.planner.iterations = 40;
    cfg.planner.rollouts = 10;
    cfg.trials = 3;
    cfg.base_seed = 11;
    return cfg;
}

std::filesystem::path scratch_file(const std::string& name, const std::string& text) {
    const auto dir = std::filesystem::temp_directory_path() / "sopcc_tests";
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::ofstream(path) << text;
    return path;
}

} // namespace

TEST(ExperimentConfig, RoundTripsThroughJson) {
    ExperimentConfig a = quick_config();
    a.sweep_axis = SweepAxis::PR;
    a.sweep_values = {0.1, 0.5, 0.9};
    a.output = "out.csv";
    a.record_wall_time = true;
    a.compare.budget_factors = {1.5, 2.0};
    a.compare.pf_values = {0.05, 0.1};
    a.planner.saa_mode = SaaMode::sampled;
    EXPECT_EQ(experiment_from_json(to_json(a)), a);

    ExperimentConfig b;
    b.instance = TsplibSource{"x.tsp", 4, 1.0, 4.0, 0.5};
    b.sweep_axis = SweepAxis::K;
    b.sweep_values = {200, 600};
    EXPECT_EQ(experiment_from_json(to_json(b)), b);

    ExperimentConfig c;
    c.instance = InstanceFile{"inst.json"};
    EXPECT_EQ(experiment_from_json(nlohmann::json::parse(to_json(c).dump())), c);
}

TEST(ExperimentConfig, DefaultsFollowPublishedSettings) {
    const auto cfg = experiment_from_json(nlohmann::json::object());
    EXPECT_EQ(cfg.planner.iterations, 350u);
    EXPECT_EQ(cfg.planner.rollouts, 100u);
    EXPECT_EQ(cfg.planner.random_branch_probability, 0.3);
    EXPECT_EQ(cfg.planner.exploration, 3.0);
    EXPECT_EQ(std::get<RandomSource>(cfg.instance).kappa, 0.5);
    EXPECT_EQ(cfg.sweep_axis, SweepAxis::none);
}

TEST(ExperimentConfig, RejectsUnknownFields) {
    EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"budgett": 2})")), ParseError);
    EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"planner": {"k": 2}})")), ParseError);
    EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"sweep": {"axis": "M", "values": [1]}})")),
                 ParseError);
    EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"instance": {"file": "a", "tsplib": "b"}})")),
                 ParseError);
    EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"trials": "many"})")), ParseError);
}

TEST(ExperimentConfig, MissingFileIsIoError) {
    EXPECT_THROW(read_experiment_config("/nonexistent/sopcc.json"), IoError);
}

TEST(ApplySweep, SetsOneAxis) {
    const PlannerConfig base;
    EXPECT_EQ(apply_sweep(base, SweepAxis::K, 600).iterations, 600u);
    EXPECT_EQ(apply_sweep(base, SweepAxis::S, 20).rollouts, 20u);
    EXPECT_EQ(apply_sweep(base, SweepAxis::PR, 0.7).random_branch_probability, 0.7);
    EXPECT_EQ(apply_sweep(base, SweepAxis::Pf, 0.05).failure_bound, 0.05);
    EXPECT_EQ(apply_sweep(base, SweepAxis::none, 5), base);
    EXPECT_THROW(apply_sweep(base, SweepAxis::K, 2.5), ParameterError);
}

TEST(RunExperiment, SingleTrialGivesOneEpisodeAndOneSummary) {
    auto cfg = quick_config();
    cfg.trials = 1;
    const auto result = run_experiment(cfg);
    const auto rows = lines(result.csv);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0] + "\n", kRunCsvHeader);
    EXPECT_EQ(rows[1].rfind("episode,", 0), 0u);
    EXPECT_EQ(rows[2].rfind("summary,", 0), 0u);
    EXPECT_EQ(fields(rows[1]).size(), 18u);
    EXPECT_EQ(fields(rows[2]).size(), 18u);
    EXPECT_EQ(fields(rows[2]).back(), "");
    EXPECT_EQ(result.csv.find('\r'), std::string::npos);
}

TEST(RunExperiment, SweepRowsOrderedBySweepValue) {
    auto cfg = quick_config();
    cfg.sweep_axis = SweepAxis::K;
    cfg.sweep_values = {10, 20, 30};
    const auto result = run_experiment(cfg);
    const auto rows = lines(result.csv);
    ASSERT_EQ(rows.size(), 1u + 3u * (cfg.trials + 1));
    std::vector<std::string> summary_k;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto f = fields(rows[r]);
        if (f[0] == "summary") {
            summary_k.push_back(f[5]);
        }
    }
    EXPECT_EQ(summary_k, (std::vector<std::string>{"10", "20", "30"}));
    // trial column counts up within each block
    EXPECT_EQ(fields(rows[1])[11], "0");
    EXPECT_EQ(fields(rows[3])[11], "2");
    EXPECT_EQ(fields(rows[4])[11], "3");
}

TEST(RunExperiment, SummaryFailureRateIsExactRatio) {
    auto cfg = quick_config();
    cfg.budget = 0.9;
    cfg.trials = 8;
    const auto result = run_experiment(cfg);
    const auto rows = lines(result.csv);
    int failures = 0;
    for (std::size_t r = 1; r + 1 < rows.size(); ++r) {
        failures += fields(rows[r])[13] == "1";
    }
    const auto summary = fields(rows.back());
    EXPECT_EQ(std::stod(summary[13]), failures / 8.0);
    EXPECT_EQ(result.points.at(0).batch.failures, static_cast<std::size_t>(failures));
}

TEST(RunExperiment, ByteIdenticalAcrossRunsAndThreads) {
    auto cfg = quick_config();
    cfg.sweep_axis = SweepAxis::Pf;
    cfg.sweep_values = {0.05, 0.2};
    const auto a = run_experiment(cfg, 1).csv;
    const auto b = run_experiment(cfg, 1).csv;
    const auto c = run_experiment(cfg, 3).csv;
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
}

TEST(RunExperiment, WallTimeColumnOnlyWhenRequested) {
    auto cfg = quick_config();
    cfg.trials = 1;
    EXPECT_EQ(fields(lines(run_experiment(cfg).csv)[1])[16], "");
    cfg.record_wall_time = true;
    EXPECT_GT(std::stod(fields(lines(run_experiment(cfg).csv)[1])[16]), 0.0);
}

TEST(RunExperiment, NormalizedRewardPeaksAtOne) {
    auto cfg = quick_config();
    cfg.sweep_axis = SweepAxis::PR;
    cfg.sweep_values = {0.1, 0.5, 0.9};
    const auto result = run_experiment(cfg);
    const auto rows = lines(normalized_reward_csv(result, cfg.sweep_axis));
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], "PR,mean_reward,normalized_reward,max_over_reward");
    double top = 0.0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const double v = std::stod(fields(rows[r])[2]);
        EXPECT_LE(v, 1.0);
        EXPECT_NEAR(std::stod(fields(rows[r])[3]), 1.0 / v, 1e-12);
        top = std::max(top, v);
    }
    EXPECT_EQ(top, 1.0);
}

TEST(RunExperiment, InvalidInstanceIsInvariantViolation) {
    auto doc = to_json(generate_random_instance(4, 0, 0.0, 1.0, 0.5));
    doc["goal"] = 0;
    const auto path = scratch_file("bad_instance.json", doc.dump());
    auto cfg = quick_config();
    cfg.instance = InstanceFile{path.string()};
    EXPECT_THROW(run_experiment(cfg), InvariantViolation);
    cfg.instance = InstanceFile{"/nonexistent/instance.json"};
    EXPECT_THROW(run_experiment(cfg), IoError);
}

TEST(RunExperiment, LoadsTsplibAndSparseInstances) {
    auto cfg = quick_config();
    cfg.trials = 1;
    cfg.instance = TsplibSource{std::string(SOPCC_TEST_DATA) + "/ulysses16.tsp", 1, 1.0, 4.0, 0.5};
    cfg.budget = 20.0;
    EXPECT_EQ(fields(lines(run_experiment(cfg).csv)[1])[2], "16");

    const ProblemInstance sparse("sparse", {{0, 0, 0, 0}, {1, 0, 0, 1}, {2, 0, 0, 1}, {3, 0, 0, 0}}, 0, 3,
                                 EdgeCostModel::explicit_edges({{0, 1, 0.3}, {1, 2, 0.3}, {2, 3, 0.3}, {2, 1, 0.3},
                                                                {1, 0, 0.3}}));
    cfg.instance = InstanceFile{scratch_file("sparse.json", to_json(sparse).dump()).string()};
    cfg.budget = 3.0;
    const auto rows = lines(run_experiment(cfg).csv);
    EXPECT_EQ(fields(rows[1]).back().back(), '3');
}

TEST(CompareWithOracle, OverCapIsSizeCapError) {
    auto cfg = quick_config();
    cfg.instance = RandomSource{12, 1, 0.0, 1.0, 0.5};
    EXPECT_THROW(compare_with_oracle(cfg), SizeCapError);
}

TEST(CompareWithOracle, GenerousBudgetRatioAtMostOne) {
    auto cfg = quick_config();
    cfg.instance = RandomSource{6, 2, 0.0, 1.0, 0.5};
    cfg.compare.budgets = {50.0};
    cfg.compare.n_eval = 1000;
    const auto result = compare_with_oracle(cfg);
    ASSERT_EQ(result.rows.size(), 1u);
    const auto& row = result.rows[0];
    ASSERT_TRUE(row.oracle.has_value());
    EXPECT_EQ(row.oracle->path.size(), 6u);
    EXPECT_LE(row.ratio, 1.0 + 1e-12);
    EXPECT_EQ(lines(result.csv).size(), 2u);
    EXPECT_EQ(lines(result.csv)[0] + "\n", kCompareCsvHeader);
}

TEST(CompareWithOracle, TinyFailureBoundForcesDirectRoute) {
    // Intermediates far off the start-goal segment; B = 9.1 d gives the direct
    // edge an exceedance of e^-10.
    const ProblemInstance inst("far", {{0, 0, 0, 0.2}, {1, 0, 10, 1}, {2, 1, 10, 1}, {3, 0.5, -10, 1}, {4, 1, 0, 0.3}},
                               0, 4, EdgeCostModel::euclidean(0.1));
    auto cfg = quick_config();
    cfg.instance = InstanceFile{scratch_file("far.json", to_json(inst).dump()).string()};
    cfg.compare.budgets = {9.1};
    cfg.compare.pf_values = {0.0001};
    cfg.compare.n_eval = 10000;
    const auto result = compare_with_oracle(cfg);
    const auto& row = result.rows.at(0);
    ASSERT_TRUE(row.oracle.has_value());
    EXPECT_EQ(row.oracle->path, (std::vector<VertexId>{0, 4}));
    EXPECT_DOUBLE_EQ(row.mcts.mean_reward, 0.5);
}

TEST(CompareWithOracle, Deterministic) {
    auto cfg = quick_config();
    cfg.instance = RandomSource{5, 4, 0.0, 1.0, 0.5};
    cfg.compare.budget_factors = {1.5, 3.0};
    cfg.compare.pf_values = {0.1, 0.2};
    cfg.compare.n_eval = 1000;
    const auto a = compare_with_oracle(cfg);
    EXPECT_EQ(a.csv, compare_with_oracle(cfg).csv);
    EXPECT_EQ(a.rows.size(), 4u);
}

TEST(RunBounds, GridRows) {
    const auto rows = lines(run_bounds(1, 200));
    EXPECT_EQ(rows[0] + "\n", kBoundsCsvHeader);
    // 6 concentration cells with f < P_f, 3 selection cells
    EXPECT_EQ(rows.size(), 1u + 6u + 3u);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        EXPECT_EQ(fields(rows[r]).size(), 13u);
    }
}
