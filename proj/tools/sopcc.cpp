#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sopcc/error.hpp"
#include "sopcc/experiment.hpp"
#include "sopcc/instance.hpp"
#include "sopcc/instance_io.hpp"

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kIo = 2, kInvariant = 3, kSizeCap = 4 };

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text) || !out.flush()) {
        throw sopcc::IoError("cannot write '" + path + "'");
    }
}

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::size_t threads = 1;
    std::size_t cap = sopcc::kDefaultEnumerationCap;
    bool timing = false;
};

sopcc::ExperimentConfig load_config(const Common& c) {
    auto cfg = sopcc::read_experiment_config(c.config);
    if (c.seed) {
        cfg.base_seed = *c.seed;
    }
    if (c.trials) {
        cfg.trials = *c.trials;
    }
    if (c.timing) {
        cfg.record_wall_time = true;
    }
    if (!c.out.empty()) {
        cfg.output = c.out;
    }
    return cfg;
}

int run(const Common& c) {
    const auto cfg = load_config(c);
    const auto result = sopcc::run_experiment(cfg, c.threads);
    emit(cfg.output, result.csv);
    if (cfg.sweep_axis == sopcc::SweepAxis::PR && !cfg.output.empty() && cfg.output != "-") {
        emit(cfg.output + ".normalized.csv", sopcc::normalized_reward_csv(result, cfg.sweep_axis));
    }
    return kOk;
}

int compare(const Common& c) {
    const auto cfg = load_config(c);
    emit(cfg.output, sopcc::compare_with_oracle(cfg, c.cap, c.threads).csv);
    return kOk;
}

struct GenerateArgs {
    std::size_t n = 20;
    double reward_low = 0.0;
    double reward_high = 1.0;
    double kappa = 0.5;
    std::string tsplib;
};

int generate(const Common& c, const GenerateArgs& g) {
    sopcc::InstanceSource source;
    if (!c.config.empty()) {
        source = sopcc::read_experiment_config(c.config).instance;
    } else if (!g.tsplib.empty()) {
        source = sopcc::TsplibSource{g.tsplib, c.seed.value_or(0), g.reward_low, g.reward_high, g.kappa};
    } else {
        source = sopcc::RandomSource{g.n, c.seed.value_or(0), g.reward_low, g.reward_high, g.kappa};
    }
    const auto inst = sopcc::load_instance(source);
    emit(c.out, sopcc::to_json(inst).dump(2) + "\n");
    return kOk;
}

int validate_cmd(const Common& c, const std::string& instance_path) {
    sopcc::ProblemInstance inst;
    if (!instance_path.empty()) {
        std::istringstream in(sopcc::detail::read_file(instance_path));
        inst = sopcc::read_instance_json(in);
    } else {
        const auto cfg = sopcc::read_experiment_config(c.config);
        if (const auto* f = std::get_if<sopcc::InstanceFile>(&cfg.instance)) {
            std::istringstream in(sopcc::detail::read_file(f->path));
            inst = sopcc::read_instance_json(in);
        } else {
            inst = sopcc::load_instance(cfg.instance);
        }
    }
    const auto report = sopcc::validate(inst);
    for (const auto& v : report.violations) {
        std::cout << "violation: " << v << "\n";
    }
    if (!report.ok()) {
        return kInvariant;
    }
    if (!inst.is_complete()) {
        try {
            (void)sopcc::complete_graph_closure(inst);
        } catch (const sopcc::ClosureError& e) {
            std::cout << "violation: " << e.what() << "\n";
            return kInvariant;
        }
        std::cout << "ok (incomplete graph, closure applies)\n";
        return kOk;
    }
    std::cout << "ok\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chance-constrained stochastic orienteering: MCTS planner, oracle and experiment harness"};
    app.require_subcommand(1);

    Common common;
    GenerateArgs gen;
    std::string instance_path;
    std::uint64_t replications = 100000;

    auto add_out = [&](CLI::App* sub) { sub->add_option("--out", common.out, "Output path (stdout when omitted)"); };
    auto add_run_flags = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "Experiment config (JSON)")->required();
        add_out(sub);
        sub->add_option("--seed", common.seed, "Override base_seed");
        sub->add_option("--trials", common.trials, "Override trials")->check(CLI::PositiveNumber);
        sub->add_option("--threads", common.threads, "Worker threads (0 = auto)");
        sub->add_flag("--timing", common.timing, "Record planning seconds per call (output no longer reproducible)");
    };

    auto* generate_cmd = app.add_subcommand("generate", "Emit an instance file");
    generate_cmd->add_option("--config", common.config, "Take the instance source from this config");
    add_out(generate_cmd);
    generate_cmd->add_option("--seed", common.seed, "Instance or reward seed");
    generate_cmd->add_option("--n", gen.n, "Vertex count for random instances")->check(CLI::Range(3, 1 << 20));
    generate_cmd->add_option("--reward-low", gen.reward_low, "Lowest reward");
    generate_cmd->add_option("--reward-high", gen.reward_high, "Highest reward");
    generate_cmd->add_option("--kappa", gen.kappa, "Deterministic cost fraction");
    generate_cmd->add_option("--tsplib", gen.tsplib, "Build from a TSPLIB coordinate file");

    auto* run_cmd = app.add_subcommand("run", "Run an experiment and write CSV rows");
    add_run_flags(run_cmd);

    auto* compare_cmd = app.add_subcommand("compare", "Compare MCTS with the enumeration oracle");
    add_run_flags(compare_cmd);
    compare_cmd->add_option("--cap", common.cap, "Enumeration vertex cap");

    auto* validate_sub = app.add_subcommand("validate", "Check an instance file");
    validate_sub->add_option("instance", instance_path, "Instance JSON");
    validate_sub->add_option("--config", common.config, "Check the instance named by this config");

    auto* bounds_cmd = app.add_subcommand("bounds", "Empirical checks of the concentration and selection bounds");
    add_out(bounds_cmd);
    bounds_cmd->add_option("--seed", common.seed, "Seed");
    bounds_cmd->add_option("--replications", replications, "Replications per cell")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate_cmd) {
            return generate(common, gen);
        }
        if (*run_cmd) {
            return run(common);
        }
        if (*compare_cmd) {
            return compare(common);
        }
        if (*validate_sub) {
            if (instance_path.empty() && common.config.empty()) {
                std::cerr << "error: validate needs an instance path or --config\n";
                return kIo;
            }
            return validate_cmd(common, instance_path);
        }
        emit(common.out, sopcc::run_bounds(common.seed.value_or(0), replications));
        return kOk;
    } catch (const sopcc::SizeCapError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSizeCap;
    } catch (const sopcc::InvariantViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvariant;
    } catch (const sopcc::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const sopcc::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const sopcc::InvalidInstanceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const sopcc::ClosureError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvariant;
    } catch (const sopcc::ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}
