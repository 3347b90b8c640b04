// Experiment CLI: sweeps SNR/mode grids over seeded Monte-Carlo frames and
// writes per-iteration MSE/BER aggregates as CSV.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "turbobw/experiment.hpp"

namespace {

constexpr const char* kUsage = R"(usage:
  turbobw run [--config <path>] [--snr-db <list>] [--mode <list>]
              [--frames N] [--seed N] [--out <csv>]
  turbobw validate --config <path>

run        simulate the configured (mode, snr) grid and write the CSV
validate   parse and validate a config, print the resolved values

Config files hold key=value lines ('#' comments). Every key can also be
overridden via environment variables with the TURBOBW_ prefix (for example
TURBOBW_FRAMES=10); command-line flags take precedence over both.

modes: joint | standalone | conventional (comma-separated list accepted)
)";

void print_config(const turbobw::ExperimentConfig& cfg, std::ostream& os) {
    os << "taps=";
    for (std::size_t i = 0; i < cfg.taps.size(); ++i)
        os << (i ? "," : "") << cfg.taps[i];
    os << "\ngenerators=";
    for (std::size_t i = 0; i < cfg.generators.size(); ++i)
        os << (i ? "," : "") << std::oct << cfg.generators[i] << std::dec;
    os << "\nconstraint_registers=" << cfg.constraint_registers;
    os << "\nframe_bits=" << cfg.frame_bits;
    os << "\ninterleaver_seed=" << cfg.interleaver_seed;
    os << "\nsnr_db=";
    for (std::size_t i = 0; i < cfg.snr_db.size(); ++i)
        os << (i ? "," : "") << cfg.snr_db[i];
    os << "\nmodes=";
    for (std::size_t i = 0; i < cfg.modes.size(); ++i)
        os << (i ? "," : "") << turbobw::mode_name(cfg.modes[i]);
    os << "\nturbo_iters=" << cfg.turbo_iters;
    os << "\nem_iters_per_turbo=" << cfg.em_iters_per_turbo;
    os << "\ninit_error=" << cfg.init_error;
    os << "\nvariance_mode=" << turbobw::variance_mode_name(cfg.variance_mode);
    os << "\nwarm_start=" << (cfg.warm_start ? "true" : "false");
    os << "\nframes=" << cfg.frames;
    os << "\nseed=" << cfg.seed;
    os << "\nout=" << cfg.out << "\n";
}

struct CliArgs {
    std::string command;
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;  // config key -> value
};

CliArgs parse_args(int argc, char** argv) {
    CliArgs args;
    if (argc < 2) throw turbobw::ConfigError("missing command (run | validate)");
    args.command = argv[1];
    int i = 2;
    auto need_value = [&](const std::string& flag) -> std::string {
        if (i + 1 >= argc) throw turbobw::ConfigError("flag " + flag + " needs a value");
        return argv[++i];
    };
    for (; i < argc; ++i) {
        const std::string flag = argv[i];
        if (flag == "--config") args.config_path = need_value(flag);
        else if (flag == "--snr-db") args.overrides.emplace_back("snr_db", need_value(flag));
        else if (flag == "--mode") args.overrides.emplace_back("modes", need_value(flag));
        else if (flag == "--frames") args.overrides.emplace_back("frames", need_value(flag));
        else if (flag == "--seed") args.overrides.emplace_back("seed", need_value(flag));
        else if (flag == "--out") args.overrides.emplace_back("out", need_value(flag));
        else if (flag == "--help" || flag == "-h") args.command = "help";
        else throw turbobw::ConfigError("unknown flag: " + flag);
    }
    return args;
}

turbobw::ExperimentConfig resolve_config(const CliArgs& args) {
    turbobw::ExperimentConfig cfg;
    if (!args.config_path.empty()) cfg = turbobw::parse_config_file(args.config_path);
    turbobw::apply_env_overrides(cfg, [](const char* name) { return std::getenv(name); });
    for (const auto& [key, value] : args.overrides)
        turbobw::apply_config_value(cfg, key, value, " (from command line)");
    turbobw::validate_config(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        const CliArgs args = parse_args(argc, argv);
        if (args.command == "help") {
            std::cout << kUsage;
            return 0;
        }
        if (args.command == "validate") {
            if (args.config_path.empty())
                throw turbobw::ConfigError("validate requires --config <path>");
            const turbobw::ExperimentConfig cfg = resolve_config(args);
            print_config(cfg, std::cout);
            std::cout << "config ok\n";
            return 0;
        }
        if (args.command == "run") {
            const turbobw::ExperimentConfig cfg = resolve_config(args);
            turbobw::run_experiment(cfg, std::cout);
            return 0;
        }
        throw turbobw::ConfigError("unknown command: " + args.command);
    } catch (const turbobw::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << kUsage;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
