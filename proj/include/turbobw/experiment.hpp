#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "turbobw/channel.hpp"
#include "turbobw/comm_chain.hpp"
#include "turbobw/rng.hpp"
#include "turbobw/turbo_receiver.hpp"

namespace turbobw {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::vector<double> taps{0.407, 0.815, 0.407};
    std::vector<unsigned> generators{07, 05};  // octal tap masks
    int constraint_registers = 2;
    int frame_bits = 1024;  // K
    std::uint64_t interleaver_seed = 0x5EED;
    std::vector<double> snr_db{2.0, 4.0, 6.0};
    std::vector<ReceiverMode> modes{ReceiverMode::kJoint, ReceiverMode::kStandalone};
    int turbo_iters = 20;
    int em_iters_per_turbo = 1;
    double init_error = 0.2;  // epsilon
    VarianceMode variance_mode = VarianceMode::kFixedTrue;
    bool warm_start = true;
    int frames = 50;
    std::uint64_t seed = 1;
    std::string out = "results.csv";
};

inline const char* mode_name(ReceiverMode m) {
    switch (m) {
        case ReceiverMode::kJoint: return "joint";
        case ReceiverMode::kStandalone: return "standalone";
        case ReceiverMode::kConventionalBw: return "conventional";
    }
    return "?";
}

inline const char* variance_mode_name(VarianceMode m) {
    return m == VarianceMode::kFixedTrue ? "fixed_true" : "estimated";
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> items;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

[[noreturn]] inline void value_error(const std::string& key, const std::string& where,
                                     const std::string& detail) {
    throw ConfigError("invalid value for " + key + where + ": " + detail);
}

inline double parse_double(const std::string& key, const std::string& v,
                           const std::string& where) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        value_error(key, where, "expected a number, got '" + v + "'");
    }
}

inline long long parse_int(const std::string& key, const std::string& v,
                           const std::string& where) {
    try {
        std::size_t pos = 0;
        const long long n = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        value_error(key, where, "expected an integer, got '" + v + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v,
                               const std::string& where) {
    try {
        std::size_t pos = 0;
        const std::uint64_t n = std::stoull(v, &pos, 0);  // accepts 0x...
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        value_error(key, where, "expected an unsigned integer, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    value_error(key, where, "expected true/false, got '" + v + "'");
}

inline ReceiverMode parse_mode(const std::string& key, const std::string& v,
                               const std::string& where) {
    if (v == "joint") return ReceiverMode::kJoint;
    if (v == "standalone") return ReceiverMode::kStandalone;
    if (v == "conventional") return ReceiverMode::kConventionalBw;
    value_error(key, where, "expected joint|standalone|conventional, got '" + v + "'");
}

}  // namespace detail

// Applies one key=value pair. `where` names the source for error messages
// (e.g. " (line 3)" or " (from TURBOBW_FRAMES)").
inline void apply_config_value(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value, const std::string& where = "") {
    using namespace detail;
    const std::string v = trim(value);
    if (key == "taps") {
        cfg.taps.clear();
        for (const auto& item : split_list(v)) cfg.taps.push_back(parse_double(key, item, where));
    } else if (key == "generators") {
        cfg.generators.clear();
        for (const auto& item : split_list(v)) {
            try {
                std::size_t pos = 0;
                const unsigned long g = std::stoul(item, &pos, 8);  // octal notation
                if (pos != item.size()) throw std::invalid_argument(item);
                cfg.generators.push_back(static_cast<unsigned>(g));
            } catch (const std::exception&) {
                value_error(key, where, "expected octal generator masks, got '" + item + "'");
            }
        }
    } else if (key == "constraint_registers") {
        cfg.constraint_registers = static_cast<int>(parse_int(key, v, where));
    } else if (key == "frame_bits") {
        cfg.frame_bits = static_cast<int>(parse_int(key, v, where));
    } else if (key == "interleaver_seed") {
        cfg.interleaver_seed = parse_u64(key, v, where);
    } else if (key == "snr_db") {
        cfg.snr_db.clear();
        for (const auto& item : split_list(v)) cfg.snr_db.push_back(parse_double(key, item, where));
    } else if (key == "modes") {
        cfg.modes.clear();
        for (const auto& item : split_list(v)) cfg.modes.push_back(parse_mode(key, item, where));
    } else if (key == "turbo_iters") {
        cfg.turbo_iters = static_cast<int>(parse_int(key, v, where));
    } else if (key == "em_iters_per_turbo") {
        cfg.em_iters_per_turbo = static_cast<int>(parse_int(key, v, where));
    } else if (key == "init_error") {
        cfg.init_error = parse_double(key, v, where);
    } else if (key == "variance_mode") {
        if (v == "fixed_true") cfg.variance_mode = VarianceMode::kFixedTrue;
        else if (v == "estimated") cfg.variance_mode = VarianceMode::kEstimated;
        else detail::value_error(key, where, "expected fixed_true|estimated, got '" + v + "'");
    } else if (key == "warm_start") {
        cfg.warm_start = parse_bool(key, v, where);
    } else if (key == "frames") {
        cfg.frames = static_cast<int>(parse_int(key, v, where));
    } else if (key == "seed") {
        cfg.seed = parse_u64(key, v, where);
    } else if (key == "out") {
        cfg.out = v;
    } else {
        throw ConfigError("unknown config key '" + key + "'" + where);
    }
}

// Plain-text key=value config; '#' starts a comment; blank lines ignored.
// An empty file yields all defaults.
inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    ExperimentConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = " (line " + std::to_string(line_no) + ")";
        if (eq == std::string::npos)
            throw ConfigError("expected key=value" + where + ": '" + line + "'");
        apply_config_value(cfg, detail::trim(line.substr(0, eq)), line.substr(eq + 1), where);
    }
    return cfg;
}

// Environment overrides: TURBOBW_<KEY> (key upper-cased) replaces the value
// of <key>. The lookup is injectable for tests; pass std::getenv in main.
inline void apply_env_overrides(ExperimentConfig& cfg,
                                const std::function<const char*(const char*)>& get_env) {
    static const char* keys[] = {"taps",          "generators",      "constraint_registers",
                                 "frame_bits",    "interleaver_seed", "snr_db",
                                 "modes",         "turbo_iters",      "em_iters_per_turbo",
                                 "init_error",    "variance_mode",    "warm_start",
                                 "frames",        "seed",             "out"};
    for (const char* key : keys) {
        std::string env_name = "TURBOBW_";
        for (const char* p = key; *p; ++p)
            env_name += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
        if (const char* v = get_env(env_name.c_str()))
            apply_config_value(cfg, key, v, " (from " + env_name + ")");
    }
}

inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.taps.empty()) throw ConfigError("taps must be non-empty");
    if (cfg.generators.empty()) throw ConfigError("generators must be non-empty");
    if (cfg.constraint_registers < 0) throw ConfigError("constraint_registers must be >= 0");
    for (unsigned g : cfg.generators)
        if (g == 0 || g >= (1u << (cfg.constraint_registers + 1)))
            throw ConfigError("generators must have degree <= constraint_registers");
    if (cfg.frame_bits < 1) throw ConfigError("frame_bits must be positive");
    if (cfg.snr_db.empty()) throw ConfigError("snr_db grid must be non-empty");
    if (cfg.modes.empty()) throw ConfigError("modes must be non-empty");
    if (cfg.turbo_iters < 1) throw ConfigError("turbo_iters must be positive");
    if (cfg.em_iters_per_turbo < 1) throw ConfigError("em_iters_per_turbo must be positive");
    if (!(cfg.init_error >= 0.0)) throw ConfigError("init_error must be nonnegative");
    if (cfg.frames < 1) throw ConfigError("frames must be positive");
    if (cfg.out.empty()) throw ConfigError("out must be a file path");
}

// One aggregated CSV row: (mode, snr, iteration) cell averaged over frames.
struct ResultRow {
    std::string mode;
    double snr_db = 0.0;
    int turbo_iter = 0;  // 0 for modes without a turbo loop
    int em_iter = 0;     // cumulative EM iterations after this row
    double mse_mean = 0.0;
    double mse_stderr = 0.0;
    std::optional<double> ber_mean;  // absent when no decode ran at this iteration
    int frames = 0;
    std::uint64_t seed = 0;
};

namespace detail {

// Per-frame seed streams: 0 -> payload bits, 1 -> channel noise,
// 2 -> estimator initialization.
inline std::uint64_t frame_stream_seed(std::uint64_t master, int frame_index, int stream) {
    return derive_seed(master, static_cast<std::uint64_t>(frame_index) * 3 + stream);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace detail

inline std::string csv_header() {
    return "mode,snr_db,turbo_iter,em_iter,mse_mean,mse_stderr,ber_mean,frames,seed";
}

inline std::string to_csv_line(const ResultRow& r) {
    std::string line = r.mode;
    line += ',';
    line += detail::format_double(r.snr_db);
    line += ',';
    line += std::to_string(r.turbo_iter);
    line += ',';
    line += std::to_string(r.em_iter);
    line += ',';
    line += detail::format_double(r.mse_mean);
    line += ',';
    line += detail::format_double(r.mse_stderr);
    line += ',';
    if (r.ber_mean) line += detail::format_double(*r.ber_mean);
    line += ',';
    line += std::to_string(r.frames);
    line += ',';
    line += std::to_string(r.seed);
    return line;
}

inline void write_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file for writing: " + path);
    out << csv_header() << '\n';
    for (const ResultRow& r : rows) out << to_csv_line(r) << '\n';
    if (!out) throw std::runtime_error("failed while writing: " + path);
}

// Runs the full (mode, snr, frame) grid and aggregates per-iteration traces.
// Frames are paired across modes and SNRs: frame f always carries the same
// payload and the same unit-variance noise stream.
inline std::vector<ResultRow> run_experiment_rows(const ExperimentConfig& cfg) {
    validate_config(cfg);

    const TrellisSpec isi_reduced =
        build_isi_trellis_reduced(static_cast<int>(cfg.taps.size()));
    const TrellisSpec isi_conventional =
        build_isi_trellis_conventional(static_cast<int>(cfg.taps.size()));
    const TrellisSpec code = build_conv_trellis(cfg.generators, cfg.constraint_registers);
    const std::size_t coded_len =
        cfg.generators.size() * (cfg.frame_bits + cfg.constraint_registers);
    const Interleaver pi(coded_len, cfg.interleaver_seed);

    std::vector<ResultRow> rows;
    for (ReceiverMode mode : cfg.modes) {
        for (double snr : cfg.snr_db) {
            const ChannelSpec channel_probe(cfg.taps, snr_to_variance(snr), 0);
            const std::vector<double> truth = true_param_table(
                channel_probe,
                mode == ReceiverMode::kConventionalBw ? isi_conventional : isi_reduced);

            ReceiverConfig rcfg;
            rcfg.mode = mode;
            rcfg.n_turbo_iters = cfg.turbo_iters;
            rcfg.em_iters_per_turbo = cfg.em_iters_per_turbo;
            rcfg.variance_mode = cfg.variance_mode;
            rcfg.warm_start = cfg.warm_start;

            std::vector<IterationTrace> traces;
            traces.reserve(cfg.frames);
            for (int f = 0; f < cfg.frames; ++f) {
                TxFrame frame =
                    build_tx_frame(cfg.frame_bits, cfg.generators, cfg.constraint_registers, pi,
                                   detail::frame_stream_seed(cfg.seed, f, 0));
                const ChannelSpec channel(cfg.taps, snr_to_variance(snr),
                                          detail::frame_stream_seed(cfg.seed, f, 1));
                ChannelOutput ch = apply_channel(frame.symbols, channel);
                frame.noiseless = std::move(ch.noiseless);
                frame.received = std::move(ch.received);

                InitSpec init;
                init.true_means = truth;
                init.perturbation = cfg.init_error;
                init.variance_mode = cfg.variance_mode;
                init.variance = channel.noise_variance;
                init.rng_seed = detail::frame_stream_seed(cfg.seed, f, 2);

                const ReceiverSystem sys{isi_reduced, isi_conventional, code,
                                         pi,          truth,            cfg.frame_bits};
                traces.push_back(run_receiver(frame, sys, init, rcfg));
            }

            const std::size_t n_iters = traces.front().records.size();
            for (std::size_t i = 0; i < n_iters; ++i) {
                ResultRow row;
                row.mode = mode_name(mode);
                row.snr_db = snr;
                if (mode == ReceiverMode::kJoint) {
                    row.turbo_iter = static_cast<int>(i) + 1;
                    row.em_iter = (static_cast<int>(i) + 1) * cfg.em_iters_per_turbo;
                } else {
                    row.turbo_iter = 0;
                    row.em_iter = static_cast<int>(i) + 1;
                }
                double mse_sum = 0.0, mse_sq = 0.0;
                double ber_sum = 0.0;
                int ber_count = 0;
                for (const IterationTrace& tr : traces) {
                    const IterationRecord& rec = tr.records[i];
                    mse_sum += rec.mse;
                    mse_sq += rec.mse * rec.mse;
                    if (rec.ber) {
                        ber_sum += *rec.ber;
                        ++ber_count;
                    }
                }
                const double n = static_cast<double>(cfg.frames);
                row.mse_mean = mse_sum / n;
                row.mse_stderr =
                    cfg.frames > 1
                        ? std::sqrt(std::max(0.0, (mse_sq - n * row.mse_mean * row.mse_mean) /
                                                      (n - 1.0)) /
                                    n)
                        : 0.0;
                if (ber_count == cfg.frames) row.ber_mean = ber_sum / n;
                row.frames = cfg.frames;
                row.seed = cfg.seed;
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

// CLI entry: runs the grid, writes the CSV, prints a short summary.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, std::ostream& summary) {
    const std::vector<ResultRow> rows = run_experiment_rows(cfg);
    write_csv(rows, cfg.out);
    summary << "wrote " << rows.size() << " rows to " << cfg.out << "\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const ResultRow& r = rows[i];
        const bool last_of_cell = i + 1 == rows.size() || rows[i + 1].mode != r.mode ||
                                  rows[i + 1].snr_db != r.snr_db;
        if (!last_of_cell) continue;
        summary << "  " << r.mode << " @ " << r.snr_db << " dB: final mse "
                << detail::format_double(r.mse_mean);
        if (r.ber_mean) summary << ", ber " << detail::format_double(*r.ber_mean);
        summary << " (" << r.frames << " frames)\n";
    }
    return rows;
}

}  // namespace turbobw
