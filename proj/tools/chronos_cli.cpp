#include "chronos/scenario.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

// CHRONOS_LOG controls chatter on stderr: quiet, info (default), debug.
int verbosity() {
    const char* raw = std::getenv("CHRONOS_LOG");
    if (!raw) return 1;
    const std::string v{raw};
    if (v == "quiet" || v == "0") return 0;
    if (v == "debug" || v == "2") return 2;
    return 1;
}

void log_line(int level, const std::string& msg) {
    if (verbosity() >= level) std::cerr << "[chronos] " << msg << '\n';
}

struct Overrides {
    double tol_kernel = 0.0;
    double tol_condition = 0.0;
    std::uint64_t seed = 0;
    bool has_tol_kernel = false;
    bool has_tol_condition = false;
    bool has_seed = false;
};

// A target is either an embedded preset name or a path to a config document.
chronos::ScenarioConfig load_target(const std::string& target, const Overrides& ov) {
    chronos::ScenarioConfig cfg;
    const auto names = chronos::preset_names();
    if (std::find(names.begin(), names.end(), target) != names.end()) {
        cfg = chronos::preset(target);
        log_line(2, "loaded embedded preset \"" + target + "\"");
    } else {
        std::ifstream in(target);
        if (!in) throw chronos::ConfigError("<document>", "cannot open config \"" + target + "\"");
        std::stringstream buf;
        buf << in.rdbuf();
        cfg = chronos::parse_scenario(buf.str());
        log_line(2, "parsed config \"" + target + "\"");
    }
    if (ov.has_tol_kernel) cfg.tolerances.kernel_eps = ov.tol_kernel;
    if (ov.has_tol_condition) cfg.tolerances.condition_tol = ov.tol_condition;
    if (ov.has_seed) {
        cfg.seed_state = chronos::SeedConfig{};
        cfg.seed_state.rng_seed = ov.seed;
    }
    return cfg;
}

void add_override_flags(CLI::App* sub, Overrides& ov) {
    sub->add_option("--tol-kernel", ov.tol_kernel, "kernel detection threshold")
        ->check(CLI::PositiveNumber)
        ->each([&ov](const std::string&) { ov.has_tol_kernel = true; });
    sub->add_option("--tol-condition", ov.tol_condition, "condition residual tolerance")
        ->check(CLI::PositiveNumber)
        ->each([&ov](const std::string&) { ov.has_tol_condition = true; });
    sub->add_option("--seed", ov.seed, "random seed for the prepared state")
        ->each([&ov](const std::string&) { ov.has_seed = true; });
}

void write_csv_file(const chronos::RunReport& rep, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file " + path.string());
    chronos::emit_csv(rep, out);
    log_line(1, "wrote " + path.string());
}

std::string cell(const std::optional<chronos::Real>& v) {
    return v ? chronos::detail::format_number(*v) : std::string("-");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-clock constraint dynamics toolkit"};
    app.require_subcommand(1);

    std::string target;
    std::string out_dir = ".";
    bool write_csv = true;
    Overrides ov;
    std::vector<chronos::Index> dims;
    std::string preset_name;

    CLI::App* cmd_run = app.add_subcommand("run", "run one scenario end to end");
    cmd_run->add_option("config", target, "config file or preset name")->required();
    cmd_run->add_option("--out", out_dir, "output directory for CSV files");
    cmd_run->add_flag("--csv,!--no-csv", write_csv, "write per-time CSV (default on)");
    add_override_flags(cmd_run, ov);

    CLI::App* cmd_classify = app.add_subcommand("classify", "evaluate the unitarity conditions only");
    cmd_classify->add_option("config", target, "config file or preset name")->required();
    add_override_flags(cmd_classify, ov);

    CLI::App* cmd_sweep = app.add_subcommand("sweep", "re-run a scenario over clock dimensions");
    cmd_sweep->add_option("config", target, "config file or preset name")->required();
    cmd_sweep->add_option("--dims", dims, "ascending clock dimensions")->required()->delimiter(',');
    cmd_sweep->add_option("--out", out_dir, "output directory for CSV files");
    cmd_sweep->add_flag("--csv,!--no-csv", write_csv, "write per-dimension CSV (default on)");
    add_override_flags(cmd_sweep, ov);

    CLI::App* cmd_list = app.add_subcommand("list-scenarios", "list embedded presets");
    CLI::App* cmd_preset = app.add_subcommand("preset", "print an embedded preset config");
    cmd_preset->add_option("name", preset_name, "preset name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cmd_list->parsed()) {
            for (const std::string& name : chronos::preset_names()) std::cout << name << '\n';
            return 0;
        }
        if (cmd_preset->parsed()) {
            std::cout << chronos::to_json(chronos::preset(preset_name)).dump(2) << '\n';
            return 0;
        }
        if (cmd_classify->parsed()) {
            const chronos::ScenarioConfig cfg = load_target(target, ov);
            const chronos::ConditionReport rep = chronos::classify(cfg);
            nlohmann::ordered_json j = {
                {"name", cfg.name},
                {"verdict", chronos::to_string(rep.verdict)},
                {"c1_residual", rep.c1_residual},
                {"c2_residual", rep.c2_residual},
                {"pathology_dim", rep.pathology_dim},
                {"effective_tol", rep.effective_tol},
            };
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (cmd_run->parsed()) {
            const chronos::ScenarioConfig cfg = load_target(target, ov);
            log_line(1, "running \"" + cfg.name + "\" (d=" + std::to_string(cfg.clock.d) + ")");
            const chronos::RunReport rep = chronos::run_scenario(cfg);
            if (write_csv) {
                std::filesystem::create_directories(out_dir);
                write_csv_file(rep, std::filesystem::path(out_dir) / (cfg.name + ".csv"));
            }
            if (verbosity() >= 1) std::cout << chronos::report_to_json(rep).dump(2) << '\n';
            return 0;
        }
        if (cmd_sweep->parsed()) {
            const chronos::ScenarioConfig cfg = load_target(target, ov);
            const chronos::SweepTable table = chronos::sweep_dimension(cfg, dims);
            if (write_csv) {
                std::filesystem::create_directories(out_dir);
                for (size_t i = 0; i < table.reports.size(); ++i) {
                    const std::string file = cfg.name + "_d" + std::to_string(table.rows[i].d) + ".csv";
                    write_csv_file(table.reports[i], std::filesystem::path(out_dir) / file);
                }
            }
            if (verbosity() >= 1) {
                std::cout << "d,interior_residual,norm_drift,rate_drift,verdict\n";
                for (const chronos::SweepRow& row : table.rows) {
                    std::cout << row.d << ',' << chronos::detail::format_number(row.interior_residual)
                              << ',' << cell(row.norm_drift) << ',' << cell(row.rate_drift) << ','
                              << row.verdict << '\n';
                }
            }
            return 0;
        }
    } catch (const chronos::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
