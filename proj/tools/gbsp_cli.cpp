#include "gbsp/config.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"gbsp: resonant-slab covers, convergence series and Hessian diagnostics"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<long long> qmax;
    std::optional<std::string> out;
    std::optional<int> threads;
    std::optional<long long> p;
    std::vector<long long> q;
    std::vector<double> seed_point;

    for (const auto& name : gbsp::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config,-c", config_path, "JSON config document")->required();
        sub->add_option("--qmax", qmax, "override q_range.max");
        sub->add_option("--out,-o", out, "output directory (default output.dir, then $GBSP_OUT_DIR, then .)");
        sub->add_option("--threads,-j", threads, "parallelism degree");
        if (name == "cover") {
            sub->add_option("--p", p, "integer p")->required();
            sub->add_option("--q", q, "integer vector q (n entries)")->required()->delimiter(',');
        }
        if (name == "fiber") sub->add_option("--seed-point", seed_point, "point in U (n-1 entries)")->required()->delimiter(',');
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    gbsp::RunConfig cfg;
    try {
        cfg = gbsp::load_config(config_path, command);
    } catch (const gbsp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    gbsp::RunOverrides ov;
    ov.qmax = qmax;
    ov.threads = threads;
    ov.p = p;
    if (!q.empty()) ov.q = q;
    if (!seed_point.empty()) ov.seed_point = seed_point;

    const gbsp::RunResult res = gbsp::run_command(command, cfg, ov);

    std::string dir = ".";
    if (out) {
        dir = *out;
    } else if (!cfg.output_dir.empty()) {
        dir = cfg.output_dir;
    } else if (const char* env = std::getenv("GBSP_OUT_DIR")) {
        dir = env;
    }
    if (!res.files.empty()) {
        try {
            gbsp::write_reports(res, dir);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }
    if (res.exit_code == 0) {
        std::cout << command << ": " << res.message << "\n";
    } else {
        std::cerr << command << ": " << res.message << "\n";
    }
    return res.exit_code;
}
