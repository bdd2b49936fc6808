#include <iostream>

#include "CLI11.hpp"
#include "nonscat/experiments.hpp"

namespace ex = nonscat::exp;

int main(int argc, char** argv)
{
    CLI::App app{"Non-scattering inclusion experiments"};
    app.set_version_flag("--version", NONSCAT_VERSION);
    app.require_subcommand(1);

    std::string name, config, out = "out", param, values;
    std::uint64_t seed = 0;
    int jobs = 1;

    auto* run = app.add_subcommand("run", "run one experiment");
    run->add_option("name", name, "experiment name")->required();
    run->add_option("--config", config, "INI configuration file");
    run->add_option("--out", out, "output directory");
    auto* seed_opt = run->add_option("--seed", seed, "random seed (overrides run.seed)");

    auto* sw = app.add_subcommand("sweep", "run one experiment over a parameter grid");
    sw->add_option("name", name, "experiment name")->required();
    sw->add_option("--param", param, "h, k, M or eps")->required();
    sw->add_option("--values", values, "comma list or lo:hi:count")->required();
    sw->add_option("--config", config, "INI configuration file");
    sw->add_option("--out", out, "output directory");
    auto* sw_seed = sw->add_option("--seed", seed, "random seed");
    sw->add_option("--jobs", jobs, "points run concurrently")->check(CLI::Range(1, 256));

    auto* list = app.add_subcommand("list", "list experiments and their sweep parameters");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (list->parsed()) {
        for (const auto& [n, info] : ex::registry()) {
            std::cout << n;
            for (const auto& p : info.sweepable) std::cout << ' ' << p;
            std::cout << '\n';
        }
        return 0;
    }

    ex::RunOptions opt;
    opt.out = out;
    opt.log = &std::cout;
    ex::Config cfg;
    try {
        if (!config.empty()) cfg = ex::Config::from_file(config);
    } catch (const std::exception& e) {
        // still leave a manifest behind
        std::cerr << "error: " << e.what() << '\n';
        ex::Config bad = ex::Config::from_string("");
        bad.set("run.config_error", e.what());
        auto r = ex::run("<config error>", bad, opt);
        (void)r;
        return 2;
    }

    if (run->parsed()) {
        if (seed_opt->count()) opt.seed = seed;
        return ex::run(name, cfg, opt).exit_code;
    }
    if (sw_seed->count()) opt.seed = seed;
    std::vector<double> vals;
    try {
        vals = ex::Config::parse_list("--values", values);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return ex::sweep(name, param, vals, cfg, opt, jobs);
}
