#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <map>
#include <string>

#include "dofrac/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Distributed-order subdiffusion: forward runs, bound estimates and weight recovery"};
    app.require_subcommand(1);
    app.set_version_flag("--version", dofrac::kVersion);

    dofrac::RunOptions opts;
    std::string out;
    std::uint64_t seed = 0;
    const std::map<std::string, std::string> about = {
        {"forward", "solve the forward problem, write traces and the full solution"},
        {"observe", "solve the forward problem, write the boundary traces only"},
        {"noise", "add Gaussian noise to an existing trace.csv"},
        {"bounds", "estimate the support bounds b1, b2 from the traces"},
        {"recover", "recover the weight by conjugate gradients from noisy data"},
        {"asymptotics", "contour-integral asymptotic factors and limit checks"},
        {"gradcheck", "compare the adjoint gradient with finite differences"},
    };
    for (const std::string& name : dofrac::subcommands()) {
        CLI::App* sub = app.add_subcommand(name, about.at(name));
        sub->add_option("--config,-c", opts.config_path, "experiment file (JSON)")->required();
        sub->add_option("--out,-o", out, "output directory (overrides output.directory)");
        sub->add_option("--seed", seed, "noise seed (overrides noise.seed)");
        sub->add_option("--jobs,-j", opts.jobs, "worker threads, one weight per job")->check(CLI::PositiveNumber);
        sub->callback([&, name, sub] {
            opts.subcommand = name;
            if (sub->count("--out")) opts.out_dir = out;
            if (sub->count("--seed")) opts.seed = seed;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : dofrac::kExitConfig;
    }

    try {
        dofrac::run_subcommand(opts);
    } catch (const dofrac::ConfigError& e) {
        std::fprintf(stderr, "dofrac: config error: %s\n", e.what());
        return dofrac::kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dofrac: %s\n", e.what());
        return dofrac::kExitSolver;
    }
    return dofrac::kExitOk;
}
