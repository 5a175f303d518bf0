// Command-line driver for vortex filament beta sweeps.
//
//   vortexfil run <config>
//   vortexfil resume <config>
//   vortexfil formula <alpha> <beta> <mu> <N>
//   vortexfil oracle <alpha> <beta> <mu> <L> <M>
//   vortexfil snapshot <config> --beta <b> --sweeps <n> --out <file>
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <vortexfil/harness.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

int do_sweep(const std::string& config_path, bool resume)
{
    vortexfil::RunConfig config = vortexfil::load_config(config_path);
    vortexfil::apply_env_overrides(config);
    const auto outcome = vortexfil::run_sweep(config, resume);
    for (const auto& r : outcome.results) {
        std::printf("beta=%-12.6g r2_mc=%-14.6g r2_3d=%-14.6g r2_2d=%-14.6g slope=%-10.4g "
                    "sweeps=%zu%s\n",
                    r.beta, r.r2_mc, r.r2_formula_3d, r.r2_formula_2d, r.mean_slope,
                    r.sweeps_used(), r.equilibrated ? "" : " (burn-in cap)");
    }
    if (outcome.skipped > 0)
        std::printf("skipped %zu completed beta point(s)\n", outcome.skipped);
    for (const auto& [index, what] : outcome.failures)
        std::fprintf(stderr, "beta point %zu failed: %s\n", index, what.c_str());
    std::printf("results: %s\n", (outcome.directory / "results.csv").c_str());
    return outcome.failures.empty() ? 0 : kExitRuntime;
}

int do_snapshot(const std::string& config_path, double beta, std::size_t sweeps,
                const std::string& out)
{
    vortexfil::RunConfig config = vortexfil::load_config(config_path);
    if (!(beta > 0.0))
        throw vortexfil::ConfigError("snapshot: --beta must be > 0");
    const auto params = config.physics.at_beta(beta);
    auto chain = vortexfil::Chain::from_random_start(params, config.sampler);
    for (std::size_t s = 0; s < sweeps; ++s)
        chain.sweep();
    vortexfil::snapshot_export(chain.state(), params.delta(), out);
    std::printf("wrote %zu x %zu beads to %s (r2=%.6g a2=%.6g)\n", params.n_filaments(),
                params.n_segments(), out.c_str(),
                vortexfil::mean_square_position(chain.state(), params),
                vortexfil::mean_square_amplitude(chain.state(), params));
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Path integral Monte Carlo for trapped nearly parallel vortex filaments"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run a beta sweep from a config file");
    run->add_option("config", config_path, "JSON run configuration")->required();

    auto* resume = app.add_subcommand("resume", "finish an interrupted sweep");
    resume->add_option("config", config_path, "JSON run configuration")->required();

    double alpha = 0, beta = 0, mu = 0, big_l = 0, n = 0;
    std::size_t m = 0;
    auto* formula = app.add_subcommand("formula", "print the closed-form length scales");
    formula->add_option("alpha", alpha)->required();
    formula->add_option("beta", beta)->required();
    formula->add_option("mu", mu)->required();
    formula->add_option("N", n)->required();

    auto* oracle = app.add_subcommand("oracle", "exact R^2 and a^2 of one free filament");
    oracle->add_option("alpha", alpha)->required();
    oracle->add_option("beta", beta)->required();
    oracle->add_option("mu", mu)->required();
    oracle->add_option("L", big_l)->required();
    oracle->add_option("M", m)->required();

    std::size_t sweeps = 1000;
    std::string out = "snapshot.csv";
    auto* snapshot = app.add_subcommand("snapshot", "equilibrate one beta and export the beads");
    snapshot->add_option("config", config_path, "JSON run configuration")->required();
    snapshot->add_option("--beta", beta, "inverse temperature")->required();
    snapshot->add_option("--sweeps", sweeps, "sweeps to run before exporting");
    snapshot->add_option("--out", out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run)
            return do_sweep(config_path, false);
        if (*resume)
            return do_sweep(config_path, true);
        if (*formula) {
            const vortexfil::MeanFieldInputs in{alpha, beta, mu, n, 1.0};
            std::printf("r2_3d %.17g\nr2_2d %.17g\nbeta0 %.17g\n", vortexfil::r_squared_3d(in),
                        vortexfil::r_squared_2d(n, beta, mu), vortexfil::beta_turning_point(in));
            return 0;
        }
        if (*oracle) {
            const auto g = vortexfil::gaussian_single_filament_oracle(alpha, beta, mu, big_l, m);
            std::printf("r2_exact %.17g\na2_exact %.17g\n", g.r_squared, g.a_squared);
            return 0;
        }
        if (*snapshot)
            return do_snapshot(config_path, beta, sweeps, out);
    } catch (const vortexfil::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const vortexfil::DomainError& e) {
        std::fprintf(stderr, "invalid arguments: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid arguments: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
