#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lfi/bench.hpp"

int main(int argc, char** argv) {
    CLI::App app{"likelihood-free inference toolkit"};
    app.require_subcommand(1);

    std::string run_config;
    std::optional<std::uint64_t> run_seed;
    std::optional<std::string> run_out;
    auto* run = app.add_subcommand("run", "run one algorithm study from a config file");
    run->add_option("--config", run_config, "JSON config file")->required();
    run->add_option("--seed", run_seed, "override the master seed");
    run->add_option("--out", run_out, "override the output directory");

    std::string bench_config;
    auto* bench = app.add_subcommand("bench", "run a generator x algorithm comparison");
    bench->add_option("--config", bench_config, "JSON config file")->required();

    std::string diag_dir;
    auto* diag = app.add_subcommand("diag", "emit plot-ready diagnostics for a saved run");
    diag->add_option("--run", diag_dir, "run directory written by `lfi run`")->required();

    app.add_subcommand("list", "list available generators and algorithms");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return lfi::bench::cli_run(run_config, run_seed, run_out);
    if (bench->parsed()) return lfi::bench::cli_bench(bench_config);
    if (diag->parsed()) return lfi::bench::cli_diag(diag_dir);
    return lfi::bench::cli_list();
}
