#ifndef LFI_BENCH_HPP
#define LFI_BENCH_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfi/alfi.hpp"
#include "lfi/baselines.hpp"
#include "lfi/sim.hpp"

namespace lfi::bench {

using json = nlohmann::json;

// -log ||theta_star - theta_hat||_2, distance floored at 1e-12.
double performance_metric(const sim::ParamVector& theta_star,
                          const sim::ParamVector& theta_hat);

struct GeneratorSpec {
    std::string name;
    sim::Overrides overrides;
};

struct AlgorithmSpec {
    std::string name;     // alfi | rejection_abc | mcmc_abc | smc_abc | avo
    json params;          // algorithm-specific keys, budget-derived defaults
};

struct ExperimentConfig {
    GeneratorSpec generator;
    AlgorithmSpec algorithm;
    std::optional<sim::ParamVector> theta_star;  // unset -> sampled per replication
    std::size_t replications = 1;
    std::size_t observation_repeats = 100;
    std::size_t simulation_budget = 10000;  // per-replication inference budget
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t threads = 0;

    static ExperimentConfig from_json(const json& j);
    json to_json() const;
};

struct RunRecord {
    std::string algorithm;
    std::string generator;
    sim::ParamVector theta_star;
    sim::ParamVector theta_hat;
    double performance = 0.0;
    alfi::PhaseTimings timings;
    std::size_t simulate_calls = 0;       // inference calls, observation excluded
    std::size_t observation_calls = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    std::string run_dir;  // empty when nothing was persisted
};

// Runs all replications: sample/read theta_star, build the observation,
// run the algorithm, extract the mode, score, persist.  A failed replication
// is recorded and the study continues.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

// Replication-level summary written at the end of run_experiment.
struct StudySummary {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t successes = 0;
    std::size_t failures = 0;
};
StudySummary summarize(const std::vector<RunRecord>& records);

struct TableCell {
    std::string algorithm;
    std::string generator;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
    std::size_t failures = 0;
    bool best = false;  // ties flagged on every argmax
};

struct CompareTable {
    std::vector<TableCell> cells;
    std::string text;  // aligned rendering
};

CompareTable compare_table(const std::vector<RunRecord>& records);
void write_table_csv(const CompareTable& table, const std::string& path);

// Multi-algorithm study over a generator x algorithm matrix with a shared
// simulation budget per cell.
struct BenchConfig {
    std::vector<GeneratorSpec> generators;
    std::vector<AlgorithmSpec> algorithms;
    std::size_t replications = 5;
    std::size_t observation_repeats = 100;
    std::size_t simulation_budget = 10000;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t threads = 0;

    static BenchConfig from_json(const json& j);
};

CompareTable run_bench(const BenchConfig& cfg);

// Plot-ready CSV diagnostics: discrepancy grid, fitted family vs kernel
// density at theta_star, encoder-mean and log-likelihood grids, final
// particles.  Grids are emitted for d <= 2 only.
struct DiagnosticsOptions {
    std::size_t grid_resolution = 50;
    std::size_t density_draws = 100;  // fresh simulations at theta_star
    std::size_t curve_points = 200;
    std::uint64_t seed = 1;
};

void emit_diagnostics(const sim::Generator& gen, const sim::Summary& x_obs,
                      const sim::ParamVector& theta_star, const alfi::AlfiState& state,
                      const std::string& out_dir, const DiagnosticsOptions& opt = {});

// CLI entry points; return process exit codes (0 ok, 1 config, 2 runtime).
int cli_run(const std::string& config_path, std::optional<std::uint64_t> seed_override,
            std::optional<std::string> out_override);
int cli_bench(const std::string& config_path);
int cli_diag(const std::string& run_dir);
int cli_list();

} // namespace lfi::bench

#endif
