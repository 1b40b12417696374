#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lfi/bench.hpp"
#include "lfi/errors.hpp"

using namespace lfi;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

// summary.json with the timing block stripped
std::string summary_without_timings(const std::string& path) {
    auto j = bench::json::parse(slurp(path));
    j.erase("timings");
    return j.dump(1);
}

std::string temp_dir(const std::string& tag) {
    const auto dir = fs::temp_directory_path() / ("lfi_bench_" + tag);
    fs::remove_all(dir);
    return dir.string();
}

bench::RunRecord record(const std::string& algo, const std::string& gen, double perf,
                        bool failed = false) {
    bench::RunRecord r;
    r.algorithm = algo;
    r.generator = gen;
    r.performance = perf;
    r.failed = failed;
    return r;
}

} // namespace

TEST_CASE("performance_metric closed forms") {
    const sim::ParamVector star{0.3, 0.4};
    sim::ParamVector hat = star;
    hat[0] += std::exp(-1.0);
    CHECK(bench::performance_metric(star, hat) == doctest::Approx(1.0).epsilon(1e-12));

    hat = star;
    hat[1] += 1.0;
    CHECK(bench::performance_metric(star, hat) == doctest::Approx(0.0).epsilon(1e-12));

    hat = star;
    hat[0] += std::exp(-5.0);
    CHECK(bench::performance_metric(star, hat) == doctest::Approx(5.0).epsilon(1e-12));

    // coincident points are floored, not infinite
    CHECK(bench::performance_metric(star, star) ==
          doctest::Approx(-std::log(1e-12)).epsilon(1e-12));

    CHECK(bench::performance_metric(star, hat) == bench::performance_metric(hat, star));
    CHECK_THROWS_AS(bench::performance_metric(star, sim::ParamVector{0.1}), DomainError);
}

TEST_CASE("summarize counts successes and failures separately") {
    std::vector<bench::RunRecord> records{record("a", "g", 2.0), record("a", "g", 4.0),
                                          record("a", "g", 99.0, true)};
    const auto s = bench::summarize(records);
    CHECK(s.successes == 2);
    CHECK(s.failures == 1);
    CHECK(s.mean == doctest::Approx(3.0));
    CHECK(s.sd == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("compare_table flags the best cell per generator") {
    SUBCASE("a single cell is the best cell") {
        const auto t = bench::compare_table({record("alfi", "ma2", 1.5)});
        REQUIRE(t.cells.size() == 1);
        CHECK(t.cells[0].best);
    }
    SUBCASE("exact ties are flagged on both") {
        const auto t = bench::compare_table(
            {record("a", "g", 2.0), record("b", "g", 2.0), record("c", "g", 1.0)});
        CHECK(t.cells[0].best);
        CHECK(t.cells[1].best);
        CHECK_FALSE(t.cells[2].best);
    }
    SUBCASE("planted ordering picks the argmax") {
        const auto t = bench::compare_table(
            {record("x", "g", 3.0), record("y", "g", 2.0), record("z", "g", 1.0)});
        CHECK(t.cells[0].best);
        CHECK_FALSE(t.cells[1].best);
        CHECK_FALSE(t.cells[2].best);
    }
}

TEST_CASE("experiment config parsing and validation") {
    const auto j = bench::json::parse(R"({
        "generator": {"name": "quadratic", "overrides": {"noise_sd": 0.0}},
        "algorithm": {"name": "rejection_abc", "epsilon": 0.05},
        "theta_star": [0.3],
        "replications": 2,
        "simulation_budget": 500,
        "seed": 9
    })");
    const auto cfg = bench::ExperimentConfig::from_json(j);
    CHECK(cfg.generator.overrides.at("noise_sd") == 0.0);
    CHECK(cfg.algorithm.params.at("epsilon") == 0.05);
    CHECK(cfg.theta_star->at(0) == 0.3);

    CHECK_THROWS_AS(bench::ExperimentConfig::from_json(bench::json::parse(R"({})")),
                    ConfigError);
    CHECK_THROWS_AS(bench::ExperimentConfig::from_json(
                        bench::json::parse(R"({"generator": "quadratic"})")),
                    ConfigError);
}

TEST_CASE("budget parity is enforced for every algorithm") {
    bench::ExperimentConfig cfg;
    cfg.generator.name = "quadratic";
    cfg.algorithm.name = "alfi";
    cfg.algorithm.params = bench::json{{"t_outer", 7}, {"n_particles", 100}};
    cfg.simulation_budget = 500;  // 7 * 100 != 500
    cfg.theta_star = sim::ParamVector{0.3};
    CHECK_THROWS_AS(bench::run_experiment(cfg), ConfigError);

    cfg.algorithm.name = "avo";
    cfg.algorithm.params = bench::json{{"iterations", 10}, {"batch", 16}};
    CHECK_THROWS_AS(bench::run_experiment(cfg), ConfigError);

    cfg.algorithm.name = "rejection_abc";
    cfg.algorithm.params = bench::json{{"budget", 400}, {"epsilon", 0.1}};
    CHECK_THROWS_AS(bench::run_experiment(cfg), ConfigError);
}

TEST_CASE("run_experiment: rejection smoke run produces a finite metric") {
    bench::ExperimentConfig cfg;
    cfg.generator.name = "gaussian_location";
    cfg.algorithm.name = "rejection_abc";
    cfg.algorithm.params = bench::json{{"quantile", 0.02}};
    cfg.simulation_budget = 1000;
    cfg.replications = 1;
    cfg.observation_repeats = 10;
    cfg.seed = 4;
    const auto records = bench::run_experiment(cfg);
    REQUIRE(records.size() == 1);
    CHECK_FALSE(records[0].failed);
    CHECK(std::isfinite(records[0].performance));
    CHECK(records[0].simulate_calls == 1000);
    CHECK(records[0].observation_calls == 10);
}

TEST_CASE("run_experiment: theta_star outside the box is a config error") {
    bench::ExperimentConfig cfg;
    cfg.generator.name = "quadratic";
    cfg.algorithm.name = "rejection_abc";
    cfg.algorithm.params = bench::json{{"epsilon", 0.1}};
    cfg.theta_star = sim::ParamVector{1.7};
    CHECK_THROWS_AS(bench::run_experiment(cfg), ConfigError);
}

TEST_CASE("run_experiment: hopeless tolerance records a failed replication") {
    bench::ExperimentConfig cfg;
    cfg.generator.name = "gaussian_location";
    cfg.algorithm.name = "rejection_abc";
    cfg.algorithm.params = bench::json{{"epsilon", 1e-12}};
    cfg.simulation_budget = 200;
    cfg.replications = 3;
    cfg.observation_repeats = 5;
    cfg.seed = 5;
    const auto records = bench::run_experiment(cfg);
    const auto s = bench::summarize(records);
    CHECK(s.failures == 3);
    CHECK(s.successes == 0);
}

TEST_CASE("run_experiment persists the documented artifact set per replication") {
    const auto dir = temp_dir("artifacts");
    bench::ExperimentConfig cfg;
    cfg.generator.name = "quadratic";
    cfg.algorithm.name = "alfi";
    cfg.algorithm.params = bench::json{{"n_particles", 20}, {"t_outer", 10},
                                       {"l_updates", 2}};
    cfg.simulation_budget = 200;
    cfg.replications = 1;
    cfg.observation_repeats = 10;
    cfg.theta_star = sim::ParamVector{0.2};
    cfg.out_dir = dir;
    cfg.seed = 6;
    const auto records = bench::run_experiment(cfg);
    REQUIRE_FALSE(records[0].failed);

    for (const char* name :
         {"summary.json", "particles.csv", "diagnostics.csv", "run_config.json",
          "checkpoint_discriminator.json", "checkpoint_encoder.json", "state.json"}) {
        CAPTURE(name);
        CHECK(fs::exists(fs::path(dir) / "rep_0" / name));
    }
    CHECK(fs::exists(fs::path(dir) / "study.json"));

    // particles.csv carries t_outer * n rows plus a header
    const auto particles = slurp((fs::path(dir) / "rep_0" / "particles.csv").string());
    CHECK(line_count(particles) == 1 + 10 * 20);
    CHECK(particles.rfind("iteration,particle,theta_0", 0) == 0);

    const auto diag = slurp((fs::path(dir) / "rep_0" / "diagnostics.csv").string());
    CHECK(line_count(diag) == 1 + 10);
    fs::remove_all(dir);
}

TEST_CASE("identical config and seed reproduce summary.json and particles.csv bytes") {
    auto once = [](const std::string& dir) {
        bench::ExperimentConfig cfg;
        cfg.generator.name = "quadratic";
        cfg.algorithm.name = "alfi";
        cfg.algorithm.params = bench::json{{"n_particles", 20}, {"t_outer", 10},
                                           {"l_updates", 2}};
        cfg.simulation_budget = 200;
        cfg.replications = 1;
        cfg.observation_repeats = 10;
        cfg.theta_star = sim::ParamVector{0.2};
        cfg.out_dir = dir;
        cfg.seed = 7;
        bench::run_experiment(cfg);
    };
    const auto dir_a = temp_dir("repro_a");
    const auto dir_b = temp_dir("repro_b");
    once(dir_a);
    once(dir_b);
    CHECK(summary_without_timings(dir_a + "/rep_0/summary.json") ==
          summary_without_timings(dir_b + "/rep_0/summary.json"));
    CHECK(slurp(dir_a + "/rep_0/particles.csv") == slurp(dir_b + "/rep_0/particles.csv"));
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("every algorithm runs end to end through the harness") {
    for (const std::string algo :
         {"alfi", "rejection_abc", "mcmc_abc", "smc_abc", "avo"}) {
        CAPTURE(algo);
        bench::ExperimentConfig cfg;
        cfg.generator.name = "gaussian_location";
        cfg.algorithm.name = algo;
        if (algo == "alfi")
            cfg.algorithm.params = bench::json{{"n_particles", 20}, {"t_outer", 25},
                                               {"l_updates", 2}};
        else if (algo == "avo")
            cfg.algorithm.params = bench::json{{"batch", 10}, {"iterations", 50}};
        else
            cfg.algorithm.params = bench::json::object();
        cfg.simulation_budget = 500;
        cfg.replications = 1;
        cfg.observation_repeats = 10;
        cfg.theta_star = sim::ParamVector{0.5};
        cfg.seed = 8;
        const auto records = bench::run_experiment(cfg);
        REQUIRE(records.size() == 1);
        CHECK_FALSE(records[0].failed);
        CHECK(records[0].simulate_calls == 500);
        CHECK(records[0].theta_hat.size() == 1);
    }
}

TEST_CASE("bench matrix produces a table with one best per generator") {
    const auto dir = temp_dir("matrix");
    bench::BenchConfig cfg;
    cfg.generators = {{"gaussian_location", {}}};
    cfg.algorithms = {{"rejection_abc", bench::json{{"quantile", 0.02}}},
                      {"mcmc_abc", bench::json{{"quantile", 0.02}}}};
    cfg.replications = 2;
    cfg.observation_repeats = 10;
    cfg.simulation_budget = 600;
    cfg.out_dir = dir;
    cfg.seed = 9;
    const auto table = bench::run_bench(cfg);
    CHECK(table.cells.size() == 2);
    int best = 0;
    for (const auto& c : table.cells) best += c.best ? 1 : 0;
    CHECK(best >= 1);
    CHECK(fs::exists(fs::path(dir) / "table.csv"));
    CHECK(fs::exists(fs::path(dir) / "table.txt"));
    fs::remove_all(dir);
}

TEST_CASE("diagnostics: trained quadratic likelihood grid is bimodal about 0.5") {
    sim::QuadraticGenerator gen;
    const auto x_obs = sim::make_observation(gen, {0.2}, 100, 157);
    alfi::AlfiConfig acfg;
    acfg.t_outer = 100;
    acfg.n_particles = 100;
    acfg.seed = 158;
    const auto result = alfi::run(acfg, gen, x_obs);
    REQUIRE_FALSE(result.aborted);

    const auto dir = temp_dir("diag_quad");
    bench::DiagnosticsOptions opt;
    opt.grid_resolution = 100;
    bench::emit_diagnostics(gen, x_obs, {0.2}, result.state, dir, opt);

    // parse the log-likelihood grid and find local maxima above half-max
    std::ifstream in(dir + "/grid_loglik.csv");
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> theta, loglik;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        theta.push_back(std::stod(line.substr(0, comma)));
        loglik.push_back(std::stod(line.substr(comma + 1)));
    }
    REQUIRE(theta.size() == 100);

    const double peak = *std::max_element(loglik.begin(), loglik.end());
    std::vector<double> maxima;
    for (std::size_t i = 1; i + 1 < loglik.size(); ++i) {
        if (loglik[i] > loglik[i - 1] && loglik[i] > loglik[i + 1] &&
            std::exp(loglik[i] - peak) > 0.5)
            maxima.push_back(theta[i]);
    }
    REQUIRE(maxima.size() == 2);
    CHECK(std::abs(maxima[0] + maxima[1] - 1.0) < 0.05);  // symmetric about 0.5
    fs::remove_all(dir);
}

TEST_CASE("diagnostics: an untrained state still writes contentful files") {
    sim::QuadraticGenerator gen;
    const auto x_obs = sim::make_observation(gen, {0.3}, 10, 160);
    alfi::AlfiConfig acfg;
    acfg.n_particles = 10;
    const auto state = alfi::make_state(acfg, gen, x_obs);

    const auto dir = temp_dir("diag_untrained");
    bench::DiagnosticsOptions opt;
    opt.grid_resolution = 20;
    opt.density_draws = 20;
    bench::emit_diagnostics(gen, x_obs, {0.3}, state, dir, opt);
    for (const char* name : {"grid_discrepancy.csv", "grid_encoder_mean.csv",
                             "grid_loglik.csv", "density_theta_star.csv",
                             "particles_final.csv"}) {
        CAPTURE(name);
        const auto content = slurp((fs::path(dir) / name).string());
        CHECK(line_count(content) >= 2);
    }
    fs::remove_all(dir);
}

TEST_CASE("diagnostics: 2-d sir grids carry resolution^2 rows") {
    sim::SirGenerator gen;
    const auto x_obs = sim::make_observation(gen, {0.6, 0.15}, 5, 161);
    alfi::AlfiConfig acfg;
    acfg.n_particles = 10;
    const auto state = alfi::make_state(acfg, gen, x_obs);

    const auto dir = temp_dir("diag_sir");
    bench::emit_diagnostics(gen, x_obs, {0.6, 0.15}, state, dir, {});
    for (const char* name :
         {"grid_discrepancy.csv", "grid_encoder_mean.csv", "grid_loglik.csv"}) {
        CAPTURE(name);
        CHECK(line_count(slurp((fs::path(dir) / name).string())) == 1 + 50 * 50);
    }
    fs::remove_all(dir);
}

TEST_CASE("cli entry points map errors onto exit codes") {
    CHECK(bench::cli_run("/nonexistent/config.json", std::nullopt, std::nullopt) == 1);
    CHECK(bench::cli_bench("/nonexistent/config.json") == 1);
    CHECK(bench::cli_diag("/nonexistent/run_dir") == 1);
    CHECK(bench::cli_list() == 0);
}

TEST_CASE("cli_diag regenerates diagnostics from a persisted run") {
    const auto dir = temp_dir("cli_diag");
    bench::ExperimentConfig cfg;
    cfg.generator.name = "quadratic";
    cfg.algorithm.name = "alfi";
    cfg.algorithm.params = bench::json{{"n_particles", 20}, {"t_outer", 10},
                                       {"l_updates", 2}};
    cfg.simulation_budget = 200;
    cfg.replications = 1;
    cfg.observation_repeats = 10;
    cfg.theta_star = sim::ParamVector{0.2};
    cfg.out_dir = dir;
    cfg.seed = 11;
    bench::run_experiment(cfg);

    CHECK(bench::cli_diag(dir + "/rep_0") == 0);
    CHECK(fs::exists(fs::path(dir) / "rep_0" / "grid_loglik.csv"));
    CHECK(fs::exists(fs::path(dir) / "rep_0" / "density_theta_star.csv"));
    fs::remove_all(dir);
}
