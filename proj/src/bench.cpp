#include "lfi/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lfi/dist.hpp"
#include "lfi/errors.hpp"
#include "lfi/util.hpp"

namespace lfi::bench {

namespace fs = std::filesystem;

namespace {

// Shortest exact decimal for CSV cells; %.17g round-trips doubles.
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << content;
}

json timings_json(const alfi::PhaseTimings& t) {
    return json{{"simulate_seconds", t.simulate_seconds},
                {"sample_seconds", t.sample_seconds},
                {"optimize_seconds", t.optimize_seconds}};
}

double silverman_or_default(std::span<const double> sample) {
    try {
        const double bw = dist::silverman_bandwidth(sample);
        if (bw > 0.0) return bw;
    } catch (const DomainError&) {
    }
    return 0.01;
}

} // namespace

double performance_metric(const sim::ParamVector& theta_star,
                          const sim::ParamVector& theta_hat) {
    if (theta_star.size() != theta_hat.size())
        throw DomainError("performance_metric: dimension mismatch");
    const double dist = std::max(euclidean_distance(theta_star, theta_hat), 1e-12);
    return -std::log(dist);
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg;
    if (!j.contains("generator")) throw ConfigError("config: missing generator");
    if (j.at("generator").is_string()) {
        cfg.generator.name = j.at("generator").get<std::string>();
    } else {
        cfg.generator.name = j.at("generator").at("name").get<std::string>();
        if (j.at("generator").contains("overrides")) {
            for (auto& [k, v] : j.at("generator").at("overrides").items())
                cfg.generator.overrides[k] = v.get<double>();
        }
    }
    if (!j.contains("algorithm")) throw ConfigError("config: missing algorithm");
    if (j.at("algorithm").is_string()) {
        cfg.algorithm.name = j.at("algorithm").get<std::string>();
        cfg.algorithm.params = json::object();
    } else {
        cfg.algorithm.name = j.at("algorithm").at("name").get<std::string>();
        cfg.algorithm.params = j.at("algorithm");
        cfg.algorithm.params.erase("name");
    }
    if (j.contains("theta_star"))
        cfg.theta_star = j.at("theta_star").get<sim::ParamVector>();
    cfg.replications = j.value("replications", std::size_t{1});
    cfg.observation_repeats = j.value("observation_repeats", std::size_t{100});
    cfg.simulation_budget = j.value("simulation_budget", std::size_t{10000});
    cfg.out_dir = j.value("out", std::string{});
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.threads = j.value("threads", std::size_t{0});
    if (cfg.replications == 0) throw ConfigError("config: replications must be >= 1");
    if (cfg.observation_repeats == 0)
        throw ConfigError("config: observation_repeats must be >= 1");
    return cfg;
}

json ExperimentConfig::to_json() const {
    json g{{"name", generator.name}};
    if (!generator.overrides.empty()) {
        json o = json::object();
        for (const auto& [k, v] : generator.overrides) o[k] = v;
        g["overrides"] = o;
    }
    json a = algorithm.params;
    a["name"] = algorithm.name;
    json j{{"generator", g},
           {"algorithm", a},
           {"replications", replications},
           {"observation_repeats", observation_repeats},
           {"simulation_budget", simulation_budget},
           {"out", out_dir},
           {"seed", seed}};
    if (theta_star) j["theta_star"] = *theta_star;
    return j;
}

namespace {

alfi::AlfiConfig parse_alfi(const json& p, std::size_t budget, const sim::Box& box,
                            std::uint64_t seed, std::size_t threads) {
    alfi::AlfiConfig cfg;
    cfg.n_particles = p.value("n_particles", cfg.n_particles);
    if (p.contains("t_outer")) {
        cfg.t_outer = p.at("t_outer").get<std::size_t>();
    } else {
        if (budget % cfg.n_particles != 0)
            throw ConfigError("alfi: simulation budget not divisible by n_particles");
        cfg.t_outer = budget / cfg.n_particles;
    }
    if (cfg.t_outer * cfg.n_particles != budget)
        throw ConfigError("alfi: t_outer * n_particles must equal the simulation budget");
    cfg.m_inner = p.value("m_inner", cfg.m_inner);
    cfg.l_updates = p.value("l_updates", cfg.l_updates);
    cfg.minibatch = p.value("minibatch", cfg.minibatch);
    cfg.lr_disc = p.value("lr_disc", cfg.lr_disc);
    cfg.lr_enc = p.value("lr_enc", cfg.lr_enc);
    cfg.clip_c = p.value("clip_c", cfg.clip_c);
    cfg.mode_window = p.value("mode_window", cfg.mode_window);
    const std::string family = p.value("family", std::string{"beta"});
    if (family == "beta") {
        cfg.family = dist::Family::Beta;
    } else if (family == "gaussian") {
        cfg.family = dist::Family::Gaussian;
    } else {
        throw ConfigError("alfi: unknown family " + family);
    }
    if (p.contains("proposal_step"))
        cfg.proposal_step = p.at("proposal_step").get<std::vector<double>>();
    if (p.contains("hidden")) cfg.hidden = p.at("hidden").get<std::vector<std::size_t>>();
    cfg.seed = seed;
    cfg.threads = threads;
    cfg.validate(box);
    return cfg;
}

baselines::AbcConfig parse_abc(const json& p, std::size_t budget) {
    baselines::AbcConfig cfg;
    cfg.budget = budget;
    if (p.contains("budget") && p.at("budget").get<std::size_t>() != budget)
        throw ConfigError("abc: budget override conflicts with the shared simulation budget");
    if (p.contains("epsilon")) {
        if (p.at("epsilon").is_string()) {
            if (p.at("epsilon").get<std::string>() != "inf")
                throw ConfigError("abc: epsilon string must be \"inf\"");
            cfg.epsilon = std::numeric_limits<double>::infinity();
        } else {
            cfg.epsilon = p.at("epsilon").get<double>();
        }
    }
    if (p.contains("quantile")) cfg.quantile = p.at("quantile").get<double>();
    if (!cfg.epsilon && !cfg.quantile) cfg.quantile = 0.01; // keep the best 1%
    if (p.contains("proposal_step"))
        cfg.proposal_step = p.at("proposal_step").get<std::vector<double>>();
    cfg.pilot_fraction = p.value("pilot_fraction", cfg.pilot_fraction);
    cfg.population = p.value("population", cfg.population);
    if (p.contains("epsilon_schedule"))
        cfg.epsilon_schedule = p.at("epsilon_schedule").get<std::vector<double>>();
    return cfg;
}

baselines::AvoConfig parse_avo(const json& p, std::size_t budget, const sim::Box& box) {
    baselines::AvoConfig cfg;
    cfg.batch = p.value("batch", cfg.batch);
    if (p.contains("iterations")) {
        cfg.iterations = p.at("iterations").get<std::size_t>();
    } else {
        cfg.iterations = std::max<std::size_t>(1, budget / cfg.batch);
    }
    if (cfg.iterations * cfg.batch != budget)
        throw ConfigError("avo: iterations * batch must equal the simulation budget");
    const std::string vf = p.value("value_function", std::string{"wasserstein"});
    if (vf == "vanilla") {
        cfg.value_function = baselines::ValueFunction::Vanilla;
    } else if (vf == "wasserstein") {
        cfg.value_function = baselines::ValueFunction::Wasserstein;
    } else {
        throw ConfigError("avo: unknown value_function " + vf);
    }
    cfg.lr_proposal = p.value("lr_proposal", cfg.lr_proposal);
    cfg.lr_disc = p.value("lr_disc", cfg.lr_disc);
    cfg.clip_c = p.value("clip_c", cfg.clip_c);
    cfg.baseline = p.value("baseline", cfg.baseline);
    cfg.disc_steps = p.value("disc_steps", cfg.disc_steps);
    if (p.contains("mu0")) cfg.mu0 = p.at("mu0").get<std::vector<double>>();
    if (p.contains("sigma0")) cfg.sigma0 = p.at("sigma0").get<std::vector<double>>();
    cfg.validate(box);
    return cfg;
}

std::vector<double> default_smc_schedule(const sim::Generator& gen,
                                         const sim::Summary& x_obs, Rng& rng) {
    // geometric schedule anchored at pilot discrepancy quantiles
    std::vector<double> pilot(64);
    Rng pr = rng.sub("smc_pilot");
    for (std::size_t i = 0; i < pilot.size(); ++i) {
        const auto theta = gen.box().sample(pr);
        pilot[i] = euclidean_distance(gen.simulate(theta, pr.sub("s", i).key()), x_obs);
    }
    const double hi = quantile(pilot, 0.5);
    const double lo = quantile(pilot, 0.05);
    std::vector<double> schedule;
    double eps = hi;
    for (int level = 0; level < 5; ++level) {
        schedule.push_back(eps);
        eps = std::max(lo, eps * 0.6);
        if (!schedule.empty() && eps >= schedule.back()) break;
    }
    return schedule;
}

struct CsvRows {
    std::string header;
    std::vector<std::string> rows;
    std::string render() const {
        std::string out = header + "\n";
        for (const auto& r : rows) out += r + "\n";
        return out;
    }
};

void write_particles_csv(const std::string& path,
                         const std::vector<std::vector<sim::ParamVector>>& history) {
    CsvRows csv;
    std::size_t dim = 0;
    for (const auto& ens : history)
        if (!ens.empty()) dim = ens.front().size();
    csv.header = "iteration,particle";
    for (std::size_t j = 0; j < dim; ++j) csv.header += ",theta_" + std::to_string(j);
    for (std::size_t it = 0; it < history.size(); ++it) {
        for (std::size_t i = 0; i < history[it].size(); ++i) {
            std::string row = std::to_string(it) + "," + std::to_string(i);
            for (double v : history[it][i]) row += "," + fmt(v);
            csv.rows.push_back(std::move(row));
        }
    }
    write_text(path, csv.render());
}

void write_samples_csv(const std::string& path, const std::vector<sim::ParamVector>& samples,
                       const std::vector<double>& weights) {
    CsvRows csv;
    const std::size_t dim = samples.empty() ? 0 : samples.front().size();
    csv.header = "iteration,particle";
    for (std::size_t j = 0; j < dim; ++j) csv.header += ",theta_" + std::to_string(j);
    csv.header += ",weight";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::string row = "0," + std::to_string(i);
        for (double v : samples[i]) row += "," + fmt(v);
        row += "," + fmt(i < weights.size() ? weights[i] : 0.0);
        csv.rows.push_back(std::move(row));
    }
    write_text(path, csv.render());
}

struct AlgorithmOutcome {
    sim::ParamVector theta_hat;
    alfi::PhaseTimings timings;
    std::size_t simulate_calls = 0;
    json diag;  // algorithm-specific scalars for summary.json
    std::optional<alfi::AlfiResult> alfi_result;
    std::vector<sim::ParamVector> samples;
    std::vector<double> weights;
    std::string diagnostics_csv;
    bool failed = false;
    std::string error;
};

// Parse-only pass so configuration mistakes surface before any replication
// starts; algorithm failures later stay per-replication.
void validate_algorithm_config(const std::string& name, const json& params,
                               const sim::Box& box, std::size_t budget) {
    if (name == "alfi") {
        parse_alfi(params, budget, box, 0, 0);
    } else if (name == "rejection_abc") {
        parse_abc(params, budget).validate_rejection();
    } else if (name == "mcmc_abc") {
        parse_abc(params, budget).validate_mcmc();
    } else if (name == "smc_abc") {
        auto cfg = parse_abc(params, budget);
        if (!cfg.epsilon_schedule.empty()) cfg.validate_smc();
    } else if (name == "avo") {
        parse_avo(params, budget, box);
    } else {
        throw ConfigError("unknown algorithm: " + name);
    }
}

AlgorithmOutcome run_algorithm(const std::string& name, const json& params,
                               const sim::Generator& gen, const sim::Summary& x_obs,
                               std::size_t budget, std::uint64_t seed, std::size_t threads) {
    AlgorithmOutcome out;
    Rng rng = Rng(seed).sub("algorithm");
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    if (name == "alfi") {
        auto cfg = parse_alfi(params, budget, gen.box(), seed, threads);
        auto result = alfi::run(cfg, gen, x_obs);
        out.timings = result.timings;
        out.simulate_calls = result.simulate_calls;
        out.theta_hat = result.mode;
        out.failed = result.aborted;
        out.error = result.error;

        CsvRows diag;
        diag.header = "iteration,acceptance_rate,loss_disc,loss_enc,d_obs,failures";
        for (const auto& d : result.diagnostics) {
            diag.rows.push_back(std::to_string(d.iteration) + "," + fmt(d.acceptance_rate) +
                                "," + fmt(d.loss_disc) + "," + fmt(d.loss_enc) + "," +
                                fmt(d.d_obs) + "," + std::to_string(d.failures));
        }
        out.diagnostics_csv = diag.render();
        if (!result.diagnostics.empty()) {
            out.diag["final_acceptance_rate"] = result.diagnostics.back().acceptance_rate;
            out.diag["final_d_obs"] = result.diagnostics.back().d_obs;
        }
        out.alfi_result = std::move(result);
        return out;
    }

    baselines::AbcResult abc;
    if (name == "rejection_abc" || name == "mcmc_abc" || name == "smc_abc") {
        auto cfg = parse_abc(params, budget);
        if (name == "rejection_abc") {
            abc = baselines::rejection_abc(gen, x_obs, cfg, rng);
        } else if (name == "mcmc_abc") {
            abc = baselines::mcmc_abc(gen, x_obs, cfg, rng);
        } else {
            if (cfg.epsilon_schedule.empty()) {
                Rng sched_rng = rng.sub("schedule");
                cfg.epsilon_schedule = default_smc_schedule(gen, x_obs, sched_rng);
            }
            abc = baselines::smc_abc(gen, x_obs, cfg, rng);
        }
        out.simulate_calls = abc.simulate_calls;
        out.timings.simulate_seconds = elapsed(); // dominated by simulation
        if (abc.samples.empty()) {
            out.failed = true;
            out.error = "no accepted samples";
            out.theta_hat = gen.box().center();
        } else {
            out.theta_hat = baselines::posterior_mode_kde(abc.samples, abc.weights);
        }
        out.samples = abc.samples;
        out.weights = abc.weights;
        out.diag["acceptance_rate"] = abc.acceptance_rate;
        out.diag["epsilon_used"] = abc.epsilon_used;
        if (name == "mcmc_abc") out.diag["stall_fraction"] = abc.stall_fraction;
        if (name == "smc_abc") {
            out.diag["ess_per_level"] = abc.ess_per_level;
            out.diag["epsilon_levels"] = abc.epsilon_levels;
            out.diag["collapsed"] = abc.collapsed;
        }

        CsvRows diag;
        diag.header = "level,epsilon,ess";
        if (name == "smc_abc") {
            for (std::size_t i = 0; i < abc.epsilon_levels.size(); ++i)
                diag.rows.push_back(std::to_string(i) + "," + fmt(abc.epsilon_levels[i]) +
                                    "," + fmt(abc.ess_per_level[i]));
        } else {
            diag.header = "acceptance_rate,epsilon_used,stall_fraction";
            diag.rows.push_back(fmt(abc.acceptance_rate) + "," + fmt(abc.epsilon_used) +
                                "," + fmt(abc.stall_fraction));
        }
        out.diagnostics_csv = diag.render();
        return out;
    }

    if (name == "avo") {
        auto cfg = parse_avo(params, budget, gen.box());
        auto avo = baselines::avo_run(gen, x_obs, cfg, rng);
        out.simulate_calls = avo.simulate_calls;
        out.timings.simulate_seconds = elapsed();
        out.theta_hat = gen.box().clamp(avo.mu);
        out.samples.push_back(avo.mu);
        out.weights.push_back(1.0);
        out.diag["sigma"] = avo.sigma;
        out.diag["sigma_clamped"] = avo.sigma_clamped;

        CsvRows diag;
        diag.header = "iteration";
        const std::size_t d = avo.mu.size();
        for (std::size_t j = 0; j < d; ++j) diag.header += ",mu_" + std::to_string(j);
        for (std::size_t j = 0; j < d; ++j) diag.header += ",sigma_" + std::to_string(j);
        for (std::size_t it = 0; it < avo.mu_history.size(); ++it) {
            std::string row = std::to_string(it);
            for (double v : avo.mu_history[it]) row += "," + fmt(v);
            for (double v : avo.sigma_history[it]) row += "," + fmt(v);
            diag.rows.push_back(std::move(row));
        }
        out.diagnostics_csv = diag.render();
        return out;
    }

    throw ConfigError("unknown algorithm: " + name);
}

} // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
    auto gen = sim::make_generator(cfg.generator.name, cfg.generator.overrides);
    if (cfg.theta_star && !gen->box().contains(*cfg.theta_star))
        throw ConfigError("theta_star lies outside the generator box");
    validate_algorithm_config(cfg.algorithm.name, cfg.algorithm.params, gen->box(),
                              cfg.simulation_budget);

    const bool persist = !cfg.out_dir.empty();
    if (persist) fs::create_directories(cfg.out_dir);

    std::vector<RunRecord> records(cfg.replications);
    Rng master(cfg.seed);

    // replications are fully independent tasks: own substreams, own output
    // directory, one record slot each
    parallel_for(cfg.replications, [&](std::size_t rep) {
        RunRecord& rec = records[rep];
        rec.algorithm = cfg.algorithm.name;
        rec.generator = cfg.generator.name;
        rec.seed = master.sub("replication", rep).key();

        // draw the true parameter away from the box faces unless pinned
        if (cfg.theta_star) {
            rec.theta_star = *cfg.theta_star;
        } else {
            Rng star_rng = master.sub("theta_star", rep);
            rec.theta_star = gen->box().sample_central(star_rng, 0.8);
        }

        try {
            const sim::Summary x_obs = sim::make_observation(
                *gen, rec.theta_star, cfg.observation_repeats,
                master.sub("observation", rep).key());
            rec.observation_calls = cfg.observation_repeats;

            AlgorithmOutcome outcome =
                run_algorithm(cfg.algorithm.name, cfg.algorithm.params, *gen, x_obs,
                              cfg.simulation_budget, rec.seed, cfg.threads);
            rec.theta_hat = outcome.theta_hat;
            rec.timings = outcome.timings;
            rec.simulate_calls = outcome.simulate_calls;
            rec.failed = outcome.failed;
            rec.error = outcome.error;
            if (!rec.failed) rec.performance = performance_metric(rec.theta_star, rec.theta_hat);

            if (persist) {
                const std::string rep_dir =
                    (fs::path(cfg.out_dir) / ("rep_" + std::to_string(rep))).string();
                fs::create_directories(rep_dir);
                rec.run_dir = rep_dir;

                json summary{{"algorithm", rec.algorithm},
                             {"generator", rec.generator},
                             {"seed", rec.seed},
                             {"theta_star", rec.theta_star},
                             {"theta_hat", rec.theta_hat},
                             {"performance", rec.performance},
                             {"simulate_calls", rec.simulate_calls},
                             {"observation_calls", rec.observation_calls},
                             {"failed", rec.failed},
                             {"timings", timings_json(rec.timings)},
                             {"diagnostics", outcome.diag}};
                write_text(rep_dir + "/summary.json", summary.dump(1) + "\n");
                write_text(rep_dir + "/diagnostics.csv", outcome.diagnostics_csv);

                json run_config = cfg.to_json();
                run_config["resolved"] = {{"theta_star", rec.theta_star},
                                          {"x_obs", x_obs},
                                          {"replication", rep},
                                          {"seed", rec.seed}};
                write_text(rep_dir + "/run_config.json", run_config.dump(1) + "\n");

                if (outcome.alfi_result) {
                    write_particles_csv(rep_dir + "/particles.csv",
                                        outcome.alfi_result->history);
                    nn::save_checkpoint(outcome.alfi_result->state.discriminator,
                                        rep_dir + "/checkpoint_discriminator.json");
                    nn::save_checkpoint(outcome.alfi_result->state.encoder,
                                        rep_dir + "/checkpoint_encoder.json");
                    json scalers{
                        {"x_shift", outcome.alfi_result->state.x_scaler.shift},
                        {"x_scale", outcome.alfi_result->state.x_scaler.scale},
                        {"d_obs", outcome.alfi_result->state.d_obs},
                        {"final_particles",
                         outcome.alfi_result->state.ensemble.particles},
                        {"family",
                         outcome.alfi_result->state.family == dist::Family::Beta
                             ? "beta"
                             : "gaussian"}};
                    write_text(rep_dir + "/state.json", scalers.dump(1) + "\n");
                } else {
                    write_samples_csv(rep_dir + "/particles.csv", outcome.samples,
                                      outcome.weights);
                }
            }
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.error = e.what();
            std::cerr << "[bench] replication " << rep << " failed: " << e.what() << "\n";
        }
    }, cfg.threads);

    if (persist) {
        const auto s = summarize(records);
        json study{{"algorithm", cfg.algorithm.name},
                   {"generator", cfg.generator.name},
                   {"replications", cfg.replications},
                   {"mean_performance", s.mean},
                   {"sd_performance", s.sd},
                   {"successes", s.successes},
                   {"failures", s.failures},
                   {"simulation_budget", cfg.simulation_budget}};
        write_text((fs::path(cfg.out_dir) / "study.json").string(), study.dump(1) + "\n");
    }
    return records;
}

StudySummary summarize(const std::vector<RunRecord>& records) {
    StudySummary s;
    std::vector<double> scores;
    for (const auto& r : records) {
        if (r.failed) {
            s.failures += 1;
        } else {
            scores.push_back(r.performance);
            s.successes += 1;
        }
    }
    if (!scores.empty()) {
        s.mean = mean(scores);
        s.sd = scores.size() > 1 ? stddev(scores) : 0.0;
    }
    return s;
}

CompareTable compare_table(const std::vector<RunRecord>& records) {
    if (records.empty()) throw ConfigError("compare_table: no records");
    CompareTable table;
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& r : records) {
        const auto key = std::make_pair(r.algorithm, r.generator);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    for (const auto& [algo, gen] : keys) {
        std::vector<RunRecord> cell_records;
        for (const auto& r : records)
            if (r.algorithm == algo && r.generator == gen) cell_records.push_back(r);
        const auto s = summarize(cell_records);
        TableCell cell;
        cell.algorithm = algo;
        cell.generator = gen;
        cell.mean = s.mean;
        cell.sd = s.sd;
        cell.n = s.successes;
        cell.failures = s.failures;
        table.cells.push_back(cell);
    }
    // flag the best mean per generator, ties flagged on every argmax
    std::vector<std::string> gens;
    for (const auto& c : table.cells)
        if (std::find(gens.begin(), gens.end(), c.generator) == gens.end())
            gens.push_back(c.generator);
    for (const auto& g : gens) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& c : table.cells)
            if (c.generator == g && c.n > 0) best = std::max(best, c.mean);
        for (auto& c : table.cells)
            if (c.generator == g && c.n > 0 && c.mean == best) c.best = true;
    }

    std::ostringstream text;
    text << "algorithm            generator            mean+-sd (n, failures)\n";
    for (const auto& c : table.cells) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-20s %-20s %7.3f +- %-7.3f (%zu, %zu)%s\n",
                      c.algorithm.c_str(), c.generator.c_str(), c.mean, c.sd, c.n,
                      c.failures, c.best ? "  *best" : "");
        text << line;
    }
    table.text = text.str();
    return table;
}

void write_table_csv(const CompareTable& table, const std::string& path) {
    CsvRows csv;
    csv.header = "algorithm,generator,mean,sd,n,failures,best";
    for (const auto& c : table.cells) {
        csv.rows.push_back(c.algorithm + "," + c.generator + "," + fmt(c.mean) + "," +
                           fmt(c.sd) + "," + std::to_string(c.n) + "," +
                           std::to_string(c.failures) + "," + (c.best ? "1" : "0"));
    }
    write_text(path, csv.render());
}

BenchConfig BenchConfig::from_json(const json& j) {
    BenchConfig cfg;
    if (!j.contains("generators") || !j.contains("algorithms"))
        throw ConfigError("bench config: needs generators and algorithms arrays");
    for (const auto& g : j.at("generators")) {
        GeneratorSpec spec;
        if (g.is_string()) {
            spec.name = g.get<std::string>();
        } else {
            spec.name = g.at("name").get<std::string>();
            if (g.contains("overrides"))
                for (auto& [k, v] : g.at("overrides").items())
                    spec.overrides[k] = v.get<double>();
        }
        cfg.generators.push_back(std::move(spec));
    }
    for (const auto& a : j.at("algorithms")) {
        AlgorithmSpec spec;
        if (a.is_string()) {
            spec.name = a.get<std::string>();
            spec.params = json::object();
        } else {
            spec.name = a.at("name").get<std::string>();
            spec.params = a;
            spec.params.erase("name");
        }
        cfg.algorithms.push_back(std::move(spec));
    }
    cfg.replications = j.value("replications", std::size_t{5});
    cfg.observation_repeats = j.value("observation_repeats", std::size_t{100});
    cfg.simulation_budget = j.value("simulation_budget", std::size_t{10000});
    cfg.out_dir = j.value("out", std::string{});
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.threads = j.value("threads", std::size_t{0});
    return cfg;
}

CompareTable run_bench(const BenchConfig& cfg) {
    std::vector<RunRecord> all;
    for (const auto& gen : cfg.generators) {
        for (const auto& algo : cfg.algorithms) {
            ExperimentConfig exp;
            exp.generator = gen;
            exp.algorithm = algo;
            exp.replications = cfg.replications;
            exp.observation_repeats = cfg.observation_repeats;
            exp.simulation_budget = cfg.simulation_budget;
            exp.seed = cfg.seed;
            exp.threads = cfg.threads;
            if (!cfg.out_dir.empty())
                exp.out_dir =
                    (fs::path(cfg.out_dir) / (algo.name + "_" + gen.name)).string();
            auto records = run_experiment(exp);
            all.insert(all.end(), records.begin(), records.end());
        }
    }
    auto table = compare_table(all);
    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        write_table_csv(table, (fs::path(cfg.out_dir) / "table.csv").string());
        write_text((fs::path(cfg.out_dir) / "table.txt").string(), table.text);
    }
    std::cout << table.text;
    return table;
}

void emit_diagnostics(const sim::Generator& gen, const sim::Summary& x_obs,
                      const sim::ParamVector& theta_star, const alfi::AlfiState& state,
                      const std::string& out_dir, const DiagnosticsOptions& opt) {
    fs::create_directories(out_dir);
    const std::size_t d = gen.param_dim();

    if (d <= 2) {
        const auto grid = sim::discrepancy_map(gen, x_obs, opt.grid_resolution, opt.seed);
        CsvRows csv;
        csv.header = d == 2 ? "theta_0,theta_1,discrepancy" : "theta_0,discrepancy";
        for (std::size_t i = 0; i < grid.values.size(); ++i) {
            std::string row = fmt(grid.cells[i][0]);
            if (d == 2) row += "," + fmt(grid.cells[i][1]);
            row += "," + fmt(grid.values[i]);
            csv.rows.push_back(std::move(row));
        }
        write_text((fs::path(out_dir) / "grid_discrepancy.csv").string(), csv.render());

        // encoder mean and log-likelihood over the same lattice
        CsvRows enc_csv, ll_csv;
        enc_csv.header = d == 2 ? "theta_0,theta_1,shape_0,shape_1,family_mean"
                                : "theta_0,shape_0,shape_1,family_mean";
        ll_csv.header = d == 2 ? "theta_0,theta_1,loglik" : "theta_0,loglik";
        for (const auto& cell : grid.cells) {
            const auto shapes = state.encoder_shapes(cell);
            double family_mean;
            if (state.family == dist::Family::Beta) {
                family_mean = shapes.values[0] / (shapes.values[0] + shapes.values[1]);
            } else {
                family_mean = shapes.values[0];
            }
            std::string prefix = fmt(cell[0]);
            if (d == 2) prefix += "," + fmt(cell[1]);
            enc_csv.rows.push_back(prefix + "," + fmt(shapes.values[0]) + "," +
                                   fmt(shapes.values[1]) + "," + fmt(family_mean));
            ll_csv.rows.push_back(prefix + "," + fmt(alfi::estimate_loglik(state, cell)));
        }
        write_text((fs::path(out_dir) / "grid_encoder_mean.csv").string(), enc_csv.render());
        write_text((fs::path(out_dir) / "grid_loglik.csv").string(), ll_csv.render());
    } else {
        std::cerr << "[diag] grids skipped: parameter dimension " << d << " > 2\n";
    }

    // fitted family density against the discriminator-score sample at theta_star
    {
        std::vector<double> scores(opt.density_draws);
        Rng rng = Rng(opt.seed).sub("density");
        for (std::size_t j = 0; j < opt.density_draws; ++j) {
            const auto s = gen.simulate(theta_star, rng.sub("sim", j).key());
            scores[j] = dist::clamp_unit(state.discriminator_value(s), dist::kUnitClamp);
        }
        const auto shapes = state.encoder_shapes(theta_star);
        const double bw = silverman_or_default(scores);

        CsvRows csv;
        csv.header = "y,family_pdf,kde_pdf";
        for (std::size_t i = 0; i < opt.curve_points; ++i) {
            const double y = (static_cast<double>(i) + 0.5) /
                             static_cast<double>(opt.curve_points);
            double fam;
            if (state.family == dist::Family::Beta) {
                fam = std::exp(dist::beta_logpdf(y, shapes.values[0], shapes.values[1]));
            } else {
                fam = std::exp(dist::family_logpdf(shapes, state.transform, y));
            }
            csv.rows.push_back(fmt(y) + "," + fmt(fam) + "," +
                               fmt(dist::kde_pdf(scores, bw, y)));
        }
        write_text((fs::path(out_dir) / "density_theta_star.csv").string(), csv.render());
    }

    // final particles
    {
        CsvRows csv;
        csv.header = "particle";
        for (std::size_t j = 0; j < d; ++j) csv.header += ",theta_" + std::to_string(j);
        for (std::size_t i = 0; i < state.ensemble.particles.size(); ++i) {
            std::string row = std::to_string(i);
            for (double v : state.ensemble.particles[i]) row += "," + fmt(v);
            csv.rows.push_back(std::move(row));
        }
        write_text((fs::path(out_dir) / "particles_final.csv").string(), csv.render());
    }
}

namespace {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open: " + path);
    json j;
    in >> j;
    return j;
}

} // namespace

int cli_run(const std::string& config_path, std::optional<std::uint64_t> seed_override,
            std::optional<std::string> out_override) {
    ExperimentConfig cfg;
    try {
        cfg = ExperimentConfig::from_json(load_json_file(config_path));
        if (seed_override) cfg.seed = *seed_override;
        if (out_override) cfg.out_dir = *out_override;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    try {
        const auto records = run_experiment(cfg);
        const auto s = summarize(records);
        std::cout << cfg.algorithm.name << " on " << cfg.generator.name << ": mean "
                  << s.mean << " +- " << s.sd << " over " << s.successes
                  << " replications (" << s.failures << " failed)\n";
        return s.successes > 0 ? 0 : 2;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
}

int cli_bench(const std::string& config_path) {
    BenchConfig cfg;
    try {
        cfg = BenchConfig::from_json(load_json_file(config_path));
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    try {
        run_bench(cfg);
        return 0;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
}

int cli_diag(const std::string& run_dir) {
    try {
        const json run_config = load_json_file(run_dir + "/run_config.json");
        const json state_json = load_json_file(run_dir + "/state.json");

        sim::Overrides overrides;
        const auto& g = run_config.at("generator");
        if (g.contains("overrides"))
            for (auto& [k, v] : g.at("overrides").items()) overrides[k] = v.get<double>();
        auto gen = sim::make_generator(g.at("name").get<std::string>(), overrides);

        alfi::AlfiState state;
        state.discriminator = nn::load_checkpoint(run_dir + "/checkpoint_discriminator.json");
        state.encoder = nn::load_checkpoint(run_dir + "/checkpoint_encoder.json");
        state.box = gen->box();
        state.x_obs = run_config.at("resolved").at("x_obs").get<sim::Summary>();
        state.family = state_json.at("family").get<std::string>() == "beta"
                           ? dist::Family::Beta
                           : dist::Family::Gaussian;
        state.transform = state.family == dist::Family::Beta
                              ? dist::Transform{dist::TransformKind::Identity, 0.5}
                              : dist::Transform{dist::TransformKind::CotSigmoid, 0.5};
        state.x_scaler.shift = state_json.at("x_shift").get<std::vector<double>>();
        state.x_scaler.scale = state_json.at("x_scale").get<std::vector<double>>();
        state.x_scaler_set = true;
        state.theta_scaler = alfi::InputScaler::from_box(state.box);
        state.ensemble.particles =
            state_json.at("final_particles").get<std::vector<sim::ParamVector>>();
        state.refresh_d_obs();

        const auto theta_star =
            run_config.at("resolved").at("theta_star").get<sim::ParamVector>();
        emit_diagnostics(*gen, state.x_obs, theta_star, state, run_dir);
        std::cout << "diagnostics written to " << run_dir << "\n";
        return 0;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
}

int cli_list() {
    std::cout << "generators:\n";
    for (const auto& name : sim::generator_names()) {
        const auto gen = sim::make_generator(name);
        std::cout << "  " << name << "  (d=" << gen->param_dim()
                  << ", q=" << gen->summary_dim() << ", box";
        for (std::size_t i = 0; i < gen->param_dim(); ++i)
            std::cout << " [" << gen->box().lower[i] << "," << gen->box().upper[i] << "]";
        std::cout << ")\n";
    }
    std::cout << "algorithms:\n";
    for (const char* a : {"alfi", "rejection_abc", "mcmc_abc", "smc_abc", "avo"})
        std::cout << "  " << a << "\n";
    return 0;
}

} // namespace lfi::bench
