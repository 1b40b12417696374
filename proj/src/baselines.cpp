#include "lfi/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lfi/alfi.hpp"
#include "lfi/dist.hpp"
#include "lfi/errors.hpp"
#include "lfi/util.hpp"

namespace lfi::baselines {

namespace {

std::vector<double> default_step(const sim::Box& box) {
    std::vector<double> step(box.dim());
    for (std::size_t i = 0; i < box.dim(); ++i) step[i] = 0.05 * box.width(i);
    return step;
}

void require_one_tolerance(const AbcConfig& cfg) {
    const bool has_eps = cfg.epsilon.has_value();
    const bool has_q = cfg.quantile.has_value();
    if (has_eps == has_q)
        throw ConfigError("abc: exactly one of epsilon/quantile must be set");
    if (has_eps && !(*cfg.epsilon > 0.0))
        throw ConfigError("abc: epsilon must be positive");
    if (has_q && !(*cfg.quantile > 0.0 && *cfg.quantile < 1.0))
        throw ConfigError("abc: quantile must lie in (0,1)");
}

} // namespace

void AbcConfig::validate_rejection() const {
    if (budget == 0) throw ConfigError("abc: budget must be >= 1");
    require_one_tolerance(*this);
}

void AbcConfig::validate_mcmc() const {
    validate_rejection();
    if (quantile.has_value() && !(pilot_fraction > 0.0 && pilot_fraction < 1.0))
        throw ConfigError("mcmc_abc: pilot_fraction must lie in (0,1)");
}

void AbcConfig::validate_smc() const {
    if (budget == 0) throw ConfigError("abc: budget must be >= 1");
    if (population < 2) throw ConfigError("smc_abc: population must be >= 2");
    if (epsilon_schedule.empty()) throw ConfigError("smc_abc: empty epsilon schedule");
    for (std::size_t i = 0; i + 1 < epsilon_schedule.size(); ++i) {
        if (!(epsilon_schedule[i] > epsilon_schedule[i + 1]))
            throw ConfigError("smc_abc: epsilon schedule must be strictly decreasing");
    }
}

AbcResult rejection_abc(const sim::Generator& gen, const sim::Summary& x_obs,
                        const AbcConfig& cfg, Rng& rng) {
    cfg.validate_rejection();
    const sim::Box& box = gen.box();

    std::vector<sim::ParamVector> draws(cfg.budget);
    std::vector<double> dists(cfg.budget);
    Rng prior = rng.sub("prior");
    for (std::size_t i = 0; i < cfg.budget; ++i) draws[i] = box.sample(prior);
    parallel_for(cfg.budget, [&](std::size_t i) {
        const auto s = gen.simulate(draws[i], rng.sub("sim", i).key());
        dists[i] = euclidean_distance(s, x_obs);
    });

    AbcResult res;
    res.simulate_calls = cfg.budget;
    double eps;
    if (cfg.epsilon.has_value()) {
        eps = *cfg.epsilon;
    } else {
        std::vector<double> sorted = dists;
        std::sort(sorted.begin(), sorted.end());
        const auto keep = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(*cfg.quantile * cfg.budget)));
        eps = sorted[keep - 1] * (1.0 + 1e-12); // keep exactly the best fraction
    }
    res.epsilon_used = eps;
    for (std::size_t i = 0; i < cfg.budget; ++i) {
        if (dists[i] < eps) {
            res.samples.push_back(draws[i]);
            res.discrepancies.push_back(dists[i]);
        }
    }
    res.weights.assign(res.samples.size(),
                       res.samples.empty() ? 0.0 : 1.0 / static_cast<double>(res.samples.size()));
    res.acceptance_rate =
        static_cast<double>(res.samples.size()) / static_cast<double>(cfg.budget);
    return res;
}

sim::ParamVector posterior_mode_kde(const std::vector<sim::ParamVector>& samples,
                                    const std::vector<double>& weights) {
    if (samples.empty()) throw DomainError("posterior_mode_kde: empty sample");
    if (!weights.empty() && weights.size() != samples.size())
        throw ShapeError("posterior_mode_kde: weight count mismatch");
    const std::size_t n = samples.size();
    const std::size_t d = samples.front().size();

    std::vector<double> bw(d);
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = samples[i][j];
        double b = 0.0;
        try {
            b = dist::silverman_bandwidth(col);
        } catch (const DomainError&) {
        }
        bw[j] = std::max(b, 1e-9);
    }

    // evaluate the density at (a stride of) the sample points themselves
    const std::size_t stride = std::max<std::size_t>(1, n / 2000);
    std::size_t best = 0;
    double best_val = -1.0;
    for (std::size_t i = 0; i < n; i += stride) {
        double dens = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double kern = weights.empty() ? 1.0 : weights[k];
            for (std::size_t j = 0; j < d; ++j) {
                const double z = (samples[i][j] - samples[k][j]) / bw[j];
                kern *= std::exp(-0.5 * z * z);
            }
            dens += kern;
        }
        if (dens > best_val) {
            best_val = dens;
            best = i;
        }
    }
    return samples[best];
}

AbcResult mcmc_abc(const sim::Generator& gen, const sim::Summary& x_obs,
                   const AbcConfig& cfg, Rng& rng) {
    cfg.validate_mcmc();
    const sim::Box& box = gen.box();
    const auto step =
        cfg.proposal_step.empty() ? default_step(box) : cfg.proposal_step;
    if (step.size() != box.dim()) throw ConfigError("mcmc_abc: proposal step dimension");

    AbcResult res;
    std::size_t budget = cfg.budget;
    double eps;
    if (cfg.epsilon.has_value()) {
        eps = *cfg.epsilon;
    } else {
        // Calibrate the tolerance from a pilot stage of prior draws.
        const auto pilot_n = std::max<std::size_t>(
            2, static_cast<std::size_t>(std::floor(cfg.pilot_fraction * cfg.budget)));
        Rng pilot_prior = rng.sub("pilot_prior");
        std::vector<double> pilot(pilot_n);
        for (std::size_t i = 0; i < pilot_n; ++i) {
            const auto theta = box.sample(pilot_prior);
            const auto s = gen.simulate(theta, rng.sub("pilot_sim", i).key());
            pilot[i] = euclidean_distance(s, x_obs);
        }
        eps = quantile(pilot, *cfg.quantile);
        res.simulate_calls += pilot_n;
        budget = budget > pilot_n ? budget - pilot_n : 0;
    }
    res.epsilon_used = eps;

    Rng chain_rng = rng.sub("chain");
    sim::ParamVector current = box.sample(chain_rng);

    // The boxcar kernel rejects every move until the chain is inside the
    // ball, so spend up to half the remaining budget on prior draws to find a
    // valid starting point; the best draw so far starts the chain otherwise.
    double start_dist = std::numeric_limits<double>::infinity();
    std::size_t start_index = 0;
    const std::size_t budget_floor = budget / 2;
    while (budget > budget_floor && !(start_dist < eps)) {
        const auto theta = box.sample(chain_rng);
        const auto s = gen.simulate(theta, rng.sub("start_sim", start_index++).key());
        res.simulate_calls += 1;
        budget -= 1;
        const double dist = euclidean_distance(s, x_obs);
        if (dist < start_dist) {
            start_dist = dist;
            current = theta;
        }
    }

    std::size_t accepted = 0;
    double best = std::numeric_limits<double>::infinity();
    res.samples.reserve(budget);
    res.discrepancies.reserve(budget);
    for (std::size_t i = 0; i < budget; ++i) {
        const auto proposal = alfi::mh_propose(current, box, step, chain_rng);
        const auto s = gen.simulate(proposal, rng.sub("chain_sim", i).key());
        res.simulate_calls += 1;
        const double dist = euclidean_distance(s, x_obs);
        if (dist < eps) {
            current = proposal;
            accepted += 1;
            best = std::min(best, dist);
            res.discrepancies.push_back(dist);
        } else {
            res.discrepancies.push_back(
                res.discrepancies.empty() ? std::numeric_limits<double>::infinity()
                                          : res.discrepancies.back());
        }
        res.samples.push_back(current);
    }
    res.weights.assign(res.samples.size(),
                       res.samples.empty() ? 0.0 : 1.0 / static_cast<double>(res.samples.size()));
    res.acceptance_rate = budget == 0 ? 0.0
                                      : static_cast<double>(accepted) /
                                            static_cast<double>(budget);
    res.stall_fraction = 1.0 - res.acceptance_rate;
    return res;
}

AbcResult smc_abc(const sim::Generator& gen, const sim::Summary& x_obs,
                  const AbcConfig& cfg, Rng& rng) {
    cfg.validate_smc();
    const sim::Box& box = gen.box();
    const std::size_t d = box.dim();
    const std::size_t pop_n = cfg.population;

    AbcResult res;
    std::vector<sim::ParamVector> population;
    std::vector<double> weights;
    std::vector<double> dists;
    std::size_t used = 0;
    Rng level_rng = rng.sub("smc");

    for (std::size_t level = 0; level < cfg.epsilon_schedule.size(); ++level) {
        const double eps = cfg.epsilon_schedule[level];
        std::vector<sim::ParamVector> next_pop;
        std::vector<double> next_w;
        std::vector<double> next_d;

        // Perturbation scale: sqrt of twice the weighted population variance.
        std::vector<double> kernel_sd(d, 0.0);
        if (level > 0) {
            for (std::size_t j = 0; j < d; ++j) {
                double wm = 0.0;
                for (std::size_t i = 0; i < population.size(); ++i)
                    wm += weights[i] * population[i][j];
                double wv = 0.0;
                for (std::size_t i = 0; i < population.size(); ++i) {
                    const double diff = population[i][j] - wm;
                    wv += weights[i] * diff * diff;
                }
                kernel_sd[j] = std::sqrt(std::max(2.0 * wv, 1e-24));
            }
        }

        std::vector<double> cumw(population.size());
        std::partial_sum(weights.begin(), weights.end(), cumw.begin());

        Rng draw_rng = level_rng.sub("level", level);
        std::size_t attempts = 0;
        const std::size_t max_attempts = 64 * cfg.budget + 1024;
        while (next_pop.size() < pop_n && used < cfg.budget &&
               ++attempts <= max_attempts) {
            sim::ParamVector theta;
            if (level == 0) {
                theta = box.sample(draw_rng);
            } else {
                // weighted ancestor pick, then Gaussian move kept inside the box
                const double u = draw_rng.uniform01() * cumw.back();
                const std::size_t anc = static_cast<std::size_t>(
                    std::lower_bound(cumw.begin(), cumw.end(), u) - cumw.begin());
                theta.resize(d);
                bool inside = false;
                for (int tries = 0; tries < 200 && !inside; ++tries) {
                    for (std::size_t j = 0; j < d; ++j)
                        theta[j] = population[std::min(anc, population.size() - 1)][j] +
                                   kernel_sd[j] * draw_rng.normal();
                    inside = box.contains(theta);
                }
                if (!inside) continue;
            }
            const auto s = gen.simulate(theta, level_rng.sub("sim", used).key());
            used += 1;
            const double dist = euclidean_distance(s, x_obs);
            if (dist < eps) {
                next_pop.push_back(theta);
                next_d.push_back(dist);
                if (level == 0) {
                    next_w.push_back(1.0);
                } else {
                    // importance correction: uniform prior over the kernel mixture
                    double denom = 0.0;
                    for (std::size_t i = 0; i < population.size(); ++i) {
                        double k = 1.0;
                        for (std::size_t j = 0; j < d; ++j) {
                            const double z = (theta[j] - population[i][j]) / kernel_sd[j];
                            k *= std::exp(-0.5 * z * z) / kernel_sd[j];
                        }
                        denom += weights[i] * k;
                    }
                    next_w.push_back(denom > 0.0 ? 1.0 / denom : 0.0);
                }
            }
        }

        if (next_pop.empty()) {
            res.budget_exhausted = used >= cfg.budget;
            break;
        }
        const double wsum = std::accumulate(next_w.begin(), next_w.end(), 0.0);
        for (auto& w : next_w) w /= wsum;
        double ess_inv = 0.0;
        for (double w : next_w) ess_inv += w * w;
        const double ess = 1.0 / ess_inv;

        population = std::move(next_pop);
        weights = std::move(next_w);
        dists = std::move(next_d);
        res.epsilon_levels.push_back(eps);
        res.ess_per_level.push_back(ess);
        res.epsilon_used = eps;

        if (ess < 2.0) {
            res.collapsed = true;
            break;
        }
        // systematic resampling once the weights degenerate
        if (ess < static_cast<double>(pop_n) / 2.0 &&
            level + 1 < cfg.epsilon_schedule.size()) {
            std::vector<sim::ParamVector> resampled;
            std::vector<double> resampled_d;
            resampled.reserve(population.size());
            Rng res_rng = level_rng.sub("resample", level);
            const double u0 = res_rng.uniform01() / static_cast<double>(population.size());
            std::vector<double> cw(population.size());
            std::partial_sum(weights.begin(), weights.end(), cw.begin());
            std::size_t j = 0;
            for (std::size_t i = 0; i < population.size(); ++i) {
                const double u = u0 + static_cast<double>(i) / static_cast<double>(population.size());
                while (j + 1 < cw.size() && cw[j] < u) ++j;
                resampled.push_back(population[j]);
                resampled_d.push_back(dists[j]);
            }
            population = std::move(resampled);
            dists = std::move(resampled_d);
            weights.assign(population.size(), 1.0 / static_cast<double>(population.size()));
        }
        if (used >= cfg.budget && level + 1 < cfg.epsilon_schedule.size()) {
            res.budget_exhausted = true;
            break;
        }
    }

    res.samples = population;
    res.weights = weights;
    res.discrepancies = dists;
    res.simulate_calls = used;
    res.acceptance_rate = used == 0 ? 0.0
                                    : static_cast<double>(population.size()) /
                                          static_cast<double>(used);
    return res;
}

double value_a(ValueFunction vf, double t) {
    return vf == ValueFunction::Vanilla ? std::log(t) : t;
}

double value_b(ValueFunction vf, double t) {
    return vf == ValueFunction::Vanilla ? std::log1p(-t) : -t;
}

void AvoConfig::validate(const sim::Box& box) const {
    if (iterations == 0 || batch == 0) throw ConfigError("avo: counts must be >= 1");
    if (!mu0.empty() && mu0.size() != box.dim())
        throw ConfigError("avo: mu0 dimension mismatch");
    if (!sigma0.empty()) {
        if (sigma0.size() != box.dim()) throw ConfigError("avo: sigma0 dimension mismatch");
        for (double s : sigma0)
            if (!(s > 0.0)) throw ConfigError("avo: sigma0 must be positive");
    }
    if (!(lr_proposal > 0.0) || !(lr_disc > 0.0))
        throw ConfigError("avo: learning rates must be positive");
}

namespace {

struct DiscStack {
    nn::Network net;
    nn::OptimizerState opt;
    alfi::InputScaler scaler;
    bool scaler_set = false;

    double value(const sim::Summary& x) const {
        return nn::forward(net, scaler.apply(x))[0];
    }
};

DiscStack make_disc(std::size_t q, const std::vector<std::size_t>& hidden, Rng rng) {
    std::vector<std::size_t> dims{q};
    for (auto h : hidden) dims.push_back(h);
    dims.push_back(1);
    DiscStack d;
    d.net = nn::make_network(dims, nn::Activation::Relu, nn::Head::SigmoidScalar, {}, rng);
    d.opt = nn::make_optimizer_state(d.net);
    d.scaler = alfi::InputScaler::identity(q);
    return d;
}

// One ascent step on a(d(x_obs)) + mean b(d(fakes)).
double disc_step(DiscStack& d, const sim::Summary& x_obs,
                 const std::vector<sim::Summary>& fakes, ValueFunction vf, double lr,
                 double clip_c) {
    nn::Gradients total = nn::zero_gradients(d.net);
    nn::Trace trace;

    const double d_obs = nn::forward(d.net, d.scaler.apply(x_obs), trace)[0];
    // minimize -V: d(-a)/d(output)
    const double up_obs[] = {vf == ValueFunction::Vanilla ? -1.0 / d_obs : -1.0};
    nn::accumulate(total, nn::backward(d.net, trace, up_obs));

    const double w = 1.0 / static_cast<double>(fakes.size());
    double value = value_a(vf, d_obs);
    for (const auto& fake : fakes) {
        const double d_fake = nn::forward(d.net, d.scaler.apply(fake), trace)[0];
        value += w * value_b(vf, d_fake);
        const double up_fake[] = {vf == ValueFunction::Vanilla
                                      ? w / (1.0 - d_fake)
                                      : w};
        nn::accumulate(total, nn::backward(d.net, trace, up_fake));
    }
    nn::adam_step(d.net, total, d.opt, lr);
    if (vf == ValueFunction::Wasserstein) nn::clip_weights(d.net, clip_c);
    return value;
}

} // namespace

AvoResult avo_run(const sim::Generator& gen, const sim::Summary& x_obs,
                  const AvoConfig& cfg, Rng& rng) {
    cfg.validate(gen.box());
    const sim::Box& box = gen.box();
    const std::size_t d = box.dim();

    std::vector<double> mu = cfg.mu0.empty() ? box.center() : cfg.mu0;
    std::vector<double> sigma = cfg.sigma0;
    if (sigma.empty()) {
        sigma.resize(d);
        for (std::size_t j = 0; j < d; ++j) sigma[j] = 0.25 * box.width(j);
    }

    AvoResult res;
    DiscStack disc = make_disc(gen.summary_dim(), cfg.hidden, rng.sub("disc_init"));
    Rng prop_rng = rng.sub("proposal");

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        // clamp the proposal scale before drawing
        for (auto& s : sigma) {
            if (s < cfg.sigma_floor) {
                s = cfg.sigma_floor;
                res.sigma_clamped = true;
            }
        }

        std::vector<sim::ParamVector> thetas(cfg.batch);
        std::vector<sim::Summary> fakes(cfg.batch);
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            sim::ParamVector theta(d);
            for (std::size_t j = 0; j < d; ++j)
                theta[j] = mu[j] + sigma[j] * prop_rng.normal();
            thetas[b] = theta;
            // generator inputs live on the box; the score keeps the raw draw
            fakes[b] = gen.simulate(box.clamp(theta), rng.sub("sim", it * cfg.batch + b).key());
            res.simulate_calls += 1;
        }

        if (!disc.scaler_set) {
            auto batch = fakes;
            batch.push_back(x_obs);
            disc.scaler = alfi::InputScaler::from_batch(batch);
            disc.scaler_set = true;
        }
        for (std::size_t s = 0; s < cfg.disc_steps; ++s)
            disc_step(disc, x_obs, fakes, cfg.value_function, cfg.lr_disc, cfg.clip_c);

        // REINFORCE descent on E[b(d(fake))]: score-function gradients of the
        // Gaussian proposal, optional batch-mean control variate.
        std::vector<double> rewards(cfg.batch);
        for (std::size_t b = 0; b < cfg.batch; ++b)
            rewards[b] = value_b(cfg.value_function, disc.value(fakes[b]));
        double baseline = 0.0;
        if (cfg.baseline) baseline = mean(rewards);

        std::vector<double> grad_mu(d, 0.0), grad_logsigma(d, 0.0);
        const double w = 1.0 / static_cast<double>(cfg.batch);
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            const double r = rewards[b] - baseline;
            for (std::size_t j = 0; j < d; ++j) {
                const double z = (thetas[b][j] - mu[j]) / sigma[j];
                grad_mu[j] += w * r * z / sigma[j];
                grad_logsigma[j] += w * r * (z * z - 1.0);
            }
        }
        for (std::size_t j = 0; j < d; ++j) {
            mu[j] -= cfg.lr_proposal * grad_mu[j];
            const double log_s = std::log(sigma[j]) - cfg.lr_proposal * grad_logsigma[j];
            sigma[j] = std::exp(log_s);
        }

        res.mu_history.push_back(mu);
        res.sigma_history.push_back(sigma);
    }

    for (auto& s : sigma) {
        if (s < cfg.sigma_floor) {
            s = cfg.sigma_floor;
            res.sigma_clamped = true;
        }
    }
    res.mu = mu;
    res.sigma = sigma;
    res.discriminator = disc.net;
    res.disc_input_shift = disc.scaler.shift;
    res.disc_input_scale = disc.scaler.scale;
    return res;
}

std::vector<double> reinforce_gradient(const sim::Generator& gen,
                                       const std::function<double(const sim::Summary&)>& d,
                                       ValueFunction vf, std::span<const double> mu,
                                       std::span<const double> sigma,
                                       std::size_t n_samples, Rng& rng) {
    const sim::Box& box = gen.box();
    const std::size_t dim = box.dim();
    if (mu.size() != dim || sigma.size() != dim)
        throw ShapeError("reinforce_gradient: proposal dimension mismatch");

    std::vector<double> grad(2 * dim, 0.0); // d(mu), d(log sigma)
    Rng draw = rng.sub("reinforce");
    const double w = 1.0 / static_cast<double>(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        sim::ParamVector theta(dim);
        for (std::size_t j = 0; j < dim; ++j)
            theta[j] = mu[j] + sigma[j] * draw.normal();
        const auto x = gen.simulate(box.clamp(theta), rng.sub("sim", s).key());
        const double reward = value_b(vf, d(x));
        for (std::size_t j = 0; j < dim; ++j) {
            const double z = (theta[j] - mu[j]) / sigma[j];
            grad[j] += w * reward * z / sigma[j];
            grad[dim + j] += w * reward * (z * z - 1.0);
        }
    }
    return grad;
}

double reinforce_gradient_norm(const sim::Generator& gen,
                               const std::function<double(const sim::Summary&)>& d,
                               ValueFunction vf, std::span<const double> mu,
                               std::span<const double> sigma, std::size_t n_samples,
                               Rng& rng) {
    const auto grad = reinforce_gradient(gen, d, vf, mu, sigma, n_samples, rng);
    double norm = 0.0;
    for (double g : grad) norm += g * g;
    return std::sqrt(norm);
}

std::vector<ProbePoint> gradient_vanishing_probe(const sim::Generator& gen,
                                                 const sim::Summary& x_obs,
                                                 const ProbeConfig& cfg, Rng& rng) {
    if (cfg.checkpoints.empty()) throw ConfigError("probe: no checkpoints");
    const sim::Box& box = gen.box();
    const std::size_t d = box.dim();

    std::vector<double> mu = cfg.proposal_mu.empty() ? box.center() : cfg.proposal_mu;
    std::vector<double> sigma = cfg.proposal_sigma;
    if (sigma.empty()) {
        sigma.resize(d);
        for (std::size_t j = 0; j < d; ++j) sigma[j] = 0.25 * box.width(j);
    }

    DiscStack disc = make_disc(gen.summary_dim(), cfg.hidden, rng.sub("disc_init"));
    Rng fake_rng = rng.sub("fakes");

    // scaler from a pilot fake batch
    {
        std::vector<sim::Summary> pilot(cfg.batch);
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            sim::ParamVector theta(d);
            for (std::size_t j = 0; j < d; ++j)
                theta[j] = mu[j] + sigma[j] * fake_rng.normal();
            pilot[b] = gen.simulate(box.clamp(theta), rng.sub("pilot", b).key());
        }
        pilot.push_back(x_obs);
        disc.scaler = alfi::InputScaler::from_batch(pilot);
        disc.scaler_set = true;
    }

    std::vector<std::size_t> checkpoints = cfg.checkpoints;
    std::sort(checkpoints.begin(), checkpoints.end());
    std::vector<ProbePoint> series;
    std::size_t steps_done = 0;

    for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
        for (; steps_done < checkpoints[ci]; ++steps_done) {
            std::vector<sim::Summary> fakes(cfg.batch);
            for (std::size_t b = 0; b < cfg.batch; ++b) {
                sim::ParamVector theta(d);
                for (std::size_t j = 0; j < d; ++j)
                    theta[j] = mu[j] + sigma[j] * fake_rng.normal();
                fakes[b] = gen.simulate(
                    box.clamp(theta), rng.sub("train", steps_done * cfg.batch + b).key());
            }
            disc_step(disc, x_obs, fakes, cfg.value_function, cfg.lr_disc, cfg.clip_c);
        }

        ProbePoint pt;
        pt.train_steps = steps_done;
        {
            // separation proxy on a fresh fake batch
            std::vector<double> dvals(cfg.batch);
            Rng gap_rng = rng.sub("gap", ci);
            for (std::size_t b = 0; b < cfg.batch; ++b) {
                sim::ParamVector theta(d);
                for (std::size_t j = 0; j < d; ++j)
                    theta[j] = mu[j] + sigma[j] * gap_rng.normal();
                dvals[b] = disc.value(
                    gen.simulate(box.clamp(theta), gap_rng.sub("sim", b).key()));
            }
            pt.disc_gap = disc.value(x_obs) - mean(dvals);
        }
        Rng mc = rng.sub("mc", ci);
        pt.grad_norm = reinforce_gradient_norm(
            gen, [&](const sim::Summary& x) { return disc.value(x); },
            cfg.value_function, mu, sigma, cfg.mc_samples, mc);
        series.push_back(pt);
    }
    return series;
}

} // namespace lfi::baselines
