#ifndef LFI_BASELINES_HPP
#define LFI_BASELINES_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfi/nn.hpp"
#include "lfi/rng.hpp"
#include "lfi/sim.hpp"

namespace lfi::baselines {

struct AbcConfig {
    std::optional<double> epsilon;   // ball radius
    std::optional<double> quantile;  // keep-best fraction of the budget
    std::size_t budget = 10000;      // total simulation calls

    // MCMC: random-walk step (empty -> 5% of box width) and the share of the
    // budget used to calibrate epsilon in quantile mode.
    std::vector<double> proposal_step;
    double pilot_fraction = 0.2;

    // SMC: population size and strictly decreasing tolerance schedule.
    std::size_t population = 200;
    std::vector<double> epsilon_schedule;

    void validate_rejection() const;
    void validate_mcmc() const;
    void validate_smc() const;
};

struct AbcResult {
    std::vector<sim::ParamVector> samples;
    std::vector<double> weights;          // uniform except SMC
    std::vector<double> discrepancies;    // per retained sample
    double acceptance_rate = 0.0;
    double stall_fraction = 0.0;          // MCMC: fraction of rejected steps
    double epsilon_used = 0.0;            // final tolerance actually applied
    std::vector<double> epsilon_levels;   // SMC schedule walked
    std::vector<double> ess_per_level;    // SMC effective sample sizes
    std::size_t simulate_calls = 0;
    bool collapsed = false;               // SMC stopped on ESS < 2
    bool budget_exhausted = false;
};

// Uniform prior draws, accept within the epsilon ball (or keep the best
// quantile fraction).  Zero acceptances is a diagnostic, not an error.
AbcResult rejection_abc(const sim::Generator& gen, const sim::Summary& x_obs,
                        const AbcConfig& cfg, Rng& rng);

// Sample-based posterior-mode estimate: the sample point maximizing a
// product-Gaussian kernel density (Silverman bandwidth per dimension,
// optional weights).  This is the theta-hat extractor for samplers whose
// output is a particle set rather than an explicit density.
sim::ParamVector posterior_mode_kde(const std::vector<sim::ParamVector>& samples,
                                    const std::vector<double>& weights = {});

// Pseudo-marginal random walk: a move is accepted only when one fresh
// simulation at the proposal lands inside the epsilon ball.
AbcResult mcmc_abc(const sim::Generator& gen, const sim::Summary& x_obs,
                   const AbcConfig& cfg, Rng& rng);

// Population resample-move over the tolerance schedule, Gaussian perturbation
// with variance twice the weighted population variance per level, importance
// weights corrected for the moves.
AbcResult smc_abc(const sim::Generator& gen, const sim::Summary& x_obs,
                  const AbcConfig& cfg, Rng& rng);

// Adversarial value function flavour: (a,b) = (log t, log(1-t)) for vanilla,
// (t, -t) for wasserstein.
enum class ValueFunction { Vanilla, Wasserstein };

double value_a(ValueFunction vf, double t);
double value_b(ValueFunction vf, double t);

struct AvoConfig {
    std::vector<double> mu0;      // empty -> box center
    std::vector<double> sigma0;   // empty -> 25% of box width
    ValueFunction value_function = ValueFunction::Wasserstein;
    std::size_t iterations = 625;
    std::size_t batch = 16;
    double lr_proposal = 0.02;
    double lr_disc = 1e-3;
    double clip_c = 0.1;          // wasserstein discriminator clip
    bool baseline = true;         // subtract the batch-mean reward
    std::size_t disc_steps = 2;   // discriminator steps per iteration
    std::vector<std::size_t> hidden{64, 64};
    double sigma_floor = 1e-4;

    void validate(const sim::Box& box) const;
};

struct AvoResult {
    std::vector<std::vector<double>> mu_history;     // per iteration
    std::vector<std::vector<double>> sigma_history;  // per iteration
    std::vector<double> mu;
    std::vector<double> sigma;
    nn::Network discriminator;
    std::vector<double> disc_input_shift, disc_input_scale;
    std::size_t simulate_calls = 0;
    bool sigma_clamped = false;
};

// Gaussian proposal tuned by score-function (REINFORCE) gradients against a
// jointly trained discriminator whose real term is the single observation.
AvoResult avo_run(const sim::Generator& gen, const sim::Summary& x_obs,
                  const AvoConfig& cfg, Rng& rng);

// Monte-Carlo score-function estimate of grad_psi E[b(d(g(theta,u)))] for an
// arbitrary discriminator function and a fixed Gaussian proposal; the first d
// entries are d/d(mu), the rest d/d(log sigma).
std::vector<double> reinforce_gradient(const sim::Generator& gen,
                                       const std::function<double(const sim::Summary&)>& d,
                                       ValueFunction vf, std::span<const double> mu,
                                       std::span<const double> sigma,
                                       std::size_t n_samples, Rng& rng);

double reinforce_gradient_norm(const sim::Generator& gen,
                               const std::function<double(const sim::Summary&)>& d,
                               ValueFunction vf, std::span<const double> mu,
                               std::span<const double> sigma, std::size_t n_samples,
                               Rng& rng);

struct ProbeConfig {
    ValueFunction value_function = ValueFunction::Wasserstein;
    std::vector<std::size_t> checkpoints{0, 250, 500, 1000, 2000, 4000};
    std::size_t batch = 64;         // fakes per discriminator step
    double lr_disc = 3e-3;
    double clip_c = 10.0;
    std::size_t mc_samples = 10000; // REINFORCE samples per checkpoint
    std::vector<double> proposal_mu;     // empty -> box center
    std::vector<double> proposal_sigma;  // empty -> 25% of box width
    std::vector<std::size_t> hidden{64, 64};
};

struct ProbePoint {
    std::size_t train_steps = 0;
    double disc_gap = 0.0;   // d(x_obs) - mean d(fakes)
    double grad_norm = 0.0;  // REINFORCE gradient-norm estimate
};

// Trains the discriminator against the single observation and reports the
// proposal-gradient norm at each checkpoint, exposing the vanishing trend.
std::vector<ProbePoint> gradient_vanishing_probe(const sim::Generator& gen,
                                                 const sim::Summary& x_obs,
                                                 const ProbeConfig& cfg, Rng& rng);

} // namespace lfi::baselines

#endif
