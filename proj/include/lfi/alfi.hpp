#ifndef LFI_ALFI_HPP
#define LFI_ALFI_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lfi/dist.hpp"
#include "lfi/nn.hpp"
#include "lfi/rng.hpp"
#include "lfi/sim.hpp"

namespace lfi::alfi {

struct AlfiConfig {
    std::size_t t_outer = 100;      // outer iterations
    std::size_t m_inner = 5;        // MH steps per particle per iteration
    std::size_t l_updates = 10;     // gradient steps per network per iteration
    std::size_t n_particles = 100;
    std::vector<double> proposal_step;  // empty -> 5% of box width per dim
    dist::Family family = dist::Family::Beta;
    double lr_disc = 1e-3;
    double lr_enc = 3e-3;
    double clip_c = 0.1;            // discriminator weight clip
    std::size_t minibatch = 256;    // encoder replay minibatch
    std::vector<std::size_t> hidden{64, 64};
    // relu keeps critic gradients alive off the observation; a tanh critic
    // tends to saturate into a one-sided step at the single real point
    nn::Activation disc_activation = nn::Activation::Relu;
    std::uint64_t seed = 0;
    std::size_t threads = 0;        // 0 -> hardware concurrency
    std::size_t mode_window = 10;   // trailing iterations scanned for the mode

    std::vector<double> resolved_step(const sim::Box& box) const;
    void validate(const sim::Box& box) const;
};

struct ParticleEnsemble {
    std::vector<sim::ParamVector> particles;
    std::size_t iteration = 0;
};

// Everything the generator produced so far; the encoder trains on all of it.
struct Replay {
    std::vector<sim::ParamVector> thetas;
    std::vector<sim::Summary> summaries;
    std::size_t size() const { return thetas.size(); }
};

// Fixed affine input normalization (z = (x - shift) / scale).
struct InputScaler {
    std::vector<double> shift;
    std::vector<double> scale;

    static InputScaler identity(std::size_t dim);
    static InputScaler from_box(const sim::Box& box);  // box -> [-1,1]^d
    static InputScaler from_batch(const std::vector<sim::Summary>& batch);
    std::vector<double> apply(std::span<const double> x) const;
};

struct AlfiState {
    nn::Network discriminator;  // summary -> (0,1)
    nn::Network encoder;        // theta -> shape parameters
    nn::OptimizerState disc_opt;
    nn::OptimizerState enc_opt;
    ParticleEnsemble ensemble;
    Replay replay;
    sim::Box box;
    sim::Summary x_obs;
    dist::Family family = dist::Family::Beta;
    dist::Transform transform;      // identity (beta) or cot_sigmoid at d_obs
    double d_obs = 0.5;             // cached d_phi(x_obs), clamped to (0,1)
    InputScaler x_scaler;           // summary normalization, frozen after set
    InputScaler theta_scaler;       // box -> [-1,1]^d
    bool x_scaler_set = false;
    std::size_t boundary_hits = 0;  // encoder targets clamped at 0/1

    // d_phi on a raw summary (normalization applied internally).
    double discriminator_value(std::span<const double> summary) const;
    // Encoder shape parameters at theta.
    dist::ShapeParams encoder_shapes(const sim::ParamVector& theta) const;
    // Recompute the cached d_obs (and the transform center) from x_obs.
    void refresh_d_obs();
};

// Fresh state with seeded networks and a uniform particle ensemble.
AlfiState make_state(const AlfiConfig& cfg, const sim::Generator& gen,
                     const sim::Summary& x_obs);

// Random-walk proposal reflected at the box faces; the reflected kernel is
// symmetric, so no proposal correction enters the acceptance ratio.
sim::ParamVector mh_propose(const sim::ParamVector& theta, const sim::Box& box,
                            std::span<const double> step, Rng& rng);

// log f(h(d_obs); s_psi(theta)) without the |h'(d_obs)| factor, which is
// identical for every theta and cancels from every ratio.
double log_density_core(const AlfiState& state, const sim::ParamVector& theta);

// min(1, exp(core(proposed) - core(current))).
double acceptance_ratio(const sim::ParamVector& proposed, const sim::ParamVector& current,
                        const AlfiState& state);

// m reflected-walk accept/reject steps per particle, one RNG substream each.
// Returns the fraction of accepted proposals.
double mh_sweep(AlfiState& state, std::size_t m, std::span<const double> step,
                Rng& rng, std::size_t threads = 0);

// One simulation per particle with fresh seeds; results are appended to the
// replay.  Failed particles are rolled back to `fallback` (their pre-sweep
// positions) and excluded from the replay, never dropped from the ensemble.
struct EvaluationOutcome {
    std::vector<std::pair<sim::ParamVector, sim::Summary>> evaluated;
    std::size_t failures = 0;
};
EvaluationOutcome evaluate_particles(AlfiState& state, const sim::Generator& gen,
                                     Rng& rng, const std::vector<sim::ParamVector>* fallback = nullptr,
                                     std::size_t threads = 0);

// l gradient steps on the separation loss -d(x_obs) + mean d(fakes), weights
// clipped to [-c,c] after each step, d_obs cache refreshed.  Returns the
// last batch loss.
double discriminator_update(AlfiState& state, const std::vector<sim::Summary>& fakes,
                            std::size_t l, double lr, double c);

// l gradient steps on the replay negative log-likelihood (minibatched);
// discriminator outputs are constants here.  Returns the last batch loss.
double encoder_update(AlfiState& state, std::size_t l, double lr,
                      std::size_t minibatch, Rng& rng);

// Full log-likelihood estimate log f(h(d_obs); s_psi(theta)) + log|h'(d_obs)|.
double estimate_loglik(const AlfiState& state, const sim::ParamVector& theta);

struct IterationDiag {
    std::size_t iteration = 0;
    double acceptance_rate = 0.0;
    double loss_disc = 0.0;
    double loss_enc = 0.0;
    double d_obs = 0.5;
    std::size_t failures = 0;
};

struct PhaseTimings {
    double simulate_seconds = 0.0;
    double sample_seconds = 0.0;
    double optimize_seconds = 0.0;
};

struct AlfiResult {
    std::vector<std::vector<sim::ParamVector>> history;  // per-iteration ensembles
    std::vector<IterationDiag> diagnostics;
    sim::ParamVector mode;
    PhaseTimings timings;
    std::size_t simulate_calls = 0;
    AlfiState state;  // final networks and ensemble
    bool aborted = false;
    std::string error;
};

// Argmax of estimate_loglik over the trailing `window` ensembles, scanned in
// chronological order with ties kept at the first (lowest-index) particle.
sim::ParamVector posterior_mode(const std::vector<std::vector<sim::ParamVector>>& history,
                                const AlfiState& state, std::size_t window = 10);

AlfiResult run(const AlfiConfig& cfg, const sim::Generator& gen, const sim::Summary& x_obs);

} // namespace lfi::alfi

#endif
