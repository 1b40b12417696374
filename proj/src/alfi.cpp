#include "lfi/alfi.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>

#include <boost/math/special_functions/digamma.hpp>

#include "lfi/errors.hpp"
#include "lfi/util.hpp"

namespace lfi::alfi {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double reflect_into(double x, double lo, double hi) {
    const double width = hi - lo;
    double rel = std::fmod(x - lo, 2.0 * width);
    if (rel < 0.0) rel += 2.0 * width;
    return rel <= width ? lo + rel : lo + 2.0 * width - rel;
}

} // namespace

std::vector<double> AlfiConfig::resolved_step(const sim::Box& box) const {
    if (!proposal_step.empty()) return proposal_step;
    std::vector<double> step(box.dim());
    for (std::size_t i = 0; i < box.dim(); ++i) step[i] = 0.05 * box.width(i);
    return step;
}

void AlfiConfig::validate(const sim::Box& box) const {
    if (t_outer == 0 || m_inner == 0 || l_updates == 0 || n_particles == 0)
        throw ConfigError("alfi: iteration counts must all be >= 1");
    if (mode_window == 0) throw ConfigError("alfi: mode_window must be >= 1");
    if (minibatch == 0) throw ConfigError("alfi: minibatch must be >= 1");
    if (!(lr_disc > 0.0) || !(lr_enc > 0.0)) throw ConfigError("alfi: learning rates must be positive");
    if (!(clip_c > 0.0)) throw ConfigError("alfi: clip constant must be positive");
    if (!proposal_step.empty()) {
        if (proposal_step.size() != box.dim())
            throw ConfigError("alfi: proposal_step dimension mismatch");
        for (double s : proposal_step)
            if (!(s > 0.0)) throw ConfigError("alfi: proposal_step must be positive");
    }
}

InputScaler InputScaler::identity(std::size_t dim) {
    return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

InputScaler InputScaler::from_box(const sim::Box& box) {
    InputScaler s;
    s.shift.resize(box.dim());
    s.scale.resize(box.dim());
    for (std::size_t i = 0; i < box.dim(); ++i) {
        s.shift[i] = 0.5 * (box.lower[i] + box.upper[i]);
        s.scale[i] = 0.5 * box.width(i);
    }
    return s;
}

InputScaler InputScaler::from_batch(const std::vector<sim::Summary>& batch) {
    if (batch.empty()) throw DomainError("InputScaler: empty batch");
    const std::size_t dim = batch.front().size();
    InputScaler s;
    s.shift.assign(dim, 0.0);
    s.scale.assign(dim, 1.0);
    for (const auto& x : batch)
        for (std::size_t i = 0; i < dim; ++i) s.shift[i] += x[i];
    for (auto& v : s.shift) v /= static_cast<double>(batch.size());
    for (std::size_t i = 0; i < dim; ++i) {
        double var = 0.0;
        for (const auto& x : batch) {
            const double d = x[i] - s.shift[i];
            var += d * d;
        }
        var /= static_cast<double>(batch.size());
        const double sd = std::sqrt(var);
        s.scale[i] = std::max(sd, 1e-3 * (1.0 + std::abs(s.shift[i])));
    }
    return s;
}

std::vector<double> InputScaler::apply(std::span<const double> x) const {
    if (x.size() != shift.size()) throw ShapeError("InputScaler: dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - shift[i]) / scale[i];
    return out;
}

double AlfiState::discriminator_value(std::span<const double> summary) const {
    return nn::forward(discriminator, x_scaler.apply(summary))[0];
}

dist::ShapeParams AlfiState::encoder_shapes(const sim::ParamVector& theta) const {
    const auto out = nn::forward(encoder, theta_scaler.apply(theta));
    return {family, {out[0], out[1]}};
}

void AlfiState::refresh_d_obs() {
    d_obs = dist::clamp_unit(discriminator_value(x_obs), dist::kUnitClamp);
    if (transform.kind == dist::TransformKind::CotSigmoid) transform.center = d_obs;
}

AlfiState make_state(const AlfiConfig& cfg, const sim::Generator& gen,
                     const sim::Summary& x_obs) {
    cfg.validate(gen.box());
    if (x_obs.size() != gen.summary_dim())
        throw ShapeError("alfi: observation length does not match generator summary");
    if (!all_finite(x_obs)) throw NumericError("alfi: non-finite observation");

    Rng rng(cfg.seed);
    AlfiState st;
    st.box = gen.box();
    st.x_obs = x_obs;
    st.family = cfg.family;
    st.transform = cfg.family == dist::Family::Beta
                       ? dist::Transform{dist::TransformKind::Identity, 0.5}
                       : dist::Transform{dist::TransformKind::CotSigmoid, 0.5};

    std::vector<std::size_t> disc_dims{gen.summary_dim()};
    for (auto h : cfg.hidden) disc_dims.push_back(h);
    disc_dims.push_back(1);
    Rng disc_rng = rng.sub("disc_init");
    st.discriminator = nn::make_network(disc_dims, cfg.disc_activation,
                                        nn::Head::SigmoidScalar, {}, disc_rng);
    st.disc_opt = nn::make_optimizer_state(st.discriminator);

    std::vector<std::size_t> enc_dims{gen.param_dim()};
    for (auto h : cfg.hidden) enc_dims.push_back(h);
    enc_dims.push_back(dist::kShapeCount);
    std::vector<nn::OutputMap> maps =
        cfg.family == dist::Family::Beta
            ? std::vector<nn::OutputMap>{nn::OutputMap::SoftplusPos, nn::OutputMap::SoftplusPos}
            : std::vector<nn::OutputMap>{nn::OutputMap::Linear, nn::OutputMap::SoftplusPos};
    Rng enc_rng = rng.sub("enc_init");
    st.encoder = nn::make_network(enc_dims, nn::Activation::Tanh, nn::Head::ShapeHead,
                                  std::move(maps), enc_rng);
    st.enc_opt = nn::make_optimizer_state(st.encoder);

    st.theta_scaler = InputScaler::from_box(st.box);
    st.x_scaler = InputScaler::identity(gen.summary_dim());

    Rng part_rng = rng.sub("particles");
    st.ensemble.particles.resize(cfg.n_particles);
    for (auto& p : st.ensemble.particles) p = st.box.sample(part_rng);
    st.ensemble.iteration = 0;

    st.refresh_d_obs();
    return st;
}

sim::ParamVector mh_propose(const sim::ParamVector& theta, const sim::Box& box,
                            std::span<const double> step, Rng& rng) {
    if (theta.size() != box.dim() || step.size() != box.dim())
        throw ShapeError("mh_propose: dimension mismatch");
    sim::ParamVector proposal(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double moved = theta[i] + step[i] * rng.normal();
        proposal[i] = reflect_into(moved, box.lower[i], box.upper[i]);
    }
    return proposal;
}

double log_density_core(const AlfiState& state, const sim::ParamVector& theta) {
    const dist::ShapeParams shapes = state.encoder_shapes(theta);
    double value;
    if (state.family == dist::Family::Beta) {
        value = dist::beta_logpdf(state.d_obs, shapes.values[0], shapes.values[1]);
    } else {
        const dist::HValue h = dist::h_transform(state.transform, state.d_obs);
        value = dist::gaussian_logpdf(h.value, shapes.values[0], shapes.values[1]);
    }
    if (!std::isfinite(value))
        throw NumericError("alfi: non-finite log density (shapes " +
                           std::to_string(shapes.values[0]) + ", " +
                           std::to_string(shapes.values[1]) + ")");
    return value;
}

double acceptance_ratio(const sim::ParamVector& proposed, const sim::ParamVector& current,
                        const AlfiState& state) {
    if (!state.box.contains(proposed) || !state.box.contains(current))
        throw DomainError("acceptance_ratio: parameters must lie inside the box");
    const double delta = log_density_core(state, proposed) - log_density_core(state, current);
    // the ratio of two positive densities stays in (0,1]; keep the contract
    // where exp() would underflow to zero
    return std::min(1.0, std::max(std::exp(delta), std::numeric_limits<double>::min()));
}

double estimate_loglik(const AlfiState& state, const sim::ParamVector& theta) {
    if (!state.box.contains(theta))
        throw DomainError("estimate_loglik: parameter outside the box");
    const dist::HValue h = dist::h_transform(state.transform, state.d_obs);
    return log_density_core(state, theta) + std::log(std::abs(h.deriv));
}

double mh_sweep(AlfiState& state, std::size_t m, std::span<const double> step,
                Rng& rng, std::size_t threads) {
    if (m == 0) throw ConfigError("mh_sweep: m must be >= 1");
    const std::size_t n = state.ensemble.particles.size();
    std::vector<std::size_t> accepted(n, 0);
    const std::uint64_t sweep_index = state.ensemble.iteration;

    parallel_for(
        n,
        [&](std::size_t i) {
            Rng chain = rng.sub("mh", sweep_index * n + i);
            sim::ParamVector current = state.ensemble.particles[i];
            double current_core = log_density_core(state, current);
            for (std::size_t s = 0; s < m; ++s) {
                sim::ParamVector proposal = mh_propose(current, state.box, step, chain);
                const double proposal_core = log_density_core(state, proposal);
                const double log_ratio = proposal_core - current_core;
                const double u = chain.uniform01();
                if (std::log(u) < std::min(0.0, log_ratio)) {
                    current = std::move(proposal);
                    current_core = proposal_core;
                    accepted[i] += 1;
                }
            }
            state.ensemble.particles[i] = std::move(current);
        },
        threads);

    std::size_t total = 0;
    for (auto a : accepted) total += a;
    return static_cast<double>(total) / static_cast<double>(n * m);
}

EvaluationOutcome evaluate_particles(AlfiState& state, const sim::Generator& gen,
                                     Rng& rng, const std::vector<sim::ParamVector>* fallback,
                                     std::size_t threads) {
    const std::size_t n = state.ensemble.particles.size();
    if (n == 0) throw ConfigError("evaluate_particles: empty ensemble");
    const std::uint64_t round = state.ensemble.iteration;

    std::vector<sim::Summary> results(n);
    std::vector<char> ok(n, 0);
    parallel_for(
        n,
        [&](std::size_t i) {
            const std::uint64_t seed = rng.sub("simulate", round * n + i).key();
            try {
                results[i] = gen.simulate(state.ensemble.particles[i], seed);
                ok[i] = 1;
            } catch (const SimulationError&) {
                ok[i] = 0;
            }
        },
        threads);

    EvaluationOutcome out;
    for (std::size_t i = 0; i < n; ++i) {
        if (ok[i]) {
            out.evaluated.emplace_back(state.ensemble.particles[i], results[i]);
            state.replay.thetas.push_back(state.ensemble.particles[i]);
            state.replay.summaries.push_back(std::move(results[i]));
        } else {
            out.failures += 1;
            std::cerr << "[alfi] warning: simulation failed for particle " << i
                      << "; keeping previous position\n";
            if (fallback && fallback->size() == n)
                state.ensemble.particles[i] = (*fallback)[i];
        }
    }
    return out;
}

double discriminator_update(AlfiState& state, const std::vector<sim::Summary>& fakes,
                            std::size_t l, double lr, double c) {
    if (fakes.empty()) throw ConfigError("discriminator_update: empty fake batch");
    if (l == 0) throw ConfigError("discriminator_update: l must be >= 1");

    double loss = 0.0;
    const double fake_w = 1.0 / static_cast<double>(fakes.size());
    for (std::size_t step = 0; step < l; ++step) {
        nn::Gradients total = nn::zero_gradients(state.discriminator);

        nn::Trace trace;
        const auto obs_in = state.x_scaler.apply(state.x_obs);
        const double d_obs_raw = nn::forward(state.discriminator, obs_in, trace)[0];
        const double up_obs[] = {-1.0};
        nn::accumulate(total, nn::backward(state.discriminator, trace, up_obs));

        double fake_mean = 0.0;
        for (const auto& fake : fakes) {
            const auto in = state.x_scaler.apply(fake);
            const double d_fake = nn::forward(state.discriminator, in, trace)[0];
            fake_mean += fake_w * d_fake;
            const double up_fake[] = {fake_w};
            nn::accumulate(total, nn::backward(state.discriminator, trace, up_fake));
        }

        loss = -d_obs_raw + fake_mean;
        if (!std::isfinite(loss)) throw NumericError("discriminator_update: non-finite loss");
        nn::adam_step(state.discriminator, total, state.disc_opt, lr);
        nn::clip_weights(state.discriminator, c);
    }
    state.refresh_d_obs();
    return loss;
}

namespace {

// d(-log f)/d(shapes) at a fixed target.
std::array<double, 2> nll_shape_grad(dist::Family family, const std::array<double, 2>& shapes,
                                     double target) {
    if (family == dist::Family::Beta) {
        const double alpha = shapes[0];
        const double beta = shapes[1];
        const double psi_ab = boost::math::digamma(alpha + beta);
        return {-(std::log(target) + psi_ab - boost::math::digamma(alpha)),
                -(std::log1p(-target) + psi_ab - boost::math::digamma(beta))};
    }
    const double mu = shapes[0];
    const double sigma = shapes[1];
    const double z = (target - mu) / sigma;
    return {-z / sigma, 1.0 / sigma - z * z / sigma};
}

double nll_value(dist::Family family, const std::array<double, 2>& shapes, double target) {
    if (family == dist::Family::Beta)
        return -dist::beta_logpdf(target, shapes[0], shapes[1]);
    return -dist::gaussian_logpdf(target, shapes[0], shapes[1]);
}

} // namespace

double encoder_update(AlfiState& state, std::size_t l, double lr,
                      std::size_t minibatch, Rng& rng) {
    if (state.replay.size() == 0) throw ConfigError("encoder_update: empty replay");
    if (l == 0) throw ConfigError("encoder_update: l must be >= 1");

    const std::size_t replay_n = state.replay.size();
    const std::size_t batch = std::min(minibatch, replay_n);
    double loss = 0.0;

    for (std::size_t step = 0; step < l; ++step) {
        nn::Gradients total = nn::zero_gradients(state.encoder);
        double batch_loss = 0.0;
        const double w = 1.0 / static_cast<double>(batch);

        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t idx = batch == replay_n
                                        ? b
                                        : static_cast<std::size_t>(rng.below(replay_n));
            // Discriminator outputs are constants for the encoder: recompute
            // the target from the stored summary under the current weights.
            const double y_raw = state.discriminator_value(state.replay.summaries[idx]);
            const double y = dist::clamp_unit(y_raw, dist::kUnitClamp);
            if (y != y_raw) state.boundary_hits += 1;
            double target = y;
            if (state.family == dist::Family::Gaussian)
                target = dist::h_transform(state.transform, y).value;

            nn::Trace trace;
            const auto theta_in = state.theta_scaler.apply(state.replay.thetas[idx]);
            const auto shapes_out = nn::forward(state.encoder, theta_in, trace);
            const std::array<double, 2> shapes{shapes_out[0], shapes_out[1]};
            batch_loss += w * nll_value(state.family, shapes, target);

            auto grad = nll_shape_grad(state.family, shapes, target);
            const double upstream[] = {w * grad[0], w * grad[1]};
            nn::accumulate(total, nn::backward(state.encoder, trace, upstream));
        }

        if (!std::isfinite(batch_loss)) throw NumericError("encoder_update: non-finite loss");
        if (lr > 0.0) nn::adam_step(state.encoder, total, state.enc_opt, lr);
        loss = batch_loss;
    }
    return loss;
}

sim::ParamVector posterior_mode(const std::vector<std::vector<sim::ParamVector>>& history,
                                const AlfiState& state, std::size_t window) {
    if (history.empty() || history.back().empty())
        throw ConfigError("posterior_mode: empty ensemble history");
    window = std::max<std::size_t>(1, window);
    const std::size_t first = history.size() > window ? history.size() - window : 0;

    const sim::ParamVector* best = nullptr;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t it = first; it < history.size(); ++it) {
        for (const auto& theta : history[it]) {
            const double ll = estimate_loglik(state, theta);
            if (ll > best_ll) {
                best_ll = ll;
                best = &theta;
            }
        }
    }
    return *best;
}

AlfiResult run(const AlfiConfig& cfg, const sim::Generator& gen, const sim::Summary& x_obs) {
    AlfiResult result;
    result.state = make_state(cfg, gen, x_obs);
    AlfiState& st = result.state;
    const auto step = cfg.resolved_step(gen.box());
    Rng rng = Rng(cfg.seed).sub("alfi_run");

    result.history.reserve(cfg.t_outer);
    result.diagnostics.reserve(cfg.t_outer);

    try {
        for (std::size_t t = 0; t < cfg.t_outer; ++t) {
            IterationDiag diag;
            diag.iteration = t;

            const auto pre_sweep = st.ensemble.particles;

            const auto t_sample = Clock::now();
            diag.acceptance_rate = mh_sweep(st, cfg.m_inner, step, rng, cfg.threads);
            result.timings.sample_seconds += seconds_since(t_sample);

            const auto t_sim = Clock::now();
            const auto evaluation = evaluate_particles(st, gen, rng, &pre_sweep, cfg.threads);
            result.timings.simulate_seconds += seconds_since(t_sim);
            result.simulate_calls += st.ensemble.particles.size();
            diag.failures = evaluation.failures;

            const auto t_opt = Clock::now();
            if (!st.x_scaler_set && !st.replay.summaries.empty()) {
                auto with_obs = st.replay.summaries;
                with_obs.push_back(st.x_obs);
                st.x_scaler = InputScaler::from_batch(with_obs);
                st.x_scaler_set = true;
                st.refresh_d_obs();
            }
            if (!evaluation.evaluated.empty()) {
                std::vector<sim::Summary> fakes;
                fakes.reserve(evaluation.evaluated.size());
                for (const auto& [theta, summary] : evaluation.evaluated)
                    fakes.push_back(summary);
                diag.loss_disc =
                    discriminator_update(st, fakes, cfg.l_updates, cfg.lr_disc, cfg.clip_c);
                Rng enc_rng = rng.sub("enc_batch", t);
                diag.loss_enc =
                    encoder_update(st, cfg.l_updates, cfg.lr_enc, cfg.minibatch, enc_rng);
            }
            result.timings.optimize_seconds += seconds_since(t_opt);

            diag.d_obs = st.d_obs;
            st.ensemble.iteration = t + 1;
            result.history.push_back(st.ensemble.particles);
            result.diagnostics.push_back(diag);
        }
        result.mode = posterior_mode(result.history, st, cfg.mode_window);
    } catch (const std::exception& e) {
        result.aborted = true;
        result.error = e.what();
        try {
            result.mode = result.history.empty()
                              ? gen.box().center()
                              : posterior_mode(result.history, st, cfg.mode_window);
        } catch (const std::exception&) {
            result.mode = gen.box().center();
        }
    }
    return result;
}

} // namespace lfi::alfi
