#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numeric>

#include "lfi/alfi.hpp"
#include "lfi/errors.hpp"
#include "oracles.hpp"

using namespace lfi;

namespace {

// softplus inverse, for planting exact shape-head outputs
double splus_inv(double y) { return std::log(std::expm1(y)); }

// shape-head net {1 -> 2} with chosen affine pre-head rows
nn::Network linear_shape_net(double w_a, double b_a, double w_b, double b_b) {
    Rng rng(1);
    auto net = nn::make_network({1, 2}, nn::Activation::Tanh, nn::Head::ShapeHead,
                                {nn::OutputMap::SoftplusPos, nn::OutputMap::SoftplusPos},
                                rng);
    net.weights[0] = {w_a, w_b};
    net.biases[0] = {b_a, b_b};
    return net;
}

nn::Network zero_sigmoid_net(std::size_t q) {
    Rng rng(2);
    auto net = nn::make_network({q, 1}, nn::Activation::Tanh, nn::Head::SigmoidScalar,
                                {}, rng);
    net.weights[0].assign(net.weights[0].size(), 0.0);
    net.biases[0].assign(1, 0.0);
    return net;
}

// Hand-assembled 1-d state over [0,1] with d_obs pinned at 0.5 by a
// zero-weight discriminator.
alfi::AlfiState handmade_state(nn::Network encoder, std::size_t n_particles,
                               std::uint64_t seed) {
    alfi::AlfiState st;
    st.box = sim::Box({0.0}, {1.0});
    st.x_obs = {0.09};
    st.family = dist::Family::Beta;
    st.transform = {dist::TransformKind::Identity, 0.5};
    st.discriminator = zero_sigmoid_net(1);
    st.disc_opt = nn::make_optimizer_state(st.discriminator);
    st.encoder = std::move(encoder);
    st.enc_opt = nn::make_optimizer_state(st.encoder);
    st.theta_scaler = alfi::InputScaler::from_box(st.box);
    st.x_scaler = alfi::InputScaler::identity(1);
    st.x_scaler_set = true;
    Rng rng(seed);
    st.ensemble.particles.resize(n_particles);
    for (auto& p : st.ensemble.particles) p = st.box.sample(rng);
    st.refresh_d_obs();
    return st;
}

// Deterministic pass-through generator g(theta, u) = theta with call counting.
// simulate() fans out to worker threads, so the recording is mutex-guarded.
class CountingGenerator : public sim::Generator {
public:
    CountingGenerator()
        : Generator("counting", sim::Box({0.0}, {1.0}), 1) {}
    mutable std::atomic<std::size_t> calls{0};
    mutable std::mutex mu;
    mutable std::vector<double> first_draws;

protected:
    sim::Summary run(const sim::ParamVector& theta, Rng& rng) const override {
        calls += 1;
        const double draw = rng.uniform01();
        {
            std::lock_guard<std::mutex> lock(mu);
            first_draws.push_back(draw);
        }
        return {theta[0]};
    }
};

// Fails for theta above the cut, otherwise passes theta through.
class FragileGenerator : public sim::Generator {
public:
    explicit FragileGenerator(double cut)
        : Generator("fragile", sim::Box({0.0}, {1.0}), 1), cut_(cut) {}

protected:
    sim::Summary run(const sim::ParamVector& theta, Rng&) const override {
        if (theta[0] > cut_) throw SimulationError("fragile: above cut", theta);
        return {theta[0]};
    }

private:
    double cut_;
};

} // namespace

TEST_CASE("mh_propose: zero step keeps theta fixed") {
    const sim::Box box({0.0, -1.0}, {1.0, 2.0});
    Rng rng(3);
    const sim::ParamVector theta{0.4, 0.7};
    const auto prop = alfi::mh_propose(theta, box, std::vector<double>{0.0, 0.0}, rng);
    CHECK(prop == theta);
}

TEST_CASE("mh_propose: proposals always land inside the box") {
    const sim::Box box({0.0}, {1.0});
    Rng rng(4);
    sim::ParamVector theta{0.001};  // on the lower face
    for (int i = 0; i < 20000; ++i) {
        const auto prop = alfi::mh_propose(theta, box, std::vector<double>{0.7}, rng);
        REQUIRE(prop[0] >= 0.0);
        REQUIRE(prop[0] <= 1.0);
    }
}

TEST_CASE("mh_propose: reflected kernel is empirically symmetric") {
    const sim::Box box({0.0}, {1.0});
    const std::vector<double> step{0.25};
    const double a = 0.5;
    const double b = 0.07;  // near the lower face, where reflection matters
    const double half_bin = 0.02;
    Rng rng(5);
    std::size_t a_to_b = 0, b_to_a = 0;
    const std::size_t n = 100000;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(alfi::mh_propose({a}, box, step, rng)[0] - b) < half_bin) ++a_to_b;
        if (std::abs(alfi::mh_propose({b}, box, step, rng)[0] - a) < half_bin) ++b_to_a;
    }
    // two-sample proportion comparison, 4 sigma
    const double p = static_cast<double>(a_to_b + b_to_a) / (2.0 * n);
    const double se = std::sqrt(2.0 * p * (1.0 - p) * n);
    CHECK(std::abs(static_cast<double>(a_to_b) - static_cast<double>(b_to_a)) <
          4.0 * se);
}

TEST_CASE("acceptance_ratio: staying put is certain") {
    auto st = handmade_state(linear_shape_net(1.0, 0.5, -0.4, 0.8), 4, 6);
    const sim::ParamVector theta{0.3};
    CHECK(alfi::acceptance_ratio(theta, theta, st) == 1.0);
}

TEST_CASE("acceptance_ratio: constant encoder accepts everything") {
    auto enc = linear_shape_net(0.0, 0.25, 0.0, -0.3);
    auto st = handmade_state(std::move(enc), 4, 7);
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const sim::ParamVector a{rng.uniform01()};
        const sim::ParamVector b{rng.uniform01()};
        CHECK(alfi::acceptance_ratio(a, b, st) == 1.0);
    }
}

TEST_CASE("acceptance_ratio: closed-form beta ratio at d_obs = 0.5") {
    // plant shapes (1,1) at theta=0.25 and (2,2) at theta=0.75
    const double x1 = -0.5, x2 = 0.5;  // scaled inputs
    const double t1 = splus_inv(1.0 - 1e-3), t2 = splus_inv(2.0 - 1e-3);
    const double w = (t2 - t1) / (x2 - x1);
    const double b = t1 - w * x1;
    auto st = handmade_state(linear_shape_net(w, b, w, b), 4, 9);
    REQUIRE(st.d_obs == 0.5);

    const auto shapes1 = st.encoder_shapes({0.25});
    CHECK(shapes1.values[0] == doctest::Approx(1.0).epsilon(1e-9));
    const auto shapes2 = st.encoder_shapes({0.75});
    CHECK(shapes2.values[0] == doctest::Approx(2.0).epsilon(1e-9));

    // f(0.5; 2,2) = 1.5, f(0.5; 1,1) = 1
    CHECK(alfi::acceptance_ratio({0.75}, {0.25}, st) == 1.0);
    CHECK(alfi::acceptance_ratio({0.25}, {0.75}, st) ==
          doctest::Approx(1.0 / 1.5).epsilon(1e-9));
}

TEST_CASE("mh_sweep: constant encoder gives a pure reflected walk") {
    auto st = handmade_state(linear_shape_net(0.0, 0.2, 0.0, 0.2), 50, 10);
    Rng rng(11);
    const double rate = alfi::mh_sweep(st, 8, std::vector<double>{0.05}, rng);
    CHECK(rate == 1.0);
    for (const auto& p : st.ensemble.particles) {
        CHECK(p[0] >= 0.0);
        CHECK(p[0] <= 1.0);
    }
}

TEST_CASE("mh_sweep: identical seeds give identical trajectories") {
    auto run_once = [] {
        auto st = handmade_state(linear_shape_net(1.3, 0.4, -0.8, 0.9), 30, 12);
        Rng rng(13);
        for (int sweep = 0; sweep < 5; ++sweep) {
            alfi::mh_sweep(st, 3, std::vector<double>{0.08}, rng);
            st.ensemble.iteration += 1;
        }
        return st.ensemble.particles;
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("mh_sweep: frozen-kernel stationarity on a 200-bin grid") {
    // monotone shape maps make the frozen target genuinely theta-dependent
    const double t1 = splus_inv(0.8), t2 = splus_inv(3.0);
    const double w_a = (t2 - t1) / 2.0, b_a = (t2 + t1) / 2.0;
    const double u1 = splus_inv(2.5), u2 = splus_inv(0.9);
    const double w_b = (u2 - u1) / 2.0, b_b = (u2 + u1) / 2.0;
    auto st = handmade_state(linear_shape_net(w_a, b_a, w_b, b_b), 1000, 14);

    const std::vector<double> step{0.2};
    Rng rng(15);
    const std::size_t bins = 200;
    std::vector<double> hist(bins, 0.0);
    const std::size_t burnin = 300, keep = 1000;
    for (std::size_t sweep = 0; sweep < burnin + keep; ++sweep) {
        alfi::mh_sweep(st, 1, step, rng);
        st.ensemble.iteration += 1;
        if (sweep >= burnin) {
            for (const auto& p : st.ensemble.particles) {
                auto bin = static_cast<std::size_t>(p[0] * bins);
                hist[std::min(bin, bins - 1)] += 1.0;
            }
        }
    }
    const double total = keep * 1000.0;
    for (auto& h : hist) h /= total;

    std::vector<double> target(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        const double theta = (static_cast<double>(i) + 0.5) / bins;
        target[i] = std::exp(alfi::log_density_core(st, {theta}));
    }
    const double z = std::accumulate(target.begin(), target.end(), 0.0);
    for (auto& t : target) t /= z;

    CHECK(oracles::tv_distance(hist, target) < 0.08);
}

TEST_CASE("detailed balance of the frozen kernel on a 50-bin grid") {
    const double t1 = splus_inv(0.8), t2 = splus_inv(3.0);
    const double w_a = (t2 - t1) / 2.0, b_a = (t2 + t1) / 2.0;
    auto st = handmade_state(linear_shape_net(w_a, b_a, 0.0, splus_inv(1.5)), 1, 16);

    const std::size_t bins = 50;
    std::vector<std::vector<double>> flow(bins, std::vector<double>(bins, 0.0));
    auto bin_of = [&](double x) {
        return std::min(static_cast<std::size_t>(x * bins), bins - 1);
    };

    Rng rng(17);
    Rng chain = rng.sub("chain");
    sim::ParamVector current{0.5};
    double core = alfi::log_density_core(st, current);
    const std::vector<double> step{0.2};
    const std::size_t burnin = 20000, n = 1000000;
    for (std::size_t i = 0; i < burnin + n; ++i) {
        const auto prop = alfi::mh_propose(current, st.box, step, chain);
        const double prop_core = alfi::log_density_core(st, prop);
        const double u = chain.uniform01();
        const auto from = bin_of(current[0]);
        if (std::log(u) < std::min(0.0, prop_core - core)) {
            current = prop;
            core = prop_core;
        }
        if (i >= burnin) flow[from][bin_of(current[0])] += 1.0;
    }

    for (std::size_t a = 0; a < bins; ++a) {
        for (std::size_t b = a + 1; b < bins; ++b) {
            const double diff = flow[a][b] - flow[b][a];
            const double se = std::sqrt(flow[a][b] + flow[b][a] + 1.0);
            CHECK(std::abs(diff) < 4.0 * se);
        }
    }
}

TEST_CASE("dropping the h-Jacobian changes no acceptance decision") {
    for (const auto family : {dist::Family::Beta, dist::Family::Gaussian}) {
        auto st = handmade_state(linear_shape_net(0.9, 0.6, -0.5, 0.7), 1, 18);
        st.family = family;
        if (family == dist::Family::Gaussian) {
            st.encoder.output_maps = {nn::OutputMap::Linear, nn::OutputMap::SoftplusPos};
            st.transform = {dist::TransformKind::CotSigmoid, st.d_obs};
        }

        auto run_chain = [&](bool with_jacobian) {
            Rng chain(19);
            sim::ParamVector current{0.4};
            std::vector<double> visited;
            const std::vector<double> step{0.1};
            for (int i = 0; i < 20000; ++i) {
                const auto prop = alfi::mh_propose(current, st.box, step, chain);
                const double delta =
                    with_jacobian
                        ? alfi::estimate_loglik(st, prop) - alfi::estimate_loglik(st, current)
                        : alfi::log_density_core(st, prop) -
                              alfi::log_density_core(st, current);
                if (std::log(chain.uniform01()) < std::min(0.0, delta)) current = prop;
                visited.push_back(current[0]);
            }
            return visited;
        };
        CHECK(run_chain(true) == run_chain(false));
    }
}

TEST_CASE("evaluate_particles: one call per particle with fresh seeds") {
    CountingGenerator gen;
    auto st = handmade_state(linear_shape_net(0.0, 0.2, 0.0, 0.2), 100, 20);
    Rng rng(21);
    const auto outcome = alfi::evaluate_particles(st, gen, rng);
    CHECK(gen.calls == 100);
    CHECK(outcome.evaluated.size() == 100);
    CHECK(st.replay.size() == 100);
    for (std::size_t i = 0; i < 100; ++i)
        CHECK(outcome.evaluated[i].second[0] == st.ensemble.particles[i][0]);

    // distinct noise streams: the first uniform draw differs across calls
    auto draws = gen.first_draws;
    std::sort(draws.begin(), draws.end());
    CHECK(std::adjacent_find(draws.begin(), draws.end()) == draws.end());
}

TEST_CASE("evaluate_particles: n=1 runs exactly one simulation") {
    CountingGenerator gen;
    auto st = handmade_state(linear_shape_net(0.0, 0.2, 0.0, 0.2), 1, 22);
    Rng rng(23);
    alfi::evaluate_particles(st, gen, rng);
    CHECK(gen.calls == 1);
}

TEST_CASE("evaluate_particles: failures roll back and are excluded from replay") {
    FragileGenerator gen(0.5);
    auto st = handmade_state(linear_shape_net(0.0, 0.2, 0.0, 0.2), 40, 24);
    std::vector<sim::ParamVector> fallback(40, sim::ParamVector{0.25});
    std::size_t expected_failures = 0;
    for (const auto& p : st.ensemble.particles)
        if (p[0] > 0.5) ++expected_failures;
    REQUIRE(expected_failures > 0);

    Rng rng(25);
    const auto outcome = alfi::evaluate_particles(st, gen, rng, &fallback);
    CHECK(outcome.failures == expected_failures);
    CHECK(st.replay.size() == 40 - expected_failures);
    CHECK(st.ensemble.particles.size() == 40);  // never dropped
    for (const auto& p : st.ensemble.particles) CHECK(p[0] <= 0.5);
    for (const auto& theta : st.replay.thetas) CHECK(theta[0] <= 0.5);
}

TEST_CASE("evaluate_particles: thread count does not change the result") {
    auto once = [](std::size_t threads) {
        CountingGenerator gen;
        auto st = handmade_state(linear_shape_net(0.3, 0.2, -0.2, 0.4), 64, 26);
        Rng rng(27);
        alfi::evaluate_particles(st, gen, rng, nullptr, threads);
        return st.replay.summaries;
    };
    CHECK(once(1) == once(2));
}

TEST_CASE("discriminator_update: a fake batch equal to the observation has zero loss") {
    auto st = handmade_state(linear_shape_net(0.0, 0.2, 0.0, 0.2), 4, 28);
    Rng rng(29);
    st.discriminator = nn::make_network({1, 8, 1}, nn::Activation::Tanh,
                                        nn::Head::SigmoidScalar, {}, rng);
    st.disc_opt = nn::make_optimizer_state(st.discriminator);
    const std::vector<sim::Summary> fakes(5, st.x_obs);
    const double loss = alfi::discriminator_update(st, fakes, 3, 1e-3, 1.0);
    CHECK(loss == 0.0);
}

TEST_CASE("discriminator_update: separation emerges from a flat start") {
    auto st = handmade_state(linear_shape_net(0.0, 0.2, 0.0, 0.2), 4, 30);
    // single-layer head so the flat start still carries input-dependent grads
    st.discriminator = zero_sigmoid_net(1);
    st.disc_opt = nn::make_optimizer_state(st.discriminator);
    st.x_obs = {0.8};
    st.refresh_d_obs();
    const std::vector<sim::Summary> fakes{{0.1}, {0.2}, {0.15}};

    const double first_loss = alfi::discriminator_update(st, fakes, 1, 1e-2, 1.0);
    CHECK(first_loss == 0.0);  // d is 0.5 everywhere before the step
    alfi::discriminator_update(st, fakes, 50, 1e-2, 1.0);
    double fake_mean = 0.0;
    for (const auto& f : fakes) fake_mean += st.discriminator_value(f) / 3.0;
    CHECK(st.discriminator_value(st.x_obs) > fake_mean);
}

TEST_CASE("discriminator_update: 500 steps separate far-apart fakes by 0.5") {
    auto st = handmade_state(linear_shape_net(0.0, 0.2, 0.0, 0.2), 4, 31);
    Rng rng(32);
    st.discriminator = nn::make_network({1, 16, 16, 1}, nn::Activation::Tanh,
                                        nn::Head::SigmoidScalar, {}, rng);
    st.disc_opt = nn::make_optimizer_state(st.discriminator);
    st.x_obs = {1.0};
    st.refresh_d_obs();
    std::vector<sim::Summary> fakes;
    Rng fake_rng(33);
    for (int i = 0; i < 50; ++i) fakes.push_back({fake_rng.normal(-1.0, 0.1)});

    alfi::discriminator_update(st, fakes, 500, 1e-2, 1.0);
    double fake_mean = 0.0;
    for (const auto& f : fakes) fake_mean += st.discriminator_value(f) / 50.0;
    CHECK(st.discriminator_value(st.x_obs) - fake_mean >= 0.5);
    // weights respect the clip
    for (const auto& layer : st.discriminator.weights)
        for (double w : layer) CHECK(std::abs(w) <= 1.0);
}

TEST_CASE("discriminator_update refreshes the cached observation score") {
    auto st = handmade_state(linear_shape_net(0.0, 0.2, 0.0, 0.2), 4, 34);
    st.discriminator = zero_sigmoid_net(1);
    st.disc_opt = nn::make_optimizer_state(st.discriminator);
    st.x_obs = {0.9};
    st.refresh_d_obs();
    REQUIRE(st.d_obs == 0.5);
    alfi::discriminator_update(st, {{0.0}}, 25, 5e-2, 1.0);
    CHECK(st.d_obs > 0.5);
    CHECK(st.d_obs == dist::clamp_unit(st.discriminator_value(st.x_obs), dist::kUnitClamp));
}

TEST_CASE("encoder_update: degenerate gaussian targets drive mu to h(y0), sigma to floor") {
    auto st = handmade_state(linear_shape_net(0.0, 0.0, 0.0, 0.0), 4, 35);
    st.family = dist::Family::Gaussian;
    st.encoder.output_maps = {nn::OutputMap::Linear, nn::OutputMap::SoftplusPos};
    st.transform = {dist::TransformKind::CotSigmoid, st.d_obs};
    REQUIRE(st.d_obs == 0.5);

    // zero-weight discriminator maps every summary to y = 0.5, so the target
    // is exactly h(0.5) ~= 0
    Rng fill(36);
    for (int i = 0; i < 64; ++i) {
        st.replay.thetas.push_back({fill.uniform01()});
        st.replay.summaries.push_back({fill.normal(0.0, 2.0)});
    }

    Rng rng(37);
    std::vector<double> losses;
    for (int step = 0; step < 400; ++step)
        losses.push_back(alfi::encoder_update(st, 1, 1e-2, 128, rng));

    std::size_t decreasing = 0;
    for (std::size_t i = 1; i < losses.size(); ++i)
        if (losses[i] <= losses[i - 1]) ++decreasing;
    CHECK(static_cast<double>(decreasing) / (losses.size() - 1) >= 0.95);

    const auto shapes = st.encoder_shapes({0.5});
    CHECK(std::abs(shapes.values[0]) < 0.05);   // mu -> h(0.5) = 0
    CHECK(shapes.values[1] < 0.05);             // sigma -> its floor
}

TEST_CASE("encoder_update: beta shapes converge to the moment-matched fit") {
    auto st = handmade_state(linear_shape_net(0.0, 0.0, 0.0, 0.0), 4, 38);
    // identity-like discriminator: d(sigmoid-input) = sigmoid(x), so a summary
    // x = logit(y) scores exactly y
    st.discriminator = zero_sigmoid_net(1);
    st.discriminator.weights[0] = {1.0};
    st.disc_opt = nn::make_optimizer_state(st.discriminator);

    Rng rng(39);
    std::vector<double> targets(128);
    for (auto& y : targets) y = boost::math::ibeta_inv(2.0, 5.0, rng.uniform01());
    for (double y : targets) {
        st.replay.thetas.push_back({0.3});
        st.replay.summaries.push_back({std::log(y / (1.0 - y))});
    }

    Rng step_rng(40);
    alfi::encoder_update(st, 2000, 1e-2, 128, step_rng);
    const auto fit = dist::fit_beta_moments(targets);
    const auto shapes = st.encoder_shapes({0.3});
    CHECK(std::abs(shapes.values[0] - fit.values[0]) < 0.5);
    CHECK(std::abs(shapes.values[1] - fit.values[1]) < 0.5);
}

TEST_CASE("encoder_update: zero learning rate leaves the encoder untouched") {
    auto st = handmade_state(linear_shape_net(0.4, 0.3, -0.2, 0.6), 4, 41);
    st.replay.thetas.push_back({0.4});
    st.replay.summaries.push_back({0.2});
    const auto before_w = st.encoder.weights;
    const auto before_b = st.encoder.biases;
    Rng rng(42);
    alfi::encoder_update(st, 5, 0.0, 16, rng);
    CHECK(st.encoder.weights == before_w);
    CHECK(st.encoder.biases == before_b);
}

TEST_CASE("encoder_update counts boundary-clamped targets") {
    auto st = handmade_state(linear_shape_net(0.0, 0.2, 0.0, 0.2), 4, 43);
    st.discriminator = zero_sigmoid_net(1);
    st.discriminator.biases[0] = {60.0};  // saturates the head at the 1e-12 guard
    st.disc_opt = nn::make_optimizer_state(st.discriminator);
    st.replay.thetas.push_back({0.5});
    st.replay.summaries.push_back({0.1});
    Rng rng(44);
    alfi::encoder_update(st, 1, 1e-3, 8, rng);
    CHECK(st.boundary_hits > 0);
}

TEST_CASE("gradient flow separation between the two updates") {
    auto st = handmade_state(linear_shape_net(0.7, 0.2, -0.1, 0.5), 4, 45);
    Rng rng(46);
    st.discriminator = nn::make_network({1, 8, 1}, nn::Activation::Tanh,
                                        nn::Head::SigmoidScalar, {}, rng);
    st.disc_opt = nn::make_optimizer_state(st.discriminator);
    st.replay.thetas.push_back({0.4});
    st.replay.summaries.push_back({0.3});

    const auto enc_w = st.encoder.weights;
    alfi::discriminator_update(st, {{0.25}}, 10, 1e-2, 1.0);
    CHECK(st.encoder.weights == enc_w);

    const auto disc_w = st.discriminator.weights;
    Rng rng2(47);
    alfi::encoder_update(st, 10, 1e-2, 16, rng2);
    CHECK(st.discriminator.weights == disc_w);
}

TEST_CASE("estimate_loglik: planted uniform shapes give zero") {
    const double b = splus_inv(1.0 - 1e-3);
    auto st = handmade_state(linear_shape_net(0.0, b, 0.0, b), 4, 48);
    CHECK(alfi::estimate_loglik(st, {0.7}) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(alfi::estimate_loglik(st, {0.1}) == alfi::estimate_loglik(st, {0.9}));
    CHECK_THROWS_AS(alfi::estimate_loglik(st, {1.4}), DomainError);
}

TEST_CASE("posterior_mode: single particle and constant-encoder tie-break") {
    auto st = handmade_state(linear_shape_net(0.0, 0.2, 0.0, 0.2), 1, 49);
    const std::vector<std::vector<sim::ParamVector>> single{{{0.37}}};
    CHECK(alfi::posterior_mode(single, st)[0] == 0.37);

    const std::vector<std::vector<sim::ParamVector>> many{
        {{0.1}, {0.2}}, {{0.3}, {0.4}}, {{0.5}, {0.6}}};
    // constant encoder: everything ties, the first particle of the window wins
    CHECK(alfi::posterior_mode(many, st, 2)[0] == 0.3);
    CHECK(alfi::posterior_mode(many, st, 10)[0] == 0.1);
}

TEST_CASE("posterior_mode: planted interior maximum is recovered") {
    // alpha rises from 0.7 to 3.0 over the box, beta pinned at 1: the density
    // f(0.5; a, 1) = a * 0.5^(a-1) peaks at a = 1/log(2)
    const double t1 = splus_inv(0.7), t2 = splus_inv(3.0);
    const double w = (t2 - t1) / 2.0, b = (t2 + t1) / 2.0;
    auto st = handmade_state(linear_shape_net(w, b, 0.0, splus_inv(1.0 - 1e-3)), 4, 50);

    const double alpha_star = 1.0 / std::log(2.0);
    const double x_star = (splus_inv(alpha_star - 1e-3) - b) / w;
    const double theta_star = 0.5 * (x_star + 1.0);

    std::vector<sim::ParamVector> grid;
    const std::size_t points = 200;
    for (std::size_t i = 0; i < points; ++i)
        grid.push_back({(static_cast<double>(i) + 0.5) / points});
    const auto mode = alfi::posterior_mode({grid}, st);
    CHECK(std::abs(mode[0] - theta_star) <= 1.0 / points);
}

TEST_CASE("run: unit budget accounting") {
    CountingGenerator gen;
    alfi::AlfiConfig cfg;
    cfg.t_outer = 1;
    cfg.m_inner = 1;
    cfg.l_updates = 1;
    cfg.n_particles = 1;
    cfg.minibatch = 4;
    cfg.seed = 51;
    const auto result = alfi::run(cfg, gen, {0.4});
    CHECK_FALSE(result.aborted);
    CHECK(result.simulate_calls == 1);
    CHECK(gen.calls == 1);
    CHECK(result.diagnostics.size() == 1);
    CHECK(result.state.disc_opt.step == 1);
    CHECK(result.state.enc_opt.step == 1);
    CHECK(result.history.size() == 1);
}

TEST_CASE("run: budget is exactly t_outer * n_particles") {
    CountingGenerator gen;
    alfi::AlfiConfig cfg;
    cfg.t_outer = 7;
    cfg.n_particles = 13;
    cfg.m_inner = 2;
    cfg.l_updates = 2;
    cfg.seed = 52;
    const auto result = alfi::run(cfg, gen, {0.4});
    CHECK(result.simulate_calls == 7 * 13);
    CHECK(gen.calls == 7 * 13);
}

TEST_CASE("run: identical config and seed reproduce the result bitwise") {
    auto once = [] {
        sim::QuadraticGenerator gen;
        alfi::AlfiConfig cfg;
        cfg.t_outer = 8;
        cfg.n_particles = 20;
        cfg.l_updates = 3;
        cfg.seed = 53;
        return alfi::run(cfg, gen, {0.09});
    };
    const auto a = once();
    const auto b = once();
    CHECK(a.mode == b.mode);
    CHECK(a.history == b.history);
    CHECK(a.state.discriminator.weights == b.state.discriminator.weights);
    CHECK(a.state.encoder.weights == b.state.encoder.weights);
    for (std::size_t i = 0; i < a.diagnostics.size(); ++i) {
        CHECK(a.diagnostics[i].acceptance_rate == b.diagnostics[i].acceptance_rate);
        CHECK(a.diagnostics[i].loss_disc == b.diagnostics[i].loss_disc);
        CHECK(a.diagnostics[i].loss_enc == b.diagnostics[i].loss_enc);
    }
}

TEST_CASE("run: every particle of every iteration stays inside the box") {
    sim::QuadraticGenerator gen;
    alfi::AlfiConfig cfg;
    cfg.t_outer = 15;
    cfg.n_particles = 30;
    cfg.seed = 54;
    const auto result = alfi::run(cfg, gen, {0.09});
    for (const auto& ensemble : result.history) {
        REQUIRE(ensemble.size() == 30);
        for (const auto& p : ensemble) {
            CHECK(p[0] >= 0.0);
            CHECK(p[0] <= 1.0);
        }
    }
}

TEST_CASE("run: conjugate location toy recovers theta_star") {
    sim::GaussianLocationGenerator gen;
    const auto x_obs = sim::make_observation(gen, {0.5}, 100, 55);
    alfi::AlfiConfig cfg;
    cfg.t_outer = 50;
    cfg.n_particles = 100;
    cfg.seed = 56;
    const auto result = alfi::run(cfg, gen, x_obs);
    CHECK_FALSE(result.aborted);
    CHECK(std::abs(result.mode[0] - 0.5) < 0.1);
}

TEST_CASE("run: gaussian family recovers the location toy as well") {
    sim::GaussianLocationGenerator gen;
    const auto x_obs = sim::make_observation(gen, {0.5}, 100, 36);
    alfi::AlfiConfig cfg;
    cfg.t_outer = 100;
    cfg.n_particles = 100;
    cfg.seed = 1;
    cfg.family = dist::Family::Gaussian;
    const auto result = alfi::run(cfg, gen, x_obs);
    CHECK_FALSE(result.aborted);
    CHECK(std::abs(result.mode[0] - 0.5) < 0.1);
}

TEST_CASE("run: quadratic toy log-likelihood peaks near the two modes") {
    sim::QuadraticGenerator gen;
    const auto x_obs = sim::make_observation(gen, {0.2}, 100, 57);
    alfi::AlfiConfig cfg;
    cfg.t_outer = 50;
    cfg.n_particles = 100;
    cfg.seed = 58;
    const auto result = alfi::run(cfg, gen, x_obs);
    REQUIRE_FALSE(result.aborted);

    // argmax of the estimated log-likelihood over a 500-point grid lands at
    // one of the two symmetric modes
    double best_theta = 0.0, best = -1e300;
    for (int i = 0; i < 500; ++i) {
        const double theta = (i + 0.5) / 500.0;
        const double ll = alfi::estimate_loglik(result.state, {theta});
        if (ll > best) {
            best = ll;
            best_theta = theta;
        }
    }
    const double to_mode = std::min(std::abs(best_theta - 0.2), std::abs(best_theta - 0.8));
    CHECK(to_mode < 0.05);
}
