#include "lfi/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lfi/errors.hpp"
#include "lfi/util.hpp"

namespace lfi::sim {

Box::Box(std::vector<double> lo, std::vector<double> hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.empty())
        throw ConfigError("box: bounds must be non-empty and equally sized");
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (!(lower[i] < upper[i]))
            throw ConfigError("box: lower bound must be strictly below upper bound");
    }
}

bool Box::contains(std::span<const double> p) const {
    if (p.size() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i) {
        if (p[i] < lower[i] || p[i] > upper[i]) return false;
    }
    return true;
}

ParamVector Box::center() const {
    ParamVector c(dim());
    for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
    return c;
}

ParamVector Box::sample(Rng& rng) const {
    ParamVector p(dim());
    for (std::size_t i = 0; i < dim(); ++i) p[i] = rng.uniform(lower[i], upper[i]);
    return p;
}

ParamVector Box::sample_central(Rng& rng, double fraction) const {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw DomainError("sample_central: fraction must lie in (0,1]");
    ParamVector p(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        const double pad = 0.5 * (1.0 - fraction) * width(i);
        p[i] = rng.uniform(lower[i] + pad, upper[i] - pad);
    }
    return p;
}

ParamVector Box::clamp(std::span<const double> p) const {
    if (p.size() != dim()) throw ShapeError("box clamp: dimension mismatch");
    ParamVector out(p.begin(), p.end());
    for (std::size_t i = 0; i < dim(); ++i)
        out[i] = std::clamp(out[i], lower[i], upper[i]);
    return out;
}

Summary Generator::simulate(const ParamVector& theta, std::uint64_t seed) const {
    if (theta.size() != param_dim())
        throw ShapeError(name_ + ": parameter dimension mismatch");
    if (!box_.contains(theta)) {
        std::ostringstream msg;
        msg << name_ << ": parameter outside the input box:";
        for (double v : theta) msg << " " << v;
        throw DomainError(msg.str());
    }
    // Named per-call noise stream; callers never see the raw randomness.
    Rng stream = Rng(seed).sub(name_);
    Summary out = run(theta, stream);
    if (out.size() != summary_dim_)
        throw ShapeError(name_ + ": summary dimension mismatch");
    if (!all_finite(out)) throw SimulationError(name_ + ": non-finite summary", theta);
    return out;
}

std::uint64_t observation_seed(std::uint64_t seed, std::size_t repeat) {
    std::uint64_t sm = seed ^ fnv1a64("observation");
    sm += (repeat + 1) * 0x9e3779b97f4a7c15ull;
    return splitmix64(sm);
}

Summary make_observation(const Generator& gen, const ParamVector& theta_star,
                         std::size_t repeats, std::uint64_t seed) {
    if (repeats == 0) throw DomainError("make_observation: repeats must be >= 1");
    Summary acc(gen.summary_dim(), 0.0);
    for (std::size_t j = 0; j < repeats; ++j) {
        const Summary s = gen.simulate(theta_star, observation_seed(seed, j));
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s[i];
    }
    for (auto& v : acc) v /= static_cast<double>(repeats);
    return acc;
}

DiscrepancyGrid discrepancy_map(const Generator& gen, const Summary& x_obs,
                                std::size_t resolution, std::uint64_t seed) {
    const std::size_t d = gen.param_dim();
    if (d > 2) throw DomainError("discrepancy_map: only 1- and 2-dimensional boxes");
    if (resolution == 0) throw DomainError("discrepancy_map: resolution must be >= 1");
    if (x_obs.size() != gen.summary_dim())
        throw ShapeError("discrepancy_map: observation dimension mismatch");

    const Box& box = gen.box();
    auto cell_coord = [&](std::size_t axis, std::size_t idx) {
        return box.lower[axis] + (static_cast<double>(idx) + 0.5) *
                                     box.width(axis) / static_cast<double>(resolution);
    };

    DiscrepancyGrid grid;
    grid.cols = resolution;
    grid.rows = d == 2 ? resolution : 1;
    grid.cells.reserve(grid.rows * grid.cols);
    for (std::size_t r = 0; r < grid.rows; ++r) {
        for (std::size_t c = 0; c < grid.cols; ++c) {
            ParamVector theta;
            theta.push_back(cell_coord(0, c));
            if (d == 2) theta.push_back(cell_coord(1, r));
            grid.cells.push_back(std::move(theta));
        }
    }
    grid.values.resize(grid.cells.size());
    Rng cell_seeds = Rng(seed).sub("discrepancy_map");
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        const Summary s = gen.simulate(grid.cells[i], cell_seeds.sub("cell", i).key());
        grid.values[i] = euclidean_distance(s, x_obs);
    }
    return grid;
}

// ---------------------------------------------------------------------------

QuadraticGenerator::QuadraticGenerator(double noise_sd)
    : Generator("quadratic", Box({0.0}, {1.0}), 1), noise_sd_(noise_sd) {
    if (noise_sd < 0.0) throw ConfigError("quadratic: noise_sd must be >= 0");
}

Summary QuadraticGenerator::run(const ParamVector& theta, Rng& rng) const {
    const double base = (theta[0] - 0.5) * (theta[0] - 0.5);
    return {base + (noise_sd_ > 0.0 ? rng.normal(0.0, noise_sd_) : 0.0)};
}

GaussianLocationGenerator::GaussianLocationGenerator(std::size_t dim, double sigma)
    : Generator("gaussian_location",
                Box(std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)), dim),
      sigma_(sigma) {
    if (dim == 0) throw ConfigError("gaussian_location: dim must be >= 1");
    if (sigma < 0.0) throw ConfigError("gaussian_location: sigma must be >= 0");
}

Summary GaussianLocationGenerator::run(const ParamVector& theta, Rng& rng) const {
    Summary out(theta);
    if (sigma_ > 0.0) {
        for (auto& v : out) v += rng.normal(0.0, sigma_);
    }
    return out;
}

SirGenerator::SirGenerator() : SirGenerator(Params{}) {}

SirGenerator::SirGenerator(Params p)
    : Generator("sir",
                Box({p.rate_min, p.rate_min}, {p.rate_max, p.rate_max}),
                p.samples),
      params_(p) {
    if (p.population <= 0.0 || p.initial_infected < 0.0 ||
        p.initial_infected > p.population)
        throw ConfigError("sir: invalid population setup");
    if (p.dt <= 0.0 || p.horizon <= p.dt) throw ConfigError("sir: invalid time grid");
    if (p.samples == 0) throw ConfigError("sir: need at least one sample time");
}

std::vector<std::array<double, 3>> SirGenerator::trajectory(const ParamVector& theta) const {
    const double beta = theta[0];
    const double gamma = theta[1];
    const double n = params_.population;

    auto deriv = [&](const std::array<double, 3>& s) {
        const double flow_in = beta * s[0] * s[1] / n;
        const double flow_out = gamma * s[1];
        return std::array<double, 3>{-flow_in, flow_in - flow_out, flow_out};
    };

    const auto steps = static_cast<std::size_t>(std::llround(params_.horizon / params_.dt));
    std::vector<std::array<double, 3>> path;
    path.reserve(steps + 1);
    std::array<double, 3> s{n - params_.initial_infected, params_.initial_infected, 0.0};
    path.push_back(s);
    const double h = params_.dt;
    for (std::size_t step = 0; step < steps; ++step) {
        const auto k1 = deriv(s);
        std::array<double, 3> s2, s3, s4;
        for (int i = 0; i < 3; ++i) s2[i] = s[i] + 0.5 * h * k1[i];
        const auto k2 = deriv(s2);
        for (int i = 0; i < 3; ++i) s3[i] = s[i] + 0.5 * h * k2[i];
        const auto k3 = deriv(s3);
        for (int i = 0; i < 3; ++i) s4[i] = s[i] + h * k3[i];
        const auto k4 = deriv(s4);
        for (int i = 0; i < 3; ++i)
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        for (double v : s) {
            if (!std::isfinite(v))
                throw SimulationError("sir: trajectory diverged", theta);
        }
        path.push_back(s);
    }
    return path;
}

Summary SirGenerator::run(const ParamVector& theta, Rng& rng) const {
    const auto path = trajectory(theta);
    const auto steps = path.size() - 1;
    Summary out(params_.samples);
    // infectious counts at equispaced times t = k * horizon / samples
    for (std::size_t k = 0; k < params_.samples; ++k) {
        const double t = (static_cast<double>(k) + 1.0) * params_.horizon /
                         static_cast<double>(params_.samples);
        auto idx = static_cast<std::size_t>(std::llround(t / params_.dt));
        idx = std::min(idx, steps);
        out[k] = path[idx][1] + rng.normal(0.0, params_.noise_sd);
    }
    return out;
}

Ma2Generator::Ma2Generator(std::size_t series_length)
    : Generator("ma2", Box({-2.0, -1.0}, {2.0, 1.0}), 3),
      series_length_(series_length) {
    if (series_length < 3) throw ConfigError("ma2: series too short");
}

Summary Ma2Generator::run(const ParamVector& theta, Rng& rng) const {
    const double th1 = theta[0];
    const double th2 = theta[1];
    const std::size_t T = series_length_;
    std::vector<double> innov(T + 2);
    for (auto& u : innov) u = rng.normal();
    std::vector<double> x(T);
    for (std::size_t t = 0; t < T; ++t)
        x[t] = innov[t + 2] + th1 * innov[t + 1] + th2 * innov[t];

    Summary out(3);
    for (std::size_t lag = 0; lag <= 2; ++lag) {
        double s = 0.0;
        for (std::size_t t = lag; t < T; ++t) s += x[t] * x[t - lag];
        out[lag] = s / static_cast<double>(T - lag);
    }
    return out;
}

Mg1Generator::Mg1Generator(std::size_t customers)
    : Generator("mg1", Box({0.0, 0.0, 0.1}, {10.0, 10.0, 0.5}), 9),
      customers_(customers) {
    if (customers < 10) throw ConfigError("mg1: need at least 10 customers");
}

Summary Mg1Generator::run(const ParamVector& theta, Rng& rng) const {
    const double service_min = theta[0];
    const double service_gap = theta[1];
    const double arrival_rate = theta[2];

    // Lindley recursion over the first `customers_` departures.
    std::vector<double> interdeparture(customers_);
    double arrival = 0.0;
    double departure = 0.0;
    for (std::size_t i = 0; i < customers_; ++i) {
        arrival += rng.exponential(arrival_rate);
        const double service = service_min + service_gap * rng.uniform01();
        const double start = std::max(arrival, departure);
        const double next_departure = start + service;
        interdeparture[i] = next_departure - departure;
        departure = next_departure;
    }

    Summary out(9);
    for (std::size_t k = 1; k <= 9; ++k)
        out[k - 1] = quantile(interdeparture, static_cast<double>(k) / 10.0);
    return out;
}

namespace {

double override_or(const Overrides& o, const std::string& key, double fallback) {
    auto it = o.find(key);
    return it == o.end() ? fallback : it->second;
}

} // namespace

std::unique_ptr<Generator> make_generator(const std::string& name,
                                          const Overrides& overrides) {
    if (name == "quadratic") {
        return std::make_unique<QuadraticGenerator>(
            override_or(overrides, "noise_sd", 0.01));
    }
    if (name == "gaussian_location") {
        const auto dim = static_cast<std::size_t>(
            override_or(overrides, "dim", 1.0));
        return std::make_unique<GaussianLocationGenerator>(
            dim, override_or(overrides, "sigma", 0.1));
    }
    if (name == "sir") {
        SirGenerator::Params p;
        p.population = override_or(overrides, "population", p.population);
        p.initial_infected = override_or(overrides, "initial_infected", p.initial_infected);
        p.horizon = override_or(overrides, "horizon", p.horizon);
        p.dt = override_or(overrides, "dt", p.dt);
        p.noise_sd = override_or(overrides, "noise_sd", p.noise_sd);
        p.samples = static_cast<std::size_t>(override_or(overrides, "samples",
                                                         static_cast<double>(p.samples)));
        p.rate_min = override_or(overrides, "rate_min", p.rate_min);
        p.rate_max = override_or(overrides, "rate_max", p.rate_max);
        return std::make_unique<SirGenerator>(p);
    }
    if (name == "ma2") {
        return std::make_unique<Ma2Generator>(static_cast<std::size_t>(
            override_or(overrides, "series_length", 100.0)));
    }
    if (name == "mg1") {
        return std::make_unique<Mg1Generator>(static_cast<std::size_t>(
            override_or(overrides, "customers", 50.0)));
    }
    throw ConfigError("unknown generator: " + name);
}

std::vector<std::string> generator_names() {
    return {"quadratic", "gaussian_location", "sir", "ma2", "mg1"};
}

} // namespace lfi::sim
