#ifndef LFI_SIM_HPP
#define LFI_SIM_HPP

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lfi/rng.hpp"

namespace lfi::sim {

using ParamVector = std::vector<double>;  // generator input point
using Summary = std::vector<double>;      // q-dimensional summary statistics

// Axis-aligned compact input space.
struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    Box() = default;
    Box(std::vector<double> lo, std::vector<double> hi);

    std::size_t dim() const { return lower.size(); }
    double width(std::size_t i) const { return upper[i] - lower[i]; }
    bool contains(std::span<const double> p) const;
    ParamVector center() const;
    ParamVector sample(Rng& rng) const;
    // Uniform draw over the centered fraction of the box (0 < fraction <= 1).
    ParamVector sample_central(Rng& rng, double fraction) const;
    ParamVector clamp(std::span<const double> p) const;
};

using Overrides = std::map<std::string, double>;

// Stochastic forward model with embedded summary statistics.  Internal
// coefficients are fixed at construction; the only run-to-run variation is
// the seeded noise stream, so (theta, seed) fully determines the output.
class Generator {
public:
    virtual ~Generator() = default;

    const std::string& name() const { return name_; }
    std::size_t param_dim() const { return box_.dim(); }
    std::size_t summary_dim() const { return summary_dim_; }
    const Box& box() const { return box_; }

    // Deterministic in (theta, seed).  Throws DomainError when theta is
    // outside the box and SimulationError on non-finite output.
    Summary simulate(const ParamVector& theta, std::uint64_t seed) const;

protected:
    Generator(std::string name, Box box, std::size_t summary_dim)
        : name_(std::move(name)), box_(std::move(box)), summary_dim_(summary_dim) {}

    virtual Summary run(const ParamVector& theta, Rng& rng) const = 0;

private:
    std::string name_;
    Box box_;
    std::size_t summary_dim_;
};

// Seed for the j-th repeat of an observation built from base seed `seed`.
std::uint64_t observation_seed(std::uint64_t seed, std::size_t repeat);

// Componentwise mean of `repeats` independent simulations at theta_star.
Summary make_observation(const Generator& gen, const ParamVector& theta_star,
                         std::size_t repeats, std::uint64_t seed);

// Row-major grid of ||x_obs - g(theta, u)||_2 over the box (d = 1 or 2 only).
struct DiscrepancyGrid {
    std::size_t rows = 0;            // resolution along dim 1 (1 when d == 1)
    std::size_t cols = 0;            // resolution along dim 0
    std::vector<ParamVector> cells;  // row-major cell centers
    std::vector<double> values;
};

DiscrepancyGrid discrepancy_map(const Generator& gen, const Summary& x_obs,
                                std::size_t resolution, std::uint64_t seed);

// g(theta,u) = (theta-0.5)^2 + u, u ~ N(0, noise_sd^2), box [0,1].
class QuadraticGenerator : public Generator {
public:
    explicit QuadraticGenerator(double noise_sd = 0.01);
    double noise_sd() const { return noise_sd_; }

protected:
    Summary run(const ParamVector& theta, Rng& rng) const override;

private:
    double noise_sd_;
};

// g(theta,u) = theta + u, u ~ N(0, sigma^2 I), box [0,1]^d.  Conjugate
// oracle model: the posterior given one observation is a truncated normal.
class GaussianLocationGenerator : public Generator {
public:
    explicit GaussianLocationGenerator(std::size_t dim = 1, double sigma = 0.1);
    double sigma() const { return sigma_; }

protected:
    Summary run(const ParamVector& theta, Rng& rng) const override;

private:
    double sigma_;
};

// Susceptible-Infectious-Recovered dynamics, fixed-step RK4:
//   dS/dt = -b*S*I/N,  dI/dt = b*S*I/N - g*I,  dR/dt = g*I
// theta = (b, g).  Summary: I(t) at `samples` equispaced times plus
// N(0, noise_sd^2) observation noise per entry.
class SirGenerator : public Generator {
public:
    struct Params {
        double population = 1000.0;
        double initial_infected = 10.0;
        double horizon = 40.0;
        double dt = 0.1;
        double noise_sd = 20.0;  // 2% of the population
        std::size_t samples = 10;
        double rate_min = 0.05;
        double rate_max = 1.0;
    };

    SirGenerator();
    explicit SirGenerator(Params p);
    const Params& params() const { return params_; }

    // Pre-noise (S,I,R) after every RK4 step, initial state first.
    std::vector<std::array<double, 3>> trajectory(const ParamVector& theta) const;

protected:
    Summary run(const ParamVector& theta, Rng& rng) const override;

private:
    Params params_;
};

// Moving-average series x_t = u_t + th1*u_{t-1} + th2*u_{t-2}, u ~ N(0,1).
// Summary: autocovariances at lags 0..2 computed against the known zero
// mean with divisor T-k, so the estimator is exactly unbiased.
class Ma2Generator : public Generator {
public:
    explicit Ma2Generator(std::size_t series_length = 100);
    std::size_t series_length() const { return series_length_; }

protected:
    Summary run(const ParamVector& theta, Rng& rng) const override;

private:
    std::size_t series_length_;
};

// Single-server queue: service times Uniform(th1, th1+th2), Poisson
// arrivals with rate th3 (parameterized as (min service, gap, rate) to keep
// the input space rectangular).  Summary: interior deciles of the first
// `customers` inter-departure times.
class Mg1Generator : public Generator {
public:
    explicit Mg1Generator(std::size_t customers = 50);
    std::size_t customers() const { return customers_; }

protected:
    Summary run(const ParamVector& theta, Rng& rng) const override;

private:
    std::size_t customers_;
};

// Catalog lookup by name with per-model parameter overrides.
std::unique_ptr<Generator> make_generator(const std::string& name,
                                          const Overrides& overrides = {});
std::vector<std::string> generator_names();

} // namespace lfi::sim

#endif
