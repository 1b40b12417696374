#include "lfi/dist.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "lfi/errors.hpp"
#include "lfi/util.hpp"

namespace lfi::dist {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kLogSqrt2Pi = 0.9189385332046727; // log(sqrt(2*pi))
} // namespace

double clamp_unit(double y, double margin) {
    return std::clamp(y, margin, 1.0 - margin);
}

double beta_logpdf(double y, double alpha, double beta) {
    if (!(y > 0.0 && y < 1.0)) throw DomainError("beta_logpdf: y must lie in (0,1)");
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw DomainError("beta_logpdf: shape parameters must be positive");
    return (alpha - 1.0) * std::log(y) + (beta - 1.0) * std::log1p(-y) +
           std::lgamma(alpha + beta) - std::lgamma(alpha) - std::lgamma(beta);
}

double gaussian_logpdf(double z, double mu, double sigma) {
    if (!(sigma > 0.0)) throw DomainError("gaussian_logpdf: sigma must be positive");
    const double u = (z - mu) / sigma;
    return -0.5 * u * u - std::log(sigma) - kLogSqrt2Pi;
}

double h0(double t) {
    if (!(t > 0.0 && t < 1.0)) throw NumericError("h0: argument at the boundary");
    // half-angle reduction of -2*sin(2*pi*t)/(1-cos(2*pi*t)); the raw form is
    // 0/0-prone near t in {0,1}
    return -2.0 / std::tan(kPi * t);
}

double h0_deriv(double t) {
    if (!(t > 0.0 && t < 1.0)) throw NumericError("h0_deriv: argument at the boundary");
    const double s = std::sin(kPi * t);
    return 2.0 * kPi / (s * s);
}

HValue h_transform(const Transform& t, double y) {
    if (t.kind == TransformKind::Identity) {
        if (!(y > 0.0 && y < 1.0))
            throw DomainError("h_transform(identity): y must lie in (0,1)");
        return {y, 1.0};
    }
    if (!(t.center > 0.0 && t.center < 1.0))
        throw ConfigError("h_transform(cot_sigmoid): center must lie in (0,1)");
    if (!(y > 0.0 && y < 1.0))
        throw DomainError("h_transform(cot_sigmoid): y must lie in (0,1)");

    // inner logistic recentered at the observation score
    double s = 1.0 / (1.0 + std::exp(-(y - t.center)));
    s = clamp_unit(s, kSigmoidClamp);
    if (!(s > 0.0 && s < 1.0))
        throw NumericError("h_transform: logistic output hit the boundary");
    const double s_deriv = s * (1.0 - s);
    return {h0(s), h0_deriv(s) * s_deriv};
}

double family_logpdf(const ShapeParams& shapes, const Transform& t, double y) {
    if (shapes.family == Family::Beta && t.kind != TransformKind::Identity)
        throw ConfigError("family_logpdf: beta family requires the identity transform");
    const HValue h = h_transform(t, y);
    double logf;
    if (shapes.family == Family::Beta) {
        logf = beta_logpdf(h.value, shapes.values[0], shapes.values[1]);
    } else {
        logf = gaussian_logpdf(h.value, shapes.values[0], shapes.values[1]);
    }
    return logf + std::log(std::abs(h.deriv));
}

double kde_pdf(std::span<const double> sample, double bandwidth, double x) {
    if (sample.empty()) throw DomainError("kde_pdf: empty sample");
    if (!(bandwidth > 0.0)) throw DomainError("kde_pdf: bandwidth must be positive");
    double s = 0.0;
    for (double xi : sample) {
        const double u = (x - xi) / bandwidth;
        s += std::exp(-0.5 * u * u);
    }
    const double norm = static_cast<double>(sample.size()) * bandwidth *
                        std::sqrt(2.0 * kPi);
    return s / norm;
}

double silverman_bandwidth(std::span<const double> sample) {
    if (sample.size() < 2) throw DomainError("silverman_bandwidth: need >= 2 points");
    const double sd = stddev(sample);
    const double iqr = quantile(sample, 0.75) - quantile(sample, 0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
    const double n = static_cast<double>(sample.size());
    return 0.9 * spread * std::pow(n, -0.2);
}

ShapeParams fit_beta_moments(std::span<const double> sample) {
    if (sample.size() < 2) throw DomainError("fit_beta_moments: need >= 2 points");
    for (double v : sample) {
        if (!(v > 0.0 && v < 1.0))
            throw DomainError("fit_beta_moments: sample values must lie in (0,1)");
    }
    const double m = mean(sample);
    const double v = variance(sample);
    if (!(v > 0.0)) throw DomainError("fit_beta_moments: degenerate sample variance");
    const double t = m * (1.0 - m) / v - 1.0;
    if (!(t > 0.0))
        throw DomainError("fit_beta_moments: variance too large for a beta fit");
    return {Family::Beta, {m * t, (1.0 - m) * t}};
}

} // namespace lfi::dist
