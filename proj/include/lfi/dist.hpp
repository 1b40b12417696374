#ifndef LFI_DIST_HPP
#define LFI_DIST_HPP

#include <array>
#include <span>

namespace lfi::dist {

enum class Family { Beta, Gaussian };

// Two-parameter families: beta carries {alpha, beta}, gaussian {mu, sigma}.
struct ShapeParams {
    Family family = Family::Beta;
    std::array<double, 2> values{1.0, 1.0};
};

inline constexpr std::size_t kShapeCount = 2;

// Support-expanding map applied to the unit-interval statistic.  identity
// keeps (0,1); cot_sigmoid sends (0,1) to the whole real line through
// t -> -2*cot(pi*t) composed with a logistic recentered at `center`.
enum class TransformKind { Identity, CotSigmoid };

struct Transform {
    TransformKind kind = TransformKind::Identity;
    double center = 0.5;  // cot_sigmoid recentering point, must lie in (0,1)
};

// Clamp margins for unit-interval inputs.
inline constexpr double kUnitClamp = 1e-6;      // values fed to beta_logpdf
inline constexpr double kSigmoidClamp = 1e-7;   // inner logistic output

double clamp_unit(double y, double margin);

double beta_logpdf(double y, double alpha, double beta);
double gaussian_logpdf(double z, double mu, double sigma);

// Outer map of cot_sigmoid: -2*sin(2*pi*t)/(1-cos(2*pi*t)), evaluated in the
// half-angle form -2*cot(pi*t), with derivative 2*pi/sin^2(pi*t).
double h0(double t);
double h0_deriv(double t);

struct HValue {
    double value;
    double deriv;
};

// h(y) and h'(y).
HValue h_transform(const Transform& t, double y);

// log f(h(y); shapes) + log|h'(y)|.
double family_logpdf(const ShapeParams& shapes, const Transform& t, double y);

// Gaussian-kernel density estimate at x.
double kde_pdf(std::span<const double> sample, double bandwidth, double x);

// Silverman's rule-of-thumb bandwidth.
double silverman_bandwidth(std::span<const double> sample);

// Method-of-moments beta fit for a sample in (0,1).
ShapeParams fit_beta_moments(std::span<const double> sample);

} // namespace lfi::dist

#endif
