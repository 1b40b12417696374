#ifndef LFI_NN_HPP
#define LFI_NN_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lfi/rng.hpp"

namespace lfi::nn {

enum class Activation { Tanh, Relu };

// sigmoid_scalar: one output squashed to (0,1).
// shape_head: one output per shape parameter, each mapped by its OutputMap.
enum class Head { SigmoidScalar, ShapeHead };

// Per-output map of a shape head. SoftplusPos = softplus(x) + 1e-3, keeping
// strictly positive parameters away from zero during early training.
enum class OutputMap { Linear, SoftplusPos };

inline constexpr double kSoftplusFloor = 1e-3;

double sigmoid(double x);
double softplus(double x);

// Fully connected net, weights row-major (out x in) per layer.
struct Network {
    std::vector<std::size_t> dims;               // layer widths, input first
    std::vector<std::vector<double>> weights;    // [layer][out*in]
    std::vector<std::vector<double>> biases;     // [layer][out]
    Activation activation = Activation::Tanh;
    Head head = Head::SigmoidScalar;
    std::vector<OutputMap> output_maps;          // shape head only

    std::size_t input_dim() const { return dims.front(); }
    std::size_t output_dim() const { return dims.back(); }
    std::size_t layer_count() const { return dims.size() - 1; }
};

// Glorot-uniform init: weights in [-a, a], a = sqrt(6/(fan_in+fan_out)).
Network make_network(std::vector<std::size_t> dims, Activation act, Head head,
                     std::vector<OutputMap> maps, Rng& rng);

// Cached per-layer values from a forward pass, consumed by backward().
struct Trace {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;   // linear outputs z, per layer
    std::vector<std::vector<double>> post;  // activations / head outputs
};

std::vector<double> forward(const Network& net, std::span<const double> input);
std::vector<double> forward(const Network& net, std::span<const double> input, Trace& trace);

struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    std::vector<double> input;  // d(upstream . output)/d(input)
};

Gradients zero_gradients(const Network& net);
void accumulate(Gradients& acc, const Gradients& g, double scale = 1.0);
void scale_gradients(Gradients& g, double scale);

// Gradients of upstream . output w.r.t. every weight, bias and the input.
Gradients backward(const Network& net, const Trace& trace, std::span<const double> upstream);
Gradients backward(const Network& net, std::span<const double> input,
                   std::span<const double> upstream);

struct OptimizerState {
    std::vector<std::vector<double>> m_w, v_w;  // first/second moments, weights
    std::vector<std::vector<double>> m_b, v_b;  // first/second moments, biases
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

OptimizerState make_optimizer_state(const Network& net);

// One adaptive-moment update with bias correction.
void adam_step(Network& net, const Gradients& grads, OptimizerState& state, double lr);

// Clamp every weight and bias into [-c, c].
void clip_weights(Network& net, double c);

// Max over parameters of |analytic - numeric| / (|numeric| + 1e-8), with the
// numeric side from central differences of the forward pass (step 1e-5).
double finite_diff_check(const Network& net, std::span<const double> input,
                         std::span<const double> upstream);

// JSON checkpoint; doubles stored with shortest round-trip representation.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

} // namespace lfi::nn

#endif
