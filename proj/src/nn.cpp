#include "lfi/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lfi/errors.hpp"

namespace lfi::nn {

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    // log(1+e^x) computed without overflow for large |x|.
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

namespace {

double activate(Activation act, double z) {
    return act == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

double activate_deriv(Activation act, double z, double a) {
    if (act == Activation::Tanh) return 1.0 - a * a;
    return z > 0.0 ? 1.0 : 0.0;
}

void check_dims(const Network& net) {
    if (net.dims.size() < 2) throw ShapeError("network needs at least one layer");
    for (std::size_t l = 0; l + 1 < net.dims.size(); ++l) {
        if (net.weights[l].size() != net.dims[l + 1] * net.dims[l])
            throw ShapeError("weight matrix of layer " + std::to_string(l) +
                             " does not match dims");
        if (net.biases[l].size() != net.dims[l + 1])
            throw ShapeError("bias vector of layer " + std::to_string(l) +
                             " does not match dims");
    }
    if (net.head == Head::SigmoidScalar && net.dims.back() != 1)
        throw ShapeError("sigmoid_scalar head requires exactly one output");
    if (net.head == Head::ShapeHead && net.output_maps.size() != net.dims.back())
        throw ShapeError("shape head needs one output map per output");
}

std::vector<double> apply_head(const Network& net, const std::vector<double>& raw) {
    std::vector<double> out(raw.size());
    if (net.head == Head::SigmoidScalar) {
        // keep the output strictly inside (0,1); the exact sigmoid rounds to
        // 0.0/1.0 in double precision once |raw| exceeds ~37
        out[0] = std::clamp(sigmoid(raw[0]), 1e-12, 1.0 - 1e-12);
        return out;
    }
    for (std::size_t k = 0; k < raw.size(); ++k) {
        out[k] = net.output_maps[k] == OutputMap::Linear
                     ? raw[k]
                     : softplus(raw[k]) + kSoftplusFloor;
    }
    return out;
}

// d(head)/d(raw), elementwise (the head is diagonal).
std::vector<double> head_deriv(const Network& net, const std::vector<double>& raw,
                               const std::vector<double>& out) {
    std::vector<double> d(raw.size());
    if (net.head == Head::SigmoidScalar) {
        d[0] = out[0] * (1.0 - out[0]);
        return d;
    }
    for (std::size_t k = 0; k < raw.size(); ++k) {
        d[k] = net.output_maps[k] == OutputMap::Linear ? 1.0 : sigmoid(raw[k]);
    }
    return d;
}

} // namespace

Network make_network(std::vector<std::size_t> dims, Activation act, Head head,
                     std::vector<OutputMap> maps, Rng& rng) {
    Network net;
    net.dims = std::move(dims);
    net.activation = act;
    net.head = head;
    net.output_maps = std::move(maps);
    net.weights.resize(net.layer_count());
    net.biases.resize(net.layer_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const std::size_t fan_in = net.dims[l];
        const std::size_t fan_out = net.dims[l + 1];
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        net.weights[l].resize(fan_out * fan_in);
        net.biases[l].assign(fan_out, 0.0);
        for (auto& w : net.weights[l]) w = rng.uniform(-a, a);
    }
    check_dims(net);
    return net;
}

std::vector<double> forward(const Network& net, std::span<const double> input, Trace& trace) {
    check_dims(net);
    if (input.size() != net.input_dim())
        throw ShapeError("forward: input length " + std::to_string(input.size()) +
                         " does not match layer width " + std::to_string(net.input_dim()));

    trace.input.assign(input.begin(), input.end());
    trace.pre.assign(net.layer_count(), {});
    trace.post.assign(net.layer_count(), {});

    std::vector<double> a(input.begin(), input.end());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const std::size_t rows = net.dims[l + 1];
        const std::size_t cols = net.dims[l];
        std::vector<double> z(rows);
        const double* w = net.weights[l].data();
        for (std::size_t r = 0; r < rows; ++r) {
            double s = net.biases[l][r];
            const double* wr = w + r * cols;
            for (std::size_t c = 0; c < cols; ++c) s += wr[c] * a[c];
            z[r] = s;
        }
        trace.pre[l] = z;
        if (l + 1 < net.layer_count()) {
            for (std::size_t r = 0; r < rows; ++r) z[r] = activate(net.activation, z[r]);
            trace.post[l] = z;
            a = std::move(z);
        } else {
            trace.post[l] = apply_head(net, z);
            a = trace.post[l];
        }
    }
    return a;
}

std::vector<double> forward(const Network& net, std::span<const double> input) {
    Trace trace;
    return forward(net, input, trace);
}

Gradients zero_gradients(const Network& net) {
    Gradients g;
    g.weights.resize(net.layer_count());
    g.biases.resize(net.layer_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        g.weights[l].assign(net.weights[l].size(), 0.0);
        g.biases[l].assign(net.biases[l].size(), 0.0);
    }
    g.input.assign(net.input_dim(), 0.0);
    return g;
}

void accumulate(Gradients& acc, const Gradients& g, double scale) {
    for (std::size_t l = 0; l < acc.weights.size(); ++l) {
        for (std::size_t i = 0; i < acc.weights[l].size(); ++i)
            acc.weights[l][i] += scale * g.weights[l][i];
        for (std::size_t i = 0; i < acc.biases[l].size(); ++i)
            acc.biases[l][i] += scale * g.biases[l][i];
    }
    for (std::size_t i = 0; i < acc.input.size(); ++i) acc.input[i] += scale * g.input[i];
}

void scale_gradients(Gradients& g, double scale) {
    for (auto& layer : g.weights)
        for (auto& v : layer) v *= scale;
    for (auto& layer : g.biases)
        for (auto& v : layer) v *= scale;
    for (auto& v : g.input) v *= scale;
}

Gradients backward(const Network& net, const Trace& trace, std::span<const double> upstream) {
    check_dims(net);
    if (trace.pre.size() != net.layer_count() || trace.post.size() != net.layer_count() ||
        trace.input.size() != net.input_dim())
        throw ShapeError("backward: trace does not match network layout");
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        if (trace.pre[l].size() != net.dims[l + 1])
            throw ShapeError("backward: cached activations do not match network layout");
    }
    if (upstream.size() != net.output_dim())
        throw ShapeError("backward: upstream length does not match head arity");

    Gradients g = zero_gradients(net);
    const std::size_t L = net.layer_count();

    // delta through the head.
    const auto hd = head_deriv(net, trace.pre[L - 1], trace.post[L - 1]);
    std::vector<double> delta(net.dims[L]);
    for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = upstream[k] * hd[k];

    for (std::size_t l = L; l-- > 0;) {
        const std::size_t rows = net.dims[l + 1];
        const std::size_t cols = net.dims[l];
        const std::vector<double>& below =
            l == 0 ? trace.input : trace.post[l - 1];
        for (std::size_t r = 0; r < rows; ++r) {
            g.biases[l][r] = delta[r];
            double* gw = g.weights[l].data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) gw[c] = delta[r] * below[c];
        }
        std::vector<double> next(cols, 0.0);
        const double* w = net.weights[l].data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* wr = w + r * cols;
            for (std::size_t c = 0; c < cols; ++c) next[c] += wr[c] * delta[r];
        }
        if (l == 0) {
            g.input = next;
        } else {
            for (std::size_t c = 0; c < cols; ++c)
                next[c] *= activate_deriv(net.activation, trace.pre[l - 1][c],
                                          trace.post[l - 1][c]);
            delta = std::move(next);
        }
    }
    return g;
}

Gradients backward(const Network& net, std::span<const double> input,
                   std::span<const double> upstream) {
    Trace trace;
    forward(net, input, trace);
    return backward(net, trace, upstream);
}

OptimizerState make_optimizer_state(const Network& net) {
    OptimizerState st;
    st.m_w.resize(net.layer_count());
    st.v_w.resize(net.layer_count());
    st.m_b.resize(net.layer_count());
    st.v_b.resize(net.layer_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        st.m_w[l].assign(net.weights[l].size(), 0.0);
        st.v_w[l].assign(net.weights[l].size(), 0.0);
        st.m_b[l].assign(net.biases[l].size(), 0.0);
        st.v_b[l].assign(net.biases[l].size(), 0.0);
    }
    return st;
}

void adam_step(Network& net, const Gradients& grads, OptimizerState& state, double lr) {
    if (grads.weights.size() != net.layer_count())
        throw ShapeError("adam_step: gradient layer count mismatch");
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        if (grads.weights[l].size() != net.weights[l].size() ||
            grads.biases[l].size() != net.biases[l].size())
            throw ShapeError("adam_step: gradient shapes do not match weights");
        for (double v : grads.weights[l])
            if (!std::isfinite(v))
                throw NumericError("adam_step: non-finite weight gradient in layer " +
                                   std::to_string(l));
        for (double v : grads.biases[l])
            if (!std::isfinite(v))
                throw NumericError("adam_step: non-finite bias gradient in layer " +
                                   std::to_string(l));
    }

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    auto update = [&](std::vector<double>& param, const std::vector<double>& grad,
                      std::vector<double>& m, std::vector<double>& v) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            param[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    };
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        update(net.weights[l], grads.weights[l], state.m_w[l], state.v_w[l]);
        update(net.biases[l], grads.biases[l], state.m_b[l], state.v_b[l]);
    }
}

void clip_weights(Network& net, double c) {
    if (!(c > 0.0)) throw DomainError("clip_weights: c must be positive");
    auto clamp = [c](double w) { return w < -c ? -c : (w > c ? c : w); };
    for (auto& layer : net.weights)
        for (auto& w : layer) w = clamp(w);
    for (auto& layer : net.biases)
        for (auto& b : layer) b = clamp(b);
}

double finite_diff_check(const Network& net, std::span<const double> input,
                         std::span<const double> upstream) {
    const Gradients analytic = backward(net, input, upstream);

    auto scalar = [&](const Network& n) {
        const auto out = forward(n, input);
        double s = 0.0;
        for (std::size_t k = 0; k < out.size(); ++k) s += upstream[k] * out[k];
        return s;
    };

    const double h = 1e-5;
    double worst = 0.0;
    Network probe = net;
    auto compare = [&](double& slot, double analytic_value) {
        const double saved = slot;
        slot = saved + h;
        const double up = scalar(probe);
        slot = saved - h;
        const double down = scalar(probe);
        slot = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double rel = std::abs(analytic_value - numeric) / (std::abs(numeric) + 1e-8);
        if (rel > worst) worst = rel;
    };

    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].size(); ++i)
            compare(probe.weights[l][i], analytic.weights[l][i]);
        for (std::size_t i = 0; i < net.biases[l].size(); ++i)
            compare(probe.biases[l][i], analytic.biases[l][i]);
    }
    return worst;
}

namespace {

const char* activation_name(Activation a) {
    return a == Activation::Tanh ? "tanh" : "relu";
}

Activation activation_from(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw ConfigError("unknown activation: " + s);
}

const char* head_name(Head h) {
    return h == Head::SigmoidScalar ? "sigmoid_scalar" : "shape_head";
}

Head head_from(const std::string& s) {
    if (s == "sigmoid_scalar") return Head::SigmoidScalar;
    if (s == "shape_head") return Head::ShapeHead;
    throw ConfigError("unknown head: " + s);
}

const char* map_name(OutputMap m) {
    return m == OutputMap::Linear ? "linear" : "softplus_pos";
}

OutputMap map_from(const std::string& s) {
    if (s == "linear") return OutputMap::Linear;
    if (s == "softplus_pos") return OutputMap::SoftplusPos;
    throw ConfigError("unknown output map: " + s);
}

} // namespace

void save_checkpoint(const Network& net, const std::string& path) {
    nlohmann::json j;
    j["dims"] = net.dims;
    j["activation"] = activation_name(net.activation);
    j["head"] = head_name(net.head);
    j["output_maps"] = nlohmann::json::array();
    for (auto m : net.output_maps) j["output_maps"].push_back(map_name(m));
    j["weights"] = net.weights;
    j["biases"] = net.biases;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
    out << j.dump(1) << "\n";
}

Network load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    nlohmann::json j;
    in >> j;
    Network net;
    net.dims = j.at("dims").get<std::vector<std::size_t>>();
    net.activation = activation_from(j.at("activation").get<std::string>());
    net.head = head_from(j.at("head").get<std::string>());
    for (const auto& m : j.at("output_maps"))
        net.output_maps.push_back(map_from(m.get<std::string>()));
    net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    check_dims(net);
    return net;
}

} // namespace lfi::nn
