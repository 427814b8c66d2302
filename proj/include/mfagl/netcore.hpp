#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mfagl/error.hpp"
#include "mfagl/rng.hpp"

namespace mfagl::net {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(1 + e^x), overflow-safe.
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

enum class Activation { Tanh, Relu, Identity };

enum class OutputTransform { Softplus, Identity };

inline double apply_output(OutputTransform t, double u) {
    return t == OutputTransform::Softplus ? softplus(u) : u;
}

inline double output_derivative(OutputTransform t, double u) {
    return t == OutputTransform::Softplus ? sigmoid(u) : 1.0;
}

/// LSTM cell parameters. The four gates are stored fused, stacked along rows
/// in the order input, forget, candidate, output; per-gate views below.
struct LstmParams {
    Eigen::MatrixXd w; // 4*hidden x input
    Eigen::MatrixXd u; // 4*hidden x hidden
    Eigen::VectorXd b; // 4*hidden

    int input_size() const { return static_cast<int>(w.cols()); }
    int hidden_size() const { return static_cast<int>(u.cols()); }

    static LstmParams zeros(int input, int hidden) {
        if (input < 1 || hidden < 1) throw ShapeError("lstm sizes must be positive");
        LstmParams p;
        p.w = Eigen::MatrixXd::Zero(4 * hidden, input);
        p.u = Eigen::MatrixXd::Zero(4 * hidden, hidden);
        p.b = Eigen::VectorXd::Zero(4 * hidden);
        return p;
    }

    auto w_i() { return w.middleRows(0 * hidden_size(), hidden_size()); }
    auto w_f() { return w.middleRows(1 * hidden_size(), hidden_size()); }
    auto w_g() { return w.middleRows(2 * hidden_size(), hidden_size()); }
    auto w_o() { return w.middleRows(3 * hidden_size(), hidden_size()); }
    auto u_i() { return u.middleRows(0 * hidden_size(), hidden_size()); }
    auto u_f() { return u.middleRows(1 * hidden_size(), hidden_size()); }
    auto u_g() { return u.middleRows(2 * hidden_size(), hidden_size()); }
    auto u_o() { return u.middleRows(3 * hidden_size(), hidden_size()); }
    auto b_i() { return b.segment(0 * hidden_size(), hidden_size()); }
    auto b_f() { return b.segment(1 * hidden_size(), hidden_size()); }
    auto b_g() { return b.segment(2 * hidden_size(), hidden_size()); }
    auto b_o() { return b.segment(3 * hidden_size(), hidden_size()); }
    auto w_i() const { return w.middleRows(0 * hidden_size(), hidden_size()); }
    auto w_f() const { return w.middleRows(1 * hidden_size(), hidden_size()); }
    auto w_g() const { return w.middleRows(2 * hidden_size(), hidden_size()); }
    auto w_o() const { return w.middleRows(3 * hidden_size(), hidden_size()); }
    auto u_i() const { return u.middleRows(0 * hidden_size(), hidden_size()); }
    auto u_f() const { return u.middleRows(1 * hidden_size(), hidden_size()); }
    auto u_g() const { return u.middleRows(2 * hidden_size(), hidden_size()); }
    auto u_o() const { return u.middleRows(3 * hidden_size(), hidden_size()); }
    auto b_i() const { return b.segment(0 * hidden_size(), hidden_size()); }
    auto b_f() const { return b.segment(1 * hidden_size(), hidden_size()); }
    auto b_g() const { return b.segment(2 * hidden_size(), hidden_size()); }
    auto b_o() const { return b.segment(3 * hidden_size(), hidden_size()); }

    void check_shapes() const {
        const int h = hidden_size();
        if (h < 1 || input_size() < 1) throw ShapeError("lstm sizes must be positive");
        if (w.rows() != 4 * h || u.rows() != 4 * h || b.size() != 4 * h)
            throw ShapeError("lstm gate blocks do not share one hidden size");
    }
};

struct MlpLayer {
    Eigen::MatrixXd w;
    Eigen::VectorXd b;
    Activation act = Activation::Identity;
};

/// Feed-forward stack; the scalar output is passed through `output` last.
struct MlpParams {
    std::vector<MlpLayer> layers;
    OutputTransform output = OutputTransform::Softplus;

    int input_size() const {
        if (layers.empty()) throw ShapeError("mlp has no layers");
        return static_cast<int>(layers.front().w.cols());
    }

    void check_shapes() const {
        if (layers.empty()) throw ShapeError("mlp has no layers");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            if (layers[l].w.rows() != layers[l].b.size())
                throw ShapeError("mlp layer " + std::to_string(l) + " weight/bias mismatch");
            if (l > 0 && layers[l].w.cols() != layers[l - 1].w.rows())
                throw ShapeError("mlp layer " + std::to_string(l) + " does not chain");
        }
        if (layers.back().w.rows() != 1)
            throw ShapeError("mlp output dimension must be 1");
        if (layers.back().act != Activation::Identity)
            throw ShapeError("final mlp layer activation must be Identity; the output "
                             "transform is applied separately");
    }
};

struct ModelParams {
    LstmParams lstm;
    MlpParams mlp;

    void check_shapes() const {
        lstm.check_shapes();
        mlp.check_shapes();
        if (mlp.input_size() < lstm.hidden_size())
            throw ShapeError("mlp input narrower than the lstm hidden state");
    }
};

/// Calls fn(name, array) for every parameter array, in a fixed order shared
/// by the optimizer, the checkpoint format, and the test flatteners.
template <class Model, class Fn>
void visit_arrays(Model&& m, Fn&& fn) {
    fn(std::string("lstm.w"), m.lstm.w);
    fn(std::string("lstm.u"), m.lstm.u);
    fn(std::string("lstm.b"), m.lstm.b);
    for (std::size_t l = 0; l < m.mlp.layers.size(); ++l) {
        fn("mlp." + std::to_string(l) + ".w", m.mlp.layers[l].w);
        fn("mlp." + std::to_string(l) + ".b", m.mlp.layers[l].b);
    }
}

inline std::int64_t param_count(const ModelParams& m) {
    std::int64_t n = 0;
    visit_arrays(m, [&](const std::string&, const auto& a) { n += a.size(); });
    return n;
}

inline Eigen::VectorXd flatten(const ModelParams& m) {
    Eigen::VectorXd out(param_count(m));
    std::int64_t off = 0;
    visit_arrays(m, [&](const std::string&, const auto& a) {
        out.segment(off, a.size()) = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
        off += a.size();
    });
    return out;
}

inline void unflatten(ModelParams& m, const Eigen::VectorXd& flat) {
    if (flat.size() != param_count(m)) throw ShapeError("flat vector length mismatch");
    std::int64_t off = 0;
    visit_arrays(m, [&](const std::string&, auto& a) {
        Eigen::Map<Eigen::VectorXd>(a.data(), a.size()) = flat.segment(off, a.size());
        off += a.size();
    });
}

inline bool all_finite(const ModelParams& m) {
    bool ok = true;
    visit_arrays(m, [&](const std::string&, const auto& a) { ok = ok && a.allFinite(); });
    return ok;
}

/// Partial derivatives, one value per parameter, same layout as the model.
struct Gradient : ModelParams {};

inline Gradient zero_like(const ModelParams& m) {
    Gradient g;
    g.lstm = LstmParams::zeros(m.lstm.input_size(), m.lstm.hidden_size());
    g.mlp.output = m.mlp.output;
    g.mlp.layers.reserve(m.mlp.layers.size());
    for (const MlpLayer& layer : m.mlp.layers)
        g.mlp.layers.push_back({Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()),
                                Eigen::VectorXd::Zero(layer.b.size()), layer.act});
    return g;
}

inline void set_zero(Gradient& g) {
    visit_arrays(g, [](const std::string&, auto& a) { a.setZero(); });
}

/// Intermediates of one unrolled LSTM pass, laid out one column per step.
/// Buffers are reused across calls; backward reads them in place.
struct LstmTape {
    Eigen::MatrixXd x;      // input x T
    Eigen::MatrixXd gates;  // 4*hidden x T, post-activation [i; f; g; o]
    Eigen::MatrixXd c;      // hidden x T
    Eigen::MatrixXd h;      // hidden x T
    Eigen::MatrixXd tanh_c; // hidden x T
    int steps = 0;
};

inline void lstm_forward(const LstmParams& p, const Eigen::Ref<const Eigen::MatrixXd>& seq,
                         LstmTape& tape) {
    p.check_shapes();
    if (seq.rows() != p.input_size())
        throw ShapeError("sequence row count " + std::to_string(seq.rows()) +
                         " does not match lstm input size " + std::to_string(p.input_size()));
    if (seq.cols() < 1) throw ShapeError("empty sequence");
    const int h = p.hidden_size();
    const int steps = static_cast<int>(seq.cols());
    tape.steps = steps;
    tape.x = seq;
    tape.gates.resize(4 * h, steps);
    tape.c.resize(h, steps);
    tape.h.resize(h, steps);
    tape.tanh_c.resize(h, steps);
    for (int t = 0; t < steps; ++t) {
        auto a = tape.gates.col(t);
        a.noalias() = p.w * seq.col(t);
        if (t > 0) a.noalias() += p.u * tape.h.col(t - 1);
        a += p.b;
        for (int k = 0; k < h; ++k) {
            a[0 * h + k] = sigmoid(a[0 * h + k]);
            a[1 * h + k] = sigmoid(a[1 * h + k]);
            a[2 * h + k] = std::tanh(a[2 * h + k]);
            a[3 * h + k] = sigmoid(a[3 * h + k]);
        }
        auto i = a.segment(0 * h, h).array();
        auto f = a.segment(1 * h, h).array();
        auto g = a.segment(2 * h, h).array();
        auto o = a.segment(3 * h, h).array();
        if (t > 0)
            tape.c.col(t).array() = f * tape.c.col(t - 1).array() + i * g;
        else
            tape.c.col(t).array() = i * g;
        tape.tanh_c.col(t).array() = tape.c.col(t).array().tanh();
        tape.h.col(t).array() = o * tape.tanh_c.col(t).array();
    }
}

/// Hidden state per step, starting from zero hidden and cell states.
inline std::vector<Eigen::VectorXd> lstm_forward(const LstmParams& p,
                                                 const std::vector<Eigen::VectorXd>& seq) {
    if (seq.empty()) throw ShapeError("empty sequence");
    Eigen::MatrixXd m(p.input_size(), static_cast<Eigen::Index>(seq.size()));
    for (std::size_t t = 0; t < seq.size(); ++t) {
        if (seq[t].size() != p.input_size())
            throw ShapeError("sequence element " + std::to_string(t) + " has length " +
                             std::to_string(seq[t].size()));
        m.col(static_cast<Eigen::Index>(t)) = seq[t];
    }
    LstmTape tape;
    lstm_forward(p, m, tape);
    std::vector<Eigen::VectorXd> out(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t)
        out[t] = tape.h.col(static_cast<Eigen::Index>(t));
    return out;
}

inline double apply_activation(Activation act, double x) {
    switch (act) {
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Identity: return x;
    }
    throw InvalidArgument("unknown activation");
}

inline double activation_derivative(Activation act, double pre) {
    switch (act) {
        case Activation::Tanh: {
            const double t = std::tanh(pre);
            return 1.0 - t * t;
        }
        case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::Identity: return 1.0;
    }
    throw InvalidArgument("unknown activation");
}

struct MlpTape {
    std::vector<Eigen::VectorXd> z; // z[0] = input, z[l+1] = activation of layer l
    std::vector<Eigen::VectorXd> a; // pre-activation per layer
    double pre_output = 0.0;        // scalar before the output transform
};

/// Runs the stack on the input already sitting in tape.z[0].
inline double mlp_forward_in_place(const MlpParams& p, MlpTape& tape) {
    p.check_shapes();
    if (tape.z.empty() || tape.z[0].size() != p.input_size())
        throw ShapeError("mlp input length does not match first layer width " +
                         std::to_string(p.input_size()));
    const std::size_t n = p.layers.size();
    tape.z.resize(n + 1);
    tape.a.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
        const MlpLayer& layer = p.layers[l];
        tape.a[l].resize(layer.b.size());
        tape.a[l].noalias() = layer.w * tape.z[l];
        tape.a[l] += layer.b;
        tape.z[l + 1].resize(layer.b.size());
        for (Eigen::Index k = 0; k < tape.a[l].size(); ++k)
            tape.z[l + 1][k] = apply_activation(layer.act, tape.a[l][k]);
    }
    tape.pre_output = tape.a[n - 1][0];
    return apply_output(p.output, tape.pre_output);
}

inline double mlp_forward(const MlpParams& p, const Eigen::Ref<const Eigen::VectorXd>& input,
                          MlpTape& tape) {
    if (input.size() != p.input_size())
        throw ShapeError("mlp input length " + std::to_string(input.size()) +
                         " does not match first layer width " + std::to_string(p.input_size()));
    if (tape.z.empty()) tape.z.resize(1);
    tape.z[0] = input;
    return mlp_forward_in_place(p, tape);
}

inline double mlp_forward(const MlpParams& p, const Eigen::Ref<const Eigen::VectorXd>& input) {
    MlpTape tape;
    return mlp_forward(p, input, tape);
}

/// Retained state of one combined LSTM+MLP forward pass, plus backward
/// workspaces. One tape serves one model instance at a time.
struct ForwardTape {
    LstmTape lstm;
    MlpTape mlp;
    bool ready = false;
    // backward scratch
    Eigen::VectorXd dh, dc, da, delta, delta_prev, dinput;
};

/// f(x, phi): runs the lag sequence through the LSTM one scalar per step,
/// then the MLP on [final hidden state; dummies], then the output transform.
inline double forward(const ModelParams& m, const Eigen::Ref<const Eigen::VectorXd>& lags,
                      const Eigen::Ref<const Eigen::VectorXd>& dummies, ForwardTape& tape) {
    if (m.lstm.input_size() != 1)
        throw ShapeError("combined forward feeds one scalar lag per step; lstm input size must be 1");
    if (lags.size() < 1) throw ShapeError("empty lag window");
    const Eigen::Map<const Eigen::MatrixXd> seq(lags.data(), 1, lags.size());
    lstm_forward(m.lstm, seq, tape.lstm);
    const int h = m.lstm.hidden_size();
    if (m.mlp.input_size() != h + dummies.size())
        throw ShapeError("mlp expects " + std::to_string(m.mlp.input_size()) +
                         " inputs, got hidden " + std::to_string(h) + " + dummies " +
                         std::to_string(dummies.size()));
    if (tape.mlp.z.empty()) tape.mlp.z.resize(1);
    tape.mlp.z[0].resize(h + dummies.size());
    tape.mlp.z[0].head(h) = tape.lstm.h.col(tape.lstm.steps - 1);
    tape.mlp.z[0].tail(dummies.size()) = dummies;
    const double out = mlp_forward_in_place(m.mlp, tape.mlp);
    tape.ready = true;
    return out;
}

/// Accumulates d(output)/d(theta) * d_out into grad by reverse mode through
/// the output transform, the MLP, and the unrolled LSTM.
inline void backward(const ModelParams& m, ForwardTape& tape, double d_out, Gradient& grad) {
    if (!tape.ready) throw UsageError("backward called without a matching forward pass");
    const int h = m.lstm.hidden_size();
    const std::size_t n_layers = m.mlp.layers.size();

    double du = d_out * output_derivative(m.mlp.output, tape.mlp.pre_output);
    tape.delta.resize(1);
    tape.delta[0] = du;
    for (std::size_t li = n_layers; li-- > 0;) {
        const MlpLayer& layer = m.mlp.layers[li];
        // delta currently holds d/d(activation output); fold in act'.
        for (Eigen::Index k = 0; k < tape.delta.size(); ++k)
            tape.delta[k] *= activation_derivative(layer.act, tape.mlp.a[li][k]);
        grad.mlp.layers[li].w.noalias() += tape.delta * tape.mlp.z[li].transpose();
        grad.mlp.layers[li].b += tape.delta;
        if (li > 0) {
            tape.delta_prev.resize(layer.w.cols());
            tape.delta_prev.noalias() = layer.w.transpose() * tape.delta;
            std::swap(tape.delta, tape.delta_prev);
        } else {
            tape.dinput.resize(layer.w.cols());
            tape.dinput.noalias() = layer.w.transpose() * tape.delta;
        }
    }

    tape.dh = tape.dinput.head(h);
    tape.dc.setZero(h);
    tape.da.resize(4 * h);
    for (int t = tape.lstm.steps - 1; t >= 0; --t) {
        auto i = tape.lstm.gates.col(t).segment(0 * h, h).array();
        auto f = tape.lstm.gates.col(t).segment(1 * h, h).array();
        auto g = tape.lstm.gates.col(t).segment(2 * h, h).array();
        auto o = tape.lstm.gates.col(t).segment(3 * h, h).array();
        auto tc = tape.lstm.tanh_c.col(t).array();
        auto dh = tape.dh.array();
        auto dc = tape.dc.array();

        // through h_t = o * tanh(c_t)
        tape.da.segment(3 * h, h).array() = dh * tc * o * (1.0 - o); // d(pre o)
        dc += dh * o * (1.0 - tc * tc);
        // through c_t = f * c_{t-1} + i * g
        tape.da.segment(0 * h, h).array() = dc * g * i * (1.0 - i);       // d(pre i)
        tape.da.segment(2 * h, h).array() = dc * i * (1.0 - g * g);       // d(pre g)
        if (t > 0)
            tape.da.segment(1 * h, h).array() =
                dc * tape.lstm.c.col(t - 1).array() * f * (1.0 - f); // d(pre f)
        else
            tape.da.segment(1 * h, h).setZero(); // c_{-1} = 0
        grad.lstm.w.noalias() += tape.da * tape.lstm.x.col(t).transpose();
        grad.lstm.b += tape.da;
        if (t > 0) {
            grad.lstm.u.noalias() += tape.da * tape.lstm.h.col(t - 1).transpose();
            tape.dh.noalias() = m.lstm.u.transpose() * tape.da;
            tape.dc = (tape.dc.array() * f).matrix();
        }
    }
    tape.ready = false;
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment accumulators laid out in visit_arrays order.
struct AdamState {
    Eigen::VectorXd m, v;
    std::int64_t step = 0;

    static AdamState for_params(const ModelParams& p) {
        AdamState s;
        const std::int64_t n = param_count(p);
        s.m = Eigen::VectorXd::Zero(n);
        s.v = Eigen::VectorXd::Zero(n);
        return s;
    }
};

template <class Fn>
void for_each_array_pair(ModelParams& p, const ModelParams& g, Fn&& fn) {
    if (p.mlp.layers.size() != g.mlp.layers.size())
        throw ShapeError("gradient layer count differs from parameters");
    fn(p.lstm.w, g.lstm.w);
    fn(p.lstm.u, g.lstm.u);
    fn(p.lstm.b, g.lstm.b);
    for (std::size_t l = 0; l < p.mlp.layers.size(); ++l) {
        fn(p.mlp.layers[l].w, g.mlp.layers[l].w);
        fn(p.mlp.layers[l].b, g.mlp.layers[l].b);
    }
}

/// One Adam update with bias correction; increments the step counter.
inline void adam_step(AdamState& s, ModelParams& p, const Gradient& g, const AdamConfig& cfg) {
    ++s.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
    std::int64_t off = 0;
    for_each_array_pair(p, g, [&](auto& pa, const auto& ga) {
        if (pa.rows() != ga.rows() || pa.cols() != ga.cols())
            throw ShapeError("gradient array shape differs from parameters");
        const std::int64_t n = pa.size();
        if (off + n > s.m.size()) throw ShapeError("adam state smaller than parameters");
        auto m = s.m.segment(off, n).array();
        auto v = s.v.segment(off, n).array();
        Eigen::Map<const Eigen::ArrayXd> ga_flat(ga.data(), n);
        Eigen::Map<Eigen::ArrayXd> pa_flat(pa.data(), n);
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * ga_flat;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * ga_flat.square();
        pa_flat -= cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
        off += n;
    });
    if (off != s.m.size()) throw ShapeError("adam state larger than parameters");
}

inline void init_weight(Eigen::Ref<Eigen::MatrixXd> w, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-bound, bound);
}

/// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weights, zero biases, forget
/// gate bias +1.
inline LstmParams init_lstm(int input, int hidden, Rng& rng) {
    LstmParams p = LstmParams::zeros(input, hidden);
    init_weight(p.w, input, rng);
    init_weight(p.u, hidden, rng);
    p.b_f().setOnes();
    return p;
}

inline MlpParams init_mlp(int input, const std::vector<int>& hidden_widths,
                          OutputTransform output, Rng& rng) {
    MlpParams p;
    p.output = output;
    int prev = input;
    for (const int width : hidden_widths) {
        if (width < 1) throw ShapeError("mlp hidden width must be positive");
        MlpLayer layer;
        layer.w.resize(width, prev);
        init_weight(layer.w, prev, rng);
        layer.b = Eigen::VectorXd::Zero(width);
        layer.act = Activation::Tanh;
        p.layers.push_back(std::move(layer));
        prev = width;
    }
    MlpLayer head;
    head.w.resize(1, prev);
    init_weight(head.w, prev, rng);
    head.b = Eigen::VectorXd::Zero(1);
    head.act = Activation::Identity;
    p.layers.push_back(std::move(head));
    return p;
}

/// The combined predictor: scalar-input LSTM plus MLP over
/// [hidden state; dummies].
inline ModelParams init_model(int hidden, int dummy_dim, const std::vector<int>& mlp_hidden,
                              OutputTransform output, Rng& rng) {
    ModelParams m;
    m.lstm = init_lstm(1, hidden, rng);
    m.mlp = init_mlp(hidden + dummy_dim, mlp_hidden, output, rng);
    m.check_shapes();
    return m;
}

} // namespace mfagl::net
