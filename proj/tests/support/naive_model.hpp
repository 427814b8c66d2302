// Scalar re-implementations of the network math, written against the
// definitions rather than the library internals. They are the reference the
// fast paths are checked against, so they stay loop-based on purpose.
#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "mfagl/netcore.hpp"

namespace oracle {

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Final hidden state of the recurrence, gate by gate, element by element.
inline Eigen::VectorXd naive_lstm_final_h(const mfagl::net::LstmParams& p,
                                          const std::vector<double>& lags) {
    const int h = p.hidden_size();
    Eigen::VectorXd c = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd hid = Eigen::VectorXd::Zero(h);
    for (const double x : lags) {
        Eigen::VectorXd i(h), f(h), g(h), o(h);
        for (int r = 0; r < h; ++r) {
            double zi = p.b_i()(r), zf = p.b_f()(r), zg = p.b_g()(r), zo = p.b_o()(r);
            zi += p.w_i()(r, 0) * x;
            zf += p.w_f()(r, 0) * x;
            zg += p.w_g()(r, 0) * x;
            zo += p.w_o()(r, 0) * x;
            for (int k = 0; k < h; ++k) {
                zi += p.u_i()(r, k) * hid(k);
                zf += p.u_f()(r, k) * hid(k);
                zg += p.u_g()(r, k) * hid(k);
                zo += p.u_o()(r, k) * hid(k);
            }
            i(r) = sig(zi);
            f(r) = sig(zf);
            g(r) = std::tanh(zg);
            o(r) = sig(zo);
        }
        for (int r = 0; r < h; ++r) {
            c(r) = f(r) * c(r) + i(r) * g(r);
            hid(r) = o(r) * std::tanh(c(r));
        }
    }
    return hid;
}

/// Layer-by-layer affine + activation, scalar loops.
inline double naive_mlp(const mfagl::net::MlpParams& p, const Eigen::VectorXd& input) {
    Eigen::VectorXd a = input;
    for (const auto& layer : p.layers) {
        Eigen::VectorXd z(layer.w.rows());
        for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
            double acc = layer.b(r);
            for (Eigen::Index k = 0; k < layer.w.cols(); ++k) acc += layer.w(r, k) * a(k);
            switch (layer.act) {
                case mfagl::net::Activation::Tanh: z(r) = std::tanh(acc); break;
                case mfagl::net::Activation::Relu: z(r) = acc > 0.0 ? acc : 0.0; break;
                case mfagl::net::Activation::Identity: z(r) = acc; break;
            }
        }
        a = std::move(z);
    }
    return a(0);
}

/// Whole predictor: recurrence, concatenation, head, output transform.
inline double naive_forward(const mfagl::net::ModelParams& m, const std::vector<double>& lags,
                            const Eigen::VectorXd& dummies) {
    const Eigen::VectorXd h = naive_lstm_final_h(m.lstm, lags);
    Eigen::VectorXd joined(h.size() + dummies.size());
    joined << h, dummies;
    const double u = naive_mlp(m.mlp, joined);
    if (m.mlp.output == mfagl::net::OutputTransform::Softplus)
        return u > 30.0 ? u : std::log1p(std::exp(u));
    return u;
}

} // namespace oracle
