#include "arlb/mlp.hpp"

#include <cmath>

namespace arlb {

namespace {

Mat orthogonal(int rows, int cols, double gain, Rng& rng) {
    // QR of a gaussian matrix; R's diagonal signs are folded into Q so the
    // result is uniquely determined by the gaussian draw.
    const int n = std::max(rows, cols);
    Mat a(n, std::min(rows, cols));
    for (int c = 0; c < a.cols(); ++c)
        for (int r = 0; r < a.rows(); ++r) a(r, c) = rng.normal();
    Eigen::HouseholderQR<Mat> qr(a);
    Mat q = qr.householderQ() * Mat::Identity(n, a.cols());
    Mat r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
    for (int c = 0; c < q.cols(); ++c)
        if (r(c, c) < 0) q.col(c) = -q.col(c);
    if (rows < cols) q.transposeInPlace();
    return gain * q.topLeftCorner(rows, cols);
}

void apply_activation(Mat& x, Activation act) {
    if (act == Activation::Tanh)
        x = x.array().tanh();
    else
        x = x.array().max(0.0);
}

Mat activation_grad(const Mat& pre, const Mat& post, Activation act) {
    if (act == Activation::Tanh) return 1.0 - post.array().square();
    return (pre.array() > 0.0).cast<double>();
}

}  // namespace

MlpGrads zeros_like(const MlpParams& params) {
    MlpGrads g;
    g.layers.reserve(params.layers.size());
    for (const auto& layer : params.layers)
        g.layers.push_back({Mat::Zero(layer.weight.rows(), layer.weight.cols()), Vec::Zero(layer.bias.size())});
    g.log_std = Vec::Zero(params.log_std.size());
    return g;
}

MlpParams make_mlp(int in, const std::vector<int>& hidden, int out, Activation act, Head head, Rng& rng,
                   double out_gain) {
    MlpParams p;
    p.activation = act;
    p.head = head;
    int prev = in;
    for (int h : hidden) {
        p.layers.push_back({orthogonal(h, prev, std::sqrt(2.0), rng), Vec::Zero(h)});
        prev = h;
    }
    p.layers.push_back({orthogonal(out, prev, out_gain, rng), Vec::Zero(out)});
    if (head == Head::GaussianMeanLogStd) p.log_std = Vec::Zero(out);
    return p;
}

ForwardTrace forward_trace(const MlpParams& params, const Mat& x) {
    if (params.layers.empty()) throw ShapeError("forward: network has no layers");
    if (x.cols() != params.in_dim())
        throw ShapeError("forward: input has " + std::to_string(x.cols()) + " features but layer 0 expects " +
                         std::to_string(params.in_dim()));
    ForwardTrace trace;
    trace.post.push_back(x);
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& layer = params.layers[i];
        if (trace.post.back().cols() != layer.weight.cols())
            throw ShapeError("forward: shape mismatch entering layer " + std::to_string(i));
        Mat z = trace.post.back() * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        trace.pre.push_back(z);
        if (i + 1 < params.layers.size()) {
            apply_activation(z, params.activation);
            trace.post.push_back(std::move(z));
        }
    }
    return trace;
}

Mat forward(const MlpParams& params, const Mat& x) { return forward_trace(params, x).output(); }

MlpGrads backward(const MlpParams& params, const ForwardTrace& trace, const Mat& loss_grad, Mat* input_grad) {
    if (trace.empty()) throw Error("backward: no recorded forward pass");
    if (loss_grad.rows() != trace.output().rows() || loss_grad.cols() != trace.output().cols())
        throw ShapeError("backward: loss_grad shape does not match recorded output");

    MlpGrads grads = zeros_like(params);
    Mat delta = loss_grad;  // d(loss)/d(pre-activation of current layer)
    for (int i = static_cast<int>(params.layers.size()) - 1; i >= 0; --i) {
        grads.layers[i].weight = delta.transpose() * trace.post[i];
        grads.layers[i].bias = delta.colwise().sum().transpose();
        if (i > 0) {
            Mat back = delta * params.layers[i].weight;
            delta = back.array() * activation_grad(trace.pre[i - 1], trace.post[i], params.activation).array();
        } else if (input_grad != nullptr) {
            *input_grad = delta * params.layers[0].weight;
        }
    }
    return grads;
}

AdamState make_adam(const MlpParams& params, double lr) {
    AdamState s;
    s.lr = lr;
    s.m = zeros_like(params);
    s.v = zeros_like(params);
    return s;
}

namespace {

void adam_apply(Eigen::Ref<Mat> p, const Eigen::Ref<const Mat>& g, Eigen::Ref<Mat> m, Eigen::Ref<Mat> v,
                const AdamState& s, double bc1, double bc2, const std::string& path) {
    if (!g.allFinite()) throw Error("adam_update: non-finite gradient in " + path);
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v.array().matrix() + (1.0 - s.beta2) * g.array().square().matrix();
    p.array() -= s.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.eps);
}

}  // namespace

void adam_update(MlpParams& params, const MlpGrads& grads, AdamState& state) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const std::string where = "layer " + std::to_string(i);
        adam_apply(params.layers[i].weight, grads.layers[i].weight, state.m.layers[i].weight,
                   state.v.layers[i].weight, state, bc1, bc2, where + " weight");
        adam_apply(params.layers[i].bias, grads.layers[i].bias, state.m.layers[i].bias, state.v.layers[i].bias,
                   state, bc1, bc2, where + " bias");
    }
    if (params.log_std.size() > 0)
        adam_apply(params.log_std, grads.log_std, state.m.log_std, state.v.log_std, state, bc1, bc2, "log_std");
}

double grad_norm(const MlpGrads& grads) {
    const MlpGrads* ptr = &grads;
    return grad_norm(std::vector<const MlpGrads*>{ptr});
}

double grad_norm(const std::vector<const MlpGrads*>& grads) {
    double sq = 0.0;
    for (const auto* g : grads) {
        for (const auto& layer : g->layers) sq += layer.weight.squaredNorm() + layer.bias.squaredNorm();
        sq += g->log_std.squaredNorm();
    }
    return std::sqrt(sq);
}

void clip_grad_norm(const std::vector<MlpGrads*>& grads, double max_norm) {
    std::vector<const MlpGrads*> view(grads.begin(), grads.end());
    const double norm = grad_norm(view);
    if (norm <= max_norm * (1.0 + 1e-12)) return;
    const double scale = max_norm > 0.0 ? max_norm / norm : 0.0;
    for (auto* g : grads) {
        for (auto& layer : g->layers) {
            layer.weight *= scale;
            layer.bias *= scale;
        }
        g->log_std *= scale;
    }
}

void clip_grad_norm(MlpGrads& grads, double max_norm) { clip_grad_norm(std::vector<MlpGrads*>{&grads}, max_norm); }

Mat log_softmax(const Mat& logits) {
    Mat shifted = logits.colwise() - logits.rowwise().maxCoeff();
    Vec lse = shifted.array().exp().rowwise().sum().log();
    return shifted.colwise() - lse;
}

Mat softmax(const Mat& logits) { return log_softmax(logits).array().exp(); }

Vec categorical_logp(const Mat& logits, const VecI& actions) {
    const Mat lp = log_softmax(logits);
    Vec out(lp.rows());
    for (Eigen::Index i = 0; i < lp.rows(); ++i) out[i] = lp(i, static_cast<int>(actions[i]));
    return out;
}

Vec categorical_entropy(const Mat& logits) {
    const Mat lp = log_softmax(logits);
    return -(lp.array().exp() * lp.array()).rowwise().sum();
}

VecI categorical_sample(const Mat& logits, Rng& rng) {
    const Mat p = softmax(logits);
    VecI out(p.rows());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        double u = rng.uniform();
        int a = 0;
        for (; a < p.cols() - 1; ++a) {
            u -= p(i, a);
            if (u < 0.0) break;
        }
        out[i] = a;
    }
    return out;
}

VecI categorical_argmax(const Mat& logits) {
    VecI out(logits.rows());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best;
        logits.row(i).maxCoeff(&best);
        out[i] = static_cast<std::int64_t>(best);
    }
    return out;
}

Vec gaussian_logp(const Mat& mean, const Vec& log_std, const Mat& actions) {
    constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
    const Eigen::ArrayXd std = log_std.array().exp();
    Vec out = Vec::Constant(mean.rows(), -0.5 * kLog2Pi * static_cast<double>(mean.cols()) - log_std.sum());
    for (Eigen::Index d = 0; d < mean.cols(); ++d)
        out.array() -= 0.5 * ((actions.col(d) - mean.col(d)).array() / std[d]).square();
    return out;
}

double gaussian_entropy(const Vec& log_std) {
    constexpr double kHalfLog2PiE = 1.4189385332046727418;  // 0.5*(1+log(2*pi))
    return log_std.sum() + kHalfLog2PiE * static_cast<double>(log_std.size());
}

Mat gaussian_sample(const Mat& mean, const Vec& log_std, Rng& rng) {
    Mat out(mean.rows(), mean.cols());
    for (Eigen::Index i = 0; i < mean.rows(); ++i)
        for (Eigen::Index d = 0; d < mean.cols(); ++d)
            out(i, d) = mean(i, d) + std::exp(log_std[d]) * rng.normal();
    return out;
}

}  // namespace arlb
