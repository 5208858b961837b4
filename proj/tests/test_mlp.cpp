#include <doctest.h>

#include <cmath>

#include "arlb/mlp.hpp"

using namespace arlb;

namespace {

// Straight-line re-evaluation of a 2-layer tanh net, independent of the
// forward() implementation path.
Mat reference_forward_tanh2(const MlpParams& net, const Mat& x) {
    Mat h1 = x * net.layers[0].weight.transpose();
    h1.rowwise() += net.layers[0].bias.transpose();
    h1 = h1.array().tanh();
    Mat h2 = h1 * net.layers[1].weight.transpose();
    h2.rowwise() += net.layers[1].bias.transpose();
    h2 = h2.array().tanh();
    Mat out = h2 * net.layers[2].weight.transpose();
    out.rowwise() += net.layers[2].bias.transpose();
    return out;
}

double scalar_loss(const MlpParams& net, const Mat& x, const Mat& g) {
    return (forward(net, x).array() * g.array()).sum();
}

// Central finite differences of sum(g .* forward(x)) for one parameter slot.
double fd_slot(MlpParams net, const Mat& x, const Mat& g, int layer, bool bias, int r, int c) {
    const double h = 1e-5;
    double& slot = bias ? net.layers[static_cast<std::size_t>(layer)].bias[r]
                        : net.layers[static_cast<std::size_t>(layer)].weight(r, c);
    const double original = slot;
    slot = original + h;
    const double up = scalar_loss(net, x, g);
    slot = original - h;
    const double down = scalar_loss(net, x, g);
    return (up - down) / (2.0 * h);
}

Mat random_mat(int rows, int cols, Rng& rng) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
    return m;
}

void check_close(double a, double b, double rel) {
    CHECK(std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)}));
}

}  // namespace

TEST_CASE("forward: zero net maps anything to zero") {
    Rng rng(0);
    MlpParams net = make_mlp(3, {4}, 2, Activation::Tanh, Head::Linear, rng);
    for (auto& layer : net.layers) {
        layer.weight.setZero();
        layer.bias.setZero();
    }
    Mat x = random_mat(5, 3, rng);
    CHECK(forward(net, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: single linear layer, W=[[2]], b=[1], x=[[3]] -> [[7]]") {
    MlpParams net;
    net.layers.push_back({Mat::Constant(1, 1, 2.0), Vec::Constant(1, 1.0)});
    Mat x = Mat::Constant(1, 1, 3.0);
    CHECK(forward(net, x)(0, 0) == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("forward: matches an independent straight-line re-evaluation within 1e-12") {
    Rng rng(11);
    MlpParams net = make_mlp(4, {8, 8}, 3, Activation::Tanh, Head::Linear, rng);
    const Mat x = random_mat(6, 4, rng);
    const Mat got = forward(net, x);
    const Mat expected = reference_forward_tanh2(net, x);
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward: shape mismatch names the layer") {
    Rng rng(1);
    MlpParams net = make_mlp(4, {8}, 2, Activation::Tanh, Head::Linear, rng);
    CHECK_THROWS_WITH_AS(forward(net, Mat::Zero(2, 5)), doctest::Contains("layer 0"), ShapeError);
}

TEST_CASE("backward: scalar net f(w) = w*x with x=3 gives df/dw = 3") {
    MlpParams net;
    net.layers.push_back({Mat::Constant(1, 1, 0.7), Vec::Zero(1)});
    const Mat x = Mat::Constant(1, 1, 3.0);
    const ForwardTrace trace = forward_trace(net, x);
    const MlpGrads grads = backward(net, trace, Mat::Constant(1, 1, 1.0));
    CHECK(grads.layers[0].weight(0, 0) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("backward: zero loss_grad gives all-zero gradients") {
    Rng rng(2);
    MlpParams net = make_mlp(3, {6, 6}, 2, Activation::Tanh, Head::Linear, rng);
    const Mat x = random_mat(4, 3, rng);
    const ForwardTrace trace = forward_trace(net, x);
    const MlpGrads grads = backward(net, trace, Mat::Zero(4, 2));
    CHECK(grad_norm(grads) == 0.0);
}

TEST_CASE("backward: requires a recorded forward pass") {
    Rng rng(2);
    MlpParams net = make_mlp(3, {6}, 2, Activation::Tanh, Head::Linear, rng);
    ForwardTrace empty;
    CHECK_THROWS_AS(backward(net, empty, Mat::Zero(1, 2)), Error);
}

TEST_CASE("backward: matches central finite differences within 1e-6 relative") {
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        MlpParams net = make_mlp(4, {8, 8}, 3, trial % 2 == 0 ? Activation::Tanh : Activation::Relu,
                                 Head::Linear, rng);
        const Mat x = random_mat(7, 4, rng);
        const Mat g = random_mat(7, 3, rng);
        const ForwardTrace trace = forward_trace(net, x);
        const MlpGrads grads = backward(net, trace, g);
        for (int layer = 0; layer < 3; ++layer) {
            const auto& w = net.layers[static_cast<std::size_t>(layer)].weight;
            for (int probe = 0; probe < 6; ++probe) {
                const int r = probe % static_cast<int>(w.rows());
                const int c = probe % static_cast<int>(w.cols());
                check_close(grads.layers[static_cast<std::size_t>(layer)].weight(r, c),
                            fd_slot(net, x, g, layer, false, r, c), 1e-6);
            }
            check_close(grads.layers[static_cast<std::size_t>(layer)].bias[0], fd_slot(net, x, g, layer, true, 0, 0),
                        1e-6);
        }
    }
}

TEST_CASE("backward: input gradient matches finite differences") {
    Rng rng(6);
    MlpParams net = make_mlp(3, {8}, 2, Activation::Tanh, Head::Linear, rng);
    Mat x = random_mat(2, 3, rng);
    const Mat g = random_mat(2, 2, rng);
    const ForwardTrace trace = forward_trace(net, x);
    Mat input_grad;
    backward(net, trace, g, &input_grad);
    const double h = 1e-5;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) {
            Mat xp = x, xm = x;
            xp(r, c) += h;
            xm(r, c) -= h;
            const double fd = (scalar_loss(net, xp, g) - scalar_loss(net, xm, g)) / (2.0 * h);
            check_close(input_grad(r, c), fd, 1e-6);
        }
}

TEST_CASE("adam: zero gradients leave parameters unchanged and bump t") {
    Rng rng(3);
    MlpParams net = make_mlp(2, {4}, 1, Activation::Tanh, Head::Linear, rng);
    const Mat before = net.layers[0].weight;
    AdamState opt = make_adam(net, 0.1);
    adam_update(net, zeros_like(net), opt);
    CHECK(opt.t == 1);
    CHECK((net.layers[0].weight - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam: single scalar first step moves by about lr") {
    // Closed form: step = lr * g_hat / (sqrt(v_hat) + eps) with g = 1.
    MlpParams net;
    net.layers.push_back({Mat::Constant(1, 1, 2.0), Vec::Zero(1)});
    AdamState opt = make_adam(net, 0.1);
    MlpGrads grads = zeros_like(net);
    grads.layers[0].weight(0, 0) = 1.0;
    adam_update(net, grads, opt);
    CHECK(net.layers[0].weight(0, 0) == doctest::Approx(2.0 - 0.1).epsilon(1e-6));
}

TEST_CASE("adam: identical inputs give identical updates") {
    Rng rng(4);
    MlpParams a = make_mlp(3, {5}, 2, Activation::Tanh, Head::Linear, rng);
    MlpParams b = a;
    AdamState oa = make_adam(a, 0.01), ob = make_adam(b, 0.01);
    Rng grad_rng(9);
    MlpGrads g = zeros_like(a);
    for (auto& layer : g.layers) {
        layer.weight = random_mat(static_cast<int>(layer.weight.rows()), static_cast<int>(layer.weight.cols()),
                                  grad_rng);
        for (int i = 0; i < layer.bias.size(); ++i) layer.bias[i] = grad_rng.normal();
    }
    adam_update(a, g, oa);
    adam_update(b, g, ob);
    CHECK((a.layers[0].weight - b.layers[0].weight).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.layers[1].weight - b.layers[1].weight).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam: non-finite gradient names the parameter path") {
    Rng rng(4);
    MlpParams net = make_mlp(2, {3}, 1, Activation::Tanh, Head::Linear, rng);
    AdamState opt = make_adam(net, 0.01);
    MlpGrads g = zeros_like(net);
    g.layers[1].weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(adam_update(net, g, opt), doctest::Contains("layer 1"), Error);
}

TEST_CASE("clip_grad_norm") {
    MlpGrads g;
    g.layers.push_back({Mat::Zero(1, 2), Vec::Zero(0)});
    g.layers[0].weight << 3.0, 4.0;

    SUBCASE("within bound: unchanged") {
        MlpGrads small = g;
        small.layers[0].weight *= 0.1;  // norm 0.5
        const Mat before = small.layers[0].weight;
        clip_grad_norm(small, 1.0);
        CHECK((small.layers[0].weight - before).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("norm 5 clipped to 1 preserves direction") {
        clip_grad_norm(g, 1.0);
        CHECK(g.layers[0].weight(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(g.layers[0].weight(0, 1) == doctest::Approx(0.8).epsilon(1e-12));
    }
    SUBCASE("max_norm 0 zeroes everything") {
        clip_grad_norm(g, 0.0);
        CHECK(grad_norm(g) == 0.0);
    }
    SUBCASE("idempotent") {
        clip_grad_norm(g, 1.0);
        const Mat once = g.layers[0].weight;
        clip_grad_norm(g, 1.0);
        CHECK((g.layers[0].weight - once).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("categorical head: log-prob and entropy gradients match finite differences") {
    Rng rng(12);
    MlpParams net = make_mlp(3, {8}, 4, Activation::Tanh, Head::CategoricalLogits, rng);
    const Mat x = random_mat(5, 3, rng);
    VecI actions(5);
    for (int i = 0; i < 5; ++i) actions[i] = i % 4;

    // loss = sum(logp(actions)) + sum(entropy); analytic head gradient.
    auto loss_of = [&](const MlpParams& p) {
        const Mat logits = forward(p, x);
        return categorical_logp(logits, actions).sum() + categorical_entropy(logits).sum();
    };
    const ForwardTrace trace = forward_trace(net, x);
    const Mat logits = trace.output();
    const Mat probs = softmax(logits);
    const Mat logp = log_softmax(logits);
    const Vec h = categorical_entropy(logits);
    Mat head_grad = -probs;
    for (int i = 0; i < 5; ++i) {
        head_grad(i, static_cast<int>(actions[i])) += 1.0;
        head_grad.row(i) += (-probs.row(i).array() * (logp.row(i).array() + h[i])).matrix();
    }
    const MlpGrads grads = backward(net, trace, head_grad);

    const double step = 1e-5;
    for (int probe = 0; probe < 8; ++probe) {
        const int layer = probe % 2;
        auto& w = net.layers[static_cast<std::size_t>(layer)].weight;
        const int r = probe % static_cast<int>(w.rows());
        const int c = probe % static_cast<int>(w.cols());
        MlpParams up = net, down = net;
        up.layers[static_cast<std::size_t>(layer)].weight(r, c) += step;
        down.layers[static_cast<std::size_t>(layer)].weight(r, c) -= step;
        const double fd = (loss_of(up) - loss_of(down)) / (2.0 * step);
        check_close(grads.layers[static_cast<std::size_t>(layer)].weight(r, c), fd, 1e-6);
    }
}

TEST_CASE("gaussian head: log-prob gradients (mean and log_std) match finite differences") {
    Rng rng(13);
    MlpParams net = make_mlp(3, {8}, 2, Activation::Tanh, Head::GaussianMeanLogStd, rng);
    net.log_std << -0.3, 0.2;
    const Mat x = random_mat(4, 3, rng);
    const Mat actions = random_mat(4, 2, rng);

    auto loss_of = [&](const MlpParams& p) {
        return gaussian_logp(forward(p, x), p.log_std, actions).sum();
    };
    const ForwardTrace trace = forward_trace(net, x);
    const Mat mean = trace.output();
    const Eigen::ArrayXd sigma = net.log_std.array().exp();
    Mat head_grad(4, 2);
    Vec log_std_grad = Vec::Zero(2);
    for (int i = 0; i < 4; ++i)
        for (int d = 0; d < 2; ++d) {
            const double z = (actions(i, d) - mean(i, d)) / sigma[d];
            head_grad(i, d) = z / sigma[d];
            log_std_grad[d] += z * z - 1.0;
        }
    const MlpGrads grads = backward(net, trace, head_grad);

    const double step = 1e-5;
    for (int d = 0; d < 2; ++d) {
        MlpParams up = net, down = net;
        up.log_std[d] += step;
        down.log_std[d] -= step;
        const double fd = (loss_of(up) - loss_of(down)) / (2.0 * step);
        check_close(log_std_grad[d], fd, 1e-6);
    }
    for (int probe = 0; probe < 6; ++probe) {
        auto& w = net.layers[1].weight;
        const int r = probe % static_cast<int>(w.rows());
        const int c = probe % static_cast<int>(w.cols());
        MlpParams up = net, down = net;
        up.layers[1].weight(r, c) += step;
        down.layers[1].weight(r, c) -= step;
        const double fd = (loss_of(up) - loss_of(down)) / (2.0 * step);
        check_close(grads.layers[1].weight(r, c), fd, 1e-6);
    }
}

TEST_CASE("orthogonal init: columns orthonormal up to the gain") {
    Rng rng(21);
    MlpParams net = make_mlp(6, {6}, 6, Activation::Tanh, Head::Linear, rng);
    const Mat w = net.layers[0].weight / std::sqrt(2.0);
    const Mat gram = w * w.transpose();
    CHECK((gram - Mat::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(net.layers[0].bias.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward is deterministic across repeated calls") {
    Rng rng(30);
    MlpParams net = make_mlp(5, {16, 16}, 3, Activation::Tanh, Head::Linear, rng);
    const Mat x = random_mat(9, 5, rng);
    const Mat a = forward(net, x);
    const Mat b = forward(net, x);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}
