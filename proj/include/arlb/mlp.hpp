#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "arlb/common.hpp"
#include "arlb/rng.hpp"

namespace arlb {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using VecI = Eigen::VectorX<std::int64_t>;

enum class Activation { Tanh, Relu };

// Output head of the network. Linear covers value/Q heads; the categorical
// head emits logits; the gaussian head emits per-dimension means and carries
// a state-independent learnable log-std vector.
enum class Head { Linear, CategoricalLogits, GaussianMeanLogStd };

struct DenseLayer {
    Mat weight;  // out x in
    Vec bias;    // out
};

struct MlpParams {
    std::vector<DenseLayer> layers;
    Activation activation = Activation::Tanh;
    Head head = Head::Linear;
    Vec log_std;  // used by Head::GaussianMeanLogStd only

    int in_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
    int out_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }
};

// Gradients (and Adam moments) mirror the parameter shapes exactly.
struct MlpGrads {
    std::vector<DenseLayer> layers;
    Vec log_std;
};

MlpGrads zeros_like(const MlpParams& params);

// Orthogonal weight init (QR of a gaussian matrix, sign-corrected), zero
// biases. `out_gain` scales the final layer; hidden layers use sqrt(2).
MlpParams make_mlp(int in, const std::vector<int>& hidden, int out, Activation act, Head head, Rng& rng,
                   double out_gain = 1.0);

// One recorded forward pass; backward() consumes it. post[0] is the input,
// post[i] the activation fed into layer i, and pre[i] layer i's output
// before the nonlinearity (the last layer is never activated).
struct ForwardTrace {
    std::vector<Mat> pre;
    std::vector<Mat> post;

    bool empty() const { return pre.empty(); }
    const Mat& output() const { return pre.back(); }
};

Mat forward(const MlpParams& params, const Mat& x);
ForwardTrace forward_trace(const MlpParams& params, const Mat& x);

// Reverse-mode gradients of sum(loss_grad .* output) with respect to every
// parameter. Optionally also yields the gradient with respect to the input
// batch (needed when a critic is differentiated through its action input).
// log_std gradients are not produced here: the log-std enters losses only
// through the distribution ops, which expose their own closed-form terms.
MlpGrads backward(const MlpParams& params, const ForwardTrace& trace, const Mat& loss_grad,
                  Mat* input_grad = nullptr);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    MlpGrads m;
    MlpGrads v;
};

AdamState make_adam(const MlpParams& params, double lr);

// Standard Adam with bias correction; increments state.t by exactly one.
// Throws on non-finite gradient entries, naming the parameter path.
void adam_update(MlpParams& params, const MlpGrads& grads, AdamState& state);

double grad_norm(const MlpGrads& grads);
double grad_norm(const std::vector<const MlpGrads*>& grads);

// Scales the gradient set so its global L2 norm is at most max_norm,
// preserving direction. A no-op when already within the bound (up to one
// part in 1e12, which also makes clipping idempotent).
void clip_grad_norm(MlpGrads& grads, double max_norm);
void clip_grad_norm(const std::vector<MlpGrads*>& grads, double max_norm);

// ---- Distribution helpers over network heads -------------------------------

// Row-wise numerically stable log-softmax.
Mat log_softmax(const Mat& logits);
Mat softmax(const Mat& logits);

Vec categorical_logp(const Mat& logits, const VecI& actions);
Vec categorical_entropy(const Mat& logits);
VecI categorical_sample(const Mat& logits, Rng& rng);
VecI categorical_argmax(const Mat& logits);

// Diagonal gaussian with state-independent log-std (one value per action
// dimension, broadcast over the batch).
Vec gaussian_logp(const Mat& mean, const Vec& log_std, const Mat& actions);
double gaussian_entropy(const Vec& log_std);
Mat gaussian_sample(const Mat& mean, const Vec& log_std, Rng& rng);

}  // namespace arlb
