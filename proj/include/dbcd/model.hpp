#pragma once

#include <cstdint>
#include <vector>

#include "dbcd/matrix.hpp"
#include "dbcd/rng.hpp"

namespace dbcd {

// Per-device feedforward network without biases. weights[i] is the matrix of
// layer i+1, shape dims[i+1] x dims[i]; hidden layers apply ReLU and the
// output layer is linear (softmax lives inside the cross-entropy loss).
struct MlpParams {
    std::vector<std::size_t> dims; // d_0 .. d_L
    std::vector<Matrix> weights;   // L matrices

    std::size_t depth() const { return weights.size(); }
    std::size_t input_dim() const { return dims.front(); }
    std::size_t output_dim() const { return dims.back(); }

    // 1-based layer access matching the usual layer numbering.
    Matrix& w(std::size_t i) { return weights[i - 1]; }
    const Matrix& w(std::size_t i) const { return weights[i - 1]; }

    void validate() const;
    bool same_shape(const MlpParams& other) const;
};

// HeGaussian: W_i ~ N(0, 2/d_{i-1}). Deep plain ReLU stacks lose sample
// geometry under gaussian init (pairwise feature cosines drift to 1 with
// depth), so MirroredOrthogonal builds each hidden layer from paired
// orthonormal blocks [[C,-C],[-C,C]]; activations then travel as (relu(s),
// relu(-s)) pairs and the network is exactly linear at initialization, which
// keeps depth-64 stacks trainable. Mirrored layers need even hidden widths.
enum class InitScheme { HeGaussian, MirroredOrthogonal };

MlpParams init_params(const std::vector<std::size_t>& dims, SeededRng& rng,
                      InitScheme scheme = InitScheme::HeGaussian);

// Three-splitting auxiliary blocks. v[i-1] / u[i-1] are the post- and
// pre-activation matrices of layer i, each dims[i] x N over all local samples.
struct AuxState {
    std::vector<Matrix> v;
    std::vector<Matrix> u;

    Matrix& v_at(std::size_t i) { return v[i - 1]; }
    const Matrix& v_at(std::size_t i) const { return v[i - 1]; }
    Matrix& u_at(std::size_t i) { return u[i - 1]; }
    const Matrix& u_at(std::size_t i) const { return u[i - 1]; }
};

// Columns of x are samples; y holds class indices.
struct LocalDataset {
    Matrix x;
    std::vector<int> y;

    std::size_t n() const { return y.size(); }
    void validate(std::size_t class_count) const;
};

enum class LossKind { SoftmaxCrossEntropy, Squared };

struct VOutSolver {
    enum class Kind { ProxGradient, ClosedFormSquared };
    Kind kind = Kind::ProxGradient;
    int max_iter = 50;
    double tol = 1e-8;
};

struct BcdHyper {
    real gamma = 1;
    real alpha = 1;
    real mu = real(0.01);
    real lambda_w = 0; // L2 weight on each W_i
    real lambda_v = 0; // L2 weight on each v_i
    LossKind loss = LossKind::SoftmaxCrossEntropy;
    VOutSolver vout;
    // Output-layer u update as printed carries gamma on both quadratic terms
    // (midpoint rule). Setting this replaces the coupling weight on the
    // W*v term with alpha, for sensitivity experiments.
    bool u_out_alpha_coupling = false;

    void validate() const;
};

// Logits for a batch; x is d_0 x n, result is d_L x n.
Matrix forward(const MlpParams& params, const Matrix& x);

// Mean loss over columns. SoftmaxCrossEntropy uses a log-sum-exp safe path;
// Squared is mean over samples of 0.5*||column - onehot||^2.
real loss_value(const Matrix& v, const std::vector<int>& y, LossKind kind);

// Forward pass that records every layer's pre/post-activation block, so the
// quadratic coupling penalties start at exactly zero.
AuxState init_state(const MlpParams& params, const LocalDataset& data);

// One device's contribution to the penalized multi-device objective:
//   mean loss + lambda terms
//   + sum_i gamma/2 ||v_i - sigma_i(u_i)||^2 + alpha/2 ||u_i - W_i v_{i-1}||^2
// with sigma_i = ReLU for hidden layers, identity at the output, v_0 = x.
real objective_local(const MlpParams& params, const AuxState& aux,
                     const LocalDataset& data, const BcdHyper& hyper);

struct DeviceProblem {
    const MlpParams* params;
    const AuxState* aux;
    const LocalDataset* data;
};

// Sum of objective_local over devices.
real objective(const std::vector<DeviceProblem>& devices, const BcdHyper& hyper);

// Column-wise softmax (used by evaluation and the CE solvers).
Matrix softmax_columns(const Matrix& logits);

} // namespace dbcd
