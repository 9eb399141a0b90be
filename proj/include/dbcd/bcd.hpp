#pragma once

#include <vector>

#include "dbcd/model.hpp"

namespace dbcd {

// Block solvers for the per-device training objective. Each update_* returns
// the exact minimizer of its block subproblem with every other block fixed
// (the cross-entropy output block is solved iteratively to tolerance; all
// other blocks have closed forms, validated against brute-force oracles).

enum class BlockKind { VOut, UOut, W, VHidden, UHidden };

const char* block_kind_name(BlockKind kind);

struct BlockUpdateReport {
    BlockKind kind;
    std::size_t layer;
    real objective_before = 0;
    real objective_after = 0;
    int inner_iters = 0;
    bool converged = true;
};

// Output-layer post-activation block:
//   min over v of  mean_j loss(v_:j; y_j) + lambda_v/2 ||v||^2
//                  + gamma/2 ||v - u_prev||^2 + alpha/2 ||v - v_prev||^2
// Squared loss solves the per-column normal equation in closed form;
// cross-entropy runs damped Newton per column (strictly convex, unique
// minimizer) with a Lipschitz-step gradient fallback, started from v_prev so
// every accepted step also descends the surrounding objective. On hitting
// max_iter the best iterate is returned and *converged is cleared.
Matrix update_v_out(const Matrix& u_prev, const Matrix& v_prev, const std::vector<int>& y,
                    const BcdHyper& hyper, int* inner_iters = nullptr, bool* converged = nullptr);

// Output-layer pre-activation block: both quadratic couplings carry gamma, so
// the minimizer is the plain midpoint (v_new + w_prev * v_below_prev) / 2.
// With u_out_alpha_coupling the second term is alpha-weighted instead:
// (gamma * v_new + alpha * w_prev * v_below_prev) / (gamma + alpha).
Matrix update_u_out(const Matrix& v_new, const Matrix& w_prev, const Matrix& v_below_prev,
                    const BcdHyper& hyper);

// Weight block (any layer): ridge system
//   W (gamma V V^T + (alpha + lambda_w) I) = gamma U V^T + alpha W_prev
// with V the layer input over all samples; unique since alpha > 0.
Matrix update_w(const Matrix& u_new, const Matrix& v_below_prev, const Matrix& w_prev,
                const BcdHyper& hyper);

// Hidden post-activation block: per-column SPD system
//   ((gamma + lambda_v) I + alpha W_above^T W_above) v
//     = gamma relu(u_prev) + alpha W_above^T u_above_new
Matrix update_v_hidden(const Matrix& u_prev, const Matrix& w_above_new,
                       const Matrix& u_above_new, const BcdHyper& hyper);

// Hidden pre-activation block: elementwise two-candidate ReLU proximal form,
//   min over u of gamma/2 (v - relu(u))^2 + gamma/2 (u - q)^2 + alpha/2 (u - p)^2
// with q = (w_prev * v_below_prev) entry and p the previous u entry.
Matrix update_u_hidden(const Matrix& v_new, const Matrix& w_prev, const Matrix& v_below_prev,
                       const Matrix& u_prev, const BcdHyper& hyper);

struct DeviceState {
    MlpParams params;
    AuxState aux;
};

// One full backward sweep: output blocks (v_L, u_L, W_L), then v_i, u_i, W_i
// for i = L-1 down to 1. Updates run in place; the sweep order guarantees that
// every quantity a subproblem reads from the previous iteration has not yet
// been overwritten when it is read. Returns 3L reports whose objective
// before/after values track the device's local objective exactly (maintained
// by per-block deltas of only the touched terms).
std::vector<BlockUpdateReport> device_bcd_iteration(DeviceState& state, const LocalDataset& data,
                                                    const BcdHyper& hyper);

} // namespace dbcd
