#include "dbcd/bcd.hpp"

#include <cmath>
#include <string>

#include "dbcd/kernels.hpp"
#include "dbcd/numerics.hpp"

namespace dbcd {
namespace {

// Column-local cross-entropy subproblem:
//   f(v) = lse(v) - v[y] + lambda/2 ||v||^2
//          + gamma/2 ||v - u||^2 + alpha/2 ||v - vp||^2
// Each column carries its own loss term at unit weight; the quadratic
// couplings are per-column as well, so the subproblem is sample-size free.
struct CeColumnSolver {
    const real* u;
    const real* vp;
    int label;
    std::size_t k;
    real lambda, gamma, alpha;

    real eval(const std::vector<real>& v) const {
        real m = v[0];
        for (std::size_t i = 1; i < k; ++i) m = std::max(m, v[i]);
        real z = 0;
        for (std::size_t i = 0; i < k; ++i) z += std::exp(v[i] - m);
        real f = m + std::log(z) - v[static_cast<std::size_t>(label)];
        for (std::size_t i = 0; i < k; ++i) {
            const real dv = v[i] - u[i];
            const real dp = v[i] - vp[i];
            f += lambda / 2 * v[i] * v[i] + gamma / 2 * dv * dv + alpha / 2 * dp * dp;
        }
        return f;
    }

    void softmax(const std::vector<real>& v, std::vector<real>& p) const {
        real m = v[0];
        for (std::size_t i = 1; i < k; ++i) m = std::max(m, v[i]);
        real z = 0;
        for (std::size_t i = 0; i < k; ++i) {
            p[i] = std::exp(v[i] - m);
            z += p[i];
        }
        const real inv = real(1) / z;
        for (std::size_t i = 0; i < k; ++i) p[i] *= inv;
    }

    void gradient(const std::vector<real>& v, const std::vector<real>& p,
                  std::vector<real>& g) const {
        for (std::size_t i = 0; i < k; ++i) {
            const real ey = (static_cast<std::size_t>(label) == i) ? real(1) : real(0);
            g[i] = (p[i] - ey) + lambda * v[i] + gamma * (v[i] - u[i]) +
                   alpha * (v[i] - vp[i]);
        }
    }

    // Damped Newton with a Lipschitz-step gradient fallback. Starts from vp,
    // so f never rises above its value at the previous iterate.
    int solve(std::vector<real>& v, int max_iter, real tol, bool* converged) const {
        std::vector<real> p(k), g(k), step(k), trial(k);
        const real quad = lambda + gamma + alpha;
        real f = eval(v);
        int it = 0;
        for (; it < max_iter; ++it) {
            softmax(v, p);
            gradient(v, p, g);
            real gnorm_sq = 0;
            for (std::size_t i = 0; i < k; ++i) gnorm_sq += g[i] * g[i];
            if (std::sqrt(gnorm_sq) <= tol) {
                return it;
            }
            // Hessian = diag(p) - p p^T + quad*I, SPD for quad > 0.
            Matrix h(k, k);
            for (std::size_t i = 0; i < k; ++i) {
                for (std::size_t j = 0; j < k; ++j) {
                    h(i, j) = -p[i] * p[j];
                }
                h(i, i) += p[i] + quad;
            }
            Matrix rhs(k, 1);
            for (std::size_t i = 0; i < k; ++i) rhs(i, 0) = -g[i];
            const Matrix dir = solve_spd(h, rhs);
            real slope = 0;
            for (std::size_t i = 0; i < k; ++i) slope += g[i] * dir(i, 0);
            real t = 1;
            bool accepted = false;
            while (t > real(1e-12)) {
                for (std::size_t i = 0; i < k; ++i) trial[i] = v[i] + t * dir(i, 0);
                const real ft = eval(trial);
                if (ft <= f + real(1e-4) * t * slope) {
                    v = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                t /= 2;
            }
            if (!accepted) {
                // Gradient step with the conservative Lipschitz bound.
                const real gstep = real(1) / (real(0.25) + gamma + alpha + lambda);
                for (std::size_t i = 0; i < k; ++i) v[i] -= gstep * g[i];
                f = eval(v);
            }
        }
        if (converged) *converged = false;
        return it;
    }
};

} // namespace

const char* block_kind_name(BlockKind kind) {
    switch (kind) {
        case BlockKind::VOut: return "VOut";
        case BlockKind::UOut: return "UOut";
        case BlockKind::W: return "W";
        case BlockKind::VHidden: return "VHidden";
        case BlockKind::UHidden: return "UHidden";
    }
    return "?";
}

Matrix update_v_out(const Matrix& u_prev, const Matrix& v_prev, const std::vector<int>& y,
                    const BcdHyper& hyper, int* inner_iters, bool* converged) {
    if (!u_prev.same_shape(v_prev) || u_prev.cols() != y.size()) {
        throw ShapeMismatch("update_v_out: inconsistent shapes");
    }
    const std::size_t k = u_prev.rows();
    const std::size_t n = u_prev.cols();
    Matrix v(k, n);
    if (inner_iters) *inner_iters = 0;
    if (converged) *converged = true;

    if (hyper.loss == LossKind::Squared) {
        // (1 + lambda_v + gamma + alpha) v = onehot + gamma u + alpha v_prev
        const real denom = 1 + hyper.lambda_v + hyper.gamma + hyper.alpha;
        for (std::size_t j = 0; j < n; ++j) {
            const auto label = static_cast<std::size_t>(y[j]);
            if (label >= k) throw LabelOutOfRange("update_v_out: label " + std::to_string(y[j]));
            for (std::size_t i = 0; i < k; ++i) {
                const real target = (i == label) ? real(1) : real(0);
                v(i, j) = (target + hyper.gamma * u_prev(i, j) + hyper.alpha * v_prev(i, j)) / denom;
            }
        }
        return v;
    }

    std::vector<real> ucol(k), vpcol(k), vcol(k);
    int worst_iters = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (y[j] < 0 || static_cast<std::size_t>(y[j]) >= k) {
            throw LabelOutOfRange("update_v_out: label " + std::to_string(y[j]));
        }
        for (std::size_t i = 0; i < k; ++i) {
            ucol[i] = u_prev(i, j);
            vpcol[i] = v_prev(i, j);
            vcol[i] = v_prev(i, j);
        }
        const CeColumnSolver solver{ucol.data(), vpcol.data(), y[j],
                                    k,           hyper.lambda_v, hyper.gamma, hyper.alpha};
        const int iters =
            solver.solve(vcol, hyper.vout.max_iter, static_cast<real>(hyper.vout.tol), converged);
        worst_iters = std::max(worst_iters, iters);
        for (std::size_t i = 0; i < k; ++i) v(i, j) = vcol[i];
    }
    if (inner_iters) *inner_iters = worst_iters;
    return v;
}

Matrix update_u_out(const Matrix& v_new, const Matrix& w_prev, const Matrix& v_below_prev,
                    const BcdHyper& hyper) {
    Matrix wv = matmul(w_prev, v_below_prev);
    if (!wv.same_shape(v_new)) throw ShapeMismatch("update_u_out: shape mismatch");
    if (hyper.u_out_alpha_coupling) {
        blend(hyper.gamma / (hyper.gamma + hyper.alpha), v_new,
              hyper.alpha / (hyper.gamma + hyper.alpha), wv);
    } else {
        blend(real(0.5), v_new, real(0.5), wv);
    }
    return wv;
}

Matrix update_w(const Matrix& u_new, const Matrix& v_below_prev, const Matrix& w_prev,
                const BcdHyper& hyper) {
    if (u_new.cols() != v_below_prev.cols() || w_prev.rows() != u_new.rows() ||
        w_prev.cols() != v_below_prev.rows()) {
        throw ShapeMismatch("update_w: inconsistent shapes");
    }
    const Matrix vt = transpose(v_below_prev);
    Matrix a = matmul(v_below_prev, vt); // V V^T
    scale(a, hyper.gamma);
    const real shift = hyper.alpha + hyper.lambda_w;
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += shift;
    Matrix b = matmul(u_new, vt); // U V^T
    scale(b, hyper.gamma);
    add_scaled(b, hyper.alpha, w_prev);
    // W A = B with A symmetric: solve A W^T = B^T.
    return transpose(solve_spd_auto_ridge(std::move(a), transpose(b), "update_w"));
}

Matrix update_v_hidden(const Matrix& u_prev, const Matrix& w_above_new,
                       const Matrix& u_above_new, const BcdHyper& hyper) {
    if (w_above_new.cols() != u_prev.rows() || w_above_new.rows() != u_above_new.rows() ||
        u_prev.cols() != u_above_new.cols()) {
        throw ShapeMismatch("update_v_hidden: inconsistent shapes");
    }
    const Matrix wt = transpose(w_above_new);
    Matrix a = matmul(wt, w_above_new); // W^T W
    scale(a, hyper.alpha);
    const real shift = hyper.gamma + hyper.lambda_v;
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += shift;
    Matrix rhs = matmul(wt, u_above_new); // W^T u_above
    scale(rhs, hyper.alpha);
    add_scaled(rhs, hyper.gamma, relu(u_prev));
    return solve_spd_auto_ridge(std::move(a), rhs, "update_v_hidden");
}

Matrix update_u_hidden(const Matrix& v_new, const Matrix& w_prev, const Matrix& v_below_prev,
                       const Matrix& u_prev, const BcdHyper& hyper) {
    const Matrix q = matmul(w_prev, v_below_prev);
    if (!q.same_shape(v_new) || !u_prev.same_shape(v_new)) {
        throw ShapeMismatch("update_u_hidden: inconsistent shapes");
    }
    Matrix u(v_new.rows(), v_new.cols());
    kern::active().relu_prox(v_new.data(), q.data(), u_prev.data(), u.data(), u.size(),
                             hyper.gamma, hyper.alpha);
    return u;
}

namespace {

// Objective terms touched by each block; everything else stays constant
// across that block's update, so the running objective is maintained by
// differences of these only. Terms carry the same per-sample normalization
// as objective_local.
struct ObjectiveTerms {
    const DeviceState& s;
    const LocalDataset& d;
    const BcdHyper& h;
    const real inv_n;

    const Matrix& below(std::size_t i) const { return (i == 1) ? d.x : s.aux.v_at(i - 1); }

    real loss() const { return loss_value(s.aux.v_at(s.params.depth()), d.y, h.loss); }

    real coupling_v(std::size_t i) const {
        const Matrix& u = s.aux.u_at(i);
        const Matrix& v = s.aux.v_at(i);
        if (i < s.params.depth()) return inv_n * h.gamma / 2 * frob_sq_diff(v, relu(u));
        return inv_n * h.gamma / 2 * frob_sq_diff(v, u);
    }

    real coupling_u(std::size_t i) const {
        return inv_n * h.alpha / 2 * frob_sq_diff(s.aux.u_at(i), matmul(s.params.w(i), below(i)));
    }

    real reg_v(std::size_t i) const {
        return h.lambda_v > 0 ? inv_n * h.lambda_v / 2 * frob_sq(s.aux.v_at(i)) : real(0);
    }

    real reg_w(std::size_t i) const {
        return h.lambda_w > 0 ? inv_n * h.lambda_w / 2 * frob_sq(s.params.w(i)) : real(0);
    }

    real v_out_terms() const { return loss() + reg_v(s.params.depth()) + coupling_v(s.params.depth()); }
    real u_terms(std::size_t i) const { return coupling_v(i) + coupling_u(i); }
    real w_terms(std::size_t i) const { return coupling_u(i) + reg_w(i); }
    real v_hidden_terms(std::size_t i) const { return reg_v(i) + coupling_v(i) + coupling_u(i + 1); }
};

} // namespace

std::vector<BlockUpdateReport> device_bcd_iteration(DeviceState& state, const LocalDataset& data,
                                                    const BcdHyper& hyper) {
    state.params.validate();
    if (data.n() == 0) {
        throw ShapeMismatch("device_bcd_iteration: empty dataset");
    }
    const std::size_t depth = state.params.depth();
    const ObjectiveTerms terms{state, data, hyper, real(1) / static_cast<real>(data.n())};
    std::vector<BlockUpdateReport> reports;
    reports.reserve(3 * depth);
    real running = objective_local(state.params, state.aux, data, hyper);

    const auto record = [&](BlockKind kind, std::size_t layer, real before_terms, real after_terms,
                            int iters, bool conv) {
        BlockUpdateReport r;
        r.kind = kind;
        r.layer = layer;
        r.objective_before = running;
        running += after_terms - before_terms;
        r.objective_after = running;
        r.inner_iters = iters;
        r.converged = conv;
        reports.push_back(r);
    };

    // Output layer. The matrices read as "previous iteration" (u_L, v_L,
    // W_L, v_{L-1}) are untouched at the point each line runs.
    {
        int iters = 0;
        bool conv = true;
        real before = terms.v_out_terms();
        Matrix v_new = update_v_out(state.aux.u_at(depth), state.aux.v_at(depth), data.y, hyper,
                                    &iters, &conv);
        state.aux.v_at(depth) = std::move(v_new);
        record(BlockKind::VOut, depth, before, terms.v_out_terms(), iters, conv);

        before = terms.u_terms(depth);
        Matrix u_new =
            update_u_out(state.aux.v_at(depth), state.params.w(depth), terms.below(depth), hyper);
        state.aux.u_at(depth) = std::move(u_new);
        record(BlockKind::UOut, depth, before, terms.u_terms(depth), 0, true);

        before = terms.w_terms(depth);
        Matrix w_new =
            update_w(state.aux.u_at(depth), terms.below(depth), state.params.w(depth), hyper);
        state.params.w(depth) = std::move(w_new);
        record(BlockKind::W, depth, before, terms.w_terms(depth), 0, true);
    }

    // Hidden layers, top down.
    for (std::size_t i = depth - 1; i >= 1; --i) {
        real before = terms.v_hidden_terms(i);
        Matrix v_new =
            update_v_hidden(state.aux.u_at(i), state.params.w(i + 1), state.aux.u_at(i + 1), hyper);
        state.aux.v_at(i) = std::move(v_new);
        record(BlockKind::VHidden, i, before, terms.v_hidden_terms(i), 0, true);

        before = terms.u_terms(i);
        Matrix u_new =
            update_u_hidden(state.aux.v_at(i), state.params.w(i), terms.below(i), state.aux.u_at(i), hyper);
        state.aux.u_at(i) = std::move(u_new);
        record(BlockKind::UHidden, i, before, terms.u_terms(i), 0, true);

        before = terms.w_terms(i);
        Matrix w_new = update_w(state.aux.u_at(i), terms.below(i), state.params.w(i), hyper);
        state.params.w(i) = std::move(w_new);
        record(BlockKind::W, i, before, terms.w_terms(i), 0, true);

        if (i == 1) break;
    }

    return reports;
}

} // namespace dbcd
