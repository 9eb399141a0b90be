#include "dbcd/model.hpp"

#include <cmath>
#include <string>

#include "dbcd/numerics.hpp"

namespace dbcd {

void MlpParams::validate() const {
    if (weights.empty() || dims.size() != weights.size() + 1) {
        throw ShapeMismatch("MlpParams: dims/weights length mismatch");
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i].rows() != dims[i + 1] || weights[i].cols() != dims[i]) {
            throw ShapeMismatch("MlpParams: weight " + std::to_string(i + 1) + " is " +
                                std::to_string(weights[i].rows()) + "x" +
                                std::to_string(weights[i].cols()));
        }
    }
}

bool MlpParams::same_shape(const MlpParams& other) const {
    if (dims != other.dims) return false;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!weights[i].same_shape(other.weights[i])) return false;
    }
    return true;
}

namespace {

// Gaussian matrix with orthonormalized rows (rows <= cols) or columns.
Matrix orthonormal(std::size_t rows, std::size_t cols, SeededRng& rng) {
    const bool by_rows = rows <= cols;
    const std::size_t vecs = by_rows ? rows : cols;
    const std::size_t len = by_rows ? cols : rows;
    Matrix g = gaussian_matrix(vecs, len, 1, rng);
    for (std::size_t i = 0; i < vecs; ++i) {
        for (std::size_t k = 0; k < i; ++k) {
            real dot = 0;
            for (std::size_t j = 0; j < len; ++j) dot += g(i, j) * g(k, j);
            for (std::size_t j = 0; j < len; ++j) g(i, j) -= dot * g(k, j);
        }
        real norm = 0;
        for (std::size_t j = 0; j < len; ++j) norm += g(i, j) * g(i, j);
        const real inv = real(1) / std::sqrt(std::max(norm, real(1e-30)));
        for (std::size_t j = 0; j < len; ++j) g(i, j) *= inv;
    }
    if (by_rows) return g;
    return transpose(g);
}

MlpParams init_mirrored(const std::vector<std::size_t>& dims, SeededRng& rng) {
    MlpParams p;
    p.dims = dims;
    const std::size_t depth = dims.size() - 1;
    p.weights.reserve(depth);
    for (std::size_t i = 1; i <= depth; ++i) {
        const std::size_t d_out = dims[i];
        const std::size_t d_in = dims[i - 1];
        if (i < depth && d_out % 2 != 0) {
            throw ValueOutOfRange("init_params: mirrored init needs even hidden widths");
        }
        if (i == depth) {
            // logits = D * (p - n) for the incoming (relu(s), relu(-s)) pair.
            const std::size_t m_in = d_in / 2;
            const Matrix d = gaussian_matrix(d_out, m_in,
                                             std::sqrt(real(1) / static_cast<real>(m_in)), rng);
            Matrix w(d_out, d_in);
            for (std::size_t r = 0; r < d_out; ++r) {
                for (std::size_t c = 0; c < m_in; ++c) {
                    w(r, c) = d(r, c);
                    w(r, c + m_in) = -d(r, c);
                }
            }
            p.weights.push_back(std::move(w));
        } else if (i == 1) {
            const std::size_t m_out = d_out / 2;
            const Matrix a = orthonormal(m_out, d_in, rng);
            Matrix w(d_out, d_in);
            for (std::size_t r = 0; r < m_out; ++r) {
                for (std::size_t c = 0; c < d_in; ++c) {
                    w(r, c) = a(r, c);
                    w(r + m_out, c) = -a(r, c);
                }
            }
            p.weights.push_back(std::move(w));
        } else {
            const std::size_t m_out = d_out / 2;
            const std::size_t m_in = d_in / 2;
            const Matrix c = orthonormal(m_out, m_in, rng);
            Matrix w(d_out, d_in);
            for (std::size_t r = 0; r < m_out; ++r) {
                for (std::size_t col = 0; col < m_in; ++col) {
                    w(r, col) = c(r, col);
                    w(r, col + m_in) = -c(r, col);
                    w(r + m_out, col) = -c(r, col);
                    w(r + m_out, col + m_in) = c(r, col);
                }
            }
            p.weights.push_back(std::move(w));
        }
    }
    return p;
}

} // namespace

MlpParams init_params(const std::vector<std::size_t>& dims, SeededRng& rng, InitScheme scheme) {
    if (scheme == InitScheme::MirroredOrthogonal) return init_mirrored(dims, rng);
    MlpParams p;
    p.dims = dims;
    p.weights.reserve(dims.size() - 1);
    for (std::size_t i = 1; i < dims.size(); ++i) {
        const real scale = std::sqrt(real(2) / static_cast<real>(dims[i - 1]));
        p.weights.push_back(gaussian_matrix(dims[i], dims[i - 1], scale, rng));
    }
    return p;
}

void LocalDataset::validate(std::size_t class_count) const {
    if (x.cols() != y.size()) {
        throw ShapeMismatch("LocalDataset: " + std::to_string(x.cols()) + " columns vs " +
                            std::to_string(y.size()) + " labels");
    }
    for (int label : y) {
        if (label < 0 || static_cast<std::size_t>(label) >= class_count) {
            throw LabelOutOfRange("LocalDataset: label " + std::to_string(label));
        }
    }
}

void BcdHyper::validate() const {
    if (!(gamma > 0)) throw ValueOutOfRange("BcdHyper: gamma must be > 0");
    if (!(alpha > 0)) throw ValueOutOfRange("BcdHyper: alpha must be > 0");
    if (!(mu >= 0 && mu <= 1)) throw ValueOutOfRange("BcdHyper: mu must be in [0,1]");
    if (lambda_w < 0 || lambda_v < 0) throw ValueOutOfRange("BcdHyper: lambda must be >= 0");
    if (loss == LossKind::SoftmaxCrossEntropy && vout.kind == VOutSolver::Kind::ClosedFormSquared) {
        throw ValueOutOfRange("BcdHyper: ClosedFormSquared vout solver requires Squared loss");
    }
}

Matrix forward(const MlpParams& params, const Matrix& x) {
    if (x.rows() != params.input_dim()) {
        throw ShapeMismatch("forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                            std::to_string(params.input_dim()));
    }
    const std::size_t depth = params.depth();
    Matrix h = matmul(params.w(1), x);
    for (std::size_t i = 2; i <= depth; ++i) {
        h = matmul(params.w(i), relu(h));
    }
    return h;
}

Matrix softmax_columns(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (std::size_t j = 0; j < logits.cols(); ++j) {
        real m = logits(0, j);
        for (std::size_t i = 1; i < logits.rows(); ++i) m = std::max(m, logits(i, j));
        real z = 0;
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            const real e = std::exp(logits(i, j) - m);
            p(i, j) = e;
            z += e;
        }
        const real inv = real(1) / z;
        for (std::size_t i = 0; i < logits.rows(); ++i) p(i, j) *= inv;
    }
    return p;
}

real loss_value(const Matrix& v, const std::vector<int>& y, LossKind kind) {
    if (v.cols() != y.size()) {
        throw ShapeMismatch("loss_value: column/label count mismatch");
    }
    const std::size_t n = y.size();
    const std::size_t classes = v.rows();
    real total = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const int label = y[j];
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw LabelOutOfRange("loss_value: label " + std::to_string(label) + " with " +
                                  std::to_string(classes) + " classes");
        }
        if (kind == LossKind::SoftmaxCrossEntropy) {
            real m = v(0, j);
            for (std::size_t i = 1; i < classes; ++i) m = std::max(m, v(i, j));
            real z = 0;
            for (std::size_t i = 0; i < classes; ++i) z += std::exp(v(i, j) - m);
            total += m + std::log(z) - v(static_cast<std::size_t>(label), j);
        } else {
            for (std::size_t i = 0; i < classes; ++i) {
                const real target = (static_cast<std::size_t>(label) == i) ? real(1) : real(0);
                const real d = v(i, j) - target;
                total += real(0.5) * d * d;
            }
        }
    }
    return total / static_cast<real>(n);
}

AuxState init_state(const MlpParams& params, const LocalDataset& data) {
    const std::size_t depth = params.depth();
    AuxState aux;
    aux.v.resize(depth);
    aux.u.resize(depth);
    const Matrix* below = &data.x;
    for (std::size_t i = 1; i <= depth; ++i) {
        aux.u_at(i) = matmul(params.w(i), *below);
        aux.v_at(i) = (i < depth) ? relu(aux.u_at(i)) : aux.u_at(i);
        below = &aux.v_at(i);
    }
    return aux;
}

real objective_local(const MlpParams& params, const AuxState& aux,
                     const LocalDataset& data, const BcdHyper& hyper) {
    // Reported per sample: (sum-form objective) / N. The block solvers
    // minimize the sum form, where the per-column loss and the quadratic
    // couplings carry comparable weight; dividing by N keeps the value equal
    // to the mean empirical risk whenever aux is a forward-pass state.
    const std::size_t depth = params.depth();
    const real inv_n = real(1) / static_cast<real>(data.n());
    real penalties = 0;
    for (std::size_t i = 1; i <= depth; ++i) {
        const Matrix& u = aux.u_at(i);
        const Matrix& v = aux.v_at(i);
        if (i < depth) {
            penalties += hyper.gamma / 2 * frob_sq_diff(v, relu(u));
        } else {
            penalties += hyper.gamma / 2 * frob_sq_diff(v, u);
        }
        const Matrix& below = (i == 1) ? data.x : aux.v_at(i - 1);
        penalties += hyper.alpha / 2 * frob_sq_diff(u, matmul(params.w(i), below));
        if (hyper.lambda_w > 0) penalties += hyper.lambda_w / 2 * frob_sq(params.w(i));
        if (hyper.lambda_v > 0) penalties += hyper.lambda_v / 2 * frob_sq(v);
    }
    return loss_value(aux.v_at(depth), data.y, hyper.loss) + inv_n * penalties;
}

real objective(const std::vector<DeviceProblem>& devices, const BcdHyper& hyper) {
    real total = 0;
    for (const auto& d : devices) {
        total += objective_local(*d.params, *d.aux, *d.data, hyper);
    }
    return total;
}

} // namespace dbcd
