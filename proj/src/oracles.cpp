#include "dbcd/oracles.hpp"

#include <cmath>
#include <functional>
#include <ostream>

#include "dbcd/baselines.hpp"
#include "dbcd/numerics.hpp"

namespace dbcd::oracle {
namespace {

double golden_min(const std::function<double(double)>& f, double lo, double hi, int iters = 160) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters && (b - a) > 1e-14; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    return f((a + b) / 2);
}

Matrix random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng, double lo = -1.5,
                     double hi = 1.5) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = static_cast<real>(rng.uniform(lo, hi));
    return m;
}

// --- independent objective evaluators -------------------------------------

double lse_minus_label(const std::vector<double>& v, int label) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double z = 0;
    for (double x : v) z += std::exp(x - m);
    return m + std::log(z) - v[static_cast<std::size_t>(label)];
}

double vout_objective(const Matrix& v, const Matrix& u, const Matrix& vp,
                      const std::vector<int>& y, const BcdHyper& h) {
    const std::size_t k = v.rows(), n = v.cols();
    double obj = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (h.loss == LossKind::SoftmaxCrossEntropy) {
            std::vector<double> col(k);
            for (std::size_t i = 0; i < k; ++i) col[i] = v(i, j);
            obj += lse_minus_label(col, y[j]);
        } else {
            for (std::size_t i = 0; i < k; ++i) {
                const double t = (static_cast<std::size_t>(y[j]) == i) ? 1.0 : 0.0;
                const double d = v(i, j) - t;
                obj += 0.5 * d * d;
            }
        }
        for (std::size_t i = 0; i < k; ++i) {
            const double dv = v(i, j) - u(i, j);
            const double dp = v(i, j) - vp(i, j);
            obj += h.lambda_v / 2.0 * v(i, j) * v(i, j) + h.gamma / 2.0 * dv * dv +
                   h.alpha / 2.0 * dp * dp;
        }
    }
    return obj;
}

double w_objective(const Matrix& w, const Matrix& u, const Matrix& v, const Matrix& wp,
                   const BcdHyper& h) {
    double obj = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = w.data()[i] - wp.data()[i];
        obj += h.lambda_w / 2.0 * w.data()[i] * w.data()[i] + h.alpha / 2.0 * d * d;
    }
    // gamma/2 ||U - W V||^2 accumulated entrywise.
    for (std::size_t r = 0; r < u.rows(); ++r) {
        for (std::size_t c = 0; c < u.cols(); ++c) {
            double wv = 0;
            for (std::size_t t = 0; t < v.rows(); ++t) wv += w(r, t) * v(t, c);
            const double d = u(r, c) - wv;
            obj += h.gamma / 2.0 * d * d;
        }
    }
    return obj;
}

double v_hidden_objective(const Matrix& v, const Matrix& u_prev, const Matrix& w_above,
                          const Matrix& u_above, const BcdHyper& h) {
    double obj = 0;
    for (std::size_t r = 0; r < v.rows(); ++r) {
        for (std::size_t c = 0; c < v.cols(); ++c) {
            const double target = std::max(real(0), u_prev(r, c));
            const double d = v(r, c) - target;
            obj += h.lambda_v / 2.0 * v(r, c) * v(r, c) + h.gamma / 2.0 * d * d;
        }
    }
    for (std::size_t r = 0; r < u_above.rows(); ++r) {
        for (std::size_t c = 0; c < u_above.cols(); ++c) {
            double wv = 0;
            for (std::size_t t = 0; t < v.rows(); ++t) wv += w_above(r, t) * v(t, c);
            const double d = u_above(r, c) - wv;
            obj += h.alpha / 2.0 * d * d;
        }
    }
    return obj;
}

double u_out_objective(double uij, double vij, double wvij, const BcdHyper& h) {
    const double c2 = h.u_out_alpha_coupling ? h.alpha : h.gamma;
    const double d1 = vij - uij;
    const double d2 = uij - wvij;
    return h.gamma / 2.0 * d1 * d1 + c2 / 2.0 * d2 * d2;
}

// --- gradient-descent minimizers -------------------------------------------

// Plain gradient descent to a gradient-norm tolerance; quadratic objectives
// only, step = 1/L with L an upper Lipschitz bound.
Matrix gd_minimize(Matrix x, const std::function<void(const Matrix&, Matrix&)>& grad_fn,
                   double step, double tol, int max_iter) {
    Matrix g(x.rows(), x.cols());
    for (int it = 0; it < max_iter; ++it) {
        grad_fn(x, g);
        if (frob_norm(g) <= tol) break;
        add_scaled(x, static_cast<real>(-step), g);
    }
    return x;
}

// --- suites ----------------------------------------------------------------

SuiteResult vout_suite(int cases, SeededRng& rng) {
    SuiteResult res{"v_out", 0, 0.0, 2e-3, true, ""};
    double worst_sq = 0, worst_ce = 0;

    // Squared-loss half: closed form vs gradient descent.
    for (int it = 0; it < cases; ++it) {
        const std::size_t k = 2 + rng.next_below(3);
        const std::size_t n = 1 + rng.next_below(4);
        BcdHyper h;
        h.loss = LossKind::Squared;
        h.vout.kind = VOutSolver::Kind::ClosedFormSquared;
        h.gamma = rng.uniform(0.1, 5.0);
        h.alpha = rng.uniform(0.1, 5.0);
        h.lambda_v = (it % 3 == 0) ? rng.uniform(0.0, 0.5) : 0.0;
        const Matrix u = random_matrix(k, n, rng, -2, 2);
        const Matrix vp = random_matrix(k, n, rng, -2, 2);
        std::vector<int> y(n);
        for (auto& label : y) label = static_cast<int>(rng.next_below(k));

        const Matrix got = update_v_out(u, vp, y, h);

        const double lip = 1.0 + h.lambda_v + h.gamma + h.alpha;
        const auto grad = [&](const Matrix& v, Matrix& g) {
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t i = 0; i < k; ++i) {
                    const double target = (static_cast<std::size_t>(y[j]) == i) ? 1.0 : 0.0;
                    g(i, j) = static_cast<real>((v(i, j) - target) +
                                                h.lambda_v * v(i, j) + h.gamma * (v(i, j) - u(i, j)) +
                                                h.alpha * (v(i, j) - vp(i, j)));
                }
            }
        };
        const Matrix ref = gd_minimize(vp, grad, 1.0 / lip, 1e-11, 200000);
        const double gap =
            std::fabs(vout_objective(got, u, vp, y, h) - vout_objective(ref, u, vp, y, h));
        worst_sq = std::max(worst_sq, gap);
        if (gap > 1e-6) res.pass = false;
    }

    // Cross-entropy half: two classes decouple into a sum coordinate
    // (quadratic, exact) and a difference coordinate (1-D grid over [-10,10],
    // step 1e-3).
    for (int it = 0; it < cases; ++it) {
        const std::size_t n = 1 + rng.next_below(3);
        BcdHyper h;
        h.loss = LossKind::SoftmaxCrossEntropy;
        h.gamma = rng.uniform(0.1, 10.0);
        h.alpha = rng.uniform(0.1, 10.0);
        h.lambda_v = (it % 4 == 0) ? rng.uniform(0.0, 0.3) : 0.0;
        const Matrix u = random_matrix(2, n, rng, -2, 2);
        const Matrix vp = random_matrix(2, n, rng, -2, 2);
        std::vector<int> y(n);
        for (auto& label : y) label = static_cast<int>(rng.next_below(2));

        const Matrix got = update_v_out(u, vp, y, h);

        const double quad = h.lambda_v + h.gamma + h.alpha;
        for (std::size_t j = 0; j < n; ++j) {
            const double su = u(0, j) + u(1, j), du = u(0, j) - u(1, j);
            const double sw = vp(0, j) + vp(1, j), dw = vp(0, j) - vp(1, j);
            const double sign = (y[j] == 0) ? 1.0 : -1.0;
            const auto fd = [&](double d) {
                const double ad = std::fabs(d) / 2.0;
                const double ce = ad + std::log1p(std::exp(-2.0 * ad)) - sign * d / 2.0;
                const double q1 = d - du, q2 = d - dw;
                return ce + h.lambda_v / 4.0 * d * d + h.gamma / 4.0 * q1 * q1 +
                       h.alpha / 4.0 * q2 * q2;
            };
            double best = fd(-10.0);
            for (int step = 1; step <= 20000; ++step) {
                best = std::min(best, fd(-10.0 + 1e-3 * step));
            }
            const double s_star = (h.gamma * su + h.alpha * sw) / quad;
            const double fs = [&](double s) {
                const double q1 = s - su, q2 = s - sw;
                return h.lambda_v / 4.0 * s * s + h.gamma / 4.0 * q1 * q1 +
                       h.alpha / 4.0 * q2 * q2;
            }(s_star);
            const double oracle_obj = best + fs;

            const auto f_col = [&](double v0, double v1) {
                const double ce = lse_minus_label({v0, v1}, y[j]);
                double obj = ce + h.lambda_v / 2.0 * (v0 * v0 + v1 * v1);
                double d0 = v0 - u(0, j), d1 = v1 - u(1, j);
                obj += h.gamma / 2.0 * (d0 * d0 + d1 * d1);
                d0 = v0 - vp(0, j);
                d1 = v1 - vp(1, j);
                obj += h.alpha / 2.0 * (d0 * d0 + d1 * d1);
                return obj;
            };
            const double gap = std::fabs(f_col(got(0, j), got(1, j)) - oracle_obj);
            worst_ce = std::max(worst_ce, gap);
            if (gap > 2e-3) res.pass = false;
        }
    }

    res.cases = 2 * cases;
    res.worst_gap = std::max(worst_ce, worst_sq);
    res.detail = "squared worst " + std::to_string(worst_sq) + ", ce worst " + std::to_string(worst_ce);
    return res;
}

SuiteResult uout_suite(int cases, SeededRng& rng) {
    SuiteResult res{"u_out", cases, 0.0, 1e-6, true, ""};
    for (int it = 0; it < cases; ++it) {
        const std::size_t k = 1 + rng.next_below(4);
        const std::size_t din = 1 + rng.next_below(4);
        const std::size_t n = 1 + rng.next_below(4);
        BcdHyper h;
        h.gamma = rng.uniform(0.1, 10.0);
        h.alpha = rng.uniform(0.1, 10.0);
        h.u_out_alpha_coupling = (it % 2 == 1);
        const Matrix v = random_matrix(k, n, rng, -2, 2);
        const Matrix w = random_matrix(k, din, rng);
        const Matrix vb = random_matrix(din, n, rng);

        const Matrix got = update_u_out(v, w, vb, h);

        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                double wv = 0;
                for (std::size_t t = 0; t < din; ++t) wv += w(r, t) * vb(t, c);
                const double vrc = v(r, c);
                const double lo = std::min(vrc, wv) - 1.0;
                const double hi = std::max(vrc, wv) + 1.0;
                const double ref =
                    golden_min([&](double x) { return u_out_objective(x, v(r, c), wv, h); }, lo, hi);
                const double gap = u_out_objective(got(r, c), v(r, c), wv, h) - ref;
                res.worst_gap = std::max(res.worst_gap, std::fabs(gap));
                if (std::fabs(gap) > res.tolerance) res.pass = false;
            }
        }
    }
    return res;
}

SuiteResult w_suite(int cases, SeededRng& rng) {
    SuiteResult res{"w", cases, 0.0, 1e-6, true, ""};
    double worst_param = 0;
    for (int it = 0; it < cases; ++it) {
        const std::size_t dout = 1 + rng.next_below(3);
        const std::size_t din = 1 + rng.next_below(3);
        const std::size_t n = 1 + rng.next_below(6);
        BcdHyper h;
        h.gamma = rng.uniform(0.1, 5.0);
        h.alpha = rng.uniform(0.1, 5.0);
        h.lambda_w = (it % 3 == 0) ? rng.uniform(0.0, 0.5) : 0.0;
        const Matrix u = random_matrix(dout, n, rng);
        const Matrix v = random_matrix(din, n, rng);
        const Matrix wp = random_matrix(dout, din, rng);

        const Matrix got = update_w(u, v, wp, h);

        double v_sq = 0;
        for (std::size_t i = 0; i < v.size(); ++i) v_sq += v.data()[i] * v.data()[i];
        const double lip = h.gamma * v_sq + h.alpha + h.lambda_w;
        const auto grad = [&](const Matrix& w, Matrix& g) {
            for (std::size_t r = 0; r < dout; ++r) {
                for (std::size_t t = 0; t < din; ++t) {
                    double acc = h.lambda_w * w(r, t) + h.alpha * (w(r, t) - wp(r, t));
                    for (std::size_t c = 0; c < n; ++c) {
                        double wv = 0;
                        for (std::size_t t2 = 0; t2 < din; ++t2) wv += w(r, t2) * v(t2, c);
                        acc -= h.gamma * (u(r, c) - wv) * v(t, c);
                    }
                    g(r, t) = static_cast<real>(acc);
                }
            }
        };
        const Matrix ref = gd_minimize(wp, grad, 1.0 / lip, 1e-10, 400000);
        const double gap = std::fabs(w_objective(got, u, v, wp, h) - w_objective(ref, u, v, wp, h));
        worst_param = std::max(worst_param, static_cast<double>(max_abs_diff(got, ref)));
        res.worst_gap = std::max(res.worst_gap, gap);
        if (gap > res.tolerance || max_abs_diff(got, ref) > 1e-7) res.pass = false;
    }
    res.detail = "worst param diff " + std::to_string(worst_param);
    return res;
}

SuiteResult v_hidden_suite(int cases, SeededRng& rng) {
    SuiteResult res{"v_hidden", cases, 0.0, 1e-6, true, ""};
    for (int it = 0; it < cases; ++it) {
        const std::size_t di = 1 + rng.next_below(3);
        const std::size_t dup = 1 + rng.next_below(3);
        const std::size_t n = 1 + rng.next_below(4);
        BcdHyper h;
        h.gamma = rng.uniform(0.1, 5.0);
        h.alpha = rng.uniform(0.1, 5.0);
        h.lambda_v = (it % 3 == 0) ? rng.uniform(0.0, 0.5) : 0.0;
        const Matrix u_prev = random_matrix(di, n, rng, -2, 2);
        const Matrix w_above = random_matrix(dup, di, rng);
        const Matrix u_above = random_matrix(dup, n, rng, -2, 2);

        const Matrix got = update_v_hidden(u_prev, w_above, u_above, h);

        double w_sq = 0;
        for (std::size_t i = 0; i < w_above.size(); ++i) {
            w_sq += w_above.data()[i] * w_above.data()[i];
        }
        const double lip = h.gamma + h.lambda_v + h.alpha * w_sq;
        const auto grad = [&](const Matrix& v, Matrix& g) {
            for (std::size_t r = 0; r < di; ++r) {
                for (std::size_t c = 0; c < n; ++c) {
                    const double target = std::max(real(0), u_prev(r, c));
                    double acc = h.lambda_v * v(r, c) + h.gamma * (v(r, c) - target);
                    for (std::size_t s = 0; s < dup; ++s) {
                        double wv = 0;
                        for (std::size_t t = 0; t < di; ++t) wv += w_above(s, t) * v(t, c);
                        acc -= h.alpha * (u_above(s, c) - wv) * w_above(s, r);
                    }
                    g(r, c) = static_cast<real>(acc);
                }
            }
        };
        const Matrix ref = gd_minimize(Matrix(di, n), grad, 1.0 / lip, 1e-10, 400000);
        const double gap = std::fabs(v_hidden_objective(got, u_prev, w_above, u_above, h) -
                                     v_hidden_objective(ref, u_prev, w_above, u_above, h));
        res.worst_gap = std::max(res.worst_gap, gap);
        if (gap > res.tolerance) res.pass = false;
    }
    return res;
}

SuiteResult u_hidden_suite(int cases, SeededRng& rng, UHiddenFn impl) {
    SuiteResult res{"u_hidden", cases, 0.0, 1e-6, true, ""};
    for (int it = 0; it < cases; ++it) {
        BcdHyper h;
        h.gamma = rng.uniform(0.1, 10.0);
        h.alpha = rng.uniform(0.1, 10.0);
        const double v = rng.uniform(-3, 3);
        const double q = rng.uniform(-3, 3);
        const double p = rng.uniform(-3, 3);

        // Scalar instance through the matrix interface: w = [[1]], v_below = [[q]].
        Matrix vm(1, 1), wm(1, 1), vb(1, 1), um(1, 1);
        vm(0, 0) = static_cast<real>(v);
        wm(0, 0) = 1;
        vb(0, 0) = static_cast<real>(q);
        um(0, 0) = static_cast<real>(p);
        const Matrix got = impl(vm, wm, vb, um, h);

        // Convex on each sign region; golden section per region.
        const double bound = 3.0 * (1.0 + std::max({std::fabs(v), std::fabs(q), std::fabs(p)}));
        const double ref = std::min(
            golden_min([&](double x) { return u_hidden_objective(x, v, q, p, h.gamma, h.alpha); },
                       -bound, 0.0),
            golden_min([&](double x) { return u_hidden_objective(x, v, q, p, h.gamma, h.alpha); },
                       0.0, bound));
        const double gap =
            u_hidden_objective(got(0, 0), v, q, p, h.gamma, h.alpha) - ref;
        res.worst_gap = std::max(res.worst_gap, std::fabs(gap));
        if (std::fabs(gap) > res.tolerance) res.pass = false;
    }
    return res;
}

} // namespace

double u_hidden_objective(double u, double v, double q, double p, double gamma, double alpha) {
    const double sig = std::max(0.0, u);
    const double d1 = v - sig, d2 = u - q, d3 = u - p;
    return gamma / 2.0 * d1 * d1 + gamma / 2.0 * d2 * d2 + alpha / 2.0 * d3 * d3;
}

double u_hidden_grid_min(double v, double q, double p, double gamma, double alpha, double lo,
                         double hi, double step) {
    double best = u_hidden_objective(lo, v, q, p, gamma, alpha);
    const auto count = static_cast<long>((hi - lo) / step);
    for (long i = 1; i <= count; ++i) {
        best = std::min(best, u_hidden_objective(lo + step * static_cast<double>(i), v, q, p,
                                                 gamma, alpha));
    }
    return best;
}

SuiteResult run_gradient_suite(int cases, std::uint64_t seed) {
    SuiteResult res{"gradient", cases, 0.0, 1e-4, true, ""};
    SeededRng rng(mix_seed(seed, 0xfd));
    for (int it = 0; it < cases; ++it) {
        const std::size_t depth = 1 + rng.next_below(4);
        std::vector<std::size_t> dims;
        dims.push_back(2 + rng.next_below(7));
        for (std::size_t i = 1; i < depth; ++i) dims.push_back(2 + rng.next_below(7));
        dims.push_back(2 + rng.next_below(4));
        SeededRng init = rng.fork(it);
        MlpParams params = init_params(dims, init);

        LocalDataset data;
        const std::size_t n = 1 + rng.next_below(4);
        data.x = random_matrix(dims.front(), n, rng);
        data.y.resize(n);
        for (auto& label : data.y) label = static_cast<int>(rng.next_below(dims.back()));

        const auto grads = backprop_grad(params, data);

        const double eps = 1e-5;
        double err = 0;
        for (std::size_t li = 1; li <= depth; ++li) {
            Matrix& w = params.w(li);
            for (std::size_t e = 0; e < w.size(); ++e) {
                const real keep = w.data()[e];
                w.data()[e] = keep + static_cast<real>(eps);
                const double fp = loss_value(forward(params, data.x), data.y,
                                             LossKind::SoftmaxCrossEntropy);
                w.data()[e] = keep - static_cast<real>(eps);
                const double fm = loss_value(forward(params, data.x), data.y,
                                             LossKind::SoftmaxCrossEntropy);
                w.data()[e] = keep;
                const double fd = (fp - fm) / (2 * eps);
                const double bp = grads[li - 1].data()[e];
                err = std::max(err, std::fabs(bp - fd) / (1.0 + std::fabs(fd)));
            }
        }
        res.worst_gap = std::max(res.worst_gap, err);
        if (err > res.tolerance) res.pass = false;
    }
    return res;
}

OracleReport run_oracle_suites_with(int cases_per_suite, std::uint64_t seed,
                                    UHiddenFn u_hidden_impl) {
    OracleReport report;
    SeededRng r1(mix_seed(seed, 1)), r2(mix_seed(seed, 2)), r3(mix_seed(seed, 3)),
        r4(mix_seed(seed, 4)), r5(mix_seed(seed, 5));
    report.suites.push_back(vout_suite(cases_per_suite, r1));
    report.suites.push_back(uout_suite(cases_per_suite, r2));
    report.suites.push_back(w_suite(cases_per_suite, r3));
    report.suites.push_back(v_hidden_suite(cases_per_suite, r4));
    report.suites.push_back(u_hidden_suite(std::max(cases_per_suite, 1000), r5, u_hidden_impl));
    report.gradient = run_gradient_suite(std::min(cases_per_suite, 100), seed);
    return report;
}

OracleReport run_oracle_suites(int cases_per_suite, std::uint64_t seed) {
    return run_oracle_suites_with(cases_per_suite, seed, &update_u_hidden);
}

bool OracleReport::all_pass() const {
    for (const auto& s : suites) {
        if (!s.pass) return false;
    }
    return gradient.pass;
}

void print_report(const OracleReport& report, std::ostream& out) {
    for (const auto& s : report.suites) {
        out << "suite " << s.name << ": " << (s.pass ? "pass" : "FAIL") << " cases=" << s.cases
            << " worst_gap=" << s.worst_gap << " tol=" << s.tolerance;
        if (!s.detail.empty()) out << " (" << s.detail << ")";
        out << "\n";
    }
    const auto& g = report.gradient;
    out << "gradient check: " << (g.pass ? "pass" : "FAIL") << " cases=" << g.cases
        << " worst_rel_err=" << g.worst_gap << " tol=" << g.tolerance << "\n";
}

} // namespace dbcd::oracle
