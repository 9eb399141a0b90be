#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dbcd/bcd.hpp"

namespace dbcd::oracle {

// Brute-force checks for every block solver plus the backprop gradient.
// The minimizers here (gradient descent, golden section, grid search) and
// their objective evaluators are written independently of the production
// solvers; they share nothing with the closed forms they validate.

struct SuiteResult {
    std::string name;
    int cases = 0;
    double worst_gap = 0;
    double tolerance = 0;
    bool pass = true;
    std::string detail;
};

struct OracleReport {
    // The five block-subproblem suites: v_out (both losses), u_out, w,
    // v_hidden, u_hidden.
    std::vector<SuiteResult> suites;
    // Backprop against central finite differences.
    SuiteResult gradient;

    bool all_pass() const;
};

using UHiddenFn = Matrix (*)(const Matrix&, const Matrix&, const Matrix&, const Matrix&,
                             const BcdHyper&);

OracleReport run_oracle_suites(int cases_per_suite, std::uint64_t seed);

// Same, with a replaceable hidden-u implementation so tests can verify the
// suite catches an injected defect.
OracleReport run_oracle_suites_with(int cases_per_suite, std::uint64_t seed,
                                    UHiddenFn u_hidden_impl);

// Gradient-vs-finite-difference suite alone (also part of the full report).
SuiteResult run_gradient_suite(int cases, std::uint64_t seed);

void print_report(const OracleReport& report, std::ostream& out);

// Grid search over the scalar hidden-u objective, used directly by tests.
double u_hidden_objective(double u, double v, double q, double p, double gamma, double alpha);
double u_hidden_grid_min(double v, double q, double p, double gamma, double alpha, double lo,
                         double hi, double step);

} // namespace dbcd::oracle
