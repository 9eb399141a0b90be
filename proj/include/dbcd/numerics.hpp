#pragma once

#include "dbcd/matrix.hpp"
#include "dbcd/rng.hpp"

namespace dbcd {

// Lower-triangular L with L*L^T = a. Requires a square and symmetric within
// 1e-10 relative; throws NotPositiveDefinite when a pivot drops to <= 1e-12.
Matrix cholesky_factor(const Matrix& a);

// X with a*X = b for symmetric positive-definite a (multi-RHS).
Matrix solve_spd(const Matrix& a, const Matrix& b);

// Solve with a precomputed factor: (L L^T) X = b.
Matrix solve_cholesky(const Matrix& l, const Matrix& b);

// Entries i.i.d. normal(0, scale^2); deterministic given the rng state.
// scale must be strictly positive.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, real scale, SeededRng& rng);

// solve_spd with one retry after adding ridge 1e-10*trace/dim when the first
// factorization fails; the retry is logged as a warning. Subproblem matrices
// here are SPD by construction (alpha > 0), so a failure signals scaling
// trouble rather than a modeling bug.
Matrix solve_spd_auto_ridge(Matrix a, const Matrix& b, const char* context);

} // namespace dbcd
