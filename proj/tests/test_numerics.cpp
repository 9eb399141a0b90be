#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dbcd/numerics.hpp"

using namespace dbcd;

namespace {

Matrix random_spd(std::size_t n, SeededRng& rng) {
    Matrix g(n, n);
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = static_cast<real>(rng.normal());
    Matrix a = matmul(g, transpose(g));
    const real shift = static_cast<real>(rng.uniform(0.1, 1.0));
    for (std::size_t i = 0; i < n; ++i) a(i, i) += shift;
    return a;
}

} // namespace

TEST_CASE("cholesky: identity factors to identity") {
    const Matrix l = cholesky_factor(Matrix::identity(3));
    CHECK(max_abs_diff(l, Matrix::identity(3)) == 0.0);
}

TEST_CASE("cholesky: hand 2x2 factorization") {
    const Matrix a = Matrix::from_rows({{4, 2}, {2, 3}});
    const Matrix l = cholesky_factor(a);
    CHECK(l(0, 0) == doctest::Approx(2.0));
    CHECK(l(0, 1) == 0.0);
    CHECK(l(1, 0) == doctest::Approx(1.0));
    CHECK(l(1, 1) == doctest::Approx(std::sqrt(2.0)));
    const Matrix back = matmul(l, transpose(l));
    CHECK(max_abs_diff(back, a) < 1e-12);
}

TEST_CASE("cholesky: indefinite matrix rejected") {
    const Matrix a = Matrix::from_rows({{1, 2}, {2, 1}});
    CHECK_THROWS_AS(cholesky_factor(a), NotPositiveDefinite);
}

TEST_CASE("cholesky: asymmetric matrix rejected") {
    const Matrix a = Matrix::from_rows({{1, 2}, {0, 1}});
    CHECK_THROWS_AS(cholesky_factor(a), ShapeMismatch);
}

TEST_CASE("cholesky: reconstruction within 1e-8 relative on random SPD") {
    SeededRng rng(42);
    for (int it = 0; it < 200; ++it) {
        const std::size_t n = 1 + rng.next_below(8);
        const Matrix a = random_spd(n, rng);
        const Matrix l = cholesky_factor(a);
        const Matrix back = matmul(l, transpose(l));
        CHECK(std::sqrt(frob_sq_diff(back, a)) <= 1e-8 * (1 + frob_norm(a)));
    }
}

TEST_CASE("solve_spd: identity system returns rhs") {
    SeededRng rng(7);
    const Matrix b = gaussian_matrix(4, 3, 1.0, rng);
    const Matrix x = solve_spd(Matrix::identity(4), b);
    CHECK(max_abs_diff(x, b) < 1e-14);
}

TEST_CASE("solve_spd: hand diagonal solve") {
    const Matrix a = Matrix::from_rows({{2, 0}, {0, 4}});
    const Matrix b = Matrix::from_rows({{2}, {8}});
    const Matrix x = solve_spd(a, b);
    CHECK(x(0, 0) == doctest::Approx(1.0));
    CHECK(x(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("solve_spd: scalar multiple of identity") {
    Matrix a = Matrix::identity(3);
    scale(a, 2.0);
    const Matrix x = solve_spd(a, Matrix::identity(3));
    Matrix expected = Matrix::identity(3);
    scale(expected, 0.5);
    CHECK(max_abs_diff(x, expected) < 1e-14);
}

TEST_CASE("solve_spd: residual bound over 1000 random SPD systems") {
    SeededRng rng(1234);
    for (int it = 0; it < 1000; ++it) {
        const std::size_t n = 1 + rng.next_below(8);
        const std::size_t k = 1 + rng.next_below(4);
        const Matrix a = random_spd(n, rng);
        const Matrix b = gaussian_matrix(n, k, 1.0, rng);
        const Matrix x = solve_spd(a, b);
        const Matrix ax = matmul(a, x);
        const real residual = std::sqrt(frob_sq_diff(ax, b));
        CHECK(residual <= 1e-8 * (1 + frob_norm(b)));
    }
}

TEST_CASE("gaussian_matrix: determinism under equal seeds") {
    SeededRng r1(7), r2(7);
    const Matrix a = gaussian_matrix(2, 2, 1.0, r1);
    const Matrix b = gaussian_matrix(2, 2, 1.0, r2);
    CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("gaussian_matrix: sample mean near zero") {
    SeededRng rng(3);
    const Matrix m = gaussian_matrix(1000, 1000, 1.0, rng);
    real sum = 0;
    for (std::size_t i = 0; i < m.size(); ++i) sum += m.data()[i];
    CHECK(std::fabs(sum / static_cast<real>(m.size())) < 0.01);
}

TEST_CASE("gaussian_matrix: zero scale rejected") {
    SeededRng rng(1);
    CHECK_THROWS_AS(gaussian_matrix(2, 2, 0.0, rng), ValueOutOfRange);
}

TEST_CASE("rng: uniform stream deterministic and in range") {
    SeededRng a(99), b(99);
    for (int i = 0; i < 1000; ++i) {
        const double x = a.uniform();
        CHECK(x == b.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("rng: permutation is a permutation") {
    SeededRng rng(5);
    auto p = rng.permutation(100);
    std::vector<bool> seen(100, false);
    for (auto i : p) {
        CHECK(!seen[i]);
        seen[i] = true;
    }
}

TEST_CASE("solve_spd_auto_ridge recovers from a barely indefinite system") {
    // Diagonal with one pivot below the factorization floor.
    Matrix a = Matrix::identity(3);
    a(2, 2) = 1e-13;
    const Matrix b = Matrix::from_rows({{1}, {1}, {0}});
    const Matrix x = solve_spd_auto_ridge(a, b, "test");
    CHECK(x(0, 0) == doctest::Approx(1.0));
}
