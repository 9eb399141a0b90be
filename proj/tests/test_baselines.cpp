#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dbcd/baselines.hpp"
#include "dbcd/data.hpp"

using namespace dbcd;

namespace {

LocalDataset make_dataset(std::size_t dim, std::size_t n, std::size_t classes, SeededRng& rng) {
    LocalDataset d;
    d.x = Matrix(dim, n);
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        d.x.data()[i] = static_cast<real>(rng.uniform(-1, 1));
    }
    d.y.resize(n);
    for (auto& y : d.y) y = static_cast<int>(rng.next_below(classes));
    return d;
}

} // namespace

TEST_CASE("backprop: near-zero gradient at saturated correct logits") {
    // One layer whose weights already map each input to a huge correct logit.
    MlpParams p;
    p.dims = {2, 2};
    p.weights = {Matrix::from_rows({{50, 0}, {0, 50}})};
    LocalDataset d;
    d.x = Matrix::from_rows({{1, 0}, {0, 1}});
    d.y = {0, 1};
    const auto grads = backprop_grad(p, d);
    CHECK(frob_norm(grads[0]) < 1e-6);
}

TEST_CASE("backprop: finite-difference agreement on random small nets") {
    SeededRng rng(41);
    for (int it = 0; it < 25; ++it) {
        const std::size_t depth = 1 + rng.next_below(3);
        std::vector<std::size_t> dims{3};
        for (std::size_t i = 1; i < depth; ++i) dims.push_back(2 + rng.next_below(4));
        dims.push_back(2 + rng.next_below(3));
        SeededRng init = rng.fork(it);
        MlpParams p = init_params(dims, init);
        const LocalDataset d = make_dataset(3, 1 + rng.next_below(4), dims.back(), rng);

        const auto grads = backprop_grad(p, d);
        const double eps = 1e-5;
        for (std::size_t li = 0; li < p.weights.size(); ++li) {
            for (std::size_t e = 0; e < p.weights[li].size(); ++e) {
                const real keep = p.weights[li].data()[e];
                p.weights[li].data()[e] = keep + static_cast<real>(eps);
                const double fp =
                    loss_value(forward(p, d.x), d.y, LossKind::SoftmaxCrossEntropy);
                p.weights[li].data()[e] = keep - static_cast<real>(eps);
                const double fm =
                    loss_value(forward(p, d.x), d.y, LossKind::SoftmaxCrossEntropy);
                p.weights[li].data()[e] = keep;
                const double fd = (fp - fm) / (2 * eps);
                CHECK(std::fabs(grads[li].data()[e] - fd) < 1e-4 * (1 + std::fabs(fd)));
            }
        }
    }
}

TEST_CASE("backprop: duplicating every sample leaves the mean gradient unchanged") {
    SeededRng rng(43);
    const MlpParams p = init_params({3, 4, 2}, rng);
    const LocalDataset d = make_dataset(3, 5, 2, rng);
    LocalDataset doubled;
    doubled.x = Matrix(3, 10);
    doubled.y.resize(10);
    for (std::size_t j = 0; j < 10; ++j) {
        for (std::size_t r = 0; r < 3; ++r) doubled.x(r, j) = d.x(r, j % 5);
        doubled.y[j] = d.y[j % 5];
    }
    const auto g1 = backprop_grad(p, d);
    const auto g2 = backprop_grad(p, doubled);
    for (std::size_t li = 0; li < g1.size(); ++li) {
        CHECK(max_abs_diff(g1[li], g2[li]) < 1e-12);
    }
}

TEST_CASE("sgd_epoch: zero steps when nothing to learn from lr") {
    SeededRng rng(47);
    const MlpParams p = init_params({2, 3, 2}, rng);
    const LocalDataset d = make_dataset(2, 6, 2, rng);
    SgdConfig cfg;
    cfg.learning_rate = real(1e-300); // effectively zero while staying valid
    SeededRng shuffle(1);
    const MlpParams out = sgd_epoch(p, d, cfg, shuffle);
    for (std::size_t li = 0; li < p.weights.size(); ++li) {
        CHECK(max_abs_diff(out.weights[li], p.weights[li]) < 1e-12);
    }
    CHECK_THROWS_AS([&] {
        SgdConfig bad;
        bad.learning_rate = 0;
        bad.validate();
    }(), ValueOutOfRange);
}

TEST_CASE("sgd_epoch: single sample, one step equals explicit gradient update") {
    SeededRng rng(53);
    const MlpParams p = init_params({2, 2}, rng);
    LocalDataset d;
    d.x = Matrix::from_rows({{1}, {-1}});
    d.y = {1};
    SgdConfig cfg;
    cfg.learning_rate = real(0.1);
    const auto grads = backprop_grad(p, d);
    SeededRng shuffle(1);
    const MlpParams out = sgd_epoch(p, d, cfg, shuffle);
    Matrix expected = p.weights[0];
    add_scaled(expected, real(-0.1), grads[0]);
    CHECK(max_abs_diff(out.weights[0], expected) < 1e-15);
}

TEST_CASE("sgd_epoch: loss decreases over 50 epochs on separable blobs") {
    const auto ds = gen_blobs(1, 80, 4, 2, 0.0, 3);
    const LocalDataset& train = ds.devices[0].train;
    SeededRng rng(59);
    MlpParams p = init_params({4, 8, 2}, rng);
    const real loss0 = loss_value(forward(p, train.x), train.y, LossKind::SoftmaxCrossEntropy);
    SgdConfig cfg;
    cfg.batch_size = 16;
    SeededRng shuffle(7);
    for (int e = 0; e < 50; ++e) p = sgd_epoch(std::move(p), train, cfg, shuffle);
    const real loss1 = loss_value(forward(p, train.x), train.y, LossKind::SoftmaxCrossEntropy);
    CHECK(loss1 < loss0);
}

TEST_CASE("sgd_epoch: deterministic given equal shuffle state") {
    SeededRng rng(61);
    const MlpParams p = init_params({3, 4, 2}, rng);
    const LocalDataset d = make_dataset(3, 20, 2, rng);
    SgdConfig cfg;
    cfg.batch_size = 8;
    SeededRng s1(123), s2(123);
    const MlpParams a = sgd_epoch(p, d, cfg, s1);
    const MlpParams b = sgd_epoch(p, d, cfg, s2);
    for (std::size_t li = 0; li < a.weights.size(); ++li) {
        CHECK(max_abs_diff(a.weights[li], b.weights[li]) == 0.0);
    }
}

TEST_CASE("pool_datasets: pooled sample count is the sum over devices") {
    SeededRng rng(67);
    const LocalDataset a = make_dataset(2, 5, 2, rng);
    const LocalDataset b = make_dataset(2, 7, 2, rng);
    const LocalDataset pooled = pool_datasets({&a, &b});
    REQUIRE(pooled.n() == 12);
    for (std::size_t j = 0; j < 5; ++j) CHECK(pooled.x(0, j) == a.x(0, j));
    for (std::size_t j = 0; j < 7; ++j) CHECK(pooled.x(0, 5 + j) == b.x(0, j));
}
