#include <doctest.h>

#include <numeric>

#include "helpers.h"
#include "mivs/error.h"
#include "mivs/forest.h"
#include "mivs/tree.h"
#include "oracles.h"

using namespace mivs;

namespace {

std::vector<size_t> all_rows(size_t n) {
    std::vector<size_t> r(n);
    std::iota(r.begin(), r.end(), 0);
    return r;
}

void check_root(const Tree& t, const Eigen::MatrixXd& X, const std::vector<double>& y, oracle::Impurity kind,
                const std::vector<double>& h = {}) {
    oracle::RootSplit o = oracle::best_root_split(X, y, kind, h);
    REQUIRE_FALSE(t.nodes[0].is_leaf());
    const double tol = 1e-9 * (1.0 + std::fabs(o.gain));
    CHECK(t.nodes[0].gain == doctest::Approx(o.gain).epsilon(1e-9));
    CHECK(oracle::split_gain_at(X, y, kind, t.nodes[0].var, t.nodes[0].split, h) >= o.gain - tol);
    if (o.runner_up < o.gain - tol) {
        CHECK(t.nodes[0].var == o.var);
        CHECK(t.nodes[0].split == o.split);
    }
}

} // namespace

TEST_CASE("root split matches exhaustive search") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        Eigen::MatrixXd X = testing::normal_matrix(50, 4, rng);
        for (Eigen::Index i = 0; i < 50; ++i) X(i, 3) = std::round(X(i, 3));
        std::vector<double> yb(50), yc(50), g(50), h(50);
        for (size_t i = 0; i < 50; ++i) {
            yb[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-2 * X(i, 0))));
            yc[i] = X(i, 1) * X(i, 1) + rng.normal();
            const double p = rng.uniform();
            g[i] = p - yb[i];
            h[i] = p * (1 - p);
        }
        auto rows = all_rows(50);
        GrowControls c;
        c.max_depth = 1;
        Rng r(1);
        check_root(grow_tree(X, rows, {yb, {}}, {CriterionKind::Gini}, c, r), X, yb, oracle::Impurity::Gini);
        check_root(grow_tree(X, rows, {yc, {}}, {CriterionKind::SquaredError}, c, r), X, yc, oracle::Impurity::Sse);
        check_root(grow_tree(X, rows, {g, h}, {CriterionKind::BoostGain, 1.0, 0.0}, c, r), X, g,
                   oracle::Impurity::Boost, h);
    }
}

TEST_CASE("separable response gives a depth-1 tree near zero") {
    Rng rng(3);
    Eigen::MatrixXd X = testing::normal_matrix(100, 3, rng);
    std::vector<double> y(100);
    for (size_t i = 0; i < 100; ++i) y[i] = X(i, 0) < 0 ? 1.0 : 0.0;
    auto rows = all_rows(100);
    Rng r(0);
    Tree t = grow_tree(X, rows, {y, {}}, {CriterionKind::Gini}, {}, r);
    CHECK(t.depth() == 1);
    CHECK(t.nodes[0].var == 0);
    CHECK(std::fabs(t.nodes[0].split) < 0.2);
    std::vector<double> row = {-5.0, 0.0, 0.0};
    CHECK(t.predict(row) == 1.0);
}

TEST_CASE("constant response gives a single leaf") {
    Rng rng(4);
    Eigen::MatrixXd X = testing::normal_matrix(20, 2, rng);
    std::vector<double> y(20, 0.3);
    auto rows = all_rows(20);
    Tree t = grow_tree(X, rows, {y, {}}, {CriterionKind::SquaredError}, {}, rng);
    CHECK(t.nodes.size() == 1);
    CHECK(t.nodes[0].value == doctest::Approx(0.3));
    std::vector<double> row = {10.0, -3.0};
    CHECK(t.predict(row) == doctest::Approx(0.3));
}

TEST_CASE("prediction follows the split path") {
    Rng rng(5);
    Eigen::MatrixXd X = testing::normal_matrix(200, 3, rng);
    std::vector<double> y(200);
    for (size_t i = 0; i < 200; ++i) y[i] = X(i, 0) + 2 * X(i, 1) * X(i, 2) + 0.1 * rng.normal();
    auto rows = all_rows(200);
    GrowControls c;
    c.max_depth = 4;
    c.min_leaf = 3;
    Tree t = grow_tree(X, rows, {y, {}}, {CriterionKind::SquaredError}, c, rng);
    for (Eigen::Index i = 0; i < 200; ++i) {
        int id = 0;
        while (t.nodes[id].var >= 0) id = X(i, t.nodes[id].var) < t.nodes[id].split ? t.nodes[id].left : t.nodes[id].right;
        CHECK(t.predict(X, i) == t.nodes[id].value);
    }
    std::vector<double> leaf_sum(t.nodes.size(), 0.0), leaf_n(t.nodes.size(), 0.0);
    for (Eigen::Index i = 0; i < 200; ++i) {
        int id = t.leaf_of([&](size_t k) { return X(i, static_cast<Eigen::Index>(k)); });
        leaf_sum[id] += y[i];
        leaf_n[id] += 1;
        CHECK(t.nodes[id].count >= c.min_leaf);
    }
    for (size_t id = 0; id < t.nodes.size(); ++id)
        if (t.nodes[id].is_leaf()) CHECK(t.nodes[id].value == doctest::Approx(leaf_sum[id] / leaf_n[id]));
}

TEST_CASE("random forest out-of-bag error") {
    Rng rng(6);
    Eigen::MatrixXd X = testing::normal_matrix(500, 5, rng);
    std::vector<double> y(500);
    for (Eigen::Index i = 0; i < 500; ++i) {
        X(i, 0) = rng.bernoulli(0.5);
        y[i] = X(i, 0);
    }
    ForestParams p;
    p.n_trees = 200;
    ForestModel f = fit_rf(X, y, p, Rng(1));
    CHECK(f.oob_error(X, y) < 0.05);

    std::vector<double> coin = testing::coin_flips(500, rng);
    ForestModel g = fit_rf(X, coin, p, Rng(2));
    CHECK(std::fabs(g.oob_error(X, coin) - 0.5) < 0.06);

    ForestModel f2 = fit_rf(X, y, p, Rng(1));
    for (Eigen::Index i = 0; i < 20; ++i) CHECK(f2.predict(X, i) == f.predict(X, i));
}

TEST_CASE("permutation importance") {
    Rng rng(7);
    Eigen::MatrixXd X = testing::normal_matrix(1000, 4, rng);
    std::vector<double> y(1000);
    for (Eigen::Index i = 0; i < 1000; ++i) y[i] = X(i, 0) > 0;
    ForestParams p;
    p.n_trees = 500;
    ForestModel f = fit_rf(X, y, p, Rng(3));
    auto imp = oob_importance(f, X, y, Rng(4));
    for (size_t k = 1; k < 4; ++k) {
        CHECK(std::fabs(imp[k]) < 0.02);
        CHECK(imp[0] > 10 * std::fabs(imp[k]));
    }
    auto identity = oob_importance(f, X, y, [](size_t, size_t, std::span<double>) {});
    for (double v : identity) CHECK(v == 0.0);
}

TEST_CASE("conditional inference forest") {
    Rng rng(8);
    Eigen::MatrixXd X = testing::normal_matrix(500, 5, rng);
    std::vector<double> coin = testing::coin_flips(500, rng);
    CrfParams p;
    p.n_trees = 50;
    ForestModel f = fit_crf(X, coin, p, Rng(1));
    double depth = 0;
    for (const auto& t : f.trees) depth += t.depth() / 50.0;
    CHECK(depth <= 2.0);

    std::vector<double> y(500);
    for (Eigen::Index i = 0; i < 500; ++i) y[i] = X(i, 2) > 0.1;
    p.mtry = 5;
    ForestModel g = fit_crf(X, y, p, Rng(2));
    size_t root_x = 0;
    for (const auto& t : g.trees) root_x += !t.nodes[0].is_leaf() && t.nodes[0].var == 2;
    CHECK(root_x >= 48);

    std::vector<size_t> one = {0};
    Rng r(3);
    Tree leaf = grow_ctree(X, one, y, p, 5, r);
    CHECK(leaf.nodes.size() == 1);
}

TEST_CASE("forest argument checks") {
    Eigen::MatrixXd X(1, 1);
    X << 1.0;
    std::vector<double> y = {1.0};
    CHECK_THROWS_AS(fit_rf(X, y, {}, Rng(1)), FitError);
}
