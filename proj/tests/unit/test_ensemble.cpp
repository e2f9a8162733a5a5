#include <doctest.h>

#include <algorithm>

#include "helpers.h"
#include "mivs/bart.h"
#include "mivs/boost.h"
#include "mivs/stats.h"

using namespace mivs;

TEST_CASE("logistic gradient and hessian match finite differences") {
    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> y = {static_cast<double>(rng.bernoulli(0.5))};
        std::vector<double> m = {rng.normal(0.0, 3.0)};
        std::vector<double> g(1), h(1);
        logistic_grad_hess(y, m, g, h);
        const double e = 1e-5;
        const double fd_g = (logistic_loss(y[0], m[0] + e) - logistic_loss(y[0], m[0] - e)) / (2 * e);
        std::vector<double> mp = {m[0] + e}, mm = {m[0] - e}, gp(1), gm(1), hp(1), hm(1);
        logistic_grad_hess(y, mp, gp, hp);
        logistic_grad_hess(y, mm, gm, hm);
        const double fd_h = (gp[0] - gm[0]) / (2 * e);
        CHECK(std::fabs(g[0] - fd_g) <= 1e-4 * std::max(std::fabs(g[0]), 1e-8) + 1e-10);
        CHECK(std::fabs(h[0] - fd_h) <= 1e-4 * std::max(std::fabs(h[0]), 1e-8) + 1e-10);
    }
}

TEST_CASE("depth-0 boosting gives the Newton leaf weight") {
    Rng rng(2);
    Eigen::MatrixXd X = testing::normal_matrix(40, 2, rng);
    std::vector<double> y = testing::coin_flips(40, rng);
    BoostParams p;
    p.nrounds = 1;
    p.max_depth = 0;
    BoostModel b = fit_gbm(X, y, p, Rng(3));
    REQUIRE(b.trees.size() == 1);
    REQUIRE(b.trees[0].nodes.size() == 1);
    double G = 0, H = 0;
    for (double v : y) G += 0.5 - v, H += 0.25;
    CHECK(b.trees[0].nodes[0].value == doctest::Approx(-G / (H + 1.0)));
    for (double v : gbm_importance(b)) CHECK(v == 0.0);
}

TEST_CASE("boosting importance sums split gains") {
    BoostModel b;
    b.n_features = 4;
    Tree t;
    t.nodes.resize(3);
    t.nodes[0].var = 2;
    t.nodes[0].gain = 1.7;
    t.nodes[0].left = 1;
    t.nodes[0].right = 2;
    b.trees.push_back(t);
    auto imp = gbm_importance(b);
    REQUIRE(imp.size() == 4);
    CHECK(imp[2] == doctest::Approx(1.7));
    CHECK(imp[0] == 0.0);
    CHECK(imp[1] == 0.0);
    CHECK(imp[3] == 0.0);
}

TEST_CASE("boosting separates a perfectly predictive column") {
    Rng rng(4);
    Eigen::MatrixXd X = testing::normal_matrix(300, 5, rng);
    std::vector<double> y(300);
    for (Eigen::Index i = 0; i < 300; ++i) {
        X(i, 0) = rng.bernoulli(0.5);
        y[i] = X(i, 0);
    }
    BoostParams p;
    p.nrounds = 50;
    p.colsample = 1.0;
    BoostModel b = fit_gbm(X, y, p, Rng(5));
    size_t wrong = 0;
    for (Eigen::Index i = 0; i < 300; ++i) wrong += (b.predict(X, i) > 0.5) != (y[i] == 1.0);
    CHECK(wrong == 0);
    auto imp = gbm_importance(b);
    CHECK(std::max_element(imp.begin(), imp.end()) - imp.begin() == 0);
}

TEST_CASE("bart inclusion proportions track the signal") {
    Rng rng(6);
    Eigen::MatrixXd X = testing::normal_matrix(500, 6, rng);
    std::vector<double> y(500);
    for (Eigen::Index i = 0; i < 500; ++i) y[i] = rng.uniform() < stats::normal_cdf(3 * X(i, 0));
    BartParams p;
    p.m = 20;
    p.n_draws = 600;
    BartModel b = fit_bart(X, y, p, Rng(7));
    double total = 0;
    for (double v : b.inclusion_props) total += v;
    CHECK(total == doctest::Approx(1.0));
    std::vector<double> noise(b.inclusion_props.begin() + 1, b.inclusion_props.end());
    std::sort(noise.begin(), noise.end());
    CHECK(b.inclusion_props[0] >= 2 * noise[noise.size() / 2]);
    CHECK(b.inclusion_props[0] == *std::max_element(b.inclusion_props.begin(), b.inclusion_props.end()));
}

TEST_CASE("bart on pure noise is calibrated to the base rate") {
    Rng rng(8);
    Eigen::MatrixXd X = testing::normal_matrix(300, 5, rng);
    std::vector<double> y = testing::coin_flips(300, rng);
    double rate = 0;
    for (double v : y) rate += v / 300;
    BartParams p;
    BartModel b = fit_bart(X, y, p, Rng(9));
    size_t close = 0;
    double mean = 0;
    for (double q : b.train_prob) {
        close += std::fabs(q - rate) <= 0.2;
        mean += q / 300;
    }
    CHECK(std::fabs(mean - rate) < 0.02);
    CHECK(close >= 270);
}

TEST_CASE("bart is deterministic") {
    Rng rng(10);
    Eigen::MatrixXd X = testing::normal_matrix(100, 3, rng);
    std::vector<double> y = testing::coin_flips(100, rng);
    BartParams p;
    p.m = 10;
    p.n_draws = 200;
    p.burn = 50;
    CHECK(fit_bart(X, y, p, Rng(1)).split_counts == fit_bart(X, y, p, Rng(1)).split_counts);
}
