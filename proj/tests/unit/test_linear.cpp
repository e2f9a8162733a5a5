#include <doctest.h>

#include <cmath>

#include "helpers.h"
#include "mivs/glm.h"
#include "mivs/lasso.h"
#include "mivs/stats.h"
#include "mivs/stepwise.h"
#include "oracles.h"

using namespace mivs;

namespace {

std::vector<double> logistic_response(const Eigen::MatrixXd& X, const std::vector<double>& beta, double b0, Rng& rng) {
    std::vector<double> y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double eta = b0;
        for (size_t k = 0; k < beta.size(); ++k) eta += beta[k] * X(i, static_cast<Eigen::Index>(k));
        y[i] = rng.bernoulli(stats::sigmoid(eta));
    }
    return y;
}

} // namespace

TEST_CASE("coordinate descent matches the soft-threshold solution for one column") {
    Rng rng(1);
    const Eigen::Index n = 64;
    Eigen::MatrixXd X(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) X(i, 0) = i % 2 ? 1.0 : -1.0;
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = 0.7 * X(i, 0) + 0.3 + rng.normal();
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    const double zbar = z.mean();
    const double rho = X.col(0).dot((z.array() - zbar).matrix()) / n;
    for (double lambda : {0.0, 0.1, 0.5, std::fabs(rho) + 0.1}) {
        double b0 = 0;
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(1);
        weighted_lasso_cd(X, z, w, lambda, b0, beta);
        const double expect = std::copysign(std::max(0.0, std::fabs(rho) - lambda), rho);
        CHECK(std::fabs(beta(0) - expect) < 1e-6);
        CHECK(std::fabs(b0 - zbar) < 1e-6);
    }
}

TEST_CASE("lasso path at lambda max is the null model") {
    Rng rng(2);
    Eigen::MatrixXd X = testing::normal_matrix(200, 5, rng);
    std::vector<double> y = logistic_response(X, {1.0, -0.5}, -0.5, rng);
    LassoParams p;
    p.folds = 0;
    p.n_lambda = 20;
    LassoPath path = fit_lasso_path(X, y, p, Rng(3));
    double ybar = 0;
    for (double v : y) ybar += v / 200;
    CHECK(path.lambdas[0] == doctest::Approx(lasso_lambda_max(X, y)));
    for (Eigen::Index k = 0; k < 5; ++k) CHECK(path.coefs(k, 0) == 0.0);
    CHECK(path.intercepts(0) == doctest::Approx(stats::logit(ybar)).epsilon(1e-8));
    CHECK(path.coefs.col(19).cwiseAbs().sum() > 0);
}

TEST_CASE("lasso path satisfies the KKT conditions") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        Eigen::MatrixXd X = testing::normal_matrix(300, 8, rng);
        X.col(3) *= 5.0;
        X.col(4).array() += 2.0;
        std::vector<double> y = logistic_response(X, {0.8, 0, -0.6, 0.1}, 0.2, rng);
        LassoParams p;
        p.folds = 0;
        p.lambda_min_ratio = 1e-2;
        LassoPath path = fit_lasso_path(X, y, p, Rng(1));
        REQUIRE_FALSE(path.eta_capped);
        for (size_t l = 0; l < path.lambdas.size(); ++l) CHECK(oracle::lasso_kkt(X, y, path, l) <= 1e-5);
    }
}

TEST_CASE("lasso selection") {
    Rng rng(4);
    Eigen::MatrixXd X = testing::normal_matrix(100, 4, rng);
    std::vector<double> y(100);
    for (size_t i = 0; i < 100; ++i) y[i] = i % 2;
    LassoParams p;
    p.lambdas = {0.5};
    p.folds = 0;
    LassoPath one = fit_lasso_path(X, y, p, Rng(1));
    CHECK(lasso_select(one).empty());

    std::vector<double> strong = logistic_response(X, {3.0}, 0.0, rng);
    p.lambdas = {0.01};
    LassoPath small = fit_lasso_path(X, strong, p, Rng(1));
    std::vector<size_t> support;
    for (Eigen::Index k = 0; k < 4; ++k)
        if (small.coefs(k, 0) != 0.0) support.push_back(static_cast<size_t>(k));
    CHECK(lasso_select(small) == support);
}

TEST_CASE("lasso cross-validation on a flat curve selects nothing") {
    Rng rng(5);
    Eigen::MatrixXd X = testing::normal_matrix(200, 5, rng);
    std::vector<double> y = testing::coin_flips(200, rng);
    LassoParams p;
    p.n_lambda = 30;
    LassoPath path = fit_lasso_path(X, y, p, Rng(6));
    REQUIRE(path.has_cv);
    CHECK(path.idx_1se == 0);
    CHECK(lasso_select(path).empty());
}

TEST_CASE("lasso recovers a strong signal") {
    size_t hits = 0;
    std::vector<double> noise_freq(9, 0.0);
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(100 + seed);
        Eigen::MatrixXd X = testing::normal_matrix(1000, 10, rng);
        std::vector<double> y = logistic_response(X, {1.5}, 0.0, rng);
        LassoParams p;
        p.n_lambda = 50;
        auto sel = lasso_select(fit_lasso_path(X, y, p, Rng(seed)));
        for (size_t k : sel) {
            if (k == 0) ++hits;
            else noise_freq[k - 1] += 1.0 / 20;
        }
    }
    CHECK(hits == 20);
    for (double f : noise_freq) CHECK(f < 0.2);
}

TEST_CASE("logistic fit solves the score equations") {
    Rng rng(7);
    Eigen::MatrixXd X = testing::normal_matrix(400, 3, rng);
    std::vector<double> y = logistic_response(X, {1.0, -1.0, 0.0}, 0.5, rng);
    LogisticFit f = fit_logistic(X, y);
    CHECK(f.converged);
    Eigen::VectorXd score = Eigen::VectorXd::Zero(4);
    for (Eigen::Index i = 0; i < 400; ++i) {
        const double p = stats::sigmoid(f.beta(0) + X.row(i).dot(f.beta.tail(3)));
        score(0) += y[i] - p;
        score.tail(3) += (y[i] - p) * X.row(i).transpose();
    }
    CHECK(score.cwiseAbs().maxCoeff() < 1e-6);
    CHECK(f.wald_p(0) < 1e-6);
    CHECK(f.wald_p(2) > 0.001);
}

TEST_CASE("stepwise controls false selections under the null") {
    double noise = 0;
    for (uint64_t seed = 0; seed < 40; ++seed) {
        Rng rng(200 + seed);
        Eigen::MatrixXd X = testing::normal_matrix(1000, 10, rng);
        std::vector<double> y = testing::coin_flips(1000, rng);
        noise += stepwise_select(X, y).selected.size() / 10.0 / 40;
    }
    CHECK(noise <= 0.10);
}

TEST_CASE("stepwise keeps a strong predictor and replays") {
    size_t kept = 0;
    for (uint64_t seed = 0; seed < 40; ++seed) {
        Rng rng(300 + seed);
        Eigen::MatrixXd X = testing::normal_matrix(500, 6, rng);
        std::vector<double> y = logistic_response(X, {std::log(6.0)}, 0.0, rng);
        StepwiseTrace t = stepwise_select(X, y);
        kept += std::count(t.selected.begin(), t.selected.end(), 0);
        CHECK(replay_trace(t) == t.selected);
    }
    CHECK(kept >= 39);
}

TEST_CASE("stepwise with no predictors") {
    Eigen::MatrixXd X(20, 0);
    std::vector<double> y(20, 0.0);
    y[3] = 1;
    StepwiseTrace t = stepwise_select(X, y);
    CHECK(t.steps.empty());
    CHECK(t.selected.empty());
}
