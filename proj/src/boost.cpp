#include "mivs/boost.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mivs/error.h"
#include "mivs/stats.h"

namespace mivs {

double BoostModel::margin(const Eigen::MatrixXd& X, Eigen::Index row) const {
    double m = 0.0;
    for (const auto& t : trees) m += t.predict(X, row);
    return eta * m;
}

double BoostModel::margin(std::span<const double> row) const {
    double m = 0.0;
    for (const auto& t : trees) m += t.predict(row);
    return eta * m;
}

double BoostModel::predict(const Eigen::MatrixXd& X, Eigen::Index row) const {
    return stats::sigmoid(margin(X, row));
}

double BoostModel::predict(std::span<const double> row) const { return stats::sigmoid(margin(row)); }

double logistic_loss(double y, double margin) {
    // log(1 + e^m) computed without overflow
    const double softplus = margin > 0 ? margin + std::log1p(std::exp(-margin)) : std::log1p(std::exp(margin));
    return softplus - y * margin;
}

void logistic_grad_hess(std::span<const double> y, std::span<const double> margin, std::span<double> grad,
                        std::span<double> hess) {
    for (size_t i = 0; i < y.size(); ++i) {
        const double p = stats::sigmoid(margin[i]);
        grad[i] = p - y[i];
        hess[i] = p * (1.0 - p);
    }
}

BoostModel fit_gbm(const Eigen::MatrixXd& X, std::span<const double> y, const BoostParams& params, const Rng& rng) {
    const size_t n = static_cast<size_t>(X.rows());
    const size_t K = static_cast<size_t>(X.cols());
    if (n < 2) throw FitError("gbm fit needs at least 2 rows");
    if (K < 1) throw FitError("gbm fit needs at least 1 column");
    if (y.size() != n) throw FitError("gbm fit: X and y row mismatch");
    if (!(params.eta > 0 && params.eta <= 1)) throw FitError("gbm: eta must be in (0, 1]");
    if (params.lambda < 0 || params.gamma < 0) throw FitError("gbm: lambda and gamma must be >= 0");

    BoostModel model;
    model.eta = params.eta;
    model.lambda = params.lambda;
    model.gamma = params.gamma;
    model.n_features = K;
    model.nrounds = params.nrounds;

    size_t n_cols = 0;
    if (params.colsample > 0) {
        if (params.colsample > 1) throw FitError("gbm: colsample must be in (0, 1]");
        n_cols = static_cast<size_t>(std::ceil(params.colsample * static_cast<double>(K) - 1e-9));
    } else {
        n_cols = static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(K))));
    }
    n_cols = std::clamp<size_t>(n_cols, 1, K);
    model.colsample = static_cast<double>(n_cols) / static_cast<double>(K);

    SplitCriterion crit{CriterionKind::BoostGain, params.lambda, params.gamma};
    std::vector<double> margin(n, 0.0), grad(n), hess(n);
    std::vector<size_t> rows(n);
    std::iota(rows.begin(), rows.end(), size_t{0});
    std::vector<size_t> cols(K);

    model.trees.reserve(params.nrounds);
    for (size_t round = 0; round < params.nrounds; ++round) {
        Rng r = rng.split(round);
        logistic_grad_hess(y, margin, grad, hess);

        std::iota(cols.begin(), cols.end(), size_t{0});
        for (size_t i = 0; i < n_cols; ++i) std::swap(cols[i], cols[i + r.index(K - i)]);
        std::vector<size_t> allowed(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(n_cols));
        std::sort(allowed.begin(), allowed.end());

        GrowControls controls;
        controls.max_depth = params.max_depth;
        controls.min_child_weight = params.min_child_weight;
        controls.allowed = allowed;
        Tree tree = grow_tree(X, rows, TreeTarget{grad, hess}, crit, controls, r);

        double dev = 0.0;
        for (size_t i = 0; i < n; ++i) {
            margin[i] += params.eta * tree.predict(X, static_cast<Eigen::Index>(i));
            dev += 2.0 * logistic_loss(y[i], margin[i]);
        }
        model.train_deviance.push_back(dev);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

std::vector<double> gbm_importance(const BoostModel& model) {
    std::vector<double> imp(model.n_features, 0.0);
    for (const auto& t : model.trees)
        for (const auto& nd : t.nodes)
            if (!nd.is_leaf()) imp[static_cast<size_t>(nd.var)] += nd.gain;
    return imp;
}

} // namespace mivs
