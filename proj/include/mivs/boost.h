#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mivs/rng.h"
#include "mivs/tree.h"

namespace mivs {

struct BoostParams {
    size_t nrounds = 200;
    double eta = 0.1;
    int max_depth = 6;
    double lambda = 1.0;
    double gamma = 0.0;
    double colsample = 0.0;        // fraction of columns per tree; 0 = ceil(sqrt(K)) / K
    double min_child_weight = 1.0;
};

// Second-order boosted trees for a binary response on the logit scale. Leaf
// values are the unscaled Newton weights -G/(H + lambda); the model score is
// eta times their sum.
class BoostModel {
public:
    std::vector<Tree> trees;
    double eta = 0.1;
    double lambda = 1.0;
    double gamma = 0.0;
    double colsample = 1.0;
    size_t nrounds = 0;
    size_t n_features = 0;
    std::vector<double> train_deviance;  // after each round

    double margin(const Eigen::MatrixXd& X, Eigen::Index row) const;
    double margin(std::span<const double> row) const;
    double predict(const Eigen::MatrixXd& X, Eigen::Index row) const;  // probability
    double predict(std::span<const double> row) const;
};

BoostModel fit_gbm(const Eigen::MatrixXd& X, std::span<const double> y, const BoostParams& params, const Rng& rng);

// Total split gain per variable.
std::vector<double> gbm_importance(const BoostModel& model);

// Logistic loss log(1 + e^m) - y m of a score m, i.e. half the binomial deviance.
double logistic_loss(double y, double margin);

// First and second derivatives of logistic_loss in the score.
void logistic_grad_hess(std::span<const double> y, std::span<const double> margin, std::span<double> grad,
                        std::span<double> hess);

} // namespace mivs
