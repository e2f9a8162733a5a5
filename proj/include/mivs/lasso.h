#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mivs/rng.h"

namespace mivs {

struct LassoParams {
    size_t n_lambda = 100;
    double lambda_min_ratio = 1e-3;
    std::vector<double> lambdas;  // overrides the generated grid when nonempty (sorted decreasing)
    size_t folds = 10;            // < 2 disables cross-validation
    double eta_cap = 30.0;        // bound on |linear predictor|
    double tol = 1e-10;           // coordinate descent convergence on coefficient change
    int max_outer = 100;
};

// Penalized logistic path for (1/n)(-loglik) + lambda * sum |beta_k| on
// internally standardized columns (population sd). Coefficients are stored
// both on the standardized and on the original column scale.
struct LassoPath {
    std::vector<double> lambdas;
    Eigen::VectorXd intercepts;        // original scale
    Eigen::MatrixXd coefs;             // K x L, original scale
    Eigen::VectorXd intercepts_std;    // standardized scale
    Eigen::MatrixXd coefs_std;         // K x L, standardized scale
    Eigen::VectorXd center, scale;     // per column; scale 0 marks a constant column
    std::vector<double> cvm, cvsd;     // mean CV deviance per lambda and its standard error
    size_t idx_min = 0, idx_1se = 0;
    bool has_cv = false;
    bool eta_capped = false;           // some fit hit the linear predictor cap

    double lambda_max() const { return lambdas.empty() ? 0.0 : lambdas.front(); }
};

LassoPath fit_lasso_path(const Eigen::MatrixXd& X, std::span<const double> y, const LassoParams& params,
                         const Rng& rng);

// Columns with nonzero coefficient at lambda_1se (or at the last lambda when
// the path has no cross-validation).
std::vector<size_t> lasso_select(const LassoPath& path);

// Smallest lambda grid point >= lambda_max: max_k |<x_k, y - ybar>| / n on standardized columns.
double lasso_lambda_max(const Eigen::MatrixXd& X, std::span<const double> y);

// Weighted lasso least squares by cyclic coordinate descent:
// minimize (1/2n) sum_i w_i (z_i - b0 - x_i' b)^2 + lambda |b|_1 with an
// unpenalized intercept. `beta` carries the warm start and receives the
// solution. Returns the number of sweeps.
int weighted_lasso_cd(const Eigen::MatrixXd& X, const Eigen::VectorXd& z, const Eigen::VectorXd& w, double lambda,
                      double& b0, Eigen::VectorXd& beta, double tol = 1e-12, int max_sweeps = 100000);

} // namespace mivs
