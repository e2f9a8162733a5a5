#pragma once

#include <optional>
#include <span>

#include <Eigen/Dense>

namespace mivs {

struct LogisticOptions {
    double ridge = 0.0;          // L2 penalty on slopes (not the intercept)
    int max_iter = 25;
    double tol = 1e-8;           // relative deviance change
    bool ridge_fallback = true;  // refit with a small ridge when Newton fails
    std::optional<Eigen::VectorXd> start;
};

// Logistic regression with intercept. `beta(0)` is the intercept and
// `beta(j + 1)` the slope of column j.
struct LogisticFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;  // inverse penalized Fisher information
    double deviance = 0.0;
    int iterations = 0;
    bool converged = false;
    bool ridge_stabilized = false;

    double z(Eigen::Index j) const;        // Wald z of slope j
    double wald_p(Eigen::Index j) const;   // two-sided Wald p of slope j
};

// Newton-Raphson (IRLS) with step halving. A non-convergent or non-finite fit
// is retried once with ridge = 1e-4 * n and flagged.
LogisticFit fit_logistic(const Eigen::MatrixXd& X, std::span<const double> y,
                         const LogisticOptions& opts = {});

// Ordinary least squares with intercept, solved from the normal equations.
// Falls back to ridge = 1e-6 * trace / K when the Gram matrix is singular.
struct LinearFit {
    Eigen::VectorXd beta;      // intercept first
    Eigen::MatrixXd xtx_inv;   // (X'X)^{-1} of the augmented design
    double sigma2 = 0.0;       // residual variance estimate
    bool ridge_used = false;
};

LinearFit fit_linear(const Eigen::MatrixXd& X, std::span<const double> y);

} // namespace mivs
