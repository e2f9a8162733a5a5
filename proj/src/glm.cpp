#include "mivs/glm.h"

#include <cmath>

#include "mivs/error.h"
#include "mivs/log.h"
#include "mivs/stats.h"

namespace mivs {

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd A(X.rows(), X.cols() + 1);
    A.col(0).setOnes();
    A.rightCols(X.cols()) = X;
    return A;
}

double deviance_of(const Eigen::VectorXd& eta, std::span<const double> y, double ridge,
                   const Eigen::VectorXd& beta) {
    double dev = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        dev += stats::binomial_deviance(y[static_cast<size_t>(i)], stats::sigmoid(eta(i)));
    if (ridge > 0) dev += 2.0 * ridge * beta.tail(beta.size() - 1).squaredNorm();
    return dev;
}

Eigen::MatrixXd solve_spd_inverse(const Eigen::MatrixXd& H) {
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() == Eigen::Success) return llt.solve(Eigen::MatrixXd::Identity(H.rows(), H.cols()));
    return H.completeOrthogonalDecomposition().pseudoInverse();
}

LogisticFit newton(const Eigen::MatrixXd& A, std::span<const double> y, const LogisticOptions& opts) {
    const Eigen::Index p = A.cols();
    const Eigen::Index n = A.rows();
    LogisticFit fit;
    fit.beta = opts.start && opts.start->size() == p ? *opts.start : Eigen::VectorXd::Zero(p);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);

    Eigen::VectorXd eta = A * fit.beta;
    double dev = deviance_of(eta, y, opts.ridge, fit.beta);
    Eigen::MatrixXd H(p, p);
    for (int it = 1; it <= opts.max_iter; ++it) {
        fit.iterations = it;
        Eigen::VectorXd prob(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            prob(i) = stats::sigmoid(eta(i));
            w(i) = std::max(prob(i) * (1.0 - prob(i)), 1e-10);
        }
        Eigen::VectorXd grad = A.transpose() * (yv - prob);
        H.setZero();
        H.selfadjointView<Eigen::Lower>().rankUpdate((A.array().colwise() * w.array().sqrt()).matrix().transpose());
        H = H.selfadjointView<Eigen::Lower>();
        if (opts.ridge > 0) {
            grad.tail(p - 1) -= 2.0 * opts.ridge * fit.beta.tail(p - 1);
            H.diagonal().tail(p - 1).array() += 2.0 * opts.ridge;
        }
        Eigen::VectorXd step = H.ldlt().solve(grad);
        if (!step.allFinite()) break;

        // Step halving until the deviance does not increase.
        double new_dev = dev;
        Eigen::VectorXd beta_new;
        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h < 30 && !accepted; ++h, scale *= 0.5) {
            beta_new = fit.beta + scale * step;
            Eigen::VectorXd eta_new = A * beta_new;
            new_dev = deviance_of(eta_new, y, opts.ridge, beta_new);
            if (std::isfinite(new_dev) && new_dev <= dev + 1e-12 * std::fabs(dev)) {
                eta = std::move(eta_new);
                accepted = true;
            }
        }
        if (!accepted) {
            // no descent direction left: the current iterate is stationary to working precision
            fit.converged = grad.cwiseAbs().maxCoeff() < 1e-6 * (1.0 + dev);
            break;
        }
        fit.beta = beta_new;
        const double change = std::fabs(new_dev - dev) / (std::fabs(new_dev) + 0.1);
        dev = new_dev;
        if (change < opts.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.deviance = dev;

    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double pr = stats::sigmoid(eta(i));
        w(i) = std::max(pr * (1.0 - pr), 1e-10);
    }
    H.setZero();
    H.selfadjointView<Eigen::Lower>().rankUpdate((A.array().colwise() * w.array().sqrt()).matrix().transpose());
    H = H.selfadjointView<Eigen::Lower>();
    if (opts.ridge > 0) H.diagonal().tail(p - 1).array() += 2.0 * opts.ridge;
    fit.covariance = solve_spd_inverse(H);
    if (!fit.beta.allFinite() || !fit.covariance.allFinite()) fit.converged = false;
    return fit;
}

} // namespace

double LogisticFit::z(Eigen::Index j) const {
    const double se = std::sqrt(std::max(covariance(j + 1, j + 1), 0.0));
    return se > 0 ? beta(j + 1) / se : 0.0;
}

double LogisticFit::wald_p(Eigen::Index j) const { return stats::two_sided_p(z(j)); }

LogisticFit fit_logistic(const Eigen::MatrixXd& X, std::span<const double> y, const LogisticOptions& opts) {
    if (static_cast<size_t>(X.rows()) != y.size()) throw FitError("logistic fit: X and y row mismatch");
    const Eigen::MatrixXd A = with_intercept(X);
    LogisticFit fit = newton(A, y, opts);
    if (!fit.converged && opts.ridge_fallback) {
        LogisticOptions retry = opts;
        retry.ridge = std::max(opts.ridge, 1e-4 * static_cast<double>(X.rows()));
        retry.max_iter = std::max(opts.max_iter, 50);
        retry.start.reset();
        fit = newton(A, y, retry);
        fit.ridge_stabilized = true;
        log::debug("logistic fit did not converge; refit with ridge " + std::to_string(retry.ridge));
    }
    if (!fit.beta.allFinite()) throw FitError("logistic fit produced non-finite coefficients");
    return fit;
}

LinearFit fit_linear(const Eigen::MatrixXd& X, std::span<const double> y) {
    const Eigen::Index n = X.rows();
    if (static_cast<size_t>(n) != y.size()) throw FitError("linear fit: X and y row mismatch");
    const Eigen::MatrixXd A = with_intercept(X);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
    Eigen::MatrixXd G = A.transpose() * A;
    LinearFit fit;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    const double max_d = ldlt.vectorD().cwiseAbs().maxCoeff();
    const double min_d = ldlt.vectorD().minCoeff();
    if (ldlt.info() != Eigen::Success || !(min_d > 1e-10 * max_d)) {
        const double lambda = 1e-6 * G.trace() / static_cast<double>(G.rows());
        G.diagonal().array() += lambda;
        ldlt.compute(G);
        fit.ridge_used = true;
        log::debug("singular design in linear fit; ridge " + std::to_string(lambda));
    }
    fit.beta = ldlt.solve(A.transpose() * yv);
    fit.xtx_inv = ldlt.solve(Eigen::MatrixXd::Identity(G.rows(), G.cols()));
    const Eigen::VectorXd resid = yv - A * fit.beta;
    const double dof = std::max<double>(1.0, static_cast<double>(n - A.cols()));
    fit.sigma2 = resid.squaredNorm() / dof;
    if (!fit.beta.allFinite()) throw FitError("linear fit produced non-finite coefficients");
    return fit;
}

} // namespace mivs
