#include "mivs/lasso.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mivs/error.h"
#include "mivs/parallel.h"
#include "mivs/stats.h"

namespace mivs {

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

struct Standardized {
    Eigen::MatrixXd Xs;
    Eigen::VectorXd center, scale;
};

Standardized standardize(const Eigen::MatrixXd& X) {
    Standardized s;
    const double n = static_cast<double>(X.rows());
    s.center = X.colwise().mean().transpose();
    s.scale.resize(X.cols());
    s.Xs.resize(X.rows(), X.cols());
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
        const Eigen::VectorXd c = X.col(k).array() - s.center(k);
        const double sd = std::sqrt(c.squaredNorm() / n);
        if (sd > 1e-12 * (1.0 + std::fabs(s.center(k)))) {
            s.scale(k) = sd;
            s.Xs.col(k) = c / sd;
        } else {
            s.scale(k) = 0.0;
            s.Xs.col(k).setZero();
        }
    }
    return s;
}

double ybar_checked(std::span<const double> y) {
    const double ybar = stats::mean(y);
    if (ybar <= 0.0 || ybar >= 1.0) throw FitError("lasso: response has a single class");
    return ybar;
}

struct PathFit {
    Eigen::VectorXd b0;
    Eigen::MatrixXd beta;  // standardized scale
    bool capped = false;
};

PathFit solve_path(const Eigen::MatrixXd& Xs, std::span<const double> y, const std::vector<double>& lambdas,
                   const LassoParams& params) {
    const Eigen::Index n = Xs.rows();
    const Eigen::Index K = Xs.cols();
    const double ybar = ybar_checked(y);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);

    PathFit out;
    out.b0.resize(static_cast<Eigen::Index>(lambdas.size()));
    out.beta.resize(K, static_cast<Eigen::Index>(lambdas.size()));

    double b0 = stats::logit(ybar);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd eta(n), p(n), w(n), z(n);

    for (size_t l = 0; l < lambdas.size(); ++l) {
        for (int outer = 0; outer < params.max_outer; ++outer) {
            eta = (Xs * beta).array() + b0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (std::fabs(eta(i)) > params.eta_cap) {
                    eta(i) = std::copysign(params.eta_cap, eta(i));
                    out.capped = true;
                }
                p(i) = stats::sigmoid(eta(i));
                w(i) = std::max(p(i) * (1.0 - p(i)), 1e-5);
                z(i) = eta(i) + (yv(i) - p(i)) / w(i);
            }
            const Eigen::VectorXd old_beta = beta;
            const double old_b0 = b0;
            weighted_lasso_cd(Xs, z, w, lambdas[l], b0, beta, params.tol);
            const double change = std::max((beta - old_beta).cwiseAbs().maxCoeff(), std::fabs(b0 - old_b0));
            if (change < std::sqrt(params.tol)) break;
        }
        out.b0(static_cast<Eigen::Index>(l)) = b0;
        out.beta.col(static_cast<Eigen::Index>(l)) = beta;
    }
    return out;
}

} // namespace

int weighted_lasso_cd(const Eigen::MatrixXd& X, const Eigen::VectorXd& z, const Eigen::VectorXd& w, double lambda,
                      double& b0, Eigen::VectorXd& beta, double tol, int max_sweeps) {
    const Eigen::Index n = X.rows();
    const Eigen::Index K = X.cols();
    const double nd = static_cast<double>(n);
    if (beta.size() != K) beta = Eigen::VectorXd::Zero(K);

    Eigen::VectorXd xw2(K);
    for (Eigen::Index k = 0; k < K; ++k) xw2(k) = X.col(k).cwiseAbs2().dot(w) / nd;
    const double wsum = w.sum();
    Eigen::VectorXd r = z - X * beta;
    r.array() -= b0;

    auto update = [&](Eigen::Index k) {
        if (xw2(k) <= 0.0) {
            beta(k) = 0.0;
            return 0.0;
        }
        const double g = X.col(k).cwiseProduct(w).dot(r) / nd + xw2(k) * beta(k);
        const double nb = soft_threshold(g, lambda) / xw2(k);
        const double d = nb - beta(k);
        if (d != 0.0) {
            r -= d * X.col(k);
            beta(k) = nb;
        }
        return xw2(k) * d * d;
    };
    auto update_intercept = [&]() {
        const double d = w.dot(r) / wsum;
        b0 += d;
        r.array() -= d;
        return wsum / nd * d * d;
    };

    int sweeps = 0;
    while (sweeps < max_sweeps) {
        // full sweep
        double dmax = update_intercept();
        for (Eigen::Index k = 0; k < K; ++k) dmax = std::max(dmax, update(k));
        ++sweeps;
        if (dmax < tol) break;
        // iterate on the active set until it settles, then recheck everything
        std::vector<Eigen::Index> active;
        for (Eigen::Index k = 0; k < K; ++k)
            if (beta(k) != 0.0) active.push_back(k);
        while (sweeps < max_sweeps) {
            double da = update_intercept();
            for (Eigen::Index k : active) da = std::max(da, update(k));
            ++sweeps;
            if (da < tol) break;
        }
    }
    return sweeps;
}

double lasso_lambda_max(const Eigen::MatrixXd& X, std::span<const double> y) {
    const Standardized s = standardize(X);
    const double ybar = stats::mean(y);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::VectorXd score = s.Xs.transpose() * (yv.array() - ybar).matrix() / static_cast<double>(y.size());
    return score.cwiseAbs().maxCoeff();
}

LassoPath fit_lasso_path(const Eigen::MatrixXd& X, std::span<const double> y, const LassoParams& params,
                         const Rng& rng) {
    const Eigen::Index n = X.rows();
    const Eigen::Index K = X.cols();
    if (n < 2) throw FitError("lasso fit needs at least 2 rows");
    if (static_cast<size_t>(n) != y.size()) throw FitError("lasso fit: X and y row mismatch");
    if (K < 1) throw FitError("lasso fit needs at least 1 column");
    ybar_checked(y);

    const Standardized s = standardize(X);
    LassoPath path;
    path.center = s.center;
    path.scale = s.scale;

    if (!params.lambdas.empty()) {
        path.lambdas = params.lambdas;
        if (!std::is_sorted(path.lambdas.rbegin(), path.lambdas.rend()))
            throw FitError("lasso: lambda grid must be decreasing");
    } else {
        if (params.n_lambda < 1) throw FitError("lasso: n_lambda must be >= 1");
        if (!(params.lambda_min_ratio > 0 && params.lambda_min_ratio < 1))
            throw FitError("lasso: lambda_min_ratio must be in (0, 1)");
        const double lmax = lasso_lambda_max(X, y);
        path.lambdas.resize(params.n_lambda);
        for (size_t l = 0; l < params.n_lambda; ++l) {
            const double frac = params.n_lambda == 1 ? 0.0 : static_cast<double>(l) / (params.n_lambda - 1);
            path.lambdas[l] = lmax * std::pow(params.lambda_min_ratio, frac);
        }
    }

    PathFit fit = solve_path(s.Xs, y, path.lambdas, params);
    path.eta_capped = fit.capped;
    path.intercepts_std = fit.b0;
    path.coefs_std = fit.beta;
    const Eigen::Index L = static_cast<Eigen::Index>(path.lambdas.size());
    path.coefs.resize(K, L);
    path.intercepts.resize(L);
    for (Eigen::Index l = 0; l < L; ++l) {
        double b0 = fit.b0(l);
        for (Eigen::Index k = 0; k < K; ++k) {
            const double b = s.scale(k) > 0 ? fit.beta(k, l) / s.scale(k) : 0.0;
            path.coefs(k, l) = b;
            b0 -= b * s.center(k);
        }
        path.intercepts(l) = b0;
    }

    if (params.folds < 2) return path;
    const size_t F = params.folds;
    if (static_cast<size_t>(n) < F) throw FitError("lasso: fewer rows than CV folds");

    std::vector<size_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), size_t{0});
    Rng fold_rng = rng.split(0);
    fold_rng.shuffle(std::span<size_t>(order));
    std::vector<size_t> fold_of(static_cast<size_t>(n));
    for (size_t i = 0; i < order.size(); ++i) fold_of[order[i]] = i % F;

    std::vector<std::vector<double>> fold_dev(F, std::vector<double>(static_cast<size_t>(L), 0.0));
    std::vector<double> fold_n(F, 0.0);
    parallel_for(F, [&](size_t f) {
        std::vector<Eigen::Index> train, test;
        for (Eigen::Index i = 0; i < n; ++i) (fold_of[static_cast<size_t>(i)] == f ? test : train).push_back(i);
        Eigen::MatrixXd Xt(static_cast<Eigen::Index>(train.size()), K);
        std::vector<double> yt(train.size());
        for (size_t j = 0; j < train.size(); ++j) {
            Xt.row(static_cast<Eigen::Index>(j)) = X.row(train[j]);
            yt[j] = y[static_cast<size_t>(train[j])];
        }
        const Standardized st = standardize(Xt);
        const PathFit pf = solve_path(st.Xs, yt, path.lambdas, params);
        for (Eigen::Index l = 0; l < L; ++l) {
            double dev = 0.0;
            for (Eigen::Index i : test) {
                double eta = pf.b0(l);
                for (Eigen::Index k = 0; k < K; ++k)
                    if (st.scale(k) > 0) eta += pf.beta(k, l) * (X(i, k) - st.center(k)) / st.scale(k);
                eta = std::clamp(eta, -params.eta_cap, params.eta_cap);
                dev += stats::binomial_deviance(y[static_cast<size_t>(i)], stats::sigmoid(eta));
            }
            fold_dev[f][static_cast<size_t>(l)] = dev / static_cast<double>(test.size());
        }
        fold_n[f] = static_cast<double>(test.size());
    });

    const double ntot = std::accumulate(fold_n.begin(), fold_n.end(), 0.0);
    path.cvm.assign(static_cast<size_t>(L), 0.0);
    path.cvsd.assign(static_cast<size_t>(L), 0.0);
    for (size_t l = 0; l < static_cast<size_t>(L); ++l) {
        double m = 0.0;
        for (size_t f = 0; f < F; ++f) m += fold_n[f] * fold_dev[f][l];
        m /= ntot;
        double v = 0.0;
        for (size_t f = 0; f < F; ++f) v += fold_n[f] * (fold_dev[f][l] - m) * (fold_dev[f][l] - m);
        path.cvm[l] = m;
        path.cvsd[l] = std::sqrt(v / ntot / static_cast<double>(F - 1));
    }
    path.has_cv = true;
    path.idx_min = static_cast<size_t>(std::min_element(path.cvm.begin(), path.cvm.end()) - path.cvm.begin());
    const double cutoff = path.cvm[path.idx_min] + path.cvsd[path.idx_min];
    path.idx_1se = path.idx_min;
    for (size_t l = 0; l <= path.idx_min; ++l) {
        if (path.cvm[l] <= cutoff) {
            path.idx_1se = l;
            break;
        }
    }
    return path;
}

std::vector<size_t> lasso_select(const LassoPath& path) {
    std::vector<size_t> out;
    if (path.lambdas.empty()) return out;
    const Eigen::Index l = static_cast<Eigen::Index>(path.has_cv ? path.idx_1se : path.lambdas.size() - 1);
    for (Eigen::Index k = 0; k < path.coefs.rows(); ++k)
        if (path.coefs(k, l) != 0.0) out.push_back(static_cast<size_t>(k));
    return out;
}

} // namespace mivs
