#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Exhaustive root split by direct impurity evaluation. Rows go left iff x < split.
struct RootSplit {
    int var = -1;
    double split = 0.0;
    double gain = -std::numeric_limits<double>::infinity();
    double runner_up = -std::numeric_limits<double>::infinity();  // best gain on any other (var, split)
};

enum class Impurity { Gini, Sse, Boost };

inline double node_impurity(Impurity kind, const std::vector<double>& y, const std::vector<double>& h, double lambda) {
    const double n = static_cast<double>(y.size());
    if (kind == Impurity::Gini) {
        double ones = 0;
        for (double v : y) ones += v;
        const double p = ones / n;
        return n * 2.0 * p * (1.0 - p);
    }
    if (kind == Impurity::Sse) {
        double mean = 0;
        for (double v : y) mean += v / n;
        double s = 0;
        for (double v : y) s += (v - mean) * (v - mean);
        return s;
    }
    double G = 0, H = 0;
    for (size_t i = 0; i < y.size(); ++i) G += y[i], H += h[i];
    return -0.5 * G * G / (H + lambda);
}

inline RootSplit best_root_split(const Eigen::MatrixXd& X, const std::vector<double>& y, Impurity kind,
                                 const std::vector<double>& h = {}, double lambda = 1.0) {
    const size_t n = y.size();
    std::vector<double> hh = h.empty() ? std::vector<double>(n, 1.0) : h;
    const double parent = node_impurity(kind, y, hh, lambda);
    RootSplit best;
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
        std::set<double> values;
        for (size_t i = 0; i < n; ++i) values.insert(X(i, k));
        std::vector<double> v(values.begin(), values.end());
        for (size_t j = 0; j + 1 < v.size(); ++j) {
            const double c = 0.5 * (v[j] + v[j + 1]);
            std::vector<double> yl, yr, hl, hr;
            for (size_t i = 0; i < n; ++i) {
                if (X(i, k) < c) yl.push_back(y[i]), hl.push_back(hh[i]);
                else yr.push_back(y[i]), hr.push_back(hh[i]);
            }
            const double gain = parent - node_impurity(kind, yl, hl, lambda) - node_impurity(kind, yr, hr, lambda);
            if (gain > best.gain) {
                best.runner_up = best.gain;
                best.gain = gain;
                best.var = static_cast<int>(k);
                best.split = c;
            } else {
                best.runner_up = std::max(best.runner_up, gain);
            }
        }
    }
    return best;
}

// Gain of splitting column k at c, by the same direct evaluation.
inline double split_gain_at(const Eigen::MatrixXd& X, const std::vector<double>& y, Impurity kind, int k, double c,
                            const std::vector<double>& h = {}, double lambda = 1.0) {
    const size_t n = y.size();
    std::vector<double> hh = h.empty() ? std::vector<double>(n, 1.0) : h;
    std::vector<double> yl, yr, hl, hr;
    for (size_t i = 0; i < n; ++i) {
        if (X(i, k) < c) yl.push_back(y[i]), hl.push_back(hh[i]);
        else yr.push_back(y[i]), hr.push_back(hh[i]);
    }
    return node_impurity(kind, y, hh, lambda) - node_impurity(kind, yl, hl, lambda) - node_impurity(kind, yr, hr, lambda);
}

// Set-arithmetic selection scores.
struct Scores {
    double precision, recall, f1, type1;
};

inline Scores set_scores(const std::set<size_t>& selected, const std::set<size_t>& useful, size_t K) {
    std::set<size_t> tp, fp;
    std::set_intersection(selected.begin(), selected.end(), useful.begin(), useful.end(),
                          std::inserter(tp, tp.begin()));
    std::set_difference(selected.begin(), selected.end(), useful.begin(), useful.end(),
                        std::inserter(fp, fp.begin()));
    Scores s;
    s.precision = selected.empty() ? 0.0 : static_cast<double>(tp.size()) / static_cast<double>(selected.size());
    s.recall = useful.empty() ? 0.0 : static_cast<double>(tp.size()) / static_cast<double>(useful.size());
    s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    const size_t noise = K - useful.size();
    s.type1 = noise == 0 ? 0.0 : static_cast<double>(fp.size()) / static_cast<double>(noise);
    return s;
}

} // namespace oracle

namespace oracle {

// Largest KKT violation of the standardized-scale lasso logistic problem
// (1/n)(-loglik) + lambda |beta|_1 at path point l, intercept included.
template <class Path>
double lasso_kkt(const Eigen::MatrixXd& X, const std::vector<double>& y, const Path& path, size_t l) {
    const Eigen::Index n = X.rows(), K = X.cols();
    Eigen::MatrixXd Z(n, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double mean = X.col(k).mean();
        const double sd = std::sqrt((X.col(k).array() - mean).square().mean());
        Z.col(k) = sd > 0 ? Eigen::VectorXd((X.col(k).array() - mean) / sd) : Eigen::VectorXd::Zero(n);
    }
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double eta = path.intercepts_std(l) + Z.row(i).dot(path.coefs_std.col(l));
        r(i) = y[i] - 1.0 / (1.0 + std::exp(-eta));
    }
    const double lambda = path.lambdas[l];
    double worst = std::fabs(r.mean());
    for (Eigen::Index k = 0; k < K; ++k) {
        const double s = Z.col(k).dot(r) / static_cast<double>(n);
        const double b = path.coefs_std(k, l);
        const double v = b == 0.0 ? std::max(0.0, std::fabs(s) - lambda) : std::fabs(s - lambda * (b > 0 ? 1 : -1));
        worst = std::max(worst, v);
    }
    return worst;
}

} // namespace oracle
