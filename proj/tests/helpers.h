#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mivs/data.h"
#include "mivs/rng.h"

namespace testing {

inline mivs::Column column(const std::string& name, std::vector<double> values,
                           mivs::ColumnKind kind = mivs::ColumnKind::Continuous) {
    mivs::Column c;
    c.name = name;
    c.kind = kind;
    c.missing.assign(values.size(), 0);
    c.values = std::move(values);
    return c;
}

// Complete DataMatrix with columns x1..xK.
inline mivs::DataMatrix to_matrix(const Eigen::MatrixXd& X, const std::vector<double>& y) {
    std::vector<mivs::Column> cols;
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
        std::vector<double> v(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) v[i] = X(i, k);
        bool binary = true;
        for (double x : v) binary = binary && (x == 0.0 || x == 1.0);
        cols.push_back(column("x" + std::to_string(k + 1), std::move(v),
                              binary ? mivs::ColumnKind::Binary : mivs::ColumnKind::Continuous));
    }
    return mivs::DataMatrix(std::move(cols), y, std::vector<uint8_t>(y.size(), 0));
}

inline Eigen::MatrixXd normal_matrix(size_t n, size_t K, mivs::Rng& rng) {
    Eigen::MatrixXd X(n, K);
    for (Eigen::Index k = 0; k < X.cols(); ++k)
        for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, k) = rng.normal();
    return X;
}

inline std::vector<double> coin_flips(size_t n, mivs::Rng& rng) {
    std::vector<double> y(n);
    for (auto& v : y) v = rng.bernoulli(0.5);
    return y;
}

} // namespace testing
