#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mivs/rng.h"
#include "mivs/tree.h"

namespace mivs {

enum class ForestKind { Classic, ConditionalInference };

struct ForestParams {
    size_t n_trees = 500;
    size_t mtry = 0;       // 0 = ceil(sqrt(K)) for classification, floor(K/3) for regression
    size_t node_size = 1;  // nodes with fewer rows are not split (1 = grow to purity)
    bool regression = false;
};

struct CrfParams {
    size_t n_trees = 500;
    size_t mtry = 0;              // 0 = ceil(sqrt(K))
    double alpha = 0.05;          // Bonferroni-adjusted level that permits a split
    double subsample_frac = 0.632;
    size_t min_leaf = 7;          // minbucket
    size_t min_split = 20;        // minsplit
};

// Bagged trees with their in-bag multiplicities. For classification the
// leaves hold class-1 proportions and the forest probability is the mean over
// trees; the predicted class is 1 iff that mean exceeds 0.5.
class ForestModel {
public:
    std::vector<Tree> trees;
    std::vector<std::vector<uint16_t>> inbag;  // per tree, per training row
    size_t mtry = 0;
    ForestKind kind = ForestKind::Classic;
    bool regression = false;

    double predict(const Eigen::MatrixXd& X, Eigen::Index row) const;
    double predict(std::span<const double> row) const;

    // Mean tree prediction over the trees for which each training row is
    // out of bag; NaN for rows that are never out of bag.
    std::vector<double> oob_predictions(const Eigen::MatrixXd& X) const;

    // Misclassification rate (classification) or MSE (regression) over the
    // rows that are out of bag at least once. `n_eval` receives that count.
    double oob_error(const Eigen::MatrixXd& X, std::span<const double> y, size_t* n_eval = nullptr) const;
};

// Throws FitError when n < 2 or shapes disagree.
ForestModel fit_rf(const Eigen::MatrixXd& X, std::span<const double> y, const ForestParams& params,
                   const Rng& rng);

// Conditional inference forest for a binary response. Each tree is grown on a
// without-replacement subsample. At a node, each of mtry candidates is tested
// for association with the response through the conditional (permutation)
// linear statistic, whose standardized square is (n - 1) r^2 ~ chi2(1); for a
// 0/1 predictor this is the 2x2 chi-square test. The minimum p-value is
// Bonferroni-adjusted over the candidates and the node splits only if it is
// <= alpha. The split point then maximizes the same statistic computed on the
// split indicator, subject to the minbucket constraint.
ForestModel fit_crf(const Eigen::MatrixXd& X, std::span<const double> y, const CrfParams& params, const Rng& rng);

// Conditional inference tree on `rows`; exposed for testing.
Tree grow_ctree(const Eigen::MatrixXd& X, std::span<const size_t> rows, std::span<const double> y,
                const CrfParams& params, size_t mtry, Rng& rng);

// Permutes `values` in place for tree `tree`.
using OobPermuter = std::function<void(size_t tree, size_t var, std::span<double> values)>;

// importance_k = mean over trees of (OOB accuracy - OOB accuracy with column k
// permuted among that tree's OOB rows). Trees that never split on k
// contribute exactly 0. Classification forests only.
std::vector<double> oob_importance(const ForestModel& f, const Eigen::MatrixXd& X, std::span<const double> y,
                                   const Rng& rng);
std::vector<double> oob_importance(const ForestModel& f, const Eigen::MatrixXd& X, std::span<const double> y,
                                   const OobPermuter& permute);

} // namespace mivs
