#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mivs/rng.h"
#include "mivs/tree.h"

namespace mivs {

struct BartParams {
    size_t m = 50;           // trees in the sum
    size_t n_draws = 1100;   // total MCMC iterations, burn-in included
    size_t burn = 100;
    double k = 2.0;          // leaf prior sd is 3 / (k sqrt(m))
    double alpha = 0.95;     // node split prior alpha (1 + depth)^-beta
    double beta = 2.0;
    double p_grow = 0.28;
    double p_prune = 0.28;   // the remainder proposes change moves
    bool keep_draws = false;
};

// Probit BART fitted by Gibbs sampling with data augmentation.
class BartModel {
public:
    size_t m = 0;
    std::vector<double> inclusion_props;   // share of post-burn splitting rules per variable
    std::vector<double> split_counts;      // raw post-burn split counts per variable
    std::vector<double> train_prob;        // posterior mean of Phi(f(x_i)) on the training rows
    std::vector<std::vector<Tree>> draws;  // post-burn ensembles when keep_draws is set

    // Posterior mean probability; requires keep_draws.
    double predict(std::span<const double> row) const;
};

BartModel fit_bart(const Eigen::MatrixXd& X, std::span<const double> y, const BartParams& params, const Rng& rng);

} // namespace mivs
