#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mivs/rng.h"

namespace mivs {

// Flat binary tree node. Internal nodes send a row left iff x[var] < split.
struct TreeNode {
    int var = -1;
    double split = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf prediction (also kept on internal nodes)
    double gain = 0.0;   // criterion gain of the split, 0 on leaves
    int depth = 0;
    uint32_t count = 0;  // training rows reaching the node

    bool is_leaf() const { return var < 0; }
};

class Tree {
public:
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    // `x(var)` returns the row's value of column var.
    template <class RowAccess>
    int leaf_of(RowAccess&& x) const {
        int id = 0;
        while (!nodes[id].is_leaf()) {
            const auto& nd = nodes[id];
            id = x(static_cast<size_t>(nd.var)) < nd.split ? nd.left : nd.right;
        }
        return id;
    }

    template <class RowAccess>
    double predict_with(RowAccess&& x) const {
        return nodes[leaf_of(x)].value;
    }

    double predict(const Eigen::MatrixXd& X, Eigen::Index row) const {
        return predict_with([&](size_t k) { return X(row, static_cast<Eigen::Index>(k)); });
    }

    double predict(std::span<const double> row) const {
        return predict_with([&](size_t k) { return row[k]; });
    }

    size_t leaf_count() const;
    int depth() const;
    bool uses(size_t var) const;
};

enum class CriterionKind { Gini, SquaredError, BoostGain };

// Gini and SquaredError gains are impurity decreases in total (row-summed)
// units: for Gini, n*G(parent) - nL*G(L) - nR*G(R) with G(p) = 2p(1-p); for
// SquaredError, SSE(parent) - SSE(L) - SSE(R). BoostGain is the second-order
// structure score 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma.
struct SplitCriterion {
    CriterionKind kind = CriterionKind::Gini;
    double lambda = 1.0;  // BoostGain only
    double gamma = 0.0;   // BoostGain only
};

// Response passed to the grower. For Gini / SquaredError, `y` are responses;
// for BoostGain, `y` holds gradients and `hess` the hessians.
struct TreeTarget {
    std::span<const double> y;
    std::span<const double> hess;
};

struct GrowControls {
    int max_depth = -1;             // < 0: unlimited
    size_t min_leaf = 1;            // rows required in each child
    size_t min_split = 2;           // rows required to attempt a split
    size_t mtry = 0;                // candidates per node; 0 = all allowed
    double min_child_weight = 0.0;  // BoostGain: hessian sum per child
    std::span<const size_t> allowed;  // restrict candidates (empty = all)
};

// Greedy exact-search CART over `rows` (duplicates allowed, as in a bootstrap
// sample). Candidate split points are the midpoints of consecutive distinct
// sorted values. Gain ties resolve to the lowest variable index, then the
// lowest split point. A node becomes a leaf on depth, size, or when no split
// has positive gain.
Tree grow_tree(const Eigen::MatrixXd& X, std::span<const size_t> rows, const TreeTarget& target,
               const SplitCriterion& crit, const GrowControls& controls, Rng& rng);

// Gain of a split from the parent's and left child's sufficient statistics
// (row count, response or gradient sum, hessian sum). Same definition the
// grower uses.
double split_gain(const SplitCriterion& crit, double n, double sum, double sum_h, double nl, double suml,
                  double sum_hl);

} // namespace mivs
