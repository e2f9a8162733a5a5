#include "mivs/tree.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mivs/error.h"

namespace mivs {

size_t Tree::leaf_count() const {
    size_t n = 0;
    for (const auto& nd : nodes) n += nd.is_leaf();
    return n;
}

int Tree::depth() const {
    int d = 0;
    for (const auto& nd : nodes) d = std::max(d, nd.depth);
    return d;
}

bool Tree::uses(size_t var) const {
    for (const auto& nd : nodes)
        if (!nd.is_leaf() && static_cast<size_t>(nd.var) == var) return true;
    return false;
}

double split_gain(const SplitCriterion& crit, double n, double sum, double sum_h, double nl, double suml,
                  double sum_hl) {
    const double nr = n - nl;
    const double sumr = sum - suml;
    switch (crit.kind) {
        case CriterionKind::SquaredError:
            return suml * suml / nl + sumr * sumr / nr - sum * sum / n;
        case CriterionKind::Gini:
            // For 0/1 responses n*G = 2*S*(n-S)/n, which is twice the SSE.
            return 2.0 * (suml * suml / nl + sumr * sumr / nr - sum * sum / n);
        case CriterionKind::BoostGain: {
            const double hr = sum_h - sum_hl;
            return 0.5 * (suml * suml / (sum_hl + crit.lambda) + sumr * sumr / (hr + crit.lambda) -
                          sum * sum / (sum_h + crit.lambda)) -
                   crit.gamma;
        }
    }
    return 0.0;
}

namespace {

struct SortEntry {
    double x;
    double y;
    double h;
};

struct Pending {
    int node;
    size_t begin;
    size_t end;
};

} // namespace

Tree grow_tree(const Eigen::MatrixXd& X, std::span<const size_t> rows, const TreeTarget& target,
               const SplitCriterion& crit, const GrowControls& controls, Rng& rng) {
    if (rows.empty()) throw FitError("grow_tree: no rows");
    const bool boost = crit.kind == CriterionKind::BoostGain;
    if (boost && (crit.lambda < 0 || crit.gamma < 0)) throw FitError("grow_tree: BoostGain needs lambda, gamma >= 0");
    if (boost && target.hess.size() != target.y.size()) throw FitError("grow_tree: missing hessians");

    std::vector<size_t> pool;
    if (controls.allowed.empty()) {
        pool.resize(static_cast<size_t>(X.cols()));
        std::iota(pool.begin(), pool.end(), size_t{0});
    } else {
        pool.assign(controls.allowed.begin(), controls.allowed.end());
    }
    const size_t mtry = controls.mtry == 0 ? pool.size() : std::min(controls.mtry, pool.size());
    const size_t min_leaf = std::max<size_t>(1, controls.min_leaf);

    std::vector<size_t> idx(rows.begin(), rows.end());
    std::vector<SortEntry> buf;
    buf.reserve(idx.size());
    std::vector<size_t> candidates;

    Tree tree;
    tree.nodes.push_back(TreeNode{});
    std::vector<Pending> stack{{0, 0, idx.size()}};

    while (!stack.empty()) {
        const Pending cur = stack.back();
        stack.pop_back();
        const size_t n = cur.end - cur.begin;

        double sum = 0.0, sum_h = 0.0;
        double ymin = target.y[idx[cur.begin]], ymax = ymin;
        for (size_t p = cur.begin; p < cur.end; ++p) {
            const double yv = target.y[idx[p]];
            sum += yv;
            if (boost) sum_h += target.hess[idx[p]];
            ymin = std::min(ymin, yv);
            ymax = std::max(ymax, yv);
        }
        {
            TreeNode& nd = tree.nodes[static_cast<size_t>(cur.node)];
            nd.count = static_cast<uint32_t>(n);
            nd.value = boost ? -sum / (sum_h + crit.lambda) : sum / static_cast<double>(n);
        }
        const int depth = tree.nodes[static_cast<size_t>(cur.node)].depth;

        if (controls.max_depth >= 0 && depth >= controls.max_depth) continue;
        if (n < std::max<size_t>(controls.min_split, 2) || n < 2 * min_leaf) continue;
        if (!boost && ymin == ymax) continue;

        candidates.clear();
        if (mtry < pool.size()) {
            std::vector<size_t> shuffled = pool;
            for (size_t i = 0; i < mtry; ++i) std::swap(shuffled[i], shuffled[i + rng.index(shuffled.size() - i)]);
            candidates.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(mtry));
        } else {
            candidates = pool;
        }
        std::sort(candidates.begin(), candidates.end());

        const double scale = boost ? std::fabs(sum * sum / (sum_h + crit.lambda)) : static_cast<double>(n);
        const double min_gain = 1e-12 * (1.0 + scale);
        double best_gain = -std::numeric_limits<double>::infinity();
        int best_var = -1;
        double best_split = 0.0;

        for (size_t var : candidates) {
            const auto col = X.col(static_cast<Eigen::Index>(var));
            buf.clear();
            for (size_t p = cur.begin; p < cur.end; ++p) {
                const size_t r = idx[p];
                buf.push_back({col(static_cast<Eigen::Index>(r)), target.y[r], boost ? target.hess[r] : 1.0});
            }
            std::sort(buf.begin(), buf.end(), [](const SortEntry& a, const SortEntry& b) { return a.x < b.x; });
            if (buf.front().x == buf.back().x) continue;

            double suml = 0.0, sum_hl = 0.0;
            for (size_t i = 0; i + 1 < n; ++i) {
                suml += buf[i].y;
                sum_hl += buf[i].h;
                if (buf[i].x == buf[i + 1].x) continue;
                const size_t nl = i + 1;
                if (nl < min_leaf || n - nl < min_leaf) continue;
                if (boost && (sum_hl < controls.min_child_weight || sum_h - sum_hl < controls.min_child_weight))
                    continue;
                const double gain = split_gain(crit, static_cast<double>(n), sum, sum_h, static_cast<double>(nl),
                                               suml, sum_hl);
                if (gain > best_gain) {
                    double c = 0.5 * (buf[i].x + buf[i + 1].x);
                    if (!(c > buf[i].x)) c = buf[i + 1].x;
                    best_gain = gain;
                    best_var = static_cast<int>(var);
                    best_split = c;
                }
            }
        }

        if (best_var < 0 || !(best_gain > min_gain)) continue;

        const auto col = X.col(best_var);
        auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(cur.begin),
                                  idx.begin() + static_cast<std::ptrdiff_t>(cur.end),
                                  [&](size_t r) { return col(static_cast<Eigen::Index>(r)) < best_split; });
        const size_t split_at = static_cast<size_t>(mid - idx.begin());

        const int left = static_cast<int>(tree.nodes.size());
        TreeNode child;
        child.depth = depth + 1;
        tree.nodes.push_back(child);
        tree.nodes.push_back(child);
        TreeNode& nd = tree.nodes[static_cast<size_t>(cur.node)];
        nd.var = best_var;
        nd.split = best_split;
        nd.gain = best_gain;
        nd.left = left;
        nd.right = left + 1;
        stack.push_back({left + 1, split_at, cur.end});
        stack.push_back({left, cur.begin, split_at});
    }
    return tree;
}

} // namespace mivs
