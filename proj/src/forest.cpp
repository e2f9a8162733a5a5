#include "mivs/forest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mivs/error.h"
#include "mivs/parallel.h"
#include "mivs/stats.h"

namespace mivs {

namespace {

void check_inputs(const Eigen::MatrixXd& X, std::span<const double> y, size_t n_trees) {
    if (X.rows() < 2) throw FitError("forest fit needs at least 2 rows");
    if (X.cols() < 1) throw FitError("forest fit needs at least 1 column");
    if (static_cast<size_t>(X.rows()) != y.size()) throw FitError("forest fit: X and y row mismatch");
    if (n_trees == 0) throw FitError("forest fit needs at least one tree");
}

size_t default_mtry(size_t K, bool regression) {
    if (regression) return std::max<size_t>(1, K / 3);
    return static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(K))));
}

} // namespace

double ForestModel::predict(const Eigen::MatrixXd& X, Eigen::Index row) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(X, row);
    return s / static_cast<double>(trees.size());
}

double ForestModel::predict(std::span<const double> row) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(row);
    return s / static_cast<double>(trees.size());
}

std::vector<double> ForestModel::oob_predictions(const Eigen::MatrixXd& X) const {
    const size_t n = static_cast<size_t>(X.rows());
    std::vector<double> sum(n, 0.0);
    std::vector<uint32_t> cnt(n, 0);
    for (size_t t = 0; t < trees.size(); ++t) {
        for (size_t i = 0; i < n; ++i) {
            if (inbag[t][i] != 0) continue;
            sum[i] += trees[t].predict(X, static_cast<Eigen::Index>(i));
            ++cnt[i];
        }
    }
    for (size_t i = 0; i < n; ++i)
        sum[i] = cnt[i] ? sum[i] / cnt[i] : std::numeric_limits<double>::quiet_NaN();
    return sum;
}

double ForestModel::oob_error(const Eigen::MatrixXd& X, std::span<const double> y, size_t* n_eval) const {
    const auto pred = oob_predictions(X);
    double err = 0.0;
    size_t m = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (std::isnan(pred[i])) continue;
        ++m;
        if (regression) {
            err += (pred[i] - y[i]) * (pred[i] - y[i]);
        } else {
            err += ((pred[i] > 0.5 ? 1.0 : 0.0) != y[i]);
        }
    }
    if (n_eval) *n_eval = m;
    return m ? err / static_cast<double>(m) : std::numeric_limits<double>::quiet_NaN();
}

ForestModel fit_rf(const Eigen::MatrixXd& X, std::span<const double> y, const ForestParams& params,
                   const Rng& rng) {
    check_inputs(X, y, params.n_trees);
    const size_t n = static_cast<size_t>(X.rows());
    const size_t K = static_cast<size_t>(X.cols());

    ForestModel f;
    f.kind = ForestKind::Classic;
    f.regression = params.regression;
    f.mtry = params.mtry ? std::min(params.mtry, K) : default_mtry(K, params.regression);
    f.trees.resize(params.n_trees);
    f.inbag.resize(params.n_trees);

    SplitCriterion crit{params.regression ? CriterionKind::SquaredError : CriterionKind::Gini};
    GrowControls controls;
    controls.mtry = f.mtry;
    controls.min_leaf = 1;
    controls.min_split = std::max<size_t>(2, params.node_size);

    parallel_for(params.n_trees, [&](size_t t) {
        Rng r = rng.split(t);
        std::vector<size_t> rows(n);
        std::vector<uint16_t> counts(n, 0);
        for (auto& row : rows) {
            row = r.index(n);
            ++counts[row];
        }
        f.trees[t] = grow_tree(X, rows, TreeTarget{y, {}}, crit, controls, r);
        f.inbag[t] = std::move(counts);
    });
    return f;
}

Tree grow_ctree(const Eigen::MatrixXd& X, std::span<const size_t> rows, std::span<const double> y,
                const CrfParams& params, size_t mtry, Rng& rng) {
    const size_t K = static_cast<size_t>(X.cols());
    mtry = std::min(std::max<size_t>(mtry, 1), K);
    const size_t min_leaf = std::max<size_t>(1, params.min_leaf);

    struct Pending {
        int node;
        size_t begin, end;
    };
    std::vector<size_t> idx(rows.begin(), rows.end());
    std::vector<size_t> pool(K);
    std::iota(pool.begin(), pool.end(), size_t{0});
    std::vector<std::pair<double, double>> buf;

    Tree tree;
    tree.nodes.push_back(TreeNode{});
    std::vector<Pending> stack{{0, 0, idx.size()}};
    while (!stack.empty()) {
        const Pending cur = stack.back();
        stack.pop_back();
        const size_t n = cur.end - cur.begin;
        const double nd = static_cast<double>(n);

        double sy = 0.0;
        for (size_t p = cur.begin; p < cur.end; ++p) sy += y[idx[p]];
        {
            TreeNode& node = tree.nodes[static_cast<size_t>(cur.node)];
            node.count = static_cast<uint32_t>(n);
            node.value = n ? sy / nd : 0.0;
        }
        const int depth = tree.nodes[static_cast<size_t>(cur.node)].depth;
        if (n < std::max<size_t>(params.min_split, 2) || n < 2 * min_leaf) continue;
        if (sy == 0.0 || sy == nd) continue;

        std::vector<size_t> candidates = pool;
        if (mtry < K) {
            for (size_t i = 0; i < mtry; ++i) std::swap(candidates[i], candidates[i + rng.index(K - i)]);
            candidates.resize(mtry);
        }
        std::sort(candidates.begin(), candidates.end());

        const double ybar = sy / nd;
        double syy = 0.0;
        for (size_t p = cur.begin; p < cur.end; ++p) syy += (y[idx[p]] - ybar) * (y[idx[p]] - ybar);

        double best_p = 2.0;
        int best_var = -1;
        for (size_t var : candidates) {
            const auto col = X.col(static_cast<Eigen::Index>(var));
            double sx = 0.0;
            for (size_t p = cur.begin; p < cur.end; ++p) sx += col(static_cast<Eigen::Index>(idx[p]));
            const double xbar = sx / nd;
            double sxx = 0.0, sxy = 0.0;
            for (size_t p = cur.begin; p < cur.end; ++p) {
                const double dx = col(static_cast<Eigen::Index>(idx[p])) - xbar;
                sxx += dx * dx;
                sxy += dx * (y[idx[p]] - ybar);
            }
            double pval = 1.0;
            if (sxx > 1e-12 * (1.0 + xbar * xbar) * nd) {
                const double r2 = sxy * sxy / (sxx * syy);
                pval = stats::chi2_1_upper((nd - 1.0) * r2);
            }
            if (pval < best_p) {
                best_p = pval;
                best_var = static_cast<int>(var);
            }
        }
        if (best_var < 0) continue;
        const double adjusted = std::min(1.0, best_p * static_cast<double>(candidates.size()));
        if (adjusted > params.alpha) continue;

        // Best cut for the selected variable: maximize (S_L - n_L ybar)^2 / (n_L n_R).
        const auto col = X.col(best_var);
        buf.clear();
        for (size_t p = cur.begin; p < cur.end; ++p)
            buf.emplace_back(col(static_cast<Eigen::Index>(idx[p])), y[idx[p]]);
        std::sort(buf.begin(), buf.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        double best_stat = -1.0, best_split = 0.0;
        double sl = 0.0;
        for (size_t i = 0; i + 1 < n; ++i) {
            sl += buf[i].second;
            if (buf[i].first == buf[i + 1].first) continue;
            const size_t nl = i + 1;
            if (nl < min_leaf || n - nl < min_leaf) continue;
            const double dev = sl - static_cast<double>(nl) * ybar;
            const double stat = dev * dev / (static_cast<double>(nl) * static_cast<double>(n - nl));
            if (stat > best_stat) {
                best_stat = stat;
                double c = 0.5 * (buf[i].first + buf[i + 1].first);
                if (!(c > buf[i].first)) c = buf[i + 1].first;
                best_split = c;
            }
        }
        if (best_stat < 0) continue;

        auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(cur.begin),
                                  idx.begin() + static_cast<std::ptrdiff_t>(cur.end),
                                  [&](size_t r) { return col(static_cast<Eigen::Index>(r)) < best_split; });
        const size_t split_at = static_cast<size_t>(mid - idx.begin());
        const int left = static_cast<int>(tree.nodes.size());
        TreeNode child;
        child.depth = depth + 1;
        tree.nodes.push_back(child);
        tree.nodes.push_back(child);
        TreeNode& node = tree.nodes[static_cast<size_t>(cur.node)];
        node.var = best_var;
        node.split = best_split;
        node.gain = (nd - 1.0) * best_stat * nd / syy;
        node.left = left;
        node.right = left + 1;
        stack.push_back({left + 1, split_at, cur.end});
        stack.push_back({left, cur.begin, split_at});
    }
    return tree;
}

ForestModel fit_crf(const Eigen::MatrixXd& X, std::span<const double> y, const CrfParams& params, const Rng& rng) {
    check_inputs(X, y, params.n_trees);
    if (!(params.subsample_frac > 0 && params.subsample_frac <= 1)) throw FitError("crf: subsample_frac must be in (0,1]");
    const size_t n = static_cast<size_t>(X.rows());
    const size_t K = static_cast<size_t>(X.cols());

    ForestModel f;
    f.kind = ForestKind::ConditionalInference;
    f.mtry = params.mtry ? std::min(params.mtry, K) : default_mtry(K, false);
    f.trees.resize(params.n_trees);
    f.inbag.resize(params.n_trees);
    const size_t m = std::max<size_t>(1, static_cast<size_t>(std::floor(params.subsample_frac * static_cast<double>(n))));

    parallel_for(params.n_trees, [&](size_t t) {
        Rng r = rng.split(t);
        std::vector<size_t> perm(n);
        std::iota(perm.begin(), perm.end(), size_t{0});
        for (size_t i = 0; i < m; ++i) std::swap(perm[i], perm[i + r.index(n - i)]);
        perm.resize(m);
        std::vector<uint16_t> counts(n, 0);
        for (size_t row : perm) counts[row] = 1;
        f.trees[t] = grow_ctree(X, perm, y, params, f.mtry, r);
        f.inbag[t] = std::move(counts);
    });
    return f;
}

std::vector<double> oob_importance(const ForestModel& f, const Eigen::MatrixXd& X, std::span<const double> y,
                                   const OobPermuter& permute) {
    if (f.regression) throw FitError("oob_importance supports classification forests only");
    const size_t n = static_cast<size_t>(X.rows());
    const size_t K = static_cast<size_t>(X.cols());
    const size_t T = f.trees.size();
    std::vector<std::vector<double>> per_tree(T, std::vector<double>(K, 0.0));

    parallel_for(T, [&](size_t t) {
        const Tree& tree = f.trees[t];
        std::vector<size_t> oob;
        for (size_t i = 0; i < n; ++i)
            if (f.inbag[t][i] == 0) oob.push_back(i);
        if (oob.empty()) return;
        auto correct = [&](size_t i, double pred) { return (pred > 0.5 ? 1.0 : 0.0) == y[i]; };

        size_t base = 0;
        for (size_t i : oob) base += correct(i, tree.predict(X, static_cast<Eigen::Index>(i)));

        std::vector<double> values(oob.size());
        for (size_t k = 0; k < K; ++k) {
            if (!tree.uses(k)) continue;
            for (size_t j = 0; j < oob.size(); ++j) values[j] = X(static_cast<Eigen::Index>(oob[j]), static_cast<Eigen::Index>(k));
            permute(t, k, values);
            size_t hits = 0;
            for (size_t j = 0; j < oob.size(); ++j) {
                const auto row = static_cast<Eigen::Index>(oob[j]);
                const double pred = tree.predict_with([&](size_t v) {
                    return v == k ? values[j] : X(row, static_cast<Eigen::Index>(v));
                });
                hits += correct(oob[j], pred);
            }
            per_tree[t][k] = (static_cast<double>(base) - static_cast<double>(hits)) / static_cast<double>(oob.size());
        }
    });

    std::vector<double> imp(K, 0.0);
    for (const auto& v : per_tree)
        for (size_t k = 0; k < K; ++k) imp[k] += v[k];
    for (auto& v : imp) v /= static_cast<double>(T);
    return imp;
}

std::vector<double> oob_importance(const ForestModel& f, const Eigen::MatrixXd& X, std::span<const double> y,
                                   const Rng& rng) {
    return oob_importance(f, X, y, [&rng](size_t tree, size_t var, std::span<double> values) {
        Rng r = rng.split(tree).split(var);
        r.shuffle(values);
    });
}

} // namespace mivs
