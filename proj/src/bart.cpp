#include "mivs/bart.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "mivs/error.h"
#include "mivs/stats.h"

namespace mivs {

namespace {

struct BNode {
    int var = -1;
    double split = 0.0;
    int left = -1;
    int right = -1;
    int parent = -1;
    int depth = 0;
    double mu = 0.0;
    bool alive = true;

    bool leaf() const { return var < 0; }
};

class BTree {
public:
    std::vector<BNode> nodes;
    std::vector<int> leaf_of_row;

    explicit BTree(size_t n) : nodes(1), leaf_of_row(n, 0) {}

    std::vector<int> leaves() const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
            if (nodes[i].alive && nodes[i].leaf()) out.push_back(i);
        return out;
    }

    bool is_nog(int i) const {
        const BNode& nd = nodes[i];
        return nd.alive && !nd.leaf() && nodes[nd.left].leaf() && nodes[nd.right].leaf();
    }

    std::vector<int> nogs() const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
            if (is_nog(i)) out.push_back(i);
        return out;
    }

    int alloc() {
        if (!free_.empty()) {
            const int id = free_.back();
            free_.pop_back();
            nodes[id] = BNode{};
            return id;
        }
        nodes.emplace_back();
        return static_cast<int>(nodes.size()) - 1;
    }

    void release(int id) {
        nodes[id].alive = false;
        free_.push_back(id);
    }

    Tree flatten() const {
        Tree t;
        std::vector<std::pair<int, int>> stack{{0, 0}};
        t.nodes.emplace_back();
        while (!stack.empty()) {
            auto [src, dst] = stack.back();
            stack.pop_back();
            const BNode& b = nodes[src];
            t.nodes[dst].depth = b.depth;
            t.nodes[dst].value = b.mu;
            if (b.leaf()) continue;
            const int l = static_cast<int>(t.nodes.size());
            t.nodes.emplace_back();
            t.nodes.emplace_back();
            t.nodes[dst].var = b.var;
            t.nodes[dst].split = b.split;
            t.nodes[dst].left = l;
            t.nodes[dst].right = l + 1;
            stack.push_back({b.right, l + 1});
            stack.push_back({b.left, l});
        }
        return t;
    }

private:
    std::vector<int> free_;
};

class Sampler {
public:
    Sampler(const Eigen::MatrixXd& X, const BartParams& p, Rng& rng)
        : X_(X), p_(p), rng_(rng), n_(static_cast<size_t>(X.rows())), K_(static_cast<size_t>(X.cols())) {
        const double sigma_mu = 3.0 / (p.k * std::sqrt(static_cast<double>(p.m)));
        s2_ = sigma_mu * sigma_mu;
        uniq_.resize(K_);
        rank_.resize(K_);
        seen_.resize(K_);
        for (size_t k = 0; k < K_; ++k) {
            const auto col = X.col(static_cast<Eigen::Index>(k));
            auto& u = uniq_[k];
            u.assign(col.data(), col.data() + n_);
            std::sort(u.begin(), u.end());
            u.erase(std::unique(u.begin(), u.end()), u.end());
            rank_[k].resize(n_);
            for (size_t i = 0; i < n_; ++i)
                rank_[k][i] = static_cast<uint32_t>(std::lower_bound(u.begin(), u.end(), col(static_cast<Eigen::Index>(i))) - u.begin());
            seen_[k].assign(u.size(), 0);
        }
    }

    // Log marginal likelihood of a leaf with n rows and residual sum s (unit noise).
    double leaf_ll(double n, double s) const {
        return -0.5 * std::log1p(n * s2_) + s2_ * s * s / (2.0 * (1.0 + n * s2_));
    }

    double split_prior(int depth) const { return p_.alpha * std::pow(1.0 + depth, -p_.beta); }

    // Log prior ratio of splitting a leaf at `depth` into two leaves.
    double grow_prior_ratio(int depth) const {
        const double ps = split_prior(depth);
        const double pc = split_prior(depth + 1);
        return std::log(ps) + 2.0 * std::log1p(-pc) - std::log1p(-ps);
    }

    // Chooses a split rule among `rows`; false when no column varies there.
    bool draw_rule(const std::vector<size_t>& rows, int& var, double& split) {
        // Uniform over the columns that vary in the node: draw without
        // replacement until one qualifies.
        valid_.resize(K_);
        std::iota(valid_.begin(), valid_.end(), size_t{0});
        size_t left = K_;
        var = -1;
        while (left > 0) {
            const size_t j = rng_.index(left);
            const size_t k = valid_[j];
            const auto col = X_.col(static_cast<Eigen::Index>(k));
            const double first = col(static_cast<Eigen::Index>(rows[0]));
            bool varies = false;
            for (size_t r : rows) {
                if (col(static_cast<Eigen::Index>(r)) != first) {
                    varies = true;
                    break;
                }
            }
            if (varies) {
                var = static_cast<int>(k);
                break;
            }
            valid_[j] = valid_[--left];
        }
        if (var < 0) return false;
        // Uniform over the distinct node values except the minimum, found by
        // marking global ranks; any such value leaves both sides nonempty
        // under x < c.
        const auto& rank = rank_[static_cast<size_t>(var)];
        auto& seen = seen_[static_cast<size_t>(var)];
        uint32_t lo = UINT32_MAX, hi = 0;
        for (size_t r : rows) {
            const uint32_t q = rank[r];
            seen[q] = 1;
            lo = std::min(lo, q);
            hi = std::max(hi, q);
        }
        size_t distinct = 0;
        for (uint32_t q = lo; q <= hi; ++q) distinct += seen[q];
        size_t pick = 1 + rng_.index(distinct - 1);
        uint32_t chosen = lo;
        for (uint32_t q = lo; q <= hi; ++q) {
            if (!seen[q]) continue;
            if (pick-- == 0) {
                chosen = q;
                break;
            }
        }
        for (uint32_t q = lo; q <= hi; ++q) seen[q] = 0;
        split = uniq_[static_cast<size_t>(var)][chosen];
        return true;
    }

    void rows_in(const BTree& t, int a, int b, std::vector<size_t>& out) const {
        out.clear();
        for (size_t i = 0; i < n_; ++i)
            if (t.leaf_of_row[i] == a || t.leaf_of_row[i] == b) out.push_back(i);
    }

    void step(BTree& t, const std::vector<double>& r) {
        const auto leaves = t.leaves();
        const auto nogs = t.nogs();
        double u = rng_.uniform();
        if (nogs.empty() || u < p_.p_grow) {
            grow(t, r, leaves, nogs);
        } else if (u < p_.p_grow + p_.p_prune) {
            prune(t, r, leaves, nogs);
        } else {
            change(t, r, nogs);
        }
    }

    void grow(BTree& t, const std::vector<double>& r, const std::vector<int>& leaves, const std::vector<int>& nogs) {
        const int L = leaves[rng_.index(leaves.size())];
        rows_in(t, L, L, rows_);
        if (rows_.size() < 2) return;
        int var;
        double split;
        if (!draw_rule(rows_, var, split)) return;

        double nl = 0, nr = 0, sl = 0, sr = 0;
        for (size_t i : rows_) {
            if (X_(static_cast<Eigen::Index>(i), var) < split) {
                ++nl;
                sl += r[i];
            } else {
                ++nr;
                sr += r[i];
            }
        }
        const int parent = t.nodes[L].parent;
        const bool parent_was_nog = parent >= 0 && t.is_nog(parent);
        const double w_after = static_cast<double>(nogs.size()) - (parent_was_nog ? 1.0 : 0.0) + 1.0;
        const double p_grow_now = nogs.empty() ? 1.0 : p_.p_grow;
        const double log_ratio = std::log(p_.p_prune / w_after) - std::log(p_grow_now / leaves.size()) +
                                 grow_prior_ratio(t.nodes[L].depth) + leaf_ll(nl, sl) + leaf_ll(nr, sr) -
                                 leaf_ll(nl + nr, sl + sr);
        if (std::log(rng_.uniform()) >= log_ratio) return;

        const int a = t.alloc();
        const int b = t.alloc();
        for (int c : {a, b}) {
            t.nodes[c].parent = L;
            t.nodes[c].depth = t.nodes[L].depth + 1;
        }
        t.nodes[L].var = var;
        t.nodes[L].split = split;
        t.nodes[L].left = a;
        t.nodes[L].right = b;
        for (size_t i : rows_) t.leaf_of_row[i] = X_(static_cast<Eigen::Index>(i), var) < split ? a : b;
    }

    void prune(BTree& t, const std::vector<double>& r, const std::vector<int>& leaves, const std::vector<int>& nogs) {
        const int P = nogs[rng_.index(nogs.size())];
        const int a = t.nodes[P].left, b = t.nodes[P].right;
        double nl = 0, nr = 0, sl = 0, sr = 0;
        for (size_t i = 0; i < n_; ++i) {
            if (t.leaf_of_row[i] == a) {
                ++nl;
                sl += r[i];
            } else if (t.leaf_of_row[i] == b) {
                ++nr;
                sr += r[i];
            }
        }
        const double p_grow_after = P == 0 ? 1.0 : p_.p_grow;
        const double leaves_after = static_cast<double>(leaves.size()) - 1.0;
        const double log_ratio = std::log(p_grow_after / leaves_after) - std::log(p_.p_prune / nogs.size()) -
                                 grow_prior_ratio(t.nodes[P].depth) + leaf_ll(nl + nr, sl + sr) -
                                 leaf_ll(nl, sl) - leaf_ll(nr, sr);
        if (std::log(rng_.uniform()) >= log_ratio) return;

        for (size_t i = 0; i < n_; ++i)
            if (t.leaf_of_row[i] == a || t.leaf_of_row[i] == b) t.leaf_of_row[i] = P;
        t.release(a);
        t.release(b);
        t.nodes[P].var = -1;
        t.nodes[P].left = t.nodes[P].right = -1;
    }

    void change(BTree& t, const std::vector<double>& r, const std::vector<int>& nogs) {
        const int P = nogs[rng_.index(nogs.size())];
        const int a = t.nodes[P].left, b = t.nodes[P].right;
        rows_in(t, a, b, rows_);
        int var;
        double split;
        if (!draw_rule(rows_, var, split)) return;

        double ol = 0, or_ = 0, osl = 0, osr = 0, nl = 0, nr = 0, sl = 0, sr = 0;
        for (size_t i : rows_) {
            if (t.leaf_of_row[i] == a) {
                ++ol;
                osl += r[i];
            } else {
                ++or_;
                osr += r[i];
            }
            if (X_(static_cast<Eigen::Index>(i), var) < split) {
                ++nl;
                sl += r[i];
            } else {
                ++nr;
                sr += r[i];
            }
        }
        const double log_ratio = leaf_ll(nl, sl) + leaf_ll(nr, sr) - leaf_ll(ol, osl) - leaf_ll(or_, osr);
        if (std::log(rng_.uniform()) >= log_ratio) return;
        t.nodes[P].var = var;
        t.nodes[P].split = split;
        for (size_t i : rows_) t.leaf_of_row[i] = X_(static_cast<Eigen::Index>(i), var) < split ? a : b;
    }

    void draw_leaves(BTree& t, const std::vector<double>& r) {
        cnt_.assign(t.nodes.size(), 0.0);
        sum_.assign(t.nodes.size(), 0.0);
        for (size_t i = 0; i < n_; ++i) {
            cnt_[static_cast<size_t>(t.leaf_of_row[i])] += 1.0;
            sum_[static_cast<size_t>(t.leaf_of_row[i])] += r[i];
        }
        for (size_t id = 0; id < t.nodes.size(); ++id) {
            BNode& nd = t.nodes[id];
            if (!nd.alive || !nd.leaf()) continue;
            const double prec = 1.0 + cnt_[id] * s2_;
            nd.mu = rng_.normal(s2_ * sum_[id] / prec, std::sqrt(s2_ / prec));
        }
    }

private:
    const Eigen::MatrixXd& X_;
    const BartParams& p_;
    Rng& rng_;
    size_t n_, K_;
    double s2_;
    std::vector<size_t> valid_, rows_;
    std::vector<double> cnt_, sum_;
    std::vector<std::vector<double>> uniq_;     // sorted distinct values per column
    std::vector<std::vector<uint32_t>> rank_;   // row -> index into uniq_
    std::vector<std::vector<uint8_t>> seen_;    // scratch marks per column
};

} // namespace

double BartModel::predict(std::span<const double> row) const {
    if (draws.empty()) throw FitError("bart predict requires a model fitted with keep_draws");
    double s = 0.0;
    for (const auto& ensemble : draws) {
        double f = 0.0;
        for (const auto& t : ensemble) f += t.predict(row);
        s += stats::normal_cdf(f);
    }
    return s / static_cast<double>(draws.size());
}

BartModel fit_bart(const Eigen::MatrixXd& X, std::span<const double> y, const BartParams& params, const Rng& rng) {
    const size_t n = static_cast<size_t>(X.rows());
    const size_t K = static_cast<size_t>(X.cols());
    if (n < 2) throw FitError("bart fit needs at least 2 rows");
    if (K < 1) throw FitError("bart fit needs at least 1 column");
    if (y.size() != n) throw FitError("bart fit: X and y row mismatch");
    if (params.m < 1) throw FitError("bart: m must be >= 1");
    if (params.burn >= params.n_draws) throw FitError("bart: burn must be smaller than n_draws");
    if (params.p_grow <= 0 || params.p_prune <= 0 || params.p_grow + params.p_prune > 1)
        throw FitError("bart: invalid move probabilities");

    Rng r = rng;
    Sampler sampler(X, params, r);
    std::vector<BTree> trees(params.m, BTree(n));
    std::vector<double> f(n, 0.0), z(n), resid(n);

    BartModel model;
    model.m = params.m;
    model.split_counts.assign(K, 0.0);
    model.train_prob.assign(n, 0.0);

    for (size_t it = 0; it < params.n_draws; ++it) {
        for (size_t i = 0; i < n; ++i) z[i] = stats::truncated_normal(r, f[i], y[i] > 0.5);

        for (auto& t : trees) {
            for (size_t i = 0; i < n; ++i) {
                f[i] -= t.nodes[static_cast<size_t>(t.leaf_of_row[i])].mu;
                resid[i] = z[i] - f[i];
            }
            sampler.step(t, resid);
            sampler.draw_leaves(t, resid);
            for (size_t i = 0; i < n; ++i) f[i] += t.nodes[static_cast<size_t>(t.leaf_of_row[i])].mu;
        }

        if (it < params.burn) continue;
        for (const auto& t : trees)
            for (const auto& nd : t.nodes)
                if (nd.alive && !nd.leaf()) model.split_counts[static_cast<size_t>(nd.var)] += 1.0;
        for (size_t i = 0; i < n; ++i) model.train_prob[i] += stats::normal_cdf(f[i]);
        if (params.keep_draws) {
            std::vector<Tree> ensemble;
            ensemble.reserve(trees.size());
            for (const auto& t : trees) ensemble.push_back(t.flatten());
            model.draws.push_back(std::move(ensemble));
        }
    }

    const double kept = static_cast<double>(params.n_draws - params.burn);
    for (auto& p : model.train_prob) p /= kept;
    const double total = std::accumulate(model.split_counts.begin(), model.split_counts.end(), 0.0);
    model.inclusion_props.assign(K, 0.0);
    if (total > 0)
        for (size_t k = 0; k < K; ++k) model.inclusion_props[k] = model.split_counts[k] / total;
    return model;
}

} // namespace mivs
