#include "mivs/impute.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <Eigen/Dense>

#include "mivs/error.h"
#include "mivs/forest.h"
#include "mivs/glm.h"
#include "mivs/log.h"
#include "mivs/parallel.h"
#include "mivs/stats.h"

namespace mivs {

const char* to_string(ImputeKind k) {
    switch (k) {
        case ImputeKind::None: return "none";
        case ImputeKind::Chained: return "mice";
        case ImputeKind::Forest: return "forest";
    }
    return "none";
}

ImputeKind impute_kind_from_string(const std::string& s) {
    if (s == "none") return ImputeKind::None;
    if (s == "mice" || s == "chained") return ImputeKind::Chained;
    if (s == "forest" || s == "missforest") return ImputeKind::Forest;
    throw SpecError("unknown imputation method '" + s + "'");
}

void ImputeMethod::validate() const {
    if (chained.iterations < 1) throw SpecError("chained imputation needs iterations >= 1");
    if (chained.pmm_k < 1) throw SpecError("chained imputation needs pmm_k >= 1");
    if (forest.max_iterations < 1) throw SpecError("forest imputation needs max_iterations >= 1");
    if (forest.n_trees < 10) throw SpecError("forest imputation needs at least 10 trees per forest");
}

namespace {

// Working copy of a DataMatrix: predictors then the outcome as the last column.
struct Work {
    Eigen::MatrixXd Z;
    std::vector<std::vector<uint8_t>> miss;  // per column
    std::vector<ColumnKind> kinds;
    std::vector<std::string> names;
    size_t n = 0;
    size_t p = 0;  // columns including the outcome

    explicit Work(const DataMatrix& d) : n(d.rows()), p(d.cols() + 1) {
        Z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
        for (size_t k = 0; k < d.cols(); ++k) {
            for (size_t i = 0; i < n; ++i) Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = d.value(i, k);
            miss.push_back(d.column(k).missing);
            kinds.push_back(d.kind(k));
            names.push_back(d.name(k));
        }
        for (size_t i = 0; i < n; ++i) Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p - 1)) = d.outcome(i);
        miss.push_back(d.outcome_mask());
        kinds.push_back(ColumnKind::Binary);
        names.push_back(d.outcome_name());
    }

    size_t missing(size_t j) const { return static_cast<size_t>(std::count(miss[j].begin(), miss[j].end(), 1)); }

    void check_observable() const {
        for (size_t j = 0; j < p; ++j)
            if (missing(j) == n) throw ImputationError("column '" + names[j] + "' is entirely missing");
    }

    void split_rows(size_t j, std::vector<size_t>& obs, std::vector<size_t>& mis) const {
        obs.clear();
        mis.clear();
        for (size_t i = 0; i < n; ++i) (miss[j][i] ? mis : obs).push_back(i);
    }

    // Rows `rows` of every column except j.
    Eigen::MatrixXd design(size_t j, const std::vector<size_t>& rows) const {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p - 1));
        for (size_t r = 0; r < rows.size(); ++r) {
            Eigen::Index c = 0;
            for (size_t k = 0; k < p; ++k) {
                if (k == j) continue;
                X(static_cast<Eigen::Index>(r), c++) = Z(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(k));
            }
        }
        return X;
    }

    DataMatrix to_matrix(const DataMatrix& like) const {
        std::vector<Column> cols;
        for (size_t k = 0; k + 1 < p; ++k) {
            Column c{names[k], kinds[k], std::vector<double>(n), std::vector<uint8_t>(n, 0)};
            for (size_t i = 0; i < n; ++i) c.values[i] = Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
            cols.push_back(std::move(c));
        }
        std::vector<double> y(n);
        for (size_t i = 0; i < n; ++i) y[i] = Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p - 1));
        return DataMatrix(std::move(cols), std::move(y), std::vector<uint8_t>(n, 0), like.outcome_name());
    }
};

// Lower Cholesky-like factor of a covariance for drawing N(0, S); falls back to
// the diagonal when S is not numerically positive definite.
Eigen::MatrixXd draw_factor(const Eigen::MatrixXd& S) {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(S.rows(), S.cols());
    for (Eigen::Index i = 0; i < S.rows(); ++i) D(i, i) = std::sqrt(std::max(S(i, i), 0.0));
    return D;
}

Eigen::VectorXd standard_normals(Rng& rng, Eigen::Index m) {
    Eigen::VectorXd z(m);
    for (Eigen::Index i = 0; i < m; ++i) z(i) = rng.normal();
    return z;
}

double predict_linear(const Eigen::VectorXd& beta, const Eigen::MatrixXd& X, Eigen::Index row) {
    return beta(0) + X.row(row).dot(beta.tail(beta.size() - 1));
}

} // namespace

DataMatrix impute_chained(const DataMatrix& d, const ChainedParams& params, const Rng& rng, ImputeDiagnostics* diag) {
    if (params.iterations < 1 || params.pmm_k < 1) throw SpecError("chained imputation: iterations and pmm_k must be >= 1");
    Work w(d);
    w.check_observable();
    ImputeDiagnostics local;
    ImputeDiagnostics& dg = diag ? *diag : local;
    dg = ImputeDiagnostics{};
    if (d.masked_cells() == 0) return d;

    Rng r = rng;
    std::vector<size_t> visit;
    std::vector<size_t> obs, mis;
    for (size_t j = 0; j < w.p; ++j) {
        if (w.missing(j) == 0) continue;
        visit.push_back(j);
        w.split_rows(j, obs, mis);
        for (size_t i : mis)
            w.Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                w.Z(static_cast<Eigen::Index>(obs[r.index(obs.size())]), static_cast<Eigen::Index>(j));
    }

    std::vector<std::pair<double, size_t>> dist;
    for (int sweep = 0; sweep < params.iterations; ++sweep) {
        for (size_t j : visit) {
            w.split_rows(j, obs, mis);
            const auto col = static_cast<Eigen::Index>(j);
            std::vector<double> yo(obs.size());
            for (size_t t = 0; t < obs.size(); ++t) yo[t] = w.Z(static_cast<Eigen::Index>(obs[t]), col);
            const Eigen::MatrixXd Xo = w.design(j, obs);
            const Eigen::MatrixXd Xm = w.design(j, mis);

            if (w.kinds[j] == ColumnKind::Binary) {
                const double s = std::accumulate(yo.begin(), yo.end(), 0.0);
                if (s == 0.0 || s == static_cast<double>(yo.size())) {
                    for (size_t i : mis) w.Z(static_cast<Eigen::Index>(i), col) = yo[0];
                    continue;
                }
                LogisticFit fit;
                try {
                    fit = fit_logistic(Xo, yo);
                } catch (const FitError& e) {
                    throw ImputationError("logistic model for '" + w.names[j] + "' failed: " + e.what());
                }
                if (fit.ridge_stabilized) ++dg.ridge_fallbacks;
                const Eigen::VectorXd beta =
                    fit.beta + draw_factor(fit.covariance) * standard_normals(r, fit.beta.size());
                for (size_t t = 0; t < mis.size(); ++t) {
                    const double prob = stats::sigmoid(predict_linear(beta, Xm, static_cast<Eigen::Index>(t)));
                    w.Z(static_cast<Eigen::Index>(mis[t]), col) = r.bernoulli(prob) ? 1.0 : 0.0;
                }
            } else {
                LinearFit fit;
                try {
                    fit = fit_linear(Xo, yo);
                } catch (const FitError& e) {
                    throw ImputationError("linear model for '" + w.names[j] + "' failed: " + e.what());
                }
                if (fit.ridge_used) ++dg.ridge_fallbacks;
                const double dof = std::max(1.0, static_cast<double>(obs.size()) - static_cast<double>(fit.beta.size()));
                const double ssr = fit.sigma2 * dof;
                const double chi2 = r.gamma(dof / 2.0, 2.0);
                const double sigma = std::sqrt(ssr / std::max(chi2, 1e-300));
                const Eigen::VectorXd beta =
                    fit.beta + sigma * (draw_factor(fit.xtx_inv) * standard_normals(r, fit.beta.size()));

                std::vector<double> pred_obs(obs.size());
                for (size_t t = 0; t < obs.size(); ++t) pred_obs[t] = predict_linear(fit.beta, Xo, static_cast<Eigen::Index>(t));
                const size_t k = std::min<size_t>(static_cast<size_t>(params.pmm_k), obs.size());
                for (size_t t = 0; t < mis.size(); ++t) {
                    const double target = predict_linear(beta, Xm, static_cast<Eigen::Index>(t));
                    dist.clear();
                    for (size_t o = 0; o < obs.size(); ++o) dist.emplace_back(std::fabs(pred_obs[o] - target), o);
                    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
                    const size_t donor = dist[r.index(k)].second;
                    w.Z(static_cast<Eigen::Index>(mis[t]), col) = yo[donor];
                }
            }
        }
        dg.iterations = sweep + 1;
    }
    dg.returned_iteration = dg.iterations;
    return w.to_matrix(d);
}

DataMatrix impute_forest(const DataMatrix& d, const ForestImputeParams& params, const Rng& rng,
                         ImputeDiagnostics* diag) {
    if (params.max_iterations < 1) throw SpecError("forest imputation: max_iterations must be >= 1");
    if (params.n_trees < 1) throw SpecError("forest imputation: n_trees must be >= 1");
    Work w(d);
    w.check_observable();
    ImputeDiagnostics local;
    ImputeDiagnostics& dg = diag ? *diag : local;
    dg = ImputeDiagnostics{};
    if (d.masked_cells() == 0) return d;

    std::vector<size_t> order;
    std::vector<size_t> obs, mis;
    bool has_cont = false, has_bin = false;
    for (size_t j = 0; j < w.p; ++j) {
        if (w.missing(j) == 0) continue;
        order.push_back(j);
        (w.kinds[j] == ColumnKind::Binary ? has_bin : has_cont) = true;
        w.split_rows(j, obs, mis);
        double s = 0.0;
        for (size_t i : obs) s += w.Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        double fill = s / static_cast<double>(obs.size());
        if (w.kinds[j] == ColumnKind::Binary) fill = fill >= 0.5 ? 1.0 : 0.0;
        for (size_t i : mis) w.Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fill;
    }
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return w.missing(a) < w.missing(b); });

    double prev_cont = std::numeric_limits<double>::infinity();
    double prev_bin = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd previous = w.Z;
    for (int iter = 1; iter <= params.max_iterations; ++iter) {
        previous = w.Z;
        for (size_t j : order) {
            w.split_rows(j, obs, mis);
            const auto col = static_cast<Eigen::Index>(j);
            std::vector<double> yo(obs.size());
            for (size_t t = 0; t < obs.size(); ++t) yo[t] = w.Z(static_cast<Eigen::Index>(obs[t]), col);
            if (obs.size() < 2) {
                for (size_t i : mis) w.Z(static_cast<Eigen::Index>(i), col) = yo[0];
                continue;
            }
            const bool binary = w.kinds[j] == ColumnKind::Binary;
            ForestParams fp;
            fp.n_trees = params.n_trees;
            fp.regression = !binary;
            fp.node_size = binary ? 1 : 5;
            ForestModel f;
            try {
                f = fit_rf(w.design(j, obs), yo, fp, rng.split(static_cast<uint64_t>(iter)).split(j));
            } catch (const FitError& e) {
                throw ImputationError("forest for '" + w.names[j] + "' failed: " + e.what());
            }
            const Eigen::MatrixXd Xm = w.design(j, mis);
            for (size_t t = 0; t < mis.size(); ++t) {
                double v = f.predict(Xm, static_cast<Eigen::Index>(t));
                if (binary) v = v > 0.5 ? 1.0 : 0.0;
                w.Z(static_cast<Eigen::Index>(mis[t]), col) = v;
            }
        }

        double num = 0.0, den = 0.0, changed = 0.0, imputed_bin = 0.0;
        for (size_t j : order) {
            const auto col = static_cast<Eigen::Index>(j);
            for (size_t i = 0; i < w.n; ++i) {
                const auto row = static_cast<Eigen::Index>(i);
                if (w.kinds[j] == ColumnKind::Binary) {
                    if (!w.miss[j][i]) continue;
                    imputed_bin += 1.0;
                    changed += w.Z(row, col) != previous(row, col);
                } else {
                    const double dv = w.Z(row, col) - previous(row, col);
                    num += dv * dv;
                    den += w.Z(row, col) * w.Z(row, col);
                }
            }
        }
        const double diff_cont = has_cont ? (den > 0 ? num / den : 0.0) : 0.0;
        const double diff_bin = has_bin ? changed / imputed_bin : 0.0;
        dg.diff_continuous.push_back(diff_cont);
        dg.diff_binary.push_back(diff_bin);
        dg.iterations = iter;

        const bool decreased = (has_cont && diff_cont < prev_cont) || (has_bin && diff_bin < prev_bin);
        if (!decreased) {
            w.Z = previous;
            dg.returned_iteration = iter - 1;
            return w.to_matrix(d);
        }
        prev_cont = diff_cont;
        prev_bin = diff_bin;
    }
    dg.returned_iteration = dg.iterations;
    return w.to_matrix(d);
}

DataMatrix impute(const DataMatrix& d, const ImputeMethod& method, const Rng& rng, ImputeDiagnostics* diag) {
    switch (method.kind) {
        case ImputeKind::None: return d;
        case ImputeKind::Chained: return impute_chained(d, method.chained, rng, diag);
        case ImputeKind::Forest: return impute_forest(d, method.forest, rng, diag);
    }
    return d;
}

BootstrapImputeSet bootstrap_impute(const DataMatrix& d, size_t B, const ImputeMethod& method, const Rng& rng) {
    if (B < 1) throw SpecError("bootstrap imputation needs B >= 1");
    method.validate();
    const size_t n = d.rows();
    std::vector<std::optional<DataMatrix>> reps(B);
    std::vector<std::vector<size_t>> rows(B);
    std::vector<std::string> errors(B);

    parallel_for(B, [&](size_t b) {
        Rng r = rng.split(b);
        rows[b].resize(n);
        for (auto& v : rows[b]) v = r.index(n);
        try {
            reps[b] = impute(d.select_rows(rows[b]), method, r.split(1));
        } catch (const Error& e) {
            errors[b] = e.what();
        }
    });

    BootstrapImputeSet set;
    set.B = B;
    for (size_t b = 0; b < B; ++b) {
        if (!reps[b]) {
            set.failures.push_back({b, errors[b]});
            log::warn("replicate " + std::to_string(b + 1) + " failed: " + errors[b]);
            continue;
        }
        set.replicates.push_back(std::move(*reps[b]));
        set.replicate_ids.push_back(b);
        set.rows.push_back(std::move(rows[b]));
        set.streams.push_back(rng.split(b).stream());
    }
    return set;
}

} // namespace mivs
