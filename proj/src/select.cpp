#include "mivs/select.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "mivs/error.h"
#include "mivs/log.h"
#include "mivs/parallel.h"
#include "mivs/stats.h"

namespace mivs {

const char* to_string(Method m) {
    switch (m) {
        case Method::Bart: return "bart";
        case Method::RF: return "rf";
        case Method::CRF: return "crf";
        case Method::GBM: return "gbm";
        case Method::Lasso: return "lasso";
        case Method::Stepwise: return "stepwise";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    for (Method m : all_methods())
        if (s == to_string(m)) return m;
    if (s == "xgboost") return Method::GBM;
    throw SpecError("unknown selection method '" + s + "'");
}

std::vector<Method> all_methods() {
    return {Method::Bart, Method::RF, Method::CRF, Method::GBM, Method::Lasso, Method::Stepwise};
}

double default_pi(Method m) {
    switch (m) {
        case Method::Bart:
        case Method::RF:
        case Method::CRF: return 0.2;
        case Method::GBM: return 0.4;
        case Method::Stepwise: return 0.6;
        case Method::Lasso: return 0.8;
    }
    return 0.5;
}

const char* to_string(ErrorSource e) {
    switch (e) {
        case ErrorSource::Auto: return "auto";
        case ErrorSource::OOB: return "oob";
        case ErrorSource::Holdout50: return "holdout50";
        case ErrorSource::CV5: return "cv5";
    }
    return "?";
}

ErrorSource error_source_from_string(const std::string& s) {
    if (s == "auto") return ErrorSource::Auto;
    if (s == "oob") return ErrorSource::OOB;
    if (s == "holdout50" || s == "holdout") return ErrorSource::Holdout50;
    if (s == "cv5" || s == "cv") return ErrorSource::CV5;
    throw SpecError("unknown error source '" + s + "'");
}

void EliminationSchedule::validate() const {
    if (!(drop_frac > 0 && drop_frac < 1)) throw SpecError("drop_frac must be in (0, 1)");
    if (!(u >= 0)) throw SpecError("SE multiplier u must be >= 0");
    if (first_trees < 1 || later_trees < 1) throw SpecError("forest sizes must be >= 1");
}

double se_cutoff(double e_min, size_t n_eval, double u) {
    if (n_eval == 0) return e_min;
    return e_min + u * std::sqrt(e_min * (1.0 - e_min) / static_cast<double>(n_eval));
}

size_t choose_within_se(const std::vector<EliminationStep>& path, double u, double* cutoff) {
    if (path.empty()) throw SelectionError("empty elimination path");
    size_t best = 0;
    for (size_t s = 1; s < path.size(); ++s)
        if (path[s].error < path[best].error) best = s;
    const double cut = se_cutoff(path[best].error, path[best].n_eval, u);
    if (cutoff) *cutoff = cut;
    size_t chosen = best;
    for (size_t s = 0; s < path.size(); ++s) {
        if (path[s].error > cut + 1e-12) continue;
        const auto& a = path[s];
        const auto& b = path[chosen];
        if (a.vars.size() < b.vars.size() || (a.vars.size() == b.vars.size() && a.error < b.error)) chosen = s;
    }
    return chosen;
}

namespace {

Eigen::MatrixXd take_columns(const Eigen::MatrixXd& X, const std::vector<size_t>& cols) {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(cols[j]));
    return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

class Evaluator {
public:
    Evaluator(const Eigen::MatrixXd& X, std::span<const double> y, Learner learner, const RecursiveConfig& cfg,
              ErrorSource src, const Rng& rng)
        : X_(X), y_(y), learner_(learner), cfg_(cfg), src_(src) {
        const size_t n = y.size();
        std::vector<size_t> perm(n);
        std::iota(perm.begin(), perm.end(), size_t{0});
        Rng r = rng;
        r.shuffle(std::span<size_t>(perm));
        if (src == ErrorSource::Holdout50) {
            const size_t half = n / 2;
            std::vector<size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
            std::vector<size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end());
            std::sort(train.begin(), train.end());
            std::sort(test.begin(), test.end());
            splits_.push_back({std::move(train), std::move(test)});
        } else if (src == ErrorSource::CV5) {
            for (size_t f = 0; f < 5; ++f) {
                std::vector<size_t> train, test;
                for (size_t i = 0; i < n; ++i) (i % 5 == f ? test : train).push_back(perm[i]);
                std::sort(train.begin(), train.end());
                std::sort(test.begin(), test.end());
                splits_.push_back({std::move(train), std::move(test)});
            }
        }
    }

    // Fits the learner and returns its probability predictor on rows of Xs.
    struct Fitted {
        std::optional<ForestModel> forest;
        std::optional<BoostModel> boost;

        double predict(const Eigen::MatrixXd& Xs, Eigen::Index row) const {
            return forest ? forest->predict(Xs, row) : boost->predict(Xs, row);
        }
    };

    Fitted fit(const Eigen::MatrixXd& Xs, std::span<const double> y, size_t trees, const Rng& rng) const {
        Fitted f;
        switch (learner_) {
            case Learner::RF: {
                ForestParams p = cfg_.rf;
                p.n_trees = trees;
                p.regression = false;
                p.mtry = 0;
                f.forest = fit_rf(Xs, y, p, rng);
                break;
            }
            case Learner::CRF: {
                CrfParams p = cfg_.crf;
                p.n_trees = trees;
                p.mtry = 0;
                f.forest = fit_crf(Xs, y, p, rng);
                break;
            }
            case Learner::GBM: f.boost = fit_gbm(Xs, y, cfg_.gbm, rng); break;
        }
        return f;
    }

    // Error of the model on `vars`. For OOB the fitted forest is returned for reuse.
    EliminationStep evaluate(const std::vector<size_t>& vars, size_t trees, const Rng& rng,
                             std::optional<Fitted>* full = nullptr) const {
        EliminationStep step;
        step.vars = vars;
        const Eigen::MatrixXd Xs = take_columns(X_, vars);
        if (src_ == ErrorSource::OOB) {
            Fitted f = fit(Xs, y_, trees, rng);
            step.error = f.forest->oob_error(Xs, y_, &step.n_eval);
            if (full) *full = std::move(f);
            return step;
        }
        size_t wrong = 0, total = 0;
        for (size_t s = 0; s < splits_.size(); ++s) {
            const auto& [train, test] = splits_[s];
            std::vector<double> yt(train.size());
            for (size_t i = 0; i < train.size(); ++i) yt[i] = y_[train[i]];
            const Fitted f = fit(take_rows(Xs, train), yt, trees, rng.split(s));
            const Eigen::MatrixXd Xtest = take_rows(Xs, test);
            for (size_t i = 0; i < test.size(); ++i) {
                const double pred = f.predict(Xtest, static_cast<Eigen::Index>(i)) > 0.5 ? 1.0 : 0.0;
                wrong += pred != y_[test[i]];
            }
            total += test.size();
        }
        step.error = static_cast<double>(wrong) / static_cast<double>(total);
        step.n_eval = total;
        if (full) *full = fit(Xs, y_, trees, rng.split(splits_.size()));
        return step;
    }

private:
    const Eigen::MatrixXd& X_;
    std::span<const double> y_;
    Learner learner_;
    const RecursiveConfig& cfg_;
    ErrorSource src_;
    std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> splits_;
};

} // namespace

RecursiveResult select_recursive(const Eigen::MatrixXd& X, std::span<const double> y, Learner learner,
                                 const RecursiveConfig& cfg, const Rng& rng) {
    cfg.schedule.validate();
    const size_t K = static_cast<size_t>(X.cols());
    const size_t n = static_cast<size_t>(X.rows());
    if (K < 2) throw SelectionError("recursive elimination needs at least 2 variables");
    if (y.size() != n) throw SelectionError("recursive elimination: X and y row mismatch");

    ErrorSource src = cfg.schedule.error_source;
    if (src == ErrorSource::Auto)
        src = learner == Learner::GBM ? (n >= 1000 ? ErrorSource::Holdout50 : ErrorSource::CV5) : ErrorSource::OOB;
    if (src == ErrorSource::OOB && learner == Learner::GBM)
        throw SpecError("boosting has no out-of-bag error; use holdout50 or cv5");
    if (src == ErrorSource::CV5 && n < 5) throw SelectionError("cv5 needs at least 5 rows");

    const Evaluator eval(X, y, learner, cfg, src, rng.split(1));
    RecursiveResult res;
    std::vector<size_t> all(K);
    std::iota(all.begin(), all.end(), size_t{0});

    std::optional<Evaluator::Fitted> full;
    try {
        res.path.push_back(eval.evaluate(all, cfg.schedule.first_trees, rng.split(2).split(0), &full));
        if (learner == Learner::GBM)
            res.importance = gbm_importance(*full->boost);
        else
            res.importance = oob_importance(*full->forest, X, y, rng.split(3));
    } catch (const FitError& e) {
        throw SelectionError(std::string("elimination iteration 0: ") + e.what());
    }

    std::vector<size_t> ranking = all;
    std::stable_sort(ranking.begin(), ranking.end(),
                     [&](size_t a, size_t b) { return res.importance[a] > res.importance[b]; });

    size_t current = K;
    for (size_t step = 1; current > 1; ++step) {
        const size_t drop =
            std::max<size_t>(1, static_cast<size_t>(std::ceil(cfg.schedule.drop_frac * static_cast<double>(current) - 1e-9)));
        current = current > drop ? current - drop : 1;
        std::vector<size_t> vars(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(current));
        std::sort(vars.begin(), vars.end());
        try {
            res.path.push_back(eval.evaluate(vars, cfg.schedule.later_trees, rng.split(2).split(step)));
        } catch (const FitError& e) {
            throw SelectionError("elimination iteration " + std::to_string(step) + ": " + e.what());
        }
    }

    res.chosen = choose_within_se(res.path, cfg.schedule.u, &res.cutoff);
    res.selected = res.path[res.chosen].vars;
    return res;
}

// ---- permutation thresholds ----

const char* to_string(ThresholdRule r) {
    switch (r) {
        case ThresholdRule::Local: return "local";
        case ThresholdRule::GlobalMax: return "global-max";
        case ThresholdRule::GlobalSE: return "global-se";
    }
    return "?";
}

ThresholdRule threshold_rule_from_string(const std::string& s) {
    if (s == "local") return ThresholdRule::Local;
    if (s == "global-max" || s == "globalmax") return ThresholdRule::GlobalMax;
    if (s == "global-se" || s == "globalse") return ThresholdRule::GlobalSE;
    throw SpecError("unknown threshold rule '" + s + "'");
}

void PermutationThreshold::validate() const {
    if (P < 20) throw SpecError("permutation count P must be >= 20");
    if (!(alpha > 0 && alpha < 0.5)) throw SpecError("permutation alpha must be in (0, 0.5)");
}

ThresholdResult apply_threshold(std::span<const double> props, const Eigen::MatrixXd& null_props, ThresholdRule rule,
                                double alpha) {
    const size_t K = props.size();
    const size_t P = static_cast<size_t>(null_props.rows());
    if (static_cast<size_t>(null_props.cols()) != K) throw SelectionError("null proportions have the wrong width");
    if (P < 1) throw SelectionError("no permutation fits");
    ThresholdResult res;
    res.thresholds.assign(K, 0.0);
    res.degenerate.assign(K, 0);

    auto column = [&](size_t k) {
        std::vector<double> v(P);
        for (size_t p = 0; p < P; ++p) v[p] = null_props(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
        return v;
    };

    switch (rule) {
        case ThresholdRule::Local:
            for (size_t k = 0; k < K; ++k) res.thresholds[k] = stats::quantile(column(k), 1.0 - alpha);
            break;
        case ThresholdRule::GlobalMax: {
            std::vector<double> maxes(P);
            for (size_t p = 0; p < P; ++p) maxes[p] = null_props.row(static_cast<Eigen::Index>(p)).maxCoeff();
            const double q = stats::quantile(maxes, 1.0 - alpha);
            std::fill(res.thresholds.begin(), res.thresholds.end(), q);
            break;
        }
        case ThresholdRule::GlobalSE: {
            // Smallest C with #{p : v_kp <= m_k + C s_k} > (1 - alpha) P for every k,
            // i.e. m_k + C s_k must reach the c-th smallest null value.
            const size_t c = std::min(P, static_cast<size_t>(std::floor((1.0 - alpha) * static_cast<double>(P) + 1e-9)) + 1);
            std::vector<double> m(K), s(K);
            double cstar = 0.0;
            for (size_t k = 0; k < K; ++k) {
                auto v = column(k);
                m[k] = stats::mean(v);
                s[k] = stats::sd(v);
                std::sort(v.begin(), v.end());
                if (s[k] > 0) cstar = std::max(cstar, (v[c - 1] - m[k]) / s[k]);
            }
            res.c_star = cstar;
            for (size_t k = 0; k < K; ++k) {
                res.degenerate[k] = !(s[k] > 0);
                res.thresholds[k] = res.degenerate[k] ? m[k] : m[k] + cstar * s[k];
            }
            break;
        }
    }
    for (size_t k = 0; k < K; ++k)
        if (props[k] > res.thresholds[k]) res.selected.push_back(k);
    return res;
}

BartSelection select_bart_permutation(const Eigen::MatrixXd& X, std::span<const double> y,
                                      const PermutationThreshold& thr, const BartParams& bart, const Rng& rng) {
    thr.validate();
    if (X.cols() < 2) throw SelectionError("permutation selection needs at least 2 variables");
    BartSelection sel;
    try {
        sel.props = fit_bart(X, y, bart, rng.split(0)).inclusion_props;
    } catch (const FitError& e) {
        throw SelectionError(std::string("bart fit failed: ") + e.what());
    }
    sel.null_props.resize(static_cast<Eigen::Index>(thr.P), X.cols());
    parallel_for(thr.P, [&](size_t p) {
        Rng r = rng.split(p + 1);
        std::vector<double> yp(y.begin(), y.end());
        r.shuffle(std::span<double>(yp));
        const auto props = fit_bart(X, yp, bart, r.split(1)).inclusion_props;
        for (size_t k = 0; k < props.size(); ++k)
            sel.null_props(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) = props[k];
    });
    sel.threshold = apply_threshold(sel.props, sel.null_props, thr.rule, thr.alpha);
    for (size_t k : sel.threshold.selected)
        if (sel.threshold.degenerate[k]) log::debug("bart global-se: degenerate null sd for variable " + std::to_string(k));
    return sel;
}

// ---- consolidation ----

std::vector<size_t> select_at(std::span<const double> frequencies, double pi) {
    if (!(pi >= 0.0 && pi <= 1.0)) throw SpecError("threshold pi must be in [0, 1]");
    std::vector<size_t> out;
    for (size_t k = 0; k < frequencies.size(); ++k)
        if (frequencies[k] >= pi) out.push_back(k);
    return out;
}

SelectionRun consolidate(const std::vector<std::vector<size_t>>& per_replicate, size_t K, double pi) {
    if (per_replicate.empty()) throw SelectionError("cannot consolidate an empty replicate list");
    SelectionRun run;
    run.B = per_replicate.size();
    run.K = K;
    run.per_replicate = per_replicate;
    run.pi = pi;
    std::vector<double> counts(K, 0.0);
    for (const auto& set : per_replicate) {
        std::vector<uint8_t> seen(K, 0);
        for (size_t k : set) {
            if (k >= K) throw SpecError("selected index " + std::to_string(k) + " out of range");
            if (!seen[k]) counts[k] += 1.0;
            seen[k] = 1;
        }
    }
    run.frequencies.resize(K);
    for (size_t k = 0; k < K; ++k) run.frequencies[k] = counts[k] / static_cast<double>(run.B);
    run.final_set = select_at(run.frequencies, pi);
    return run;
}

// ---- pipeline ----

std::vector<size_t> select_single(Method method, const Dataset& data, const MethodConfig& cfg, const Rng& rng) {
    switch (method) {
        case Method::Bart:
            return select_bart_permutation(data.X, data.y, cfg.permutation, cfg.bart, rng).threshold.selected;
        case Method::RF: return select_recursive(data.X, data.y, Learner::RF, cfg.recursive, rng).selected;
        case Method::CRF: return select_recursive(data.X, data.y, Learner::CRF, cfg.recursive, rng).selected;
        case Method::GBM: return select_recursive(data.X, data.y, Learner::GBM, cfg.recursive, rng).selected;
        case Method::Lasso: return lasso_select(fit_lasso_path(data.X, data.y, cfg.lasso, rng));
        case Method::Stepwise: return stepwise_select(data.X, data.y, cfg.stepwise).selected;
    }
    return {};
}

PipelineResult select_with_missing(const DataMatrix& d, const std::vector<Method>& methods, const ImputeMethod& impute,
                                   size_t B, const MethodConfig& cfg, const Rng& rng, double max_fail_frac) {
    if (methods.empty()) throw SpecError("no selection methods requested");
    const BootstrapImputeSet set = bootstrap_impute(d, B, impute, rng.split(0));

    PipelineResult res;
    res.B = B;
    res.K = d.cols();
    res.names = d.names();
    res.impute_failures = set.failures;

    const size_t R = set.replicates.size();
    const size_t M = methods.size();
    std::vector<std::optional<std::vector<size_t>>> out(R * M);
    std::vector<std::string> errors(R * M);
    parallel_for(R * M, [&](size_t task) {
        const size_t r = task / M;
        const Method method = methods[task % M];
        try {
            const DataMatrix& rep = set.replicates[r];
            const Dataset ds = rep.complete() ? to_dataset(rep) : to_dataset(rep.complete_cases());
            const Rng task_rng = rng.split(1).split(static_cast<uint64_t>(method)).split(set.replicate_ids[r]);
            out[task] = select_single(method, ds, cfg, task_rng);
        } catch (const Error& e) {
            errors[task] = e.what();
        }
    });

    for (size_t m = 0; m < M; ++m) {
        MethodRun run;
        run.method = methods[m];
        for (size_t r = 0; r < R; ++r) {
            const size_t task = r * M + m;
            if (out[task]) {
                run.per_replicate.push_back(std::move(*out[task]));
                run.replicate_ids.push_back(set.replicate_ids[r]);
            } else {
                run.failures.push_back({set.replicate_ids[r], errors[task]});
                log::warn(std::string(to_string(run.method)) + " failed on replicate " +
                          std::to_string(set.replicate_ids[r] + 1) + ": " + errors[task]);
            }
        }
        const size_t failed = set.failures.size() + run.failures.size();
        if (static_cast<double>(failed) > max_fail_frac * static_cast<double>(B))
            throw PipelineError(std::string(to_string(run.method)) + ": " + std::to_string(failed) + " of " +
                                std::to_string(B) + " replicates failed");
        run.frequencies = consolidate(run.per_replicate, res.K, 1.0).frequencies;
        res.runs.push_back(std::move(run));
    }
    return res;
}

} // namespace mivs
