#include "mivs/stepwise.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "mivs/error.h"
#include "mivs/glm.h"
#include "mivs/log.h"

namespace mivs {

namespace {

Eigen::MatrixXd columns_of(const Eigen::MatrixXd& X, const std::vector<size_t>& cols) {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(cols[j]));
    return out;
}

} // namespace

StepwiseTrace stepwise_select(const Eigen::MatrixXd& X, std::span<const double> y, const StepwiseParams& params) {
    if (!(params.alpha > 0 && params.alpha < 1)) throw FitError("stepwise: alpha must be in (0, 1)");
    if (!(params.epsilon > 0 && params.epsilon < 1)) throw FitError("stepwise: epsilon must be in (0, 1)");
    const size_t n = static_cast<size_t>(X.rows());
    const size_t K = static_cast<size_t>(X.cols());
    if (y.size() != n) throw FitError("stepwise: X and y row mismatch");

    StepwiseTrace trace;
    trace.alpha = params.alpha;
    trace.alpha2 = params.alpha * (1.0 - params.epsilon);
    if (K == 0) return trace;

    auto fit = [&](const std::vector<size_t>& cols) {
        LogisticFit f = fit_logistic(columns_of(X, cols), y);
        trace.ridge_stabilized = trace.ridge_stabilized || f.ridge_stabilized;
        return f;
    };

    std::vector<size_t> active(K);
    std::iota(active.begin(), active.end(), size_t{0});
    if (n <= K + 1) {
        std::vector<std::pair<double, size_t>> marginal;
        for (size_t k = 0; k < K; ++k) marginal.emplace_back(fit({k}).wald_p(0), k);
        std::stable_sort(marginal.begin(), marginal.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        active.clear();
        for (size_t j = 0; j < std::max<size_t>(1, n / 2) && j < marginal.size(); ++j)
            active.push_back(marginal[j].second);
        std::sort(active.begin(), active.end());
        trace.prescreened = true;
    }
    trace.start = active;

    std::set<size_t> removed;
    const size_t cap = 2 * K * (K + 1);
    while (!active.empty()) {
        if (trace.steps.size() >= cap) {
            trace.truncated = true;
            log::warn("stepwise: step cap reached; stopping");
            break;
        }
        const LogisticFit f = fit(active);
        size_t worst = 0;
        double worst_p = -1.0;
        for (size_t j = 0; j < active.size(); ++j) {
            const double p = f.wald_p(static_cast<Eigen::Index>(j));
            if (p > worst_p) {
                worst_p = p;
                worst = j;
            }
        }
        if (!(worst_p > params.alpha)) break;
        const size_t var = active[worst];
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(worst));
        trace.steps.push_back({StepAction::Remove, var, worst_p});

        double best_p = 2.0;
        size_t best = 0;
        for (size_t cand : removed) {
            std::vector<size_t> trial = active;
            trial.insert(std::upper_bound(trial.begin(), trial.end(), cand), cand);
            const size_t pos = static_cast<size_t>(std::find(trial.begin(), trial.end(), cand) - trial.begin());
            const double p = fit(trial).wald_p(static_cast<Eigen::Index>(pos));
            if (p < best_p) {
                best_p = p;
                best = cand;
            }
        }
        removed.insert(var);
        if (best_p < trace.alpha2) {
            removed.erase(best);
            active.insert(std::upper_bound(active.begin(), active.end(), best), best);
            trace.steps.push_back({StepAction::AddBack, best, best_p});
        }
    }
    trace.selected = active;
    return trace;
}

std::vector<size_t> replay_trace(const StepwiseTrace& trace) {
    std::set<size_t> s(trace.start.begin(), trace.start.end());
    for (const auto& st : trace.steps) {
        if (st.action == StepAction::Remove)
            s.erase(st.var);
        else
            s.insert(st.var);
    }
    return {s.begin(), s.end()};
}

} // namespace mivs
