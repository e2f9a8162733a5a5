#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mivs {

struct StepwiseParams {
    double alpha = 0.05;    // removal level
    double epsilon = 0.05;  // re-entry level is alpha * (1 - epsilon)
};

enum class StepAction { Remove, AddBack };

struct StepwiseStep {
    StepAction action;
    size_t var;
    double p_value;
};

struct StepwiseTrace {
    std::vector<StepwiseStep> steps;
    std::vector<size_t> selected;   // sorted column indices
    std::vector<size_t> start;      // model the search started from
    double alpha = 0.05;
    double alpha2 = 0.0475;
    bool prescreened = false;       // n <= K + 1 forced a marginal pre-screen
    bool ridge_stabilized = false;  // some logistic fit needed the ridge fallback
    bool truncated = false;         // hit the 2K(K+1) step cap
};

// Backward elimination on Wald p-values of a logistic model, with re-entry of
// previously removed variables at the stricter level alpha2.
StepwiseTrace stepwise_select(const Eigen::MatrixXd& X, std::span<const double> y, const StepwiseParams& params = {});

// Replays a trace from its starting model.
std::vector<size_t> replay_trace(const StepwiseTrace& trace);

} // namespace mivs
