#pragma once

#include <string>
#include <vector>

#include "mivs/bart.h"
#include "mivs/boost.h"
#include "mivs/data.h"
#include "mivs/forest.h"
#include "mivs/impute.h"
#include "mivs/lasso.h"
#include "mivs/rng.h"
#include "mivs/stepwise.h"

namespace mivs {

enum class Method { Bart, RF, CRF, GBM, Lasso, Stepwise };

const char* to_string(Method m);
Method method_from_string(const std::string& s);  // bart, rf, crf, gbm, lasso, stepwise
std::vector<Method> all_methods();

// Default consolidation threshold per method, within the best-performing
// ranges of the complete-data study.
double default_pi(Method m);

// ---- recursive elimination -------------------------------------------------

enum class ErrorSource { Auto, OOB, Holdout50, CV5 };

const char* to_string(ErrorSource e);
ErrorSource error_source_from_string(const std::string& s);

struct EliminationSchedule {
    double drop_frac = 0.1;
    double u = 1.0;  // SE multiplier
    ErrorSource error_source = ErrorSource::Auto;  // OOB for forests; Holdout50 (n >= 1000) or CV5 for boosting
    size_t first_trees = 5000;  // forest size for the full model
    size_t later_trees = 2000;  // forest size after the first elimination

    void validate() const;
};

struct EliminationStep {
    std::vector<size_t> vars;  // columns of the fitted model
    double error = 0.0;
    size_t n_eval = 0;
};

struct RecursiveResult {
    std::vector<size_t> selected;
    std::vector<EliminationStep> path;
    std::vector<double> importance;  // from the full model
    size_t chosen = 0;               // index into path
    double cutoff = 0.0;
};

enum class Learner { RF, CRF, GBM };

// Cutoff of the one-standard-error rule: e_min + u * sqrt(e_min (1 - e_min) / n_eval).
double se_cutoff(double e_min, size_t n_eval, double u);

// Index of the smallest set with error <= cutoff (ties: lower error, then earlier step).
size_t choose_within_se(const std::vector<EliminationStep>& path, double u, double* cutoff = nullptr);

struct RecursiveConfig {
    EliminationSchedule schedule;
    ForestParams rf;   // n_trees is taken from the schedule
    CrfParams crf;     // n_trees is taken from the schedule
    BoostParams gbm;
};

RecursiveResult select_recursive(const Eigen::MatrixXd& X, std::span<const double> y, Learner learner,
                                 const RecursiveConfig& cfg, const Rng& rng);

// ---- BART permutation thresholds -------------------------------------------

enum class ThresholdRule { Local, GlobalMax, GlobalSE };

const char* to_string(ThresholdRule r);
ThresholdRule threshold_rule_from_string(const std::string& s);

struct PermutationThreshold {
    size_t P = 100;
    double alpha = 0.05;
    ThresholdRule rule = ThresholdRule::Local;

    void validate() const;
};

struct ThresholdResult {
    std::vector<double> thresholds;  // per variable
    std::vector<size_t> selected;
    std::vector<uint8_t> degenerate;  // GlobalSE: s_k = 0, threshold fell back to m_k
    double c_star = 0.0;              // GlobalSE multiplier
};

// `null_props` is P x K (row p holds the inclusion proportions of permutation p).
ThresholdResult apply_threshold(std::span<const double> props, const Eigen::MatrixXd& null_props, ThresholdRule rule,
                                double alpha);

struct BartSelection {
    std::vector<double> props;
    Eigen::MatrixXd null_props;
    ThresholdResult threshold;
};

BartSelection select_bart_permutation(const Eigen::MatrixXd& X, std::span<const double> y,
                                      const PermutationThreshold& thr, const BartParams& bart, const Rng& rng);

// ---- consolidation ---------------------------------------------------------

struct SelectionRun {
    size_t B = 0;
    size_t K = 0;
    std::vector<std::vector<size_t>> per_replicate;
    std::vector<double> frequencies;  // Pi_k
    double pi = 0.5;
    std::vector<size_t> final_set;
};

// Variables with frequency >= pi. pi = 0 selects every variable.
std::vector<size_t> select_at(std::span<const double> frequencies, double pi);

SelectionRun consolidate(const std::vector<std::vector<size_t>>& per_replicate, size_t K, double pi);

// ---- pipeline --------------------------------------------------------------

struct MethodConfig {
    RecursiveConfig recursive;
    BartParams bart;
    PermutationThreshold permutation;
    LassoParams lasso;
    StepwiseParams stepwise;
};

// Runs one method on a complete dataset.
std::vector<size_t> select_single(Method method, const Dataset& data, const MethodConfig& cfg, const Rng& rng);

struct MethodRun {
    Method method;
    std::vector<std::vector<size_t>> per_replicate;  // successful replicates only
    std::vector<size_t> replicate_ids;
    std::vector<ReplicateFailure> failures;          // selection failures
    std::vector<double> frequencies;
};

struct PipelineResult {
    size_t B = 0;
    size_t K = 0;
    std::vector<std::string> names;
    std::vector<ReplicateFailure> impute_failures;
    std::vector<MethodRun> runs;  // one per requested method, in request order
};

// Bootstrap imputation followed by per-replicate selection for each method.
// Replicates are shared across methods. With ImputeKind::None, incomplete
// replicates are reduced to their complete cases. Throws PipelineError when
// more than `max_fail_frac` of the replicates fail for a method.
PipelineResult select_with_missing(const DataMatrix& d, const std::vector<Method>& methods, const ImputeMethod& impute,
                                   size_t B, const MethodConfig& cfg, const Rng& rng, double max_fail_frac = 0.2);

} // namespace mivs
