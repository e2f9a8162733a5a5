#pragma once

#include <string>
#include <vector>

#include "mivs/data.h"
#include "mivs/rng.h"

namespace mivs {

struct ChainedParams {
    int iterations = 10;
    int pmm_k = 5;
};

struct ForestImputeParams {
    int max_iterations = 10;
    size_t n_trees = 100;
};

enum class ImputeKind { None, Chained, Forest };

const char* to_string(ImputeKind k);
ImputeKind impute_kind_from_string(const std::string& s);  // "none", "mice", "forest"

struct ImputeMethod {
    ImputeKind kind = ImputeKind::Chained;
    ChainedParams chained;
    ForestImputeParams forest;

    void validate() const;
};

struct ImputeDiagnostics {
    int iterations = 0;                   // sweeps performed
    int returned_iteration = 0;           // forest: iterate handed back
    size_t ridge_fallbacks = 0;           // chained: regularized conditional fits
    std::vector<double> diff_continuous;  // forest: per-iteration difference criteria
    std::vector<double> diff_binary;
};

// Chained equations. Missing cells start as random draws from the observed
// values of their column; each sweep visits the incomplete predictors in
// column order and then the outcome, regressing the target on every other
// column (outcome included). Continuous targets use a posterior draw of the
// least-squares coefficients and predictive mean matching over the pmm_k
// nearest observed predictions; binary targets use a posterior draw of the
// logistic coefficients and a Bernoulli draw. Throws ImputationError.
DataMatrix impute_chained(const DataMatrix& d, const ChainedParams& params, const Rng& rng,
                          ImputeDiagnostics* diag = nullptr);

// Iterative forest imputation. Missing cells start at the column mean (mode
// for binary columns); each iteration visits incomplete columns in increasing
// order of missingness and refits a forest of the column on all others. The
// loop stops at the first iteration where no difference criterion decreased
// and returns the iterate before it.
DataMatrix impute_forest(const DataMatrix& d, const ForestImputeParams& params, const Rng& rng,
                         ImputeDiagnostics* diag = nullptr);

DataMatrix impute(const DataMatrix& d, const ImputeMethod& method, const Rng& rng, ImputeDiagnostics* diag = nullptr);

struct ReplicateFailure {
    size_t replicate;  // 0-based
    std::string message;
};

struct BootstrapImputeSet {
    size_t B = 0;
    std::vector<DataMatrix> replicates;           // successful replicates in index order
    std::vector<size_t> replicate_ids;            // their 0-based replicate indices
    std::vector<std::vector<size_t>> rows;        // resampled source rows per successful replicate
    std::vector<uint64_t> streams;                // RNG stream of each successful replicate
    std::vector<ReplicateFailure> failures;
};

// B with-replacement resamples (masks travel with rows), each singly imputed
// with its own stream rng.split(b). With ImputeKind::None the resamples are
// returned unimputed. Failed replicates are recorded and excluded.
BootstrapImputeSet bootstrap_impute(const DataMatrix& d, size_t B, const ImputeMethod& method, const Rng& rng);

} // namespace mivs
