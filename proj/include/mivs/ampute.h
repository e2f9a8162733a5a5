#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mivs/data.h"
#include "mivs/rng.h"

namespace mivs {

enum class TailType { RightTailed, BothTailed };

const char* to_string(TailType t);
TailType tail_type_from_string(const std::string& s);

// One missingness pattern. `weights` maps a column name to its weight in the
// weighted sum score; names may be base predictors, derived columns of the
// plan's TransformSpec, or the outcome.
struct Pattern {
    std::vector<std::string> amputed;
    std::map<std::string, double> weights;
    TailType tail = TailType::RightTailed;
    double missing_frac = 0.5;  // target within-pattern missingness
};

struct AmputationPlan {
    TransformSpec transforms;
    std::vector<Pattern> patterns;
    std::vector<double> proportions;  // share of rows assigned to each pattern
};

struct WssResult {
    std::vector<double> raw;
    std::vector<double> scores;  // standardized within the subset
    bool mcar = false;           // scores degenerate to a constant
};

// Weighted sum scores of `rows` of `q`, which must already carry the plan's
// derived columns. Throws SpecError when a weight names an unknown column or a
// nonzero weight touches an amputed variable or one of its transforms.
WssResult weighted_sum_scores(const DataMatrix& q, const TransformSpec& t, const Pattern& p,
                              std::span<const size_t> rows);

// Missingness probabilities logit^-1(c + s_i) (right-tailed) or
// logit^-1(c + |s_i - median(s)|) (both-tailed), with c found by bisection so
// the mean probability equals `target`. Throws CalibrationError.
std::vector<double> missingness_probs(std::span<const double> scores, TailType tail, double target);

struct AmputeReport {
    DataMatrix data;
    std::vector<int> pattern_of_row;     // -1 never happens; index into plan.patterns
    std::vector<double> score_of_row;    // standardized wss used for the row
    std::vector<uint8_t> masked_row;     // row drew a missingness event
    std::vector<uint8_t> mcar_pattern;   // per pattern
};

AmputeReport ampute_detailed(const DataMatrix& d, const AmputationPlan& plan, const Rng& rng);
DataMatrix ampute(const DataMatrix& d, const AmputationPlan& plan, const Rng& rng);

// Validates shape constraints (proportions, fractions, names) against `d`.
void validate_plan(const AmputationPlan& plan, const DataMatrix& d);

// JSON text form:
// {"transforms": [{"name": "x5*x6", "op": "product", "inputs": ["x5", "x6"]}],
//  "patterns": [{"amputed": ["y"], "weights": {"x1": 5}, "tail": "right", "missing_frac": 0.6}],
//  "proportions": [1.0]}
AmputationPlan parse_plan(const std::string& json_text);
std::string plan_to_json(const AmputationPlan& plan);
AmputationPlan load_plan(const std::filesystem::path& path);

} // namespace mivs
