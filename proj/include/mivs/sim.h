#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mivs/ampute.h"
#include "mivs/data.h"
#include "mivs/metrics.h"
#include "mivs/rng.h"
#include "mivs/select.h"

namespace mivs {

enum class GammaParam { ShapeRate, ShapeScale };

const char* to_string(GammaParam g);
GammaParam gamma_param_from_string(const std::string& s);  // shape-rate, shape-scale

struct DgpSpec {
    size_t n = 1000;
    size_t n_noise_cont = 20;
    size_t n_noise_bin = 20;
    double x6_shape = 4.0;
    double x6_second = 6.0;  // rate or scale, per `gamma`
    GammaParam gamma = GammaParam::ShapeRate;

    void validate() const;
    size_t K() const { return 10 + n_noise_cont + n_noise_bin; }
};

struct Generated {
    DataMatrix data;
    TruthSpec truth;
};

// Columns x1..x10 (useful), then the continuous and binary noise columns, outcome y.
Generated generate(const DgpSpec& dgp, const Rng& rng);

enum class Missingness { Complete, Pct15, Pct30, Pct60 };

const char* to_string(Missingness m);
Missingness missingness_from_string(const std::string& s);  // complete, pct15, pct30, pct60

// The eight-pattern plan over x3..x10 and y. Throws SpecError for Complete.
AmputationPlan build_scenario_plan(Missingness miss);

struct ScenarioSpec {
    Missingness missingness = Missingness::Complete;
    ImputeMethod impute{ImputeKind::None, {}, {}};
    std::vector<Method> methods = {Method::Lasso};
    std::vector<double> pi_grid = default_pi_grid();
    size_t M = 25;
    size_t B = 100;
    bool complete_case = false;  // extra rows from selection on complete cases
    MethodConfig config;

    static std::vector<double> default_pi_grid();  // 0.1, 0.2, ..., 1.0
    std::string name() const;                       // e.g. "pct15-mice"
    void validate() const;
};

struct FrequencyRecord {
    std::string method;
    std::string scenario;
    size_t replication = 0;
    std::vector<double> frequency;  // Pi_k per variable; 0/1 for direct selections
};

struct ScenarioResult {
    std::string scenario;
    std::vector<std::string> names;
    TruthSpec truth;
    std::vector<MetricsRow> rows;
    std::vector<FrequencyRecord> frequencies;
    size_t failed = 0;  // (replication, method) pairs excluded
    std::vector<std::string> failure_messages;
};

// M replications of generate, ampute and selection. Replication r draws from
// rng.split(r). Complete scenarios run each method once per replication;
// otherwise the bootstrap pipeline runs and every pi in the grid is scored.
ScenarioResult run_scenario(const ScenarioSpec& spec, const DgpSpec& dgp, const Rng& rng);

// metrics.csv, power.csv and frequencies.csv under `outdir`.
void write_scenario_outputs(const ScenarioResult& res, const std::filesystem::path& outdir);

} // namespace mivs
