#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mivs {

// Useful variables; everything else among the K columns is noise.
struct TruthSpec {
    size_t K = 0;
    std::vector<size_t> useful;

    TruthSpec() = default;
    TruthSpec(size_t K, std::vector<size_t> useful);

    bool is_useful(size_t k) const;
    std::vector<size_t> noise() const;
    size_t n_noise() const { return K - useful.size(); }
};

struct SelectionScore {
    size_t tp = 0, fp = 0, fn = 0;
    std::vector<uint8_t> noise_selected;  // indicator per noise variable, in TruthSpec::noise() order

    double precision() const;  // 0 for an empty selection
    double recall() const;
    double f1() const;
};

// Throws SpecError when an index is >= K. Duplicates count once.
SelectionScore score(std::span<const size_t> selected, const TruthSpec& truth);

struct MetricsReport {
    size_t replications = 0;
    double precision = 0.0;  // mean of per-replication ratios
    double recall = 0.0;
    double f1 = 0.0;       // harmonic mean of the averaged precision and recall
    double f1_mean = 0.0;  // mean of per-replication F1
    double type1 = 0.0;    // mean over noise variables of their selection frequency
    std::vector<double> frequency;  // per variable, all K
    std::vector<double> power;      // per useful variable, in TruthSpec::useful order
    std::vector<SelectionScore> counts;
};

double harmonic_f1(double precision, double recall);

// Throws SpecError on an empty list.
MetricsReport aggregate(const std::vector<std::vector<size_t>>& selections, const TruthSpec& truth);

struct MetricsRow {
    std::string method;
    std::string scenario;
    std::string pi;  // formatted, or "direct" for single selections
    MetricsReport report;
    size_t failures = 0;
};

// One row per (method, scenario, pi).
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);

// Long format: method, scenario, pi, variable, useful, frequency.
void write_power_csv(const std::vector<MetricsRow>& rows, const std::vector<std::string>& names,
                     const TruthSpec& truth, const std::filesystem::path& path);

} // namespace mivs
