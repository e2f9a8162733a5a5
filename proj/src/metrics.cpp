#include "mivs/metrics.h"

#include <algorithm>
#include <fstream>

#include "mivs/csv.h"
#include "mivs/error.h"

namespace mivs {

TruthSpec::TruthSpec(size_t K_, std::vector<size_t> useful_) : K(K_), useful(std::move(useful_)) {
    std::sort(useful.begin(), useful.end());
    useful.erase(std::unique(useful.begin(), useful.end()), useful.end());
    if (!useful.empty() && useful.back() >= K) throw SpecError("useful index out of range");
}

bool TruthSpec::is_useful(size_t k) const { return std::binary_search(useful.begin(), useful.end(), k); }

std::vector<size_t> TruthSpec::noise() const {
    std::vector<size_t> out;
    for (size_t k = 0; k < K; ++k)
        if (!is_useful(k)) out.push_back(k);
    return out;
}

double SelectionScore::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }

double SelectionScore::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }

double SelectionScore::f1() const { return harmonic_f1(precision(), recall()); }

double harmonic_f1(double precision, double recall) {
    return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

SelectionScore score(std::span<const size_t> selected, const TruthSpec& truth) {
    std::vector<uint8_t> chosen(truth.K, 0);
    for (size_t k : selected) {
        if (k >= truth.K) throw SpecError("selected index " + std::to_string(k) + " out of range");
        chosen[k] = 1;
    }
    SelectionScore s;
    for (size_t k = 0; k < truth.K; ++k) {
        if (truth.is_useful(k)) {
            (chosen[k] ? s.tp : s.fn) += 1;
        } else {
            s.fp += chosen[k];
            s.noise_selected.push_back(chosen[k]);
        }
    }
    return s;
}

MetricsReport aggregate(const std::vector<std::vector<size_t>>& selections, const TruthSpec& truth) {
    if (selections.empty()) throw SpecError("no replications to aggregate");
    MetricsReport r;
    r.replications = selections.size();
    r.frequency.assign(truth.K, 0.0);
    const double R = static_cast<double>(r.replications);
    std::vector<size_t> hits(truth.K, 0);
    for (const auto& sel : selections) {
        SelectionScore s = score(sel, truth);
        r.precision += s.precision();
        r.recall += s.recall();
        r.f1_mean += s.f1();
        std::vector<uint8_t> seen(truth.K, 0);
        for (size_t k : sel) seen[k] = 1;
        for (size_t k = 0; k < truth.K; ++k) hits[k] += seen[k];
        r.counts.push_back(std::move(s));
    }
    r.precision /= R;
    r.recall /= R;
    r.f1_mean /= R;
    for (size_t k = 0; k < truth.K; ++k) r.frequency[k] = static_cast<double>(hits[k]) / R;
    r.f1 = harmonic_f1(r.precision, r.recall);
    const auto noise = truth.noise();
    for (size_t k : noise) r.type1 += r.frequency[k];
    if (!noise.empty()) r.type1 /= static_cast<double>(noise.size());
    for (size_t k : truth.useful) r.power.push_back(r.frequency[k]);
    return r;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

} // namespace

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "method,scenario,pi,replications,failures,precision,recall,f1,f1_mean,type1\n";
    for (const auto& row : rows) {
        const auto& m = row.report;
        out << row.method << ',' << row.scenario << ',' << row.pi << ',' << m.replications << ',' << row.failures << ','
            << format_double(m.precision) << ',' << format_double(m.recall) << ',' << format_double(m.f1) << ','
            << format_double(m.f1_mean) << ',' << format_double(m.type1) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_power_csv(const std::vector<MetricsRow>& rows, const std::vector<std::string>& names,
                     const TruthSpec& truth, const std::filesystem::path& path) {
    if (names.size() != truth.K) throw SpecError("variable names do not match the truth width");
    auto out = open_out(path);
    out << "method,scenario,pi,variable,useful,frequency\n";
    for (const auto& row : rows)
        for (size_t k = 0; k < truth.K; ++k)
            out << row.method << ',' << row.scenario << ',' << row.pi << ',' << names[k] << ','
                << (truth.is_useful(k) ? 1 : 0) << ',' << format_double(row.report.frequency[k]) << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

} // namespace mivs
