#include "mivs/sim.h"

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>

#include "mivs/csv.h"
#include "mivs/error.h"
#include "mivs/log.h"
#include "mivs/parallel.h"

namespace mivs {

const char* to_string(GammaParam g) { return g == GammaParam::ShapeRate ? "shape-rate" : "shape-scale"; }

GammaParam gamma_param_from_string(const std::string& s) {
    if (s == "shape-rate") return GammaParam::ShapeRate;
    if (s == "shape-scale") return GammaParam::ShapeScale;
    throw SpecError("unknown gamma parameterization '" + s + "'");
}

void DgpSpec::validate() const {
    if (n < 50) throw SpecError("DGP sample size must be >= 50");
    if (!(x6_shape > 0 && x6_second > 0)) throw SpecError("x6 gamma parameters must be positive");
}

Generated generate(const DgpSpec& dgp, const Rng& rng) {
    dgp.validate();
    const size_t n = dgp.n;
    const size_t K = dgp.K();
    std::vector<Column> cols(K);
    for (size_t k = 0; k < K; ++k) {
        cols[k].name = "x" + std::to_string(k + 1);
        cols[k].values.resize(n);
        cols[k].missing.assign(n, 0);
        const bool binary = k < 2 || k >= 10 + dgp.n_noise_cont;
        cols[k].kind = binary ? ColumnKind::Binary : ColumnKind::Continuous;
    }
    const double scale = dgp.gamma == GammaParam::ShapeRate ? 1.0 / dgp.x6_second : dgp.x6_second;

    std::vector<double> y(n);
    Rng r = rng;
    for (size_t i = 0; i < n; ++i) {
        const double x1 = r.bernoulli(0.5), x2 = r.bernoulli(0.5);
        const double x3 = r.normal(), x4 = r.normal(), x5 = r.normal();
        const double x6 = r.gamma(dgp.x6_shape, scale);
        const double x7 = r.normal(-0.4 * x5 + 0.4 * x6 + 0.3 * x5 * x6, 1.0);
        const double x8 = r.normal(0.1 * x5 * (x6 - 2) * (x6 - 2) - 0.1 * x7 * x7, 1.0);
        const double x9 = r.normal(0.5 * x3 + 0.3 * x4 - 0.3 * x5 * x5 + 0.2 * x3 * x4, 1.0);
        const double x10 = r.normal(0.1 * x3 * x3 * x3 - 0.3 * x4 - 0.4 * x5 + 0.2 * x9 * x9 + 0.3 * x4 * x5, 1.0);
        const double xs[10] = {x1, x2, x3, x4, x5, x6, x7, x8, x9, x10};
        for (size_t k = 0; k < 10; ++k) cols[k].values[i] = xs[k];
        for (size_t k = 10; k < K; ++k)
            cols[k].values[i] = k < 10 + dgp.n_noise_cont ? r.normal() : static_cast<double>(r.bernoulli(0.5));

        const double eta = -2.7 + 1.8 * x1 + 0.5 * x2 + 1.1 * x3 - 0.4 * std::exp(x5) -
                           0.4 * (x6 - 3.5) * (x6 - 3.5) + 0.3 * std::pow(x7 - 1, 3) + 1.1 * x8 - 1.1 * x10 +
                           5 * std::sin(0.1 * std::numbers::pi * x4 * x9) - 0.4 * x5 * x10 * x10 +
                           0.4 * x3 * x3 * x8;
        y[i] = r.bernoulli(1.0 / (1.0 + std::exp(-eta)));
    }

    Generated g;
    g.data = DataMatrix(std::move(cols), std::move(y), std::vector<uint8_t>(n, 0), "y");
    g.truth = TruthSpec(K, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    return g;
}

const char* to_string(Missingness m) {
    switch (m) {
        case Missingness::Complete: return "complete";
        case Missingness::Pct15: return "pct15";
        case Missingness::Pct30: return "pct30";
        case Missingness::Pct60: return "pct60";
    }
    return "?";
}

Missingness missingness_from_string(const std::string& s) {
    if (s == "complete") return Missingness::Complete;
    if (s == "pct15") return Missingness::Pct15;
    if (s == "pct30") return Missingness::Pct30;
    if (s == "pct60") return Missingness::Pct60;
    throw SpecError("unknown missingness level '" + s + "'");
}

AmputationPlan build_scenario_plan(Missingness miss) {
    double frac = 0.0;
    std::vector<double> props;
    switch (miss) {
        case Missingness::Complete: throw SpecError("the complete scenario has no amputation plan");
        case Missingness::Pct15:
            frac = 0.15;
            props = {0.30, 0.09, 0.09, 0.08, 0.08, 0.16, 0.10, 0.10};
            break;
        case Missingness::Pct30:
            frac = 0.30;
            props = {0.20, 0.15, 0.15, 0.10, 0.10, 0.10, 0.10, 0.10};
            break;
        case Missingness::Pct60:
            frac = 0.60;
            props = {0.30, 0.09, 0.09, 0.08, 0.08, 0.16, 0.10, 0.10};
            break;
    }

    AmputationPlan plan;
    plan.transforms.square("x6")
        .product("x4", "x9")
        .product("x5", "x10")
        .product("x3", "x8")
        .product("x5", "x6")
        .square("x7")
        .square("x5")
        .product("x3", "x4")
        .product("x4", "x5");
    plan.proportions = props;

    auto add = [&](std::vector<std::string> amputed, std::map<std::string, double> w, TailType tail) {
        plan.patterns.push_back({std::move(amputed), std::move(w), tail, frac});
    };
    const auto R = TailType::RightTailed;
    const auto B = TailType::BothTailed;
    add({"y"},
        {{"x1", 5}, {"x2", 5}, {"x3", 1}, {"x5", -1}, {"x6", -1}, {"x7", 1}, {"x8", 1}, {"x10", 1},
         {"x6^2", -0.5}, {"x4*x9", 1.5}, {"x5*x10", -0.5}, {"x3*x8", 0.5}},
        R);
    add({"x7"}, {{"x5", 1}, {"x6", 1}, {"x5*x6", 1}}, R);
    add({"x8"}, {{"y", 5}, {"x5", 1}, {"x6", 1}, {"x7", 1}, {"x7^2", 1}, {"x5*x6", 1}}, R);
    add({"x9"}, {{"y", 5}, {"x3", 1}, {"x4", 1}, {"x5", 1}, {"x5^2", 1}, {"x3*x4", 1}}, R);
    add({"x10"}, {{"y", 5}, {"x3", 1}, {"x4", 1}, {"x5", 1}, {"x9", 1}, {"x4*x5", 1}}, R);
    add({"y", "x7", "x8"}, {{"x5", 1}, {"x6", 1}}, B);
    add({"y", "x8", "x10"}, {{"x5", 1}}, B);
    add({"y", "x9", "x10"}, {{"x3", 1}, {"x4", 1}, {"x5^2", 0.5}, {"x3*x4", 0.5}}, B);
    return plan;
}

std::vector<double> ScenarioSpec::default_pi_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 10; ++i) g.push_back(i / 10.0);
    return g;
}

std::string ScenarioSpec::name() const {
    std::string s = to_string(missingness);
    if (missingness != Missingness::Complete) s += std::string("-") + to_string(impute.kind);
    return s;
}

void ScenarioSpec::validate() const {
    if (methods.empty()) throw SpecError("scenario has no methods");
    if (M < 1) throw SpecError("scenario needs M >= 1");
    if (missingness == Missingness::Complete && impute.kind != ImputeKind::None)
        throw SpecError("the complete scenario takes no imputation");
    if (missingness != Missingness::Complete) {
        if (B < 1) throw SpecError("scenario needs B >= 1");
        if (pi_grid.empty()) throw SpecError("scenario needs a non-empty pi grid");
        for (double p : pi_grid)
            if (!(p >= 0 && p <= 1)) throw SpecError("pi grid values must be in [0, 1]");
        impute.validate();
    }
}

namespace {

struct ReplicationOutcome {
    // per method: bootstrap frequencies (MI) or 0/1 indicators (direct)
    std::vector<std::optional<std::vector<double>>> main;
    std::vector<std::optional<std::vector<double>>> cc;
    std::vector<std::string> errors;
};

std::vector<double> indicator(const std::vector<size_t>& sel, size_t K) {
    std::vector<double> v(K, 0.0);
    for (size_t k : sel) v[k] = 1.0;
    return v;
}

} // namespace

ScenarioResult run_scenario(const ScenarioSpec& spec, const DgpSpec& dgp, const Rng& rng) {
    spec.validate();
    dgp.validate();
    const size_t K = dgp.K();
    const size_t NM = spec.methods.size();
    const bool complete = spec.missingness == Missingness::Complete;
    const std::optional<AmputationPlan> plan =
        complete ? std::nullopt : std::optional<AmputationPlan>(build_scenario_plan(spec.missingness));

    std::vector<ReplicationOutcome> reps(spec.M);
    parallel_for(spec.M, [&](size_t r) {
        const Rng rr = rng.split(r);
        ReplicationOutcome& out = reps[r];
        out.main.resize(NM);
        out.cc.resize(NM);
        const std::string tag = "replication " + std::to_string(r + 1);
        Generated g;
        DataMatrix obs;
        try {
            g = generate(dgp, rr.split(1));
            obs = complete ? g.data : ampute(g.data, *plan, rr.split(2));
        } catch (const Error& e) {
            out.errors.push_back(tag + ": " + e.what());
            return;
        }

        if (complete) {
            const Dataset ds = to_dataset(obs);
            for (size_t m = 0; m < NM; ++m) {
                try {
                    out.main[m] = indicator(select_single(spec.methods[m], ds, spec.config, rr.split(3).split(m)), K);
                } catch (const Error& e) {
                    out.errors.push_back(tag + " " + to_string(spec.methods[m]) + ": " + e.what());
                }
            }
        } else {
            try {
                const PipelineResult pr =
                    select_with_missing(obs, spec.methods, spec.impute, spec.B, spec.config, rr.split(3), 1.0);
                for (size_t m = 0; m < NM; ++m) {
                    const MethodRun& run = pr.runs[m];
                    const size_t failed = pr.impute_failures.size() + run.failures.size();
                    if (run.per_replicate.empty() || static_cast<double>(failed) > 0.2 * static_cast<double>(spec.B))
                        out.errors.push_back(tag + " " + to_string(spec.methods[m]) + ": " + std::to_string(failed) +
                                             " of " + std::to_string(spec.B) + " bootstrap replicates failed");
                    else
                        out.main[m] = run.frequencies;
                }
            } catch (const Error& e) {
                out.errors.push_back(tag + ": " + e.what());
            }
        }

        if (spec.complete_case && !complete) {
            try {
                const Dataset cc = to_dataset(obs.complete_cases());
                for (size_t m = 0; m < NM; ++m) {
                    try {
                        out.cc[m] =
                            indicator(select_single(spec.methods[m], cc, spec.config, rr.split(5).split(m)), K);
                    } catch (const Error& e) {
                        out.errors.push_back(tag + " cc " + to_string(spec.methods[m]) + ": " + e.what());
                    }
                }
            } catch (const Error& e) {
                out.errors.push_back(tag + " cc: " + e.what());
            }
        }
    });

    ScenarioResult res;
    res.scenario = spec.name();
    for (size_t k = 0; k < K; ++k) res.names.push_back("x" + std::to_string(k + 1));
    res.truth = TruthSpec(K, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    for (const auto& rep : reps)
        for (const auto& e : rep.errors) {
            res.failure_messages.push_back(e);
            log::warn(e);
        }

    auto emit = [&](bool cc_rows) {
        const std::string scen = cc_rows ? res.scenario + "-cc" : res.scenario;
        for (size_t m = 0; m < NM; ++m) {
            const std::string method = to_string(spec.methods[m]);
            std::vector<const std::vector<double>*> ok;
            for (size_t r = 0; r < spec.M; ++r) {
                const auto& slot = cc_rows ? reps[r].cc[m] : reps[r].main[m];
                if (slot) {
                    ok.push_back(&*slot);
                    res.frequencies.push_back({method, scen, r + 1, *slot});
                }
            }
            const size_t failures = spec.M - ok.size();
            res.failed += failures;
            if (ok.empty()) {
                log::warn(method + " on " + scen + ": every replication failed; no metrics row");
                continue;
            }
            const bool direct = complete || cc_rows;
            const std::vector<double> grid = direct ? std::vector<double>{1.0} : spec.pi_grid;
            for (double pi : grid) {
                std::vector<std::vector<size_t>> sels;
                for (const auto* f : ok) sels.push_back(select_at(*f, pi));
                res.rows.push_back({method, scen, direct ? "direct" : format_double(pi), aggregate(sels, res.truth),
                                    failures});
            }
        }
    };
    emit(false);
    if (spec.complete_case && !complete) emit(true);
    return res;
}

void write_scenario_outputs(const ScenarioResult& res, const std::filesystem::path& outdir) {
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (ec) throw IoError("cannot create '" + outdir.string() + "': " + ec.message());
    write_metrics_csv(res.rows, outdir / "metrics.csv");
    write_power_csv(res.rows, res.names, res.truth, outdir / "power.csv");
    const auto path = outdir / "frequencies.csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "method,scenario,replication,variable,frequency\n";
    for (const auto& f : res.frequencies)
        for (size_t k = 0; k < f.frequency.size(); ++k)
            out << f.method << ',' << f.scenario << ',' << f.replication << ',' << res.names[k] << ','
                << format_double(f.frequency[k]) << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

} // namespace mivs
