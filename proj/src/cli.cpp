#include "mivs/cli.h"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mivs/ampute.h"
#include "mivs/csv.h"
#include "mivs/error.h"
#include "mivs/impute.h"
#include "mivs/log.h"
#include "mivs/metrics.h"
#include "mivs/parallel.h"
#include "mivs/select.h"
#include "mivs/sim.h"

#ifndef MIVS_VERSION
#define MIVS_VERSION "0.0.0"
#endif

namespace mivs::cli {

const char* version() { return MIVS_VERSION; }

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
public:
    UsageError(const std::string& msg, std::string flag = {}) : std::runtime_error(msg), flag(std::move(flag)) {}
    std::string flag;
};

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

// Binds CLI options to keys of a JSON config. Precedence: command-line flag,
// then the settings file, then preset layers (a replayed manifest).
class Binder {
public:
    Binder(CLI::App* app, const std::string& settings_flag) : app_(app) {
        app_->add_option(settings_flag, settings_path_, "JSON file of option values; flags override it");
    }

    template <class T>
    CLI::Option* add(const std::string& key, T& var, const std::string& help, bool required = false) {
        CLI::Option* opt = app_->add_option("--" + key, var, help);
        if (required)
            opt->description(help + " (required)");
        else
            opt->capture_default_str();
        entries_.push_back({key, opt, required,
                            [&var](const json& j) { var = j.get<T>(); },
                            [&var](ojson& o, const std::string& k) { o[k] = var; }});
        return opt;
    }

    CLI::Option* flag(const std::string& key, bool& var, const std::string& help) {
        CLI::Option* opt = app_->add_flag("--" + key, var, help);
        entries_.push_back({key, opt, false,
                            [&var](const json& j) { var = j.get<bool>(); },
                            [&var](ojson& o, const std::string& k) { o[k] = var; }});
        return opt;
    }

    ojson resolve(const std::vector<json>& presets) {
        json settings = json::object();
        if (!settings_path_.empty()) {
            settings = read_json_file(settings_path_);
            if (!settings.is_object()) throw UsageError("settings file must hold a JSON object");
            for (auto it = settings.begin(); it != settings.end(); ++it)
                if (!bound(it.key())) throw UsageError("unknown settings key '" + it.key() + "'", it.key());
        }
        ojson out;
        for (auto& e : entries_) {
            bool have = e.opt->count() > 0;
            if (!have) {
                const json* src = settings.contains(e.key) ? &settings : nullptr;
                for (const auto& p : presets)
                    if (!src && p.contains(e.key)) src = &p;
                if (src) {
                    try {
                        e.load((*src)[e.key]);
                    } catch (const json::exception& ex) {
                        throw UsageError("bad value for '" + e.key + "': " + ex.what(), "--" + e.key);
                    }
                    have = true;
                }
            }
            if (e.required && !have) throw UsageError("missing required option --" + e.key, "--" + e.key);
            e.echo(out, e.key);
        }
        for (const auto& p : presets)
            for (auto it = p.begin(); it != p.end(); ++it)
                if (!bound(it.key()) && !out.contains(it.key())) out[it.key()] = it.value();
        return out;
    }

private:
    bool bound(const std::string& key) const {
        for (const auto& e : entries_)
            if (e.key == key) return true;
        return false;
    }

    struct Entry {
        std::string key;
        CLI::Option* opt;
        bool required;
        std::function<void(const json&)> load;
        std::function<void(ojson&, const std::string&)> echo;
    };
    CLI::App* app_;
    std::string settings_path_;
    std::vector<Entry> entries_;
};

// ---- shared option groups ----

struct DataVars {
    std::string outcome = "y";
    std::string na = "NA";

    void bind(Binder& b) {
        b.add("outcome", outcome, "name of the binary outcome column");
        b.add("na", na, "token marking a missing cell");
    }
};

DataMatrix load_data(const ojson& c, const std::string& key = "in") {
    const std::string path = c.at(key).get<std::string>();
    const std::string outcome = c.at("outcome").get<std::string>();
    const std::string na = c.at("na").get<std::string>();
    return load_csv(path, infer_schema(path, outcome, na), na);
}

struct ImputeVars {
    int iterations;
    int pmm_k;
    size_t impute_trees;
    int max_iter;

    ImputeVars() {
        ImputeMethod d;
        iterations = d.chained.iterations;
        pmm_k = d.chained.pmm_k;
        impute_trees = d.forest.n_trees;
        max_iter = d.forest.max_iterations;
    }

    void bind(Binder& b) {
        b.add("iterations", iterations, "chained-equation sweeps");
        b.add("pmm-k", pmm_k, "donor pool size for predictive mean matching");
        b.add("impute-trees", impute_trees, "trees per forest in forest imputation");
        b.add("max-iter", max_iter, "maximum forest imputation iterations");
    }
};

ImputeMethod impute_method(const ojson& c, const std::string& kind) {
    ImputeMethod m;
    m.kind = impute_kind_from_string(kind);
    m.chained.iterations = c.at("iterations").get<int>();
    m.chained.pmm_k = c.at("pmm-k").get<int>();
    m.forest.n_trees = c.at("impute-trees").get<size_t>();
    m.forest.max_iterations = c.at("max-iter").get<int>();
    m.validate();
    return m;
}

struct MethodVars {
    size_t bart_m, bart_draws, bart_burn, P;
    double alpha;
    std::string threshold;
    double drop_frac, u;
    std::string error_source;
    size_t trees_first, trees_later;
    double crf_alpha;
    size_t gbm_rounds;
    double gbm_eta;
    int gbm_depth;
    size_t lasso_folds, n_lambda;
    double stepwise_alpha;

    MethodVars() {
        const MethodConfig d;
        bart_m = d.bart.m;
        bart_draws = d.bart.n_draws;
        bart_burn = d.bart.burn;
        P = d.permutation.P;
        alpha = d.permutation.alpha;
        threshold = to_string(d.permutation.rule);
        drop_frac = d.recursive.schedule.drop_frac;
        u = d.recursive.schedule.u;
        error_source = to_string(d.recursive.schedule.error_source);
        trees_first = d.recursive.schedule.first_trees;
        trees_later = d.recursive.schedule.later_trees;
        crf_alpha = d.recursive.crf.alpha;
        gbm_rounds = d.recursive.gbm.nrounds;
        gbm_eta = d.recursive.gbm.eta;
        gbm_depth = d.recursive.gbm.max_depth;
        lasso_folds = d.lasso.folds;
        n_lambda = d.lasso.n_lambda;
        stepwise_alpha = d.stepwise.alpha;
    }

    void bind(Binder& b) {
        b.add("bart-m", bart_m, "BART trees");
        b.add("bart-draws", bart_draws, "BART MCMC iterations including burn-in");
        b.add("bart-burn", bart_burn, "BART burn-in iterations");
        b.add("P", P, "BART permutation count");
        b.add("alpha", alpha, "BART permutation threshold level");
        b.add("threshold", threshold, "BART threshold rule: local, global-max, global-se");
        b.add("drop-frac", drop_frac, "fraction of variables dropped per elimination step");
        b.add("u", u, "standard-error multiplier of the elimination rule");
        b.add("error-source", error_source, "elimination error: auto, oob, holdout50, cv5");
        b.add("trees-first", trees_first, "forest size for the full model");
        b.add("trees-later", trees_later, "forest size after the first elimination");
        b.add("crf-alpha", crf_alpha, "conditional forest split level");
        b.add("gbm-rounds", gbm_rounds, "boosting rounds");
        b.add("gbm-eta", gbm_eta, "boosting learning rate");
        b.add("gbm-depth", gbm_depth, "boosting tree depth");
        b.add("lasso-folds", lasso_folds, "lasso cross-validation folds");
        b.add("n-lambda", n_lambda, "lasso path length");
        b.add("stepwise-alpha", stepwise_alpha, "stepwise removal level");
    }
};

MethodConfig method_config(const ojson& c) {
    MethodConfig m;
    m.bart.m = c.at("bart-m").get<size_t>();
    m.bart.n_draws = c.at("bart-draws").get<size_t>();
    m.bart.burn = c.at("bart-burn").get<size_t>();
    if (m.bart.burn >= m.bart.n_draws) throw SpecError("bart-burn must be below bart-draws");
    m.permutation.P = c.at("P").get<size_t>();
    m.permutation.alpha = c.at("alpha").get<double>();
    m.permutation.rule = threshold_rule_from_string(c.at("threshold").get<std::string>());
    m.permutation.validate();
    m.recursive.schedule.drop_frac = c.at("drop-frac").get<double>();
    m.recursive.schedule.u = c.at("u").get<double>();
    m.recursive.schedule.error_source = error_source_from_string(c.at("error-source").get<std::string>());
    m.recursive.schedule.first_trees = c.at("trees-first").get<size_t>();
    m.recursive.schedule.later_trees = c.at("trees-later").get<size_t>();
    m.recursive.schedule.validate();
    m.recursive.crf.alpha = c.at("crf-alpha").get<double>();
    m.recursive.gbm.nrounds = c.at("gbm-rounds").get<size_t>();
    m.recursive.gbm.eta = c.at("gbm-eta").get<double>();
    m.recursive.gbm.max_depth = c.at("gbm-depth").get<int>();
    m.lasso.folds = c.at("lasso-folds").get<size_t>();
    m.lasso.n_lambda = c.at("n-lambda").get<size_t>();
    m.stepwise.alpha = c.at("stepwise-alpha").get<double>();
    return m;
}

std::vector<double> parse_pi(const std::string& s) {
    if (s == "grid") return ScenarioSpec::default_pi_grid();
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        size_t used = 0;
        double v = 0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != tok.size()) throw UsageError("--pi expects a real, a comma list or 'grid'", "--pi");
        if (!(v >= 0 && v <= 1)) throw UsageError("--pi values must be in [0, 1]", "--pi");
        out.push_back(v);
    }
    if (out.empty()) throw UsageError("--pi is empty", "--pi");
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

// ---- manifests ----

class Stopwatch {
public:
    void start(const std::string& stage) {
        stage_ = stage;
        t0_ = std::chrono::steady_clock::now();
    }
    void stop() {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        timing_[stage_] = s;
    }
    const ojson& timing() const { return timing_; }

private:
    std::string stage_;
    std::chrono::steady_clock::time_point t0_;
    ojson timing_ = ojson::object();
};

void write_manifest(const std::filesystem::path& path, const std::string& command, const ojson& config,
                    const Stopwatch& sw, const ojson& failures) {
    ojson m;
    m["command"] = command;
    m["version"] = version();
    m["seed"] = config.contains("seed") ? config["seed"] : ojson();
    m["threads"] = thread_count();
    m["config"] = config;
    m["timing"] = sw.timing();
    m["failures"] = failures;
    write_text(path, m.dump(2) + "\n");
}

ojson failure_list(const std::vector<ReplicateFailure>& fs) {
    ojson a = ojson::array();
    for (const auto& f : fs) a.push_back({{"replicate", f.replicate + 1}, {"message", f.message}});
    return a;
}

// ---- subcommands ----

struct Command {
    std::string name;
    CLI::App* app = nullptr;
    std::unique_ptr<Binder> binder;
    std::function<void(ojson&)> prepare;  // post-resolution checks and derived keys
    std::function<void(const ojson&)> run;
};

struct AmputeVars {
    std::string plan, in, out;
    uint64_t seed = 0;
    DataVars data;
};

void run_ampute(const ojson& c) {
    Stopwatch sw;
    sw.start("load");
    const DataMatrix d = load_data(c);
    const AmputationPlan plan = parse_plan(c.at("plan").dump());
    sw.stop();
    sw.start("ampute");
    const AmputeReport rep = ampute_detailed(d, plan, Rng(c.at("seed").get<uint64_t>()));
    sw.stop();
    const std::filesystem::path out = c.at("out").get<std::string>();
    save_csv(rep.data, out, c.at("na").get<std::string>());
    ojson fails;
    fails["mcar_patterns"] = ojson::array();
    for (size_t p = 0; p < rep.mcar_pattern.size(); ++p)
        if (rep.mcar_pattern[p]) fails["mcar_patterns"].push_back(p + 1);
    write_manifest(out.string() + ".manifest.json", "ampute", c, sw, fails);
}

struct ImputeCmdVars {
    std::string method = "mice", in, outdir;
    size_t B = 1;
    uint64_t seed = 0;
    DataVars data;
    ImputeVars impute;
};

void run_impute(const ojson& c) {
    Stopwatch sw;
    sw.start("load");
    const DataMatrix d = load_data(c);
    const ImputeMethod im = impute_method(c, c.at("method").get<std::string>());
    if (im.kind == ImputeKind::None) throw SpecError("impute --method must be mice or forest");
    const size_t B = c.at("B").get<size_t>();
    if (B < 1) throw SpecError("--B must be >= 1");
    sw.stop();
    sw.start("impute");
    const BootstrapImputeSet set = bootstrap_impute(d, B, im, Rng(c.at("seed").get<uint64_t>()));
    sw.stop();
    const std::filesystem::path dir = c.at("outdir").get<std::string>();
    ensure_dir(dir);
    sw.start("write");
    for (size_t r = 0; r < set.replicates.size(); ++r) {
        char name[32];
        std::snprintf(name, sizeof name, "rep_%04zu.csv", set.replicate_ids[r] + 1);
        save_csv(set.replicates[r], dir / name, c.at("na").get<std::string>());
    }
    sw.stop();
    ojson fails;
    fails["count"] = set.failures.size();
    fails["imputation"] = failure_list(set.failures);
    write_manifest(dir / "manifest.json", "impute", c, sw, fails);
    if (set.replicates.empty()) throw ImputationError("every bootstrap replicate failed to impute");
}

struct SelectVars {
    std::string method, impute = "mice", pi = "default", in, out;
    size_t B = 100;
    uint64_t seed = 0;
    DataVars data;
    ImputeVars imp;
    MethodVars methods;
};

void run_select(const ojson& c) {
    Stopwatch sw;
    sw.start("load");
    const DataMatrix d = load_data(c);
    const Method method = method_from_string(c.at("method").get<std::string>());
    const ImputeMethod im = impute_method(c, c.at("impute").get<std::string>());
    const MethodConfig cfg = method_config(c);
    const std::string pi_arg = c.at("pi").get<std::string>();
    const std::vector<double> pis = pi_arg == "default" ? std::vector<double>{default_pi(method)} : parse_pi(pi_arg);
    const size_t B = c.at("B").get<size_t>();
    if (B < 1) throw SpecError("--B must be >= 1");
    sw.stop();
    sw.start("select");
    const PipelineResult res = select_with_missing(d, {method}, im, B, cfg, Rng(c.at("seed").get<uint64_t>()));
    sw.stop();
    const MethodRun& run = res.runs.front();

    auto names_of = [&](const std::vector<size_t>& idx) {
        ojson a = ojson::array();
        for (size_t k : idx) a.push_back(res.names[k]);
        return a;
    };
    ojson out;
    out["method"] = to_string(method);
    out["impute"] = to_string(im.kind);
    out["B"] = B;
    out["successful_replicates"] = run.per_replicate.size();
    out["variables"] = res.names;
    out["frequencies"] = ojson::object();
    for (size_t k = 0; k < res.K; ++k) out["frequencies"][res.names[k]] = run.frequencies[k];
    out["selected"] = ojson::array();
    for (double pi : pis) out["selected"].push_back({{"pi", pi}, {"variables", names_of(select_at(run.frequencies, pi))}});
    out["replicates"] = ojson::array();
    for (size_t r = 0; r < run.per_replicate.size(); ++r)
        out["replicates"].push_back({{"replicate", run.replicate_ids[r] + 1}, {"selected", names_of(run.per_replicate[r])}});
    ojson fails;
    fails["count"] = res.impute_failures.size() + run.failures.size();
    fails["imputation"] = failure_list(res.impute_failures);
    fails["selection"] = failure_list(run.failures);
    out["failures"] = fails;

    const std::filesystem::path path = c.at("out").get<std::string>();
    write_text(path, out.dump(2) + "\n");
    write_manifest(path.string() + ".manifest.json", "select", c, sw, fails);
}

DgpSpec dgp_spec(const ojson& c) {
    DgpSpec dgp;
    dgp.n = c.at("n").get<size_t>();
    dgp.n_noise_cont = c.at("n-noise-cont").get<size_t>();
    dgp.n_noise_bin = c.at("n-noise-bin").get<size_t>();
    dgp.gamma = gamma_param_from_string(c.at("gamma-param").get<std::string>());
    dgp.x6_shape = c.at("x6-shape").get<double>();
    dgp.x6_second = c.at("x6-second").get<double>();
    return dgp;
}

struct SimulateVars {
    std::string scenario, outdir, methods = "all", impute = "auto", pi = "grid", gamma_param = "shape-rate";
    size_t n = 1000, M = 25, B = 100, n_noise_cont = 20, n_noise_bin = 20;
    double x6_shape = 4.0, x6_second = 6.0;
    uint64_t seed = 0;
    bool cc = false;
    ImputeVars imp;
    MethodVars method;
};

void run_simulate(const ojson& c) {
    Stopwatch sw;
    sw.start("setup");
    const DgpSpec dgp = dgp_spec(c);
    ScenarioSpec spec;
    spec.missingness = missingness_from_string(c.at("scenario").get<std::string>());
    std::string ik = c.at("impute").get<std::string>();
    if (ik == "auto") ik = spec.missingness == Missingness::Complete ? "none" : "mice";
    spec.impute = impute_method(c, ik);
    spec.methods.clear();
    const std::string ms = c.at("methods").get<std::string>();
    if (ms == "all")
        spec.methods = all_methods();
    else
        for (const auto& m : split_list(ms)) spec.methods.push_back(method_from_string(m));
    spec.pi_grid = parse_pi(c.at("pi").get<std::string>());
    spec.M = c.at("M").get<size_t>();
    spec.B = c.at("B").get<size_t>();
    spec.complete_case = c.at("cc").get<bool>();
    spec.config = method_config(c);
    spec.validate();
    sw.stop();

    sw.start("simulate");
    const ScenarioResult res = run_scenario(spec, dgp, Rng(c.at("seed").get<uint64_t>()));
    sw.stop();
    const std::filesystem::path dir = c.at("outdir").get<std::string>();
    sw.start("write");
    write_scenario_outputs(res, dir);
    sw.stop();
    ojson fails;
    fails["count"] = res.failed;
    fails["messages"] = res.failure_messages;
    write_manifest(dir / "manifest.json", "simulate", c, sw, fails);
}

struct GenerateVars {
    std::string out, gamma_param = "shape-rate";
    size_t n = 1000, n_noise_cont = 20, n_noise_bin = 20;
    double x6_shape = 4.0, x6_second = 6.0;
    uint64_t seed = 0;
};

void run_generate(const ojson& c) {
    Stopwatch sw;
    sw.start("generate");
    const Generated g = generate(dgp_spec(c), Rng(c.at("seed").get<uint64_t>()));
    sw.stop();
    const std::filesystem::path out = c.at("out").get<std::string>();
    save_csv(g.data, out);
    write_manifest(out.string() + ".manifest.json", "generate", c, sw, ojson{{"count", 0}});
}

struct MetricsVars {
    std::vector<std::string> in;
    std::string truth, out, power, scenario = "custom";
};

void run_metrics(const ojson& c) {
    Stopwatch sw;
    sw.start("score");
    const auto inputs = c.at("in").get<std::vector<std::string>>();
    if (inputs.empty()) throw UsageError("missing required option --in", "--in");
    std::vector<json> sels;
    for (const auto& p : inputs) sels.push_back(read_json_file(p));

    std::vector<std::string> names;
    std::string method;
    try {
        names = sels.front().at("variables").get<std::vector<std::string>>();
        method = sels.front().at("method").get<std::string>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("selection file: ") + e.what());
    }
    auto index_of = [&](const std::string& v) {
        for (size_t k = 0; k < names.size(); ++k)
            if (names[k] == v) return k;
        throw SpecError("unknown variable '" + v + "'");
    };
    std::vector<size_t> useful;
    for (const auto& v : split_list(c.at("truth").get<std::string>())) useful.push_back(index_of(v));
    const TruthSpec truth(names.size(), useful);

    std::vector<MetricsRow> rows;
    try {
        const auto& grid = sels.front().at("selected");
        for (size_t g = 0; g < grid.size(); ++g) {
            const double pi = grid[g].at("pi").get<double>();
            std::vector<std::vector<size_t>> runs;
            size_t failures = 0;
            for (const auto& s : sels) {
                if (s.at("variables").get<std::vector<std::string>>() != names)
                    throw SchemaError("selection files disagree on the variable list");
                const auto& entry = s.at("selected").at(g);
                if (entry.at("pi").get<double>() != pi) throw SchemaError("selection files disagree on the pi grid");
                std::vector<size_t> set;
                for (const auto& v : entry.at("variables")) set.push_back(index_of(v.get<std::string>()));
                runs.push_back(std::move(set));
                failures += s.at("failures").at("count").get<size_t>();
            }
            rows.push_back({method, c.at("scenario").get<std::string>(), format_double(pi), aggregate(runs, truth),
                            failures});
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("selection file: ") + e.what());
    }
    sw.stop();
    const std::filesystem::path out = c.at("out").get<std::string>();
    write_metrics_csv(rows, out);
    const std::string power = c.at("power").get<std::string>();
    if (!power.empty()) write_power_csv(rows, names, truth, power);
    write_manifest(out.string() + ".manifest.json", "metrics", c, sw, ojson{{"count", 0}});
}

// ---- error reporting ----

std::string first_flag(const std::string& msg) {
    const auto p = msg.find("--");
    if (p == std::string::npos) return {};
    auto e = msg.find_first_of(" ,:'\"", p);
    return msg.substr(p, e == std::string::npos ? std::string::npos : e - p);
}

int report(int code, const std::string& kind, const std::string& msg, const std::string& flag = {}) {
    ojson j;
    j["error"] = kind;
    j["message"] = msg;
    if (!flag.empty()) j["flag"] = flag;
    j["exit_code"] = code;
    std::cerr << j.dump() << std::endl;
    return code;
}

int run_app(const std::vector<std::string>& args, const std::vector<json>& presets);

int run_replay(const std::string& manifest_path, const std::vector<std::string>& overrides, size_t threads) {
    const json m = read_json_file(manifest_path);
    if (!m.contains("command") || !m.contains("config") || !m["config"].is_object())
        throw SchemaError("'" + manifest_path + "' is not a run manifest");
    std::vector<std::string> args = {"mivs", m["command"].get<std::string>()};
    args.insert(args.end(), overrides.begin(), overrides.end());
    if (threads > 0) {
        args.push_back("--threads");
        args.push_back(std::to_string(threads));
    }
    return run_app(args, {m["config"]});
}

int run_app(const std::vector<std::string>& args, const std::vector<json>& presets) {
    CLI::App app{"Variable selection with missing data: amputation, bootstrap imputation, selection, simulation"};
    app.set_version_flag("--version", version());
    app.require_subcommand(1);
    app.fallthrough();
    size_t threads = thread_count();
    std::string log_level = "warn";
    app.add_option("--threads", threads, "worker threads (results do not depend on it)")->capture_default_str();
    app.add_option("--log-level", log_level, "debug, info, warn or off")->capture_default_str();

    std::vector<std::unique_ptr<Command>> cmds;
    auto make = [&](const std::string& name, const std::string& help, const std::string& settings_flag) {
        auto c = std::make_unique<Command>();
        c->name = name;
        c->app = app.add_subcommand(name, help);
        c->binder = std::make_unique<Binder>(c->app, settings_flag);
        cmds.push_back(std::move(c));
        return cmds.back().get();
    };

    AmputeVars av;
    {
        Command* c = make("ampute", "Impose multivariate MAR missingness on complete data", "--settings");
        Binder& b = *c->binder;
        b.add("config", av.plan, "amputation plan (JSON file, or pct15, pct30, pct60)");
        b.add("in", av.in, "complete input CSV", true);
        b.add("out", av.out, "output CSV", true);
        b.add("seed", av.seed, "random seed", true);
        av.data.bind(b);
        c->prepare = [](ojson& cfg) {
            if (!cfg.contains("plan")) {
                const std::string p = cfg["config"].get<std::string>();
                if (p.empty()) throw UsageError("missing required option --config", "--config");
                const bool builtin = !std::filesystem::exists(p) && (p == "pct15" || p == "pct30" || p == "pct60");
                const AmputationPlan plan = builtin ? build_scenario_plan(missingness_from_string(p)) : load_plan(p);
                cfg["plan"] = ojson::parse(plan_to_json(plan));
            }
        };
        c->run = run_ampute;
    }
    ImputeCmdVars iv;
    {
        Command* c = make("impute", "Bootstrap-resample and singly impute each replicate", "--config");
        Binder& b = *c->binder;
        b.add("method", iv.method, "mice or forest");
        b.add("B", iv.B, "bootstrap replicates");
        b.add("in", iv.in, "input CSV with missing cells", true);
        b.add("outdir", iv.outdir, "output directory", true);
        b.add("seed", iv.seed, "random seed", true);
        iv.data.bind(b);
        iv.impute.bind(b);
        c->run = run_impute;
    }
    SelectVars sv;
    {
        Command* c = make("select", "Select variables over bootstrap-imputed replicates", "--config");
        Binder& b = *c->binder;
        b.add("method", sv.method, "bart, rf, crf, gbm, lasso or stepwise", true);
        b.add("impute", sv.impute, "mice, forest or none");
        b.add("B", sv.B, "bootstrap replicates");
        b.add("pi", sv.pi, "selection threshold: a real, a comma list, 'grid', or 'default' (per method)");
        b.add("in", sv.in, "input CSV", true);
        b.add("out", sv.out, "output JSON", true);
        b.add("seed", sv.seed, "random seed", true);
        sv.data.bind(b);
        sv.imp.bind(b);
        sv.methods.bind(b);
        c->run = run_select;
    }
    SimulateVars mv;
    {
        Command* c = make("simulate", "Run a simulation scenario and write metric tables", "--config");
        Binder& b = *c->binder;
        b.add("scenario", mv.scenario, "complete, pct15, pct30, pct60, or a JSON scenario file", true);
        b.add("n", mv.n, "sample size");
        b.add("M", mv.M, "Monte Carlo replications");
        b.add("B", mv.B, "bootstrap replicates");
        b.add("seed", mv.seed, "random seed", true);
        b.add("outdir", mv.outdir, "output directory", true);
        b.add("methods", mv.methods, "comma list of methods, or 'all'");
        b.add("impute", mv.impute, "mice, forest, none or auto");
        b.add("pi", mv.pi, "pi grid: a real, a comma list, or 'grid'");
        b.flag("cc", mv.cc, "also score selection on complete cases");
        b.add("n-noise-cont", mv.n_noise_cont, "continuous noise predictors");
        b.add("n-noise-bin", mv.n_noise_bin, "binary noise predictors");
        b.add("gamma-param", mv.gamma_param, "x6 gamma parameterization: shape-rate or shape-scale");
        b.add("x6-shape", mv.x6_shape, "x6 gamma shape");
        b.add("x6-second", mv.x6_second, "x6 gamma rate or scale");
        mv.imp.bind(b);
        mv.method.bind(b);
        c->run = run_simulate;
    }
    GenerateVars gv;
    {
        Command* c = make("generate", "Draw a complete dataset from the simulation model", "--config");
        Binder& b = *c->binder;
        b.add("n", gv.n, "sample size");
        b.add("seed", gv.seed, "random seed", true);
        b.add("out", gv.out, "output CSV", true);
        b.add("n-noise-cont", gv.n_noise_cont, "continuous noise predictors");
        b.add("n-noise-bin", gv.n_noise_bin, "binary noise predictors");
        b.add("gamma-param", gv.gamma_param, "x6 gamma parameterization: shape-rate or shape-scale");
        b.add("x6-shape", gv.x6_shape, "x6 gamma shape");
        b.add("x6-second", gv.x6_second, "x6 gamma rate or scale");
        c->run = run_generate;
    }
    MetricsVars xv;
    {
        Command* c = make("metrics", "Score selection outputs against known useful variables", "--config");
        Binder& b = *c->binder;
        b.add("in", xv.in, "selection JSON files, one per replication", true)->delimiter(',');
        b.add("truth", xv.truth, "comma list of useful variable names", true);
        b.add("out", xv.out, "metrics CSV", true);
        b.add("power", xv.power, "optional per-variable frequency CSV");
        b.add("scenario", xv.scenario, "scenario label for the rows");
        c->run = run_metrics;
    }
    std::string manifest, r_out, r_outdir;
    CLI::App* replay = app.add_subcommand("replay", "Re-run a command from its manifest");
    replay->add_option("--manifest", manifest, "manifest JSON written by a previous run")->required();
    replay->add_option("--out", r_out, "override the output file");
    replay->add_option("--outdir", r_outdir, "override the output directory");

    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report(Usage, "usage", e.what(), first_flag(e.what()));
    }

    try {
        if (threads < 1) throw UsageError("--threads must be >= 1", "--threads");
        set_thread_count(threads);
        if (log_level == "debug") log::set_level(log::Level::Debug);
        else if (log_level == "info") log::set_level(log::Level::Info);
        else if (log_level == "warn") log::set_level(log::Level::Warn);
        else if (log_level == "off") log::set_level(log::Level::Off);
        else throw UsageError("--log-level must be debug, info, warn or off", "--log-level");

        if (replay->parsed()) {
            std::vector<std::string> ov;
            if (!r_out.empty()) ov.insert(ov.end(), {"--out", r_out});
            if (!r_outdir.empty()) ov.insert(ov.end(), {"--outdir", r_outdir});
            return run_replay(manifest, ov, app.count("--threads") ? threads : 0);
        }
        for (auto& c : cmds) {
            if (!c->app->parsed()) continue;
            std::vector<json> layers = presets;
            if (c->name == "simulate" && !presets.size()) {
                // a scenario given as a file contributes defaults below the flags
                const std::string s = mv.scenario;
                if (std::filesystem::is_regular_file(s)) {
                    json f = read_json_file(s);
                    if (!f.is_object() || !f.contains("scenario"))
                        throw UsageError("scenario file must be an object with a 'scenario' name", "--scenario");
                    mv.scenario = f["scenario"].get<std::string>();
                    layers.push_back(std::move(f));
                }
            }
            ojson cfg = c->binder->resolve(layers);
            if (c->prepare) c->prepare(cfg);
            c->run(cfg);
            return Ok;
        }
        return report(Usage, "usage", "no subcommand given");
    } catch (const UsageError& e) {
        return report(Usage, "usage", e.what(), e.flag);
    } catch (const SpecError& e) {
        return report(Usage, e.kind(), e.what(), first_flag(e.what()));
    } catch (const IoError& e) {
        return report(Io, e.kind(), e.what());
    } catch (const Error& e) {
        return report(Compute, e.kind(), e.what());
    } catch (const std::exception& e) {
        return report(Compute, "internal", e.what());
    }
}

} // namespace

int dispatch(const std::vector<std::string>& args) { return run_app(args, {}); }

int dispatch(int argc, char** argv) { return dispatch(std::vector<std::string>(argv, argv + argc)); }

} // namespace mivs::cli
