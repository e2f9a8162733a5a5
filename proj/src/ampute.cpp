#include "mivs/ampute.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mivs/error.h"
#include "mivs/log.h"
#include "mivs/stats.h"

namespace mivs {

const char* to_string(TailType t) { return t == TailType::RightTailed ? "right" : "both"; }

TailType tail_type_from_string(const std::string& s) {
    if (s == "right" || s == "right-tailed" || s == "RightTailed") return TailType::RightTailed;
    if (s == "both" || s == "both-tailed" || s == "BothTailed") return TailType::BothTailed;
    throw SpecError("unknown tail type '" + s + "'");
}

namespace {

struct Lookup {
    const DataMatrix& q;

    bool is_outcome(const std::string& name) const { return name == q.outcome_name(); }

    size_t column(const std::string& name) const {
        auto k = q.find(name);
        if (!k) throw SpecError("weight references unknown column '" + name + "'");
        return *k;
    }
};

} // namespace

WssResult weighted_sum_scores(const DataMatrix& q, const TransformSpec& t, const Pattern& p,
                              std::span<const size_t> rows) {
    const std::set<std::string> amputed(p.amputed.begin(), p.amputed.end());
    Lookup look{q};

    struct Term {
        bool outcome;
        size_t col;
        double w;
    };
    std::vector<Term> terms;
    for (const auto& [name, w] : p.weights) {
        if (!std::isfinite(w)) throw SpecError("non-finite weight for '" + name + "'");
        if (w != 0.0) {
            if (amputed.count(name)) throw SpecError("nonzero weight on amputed variable '" + name + "'");
            for (const auto& dc : t.derived) {
                if (dc.name != name) continue;
                for (const auto& in : dc.inputs)
                    if (amputed.count(in))
                        throw SpecError("nonzero weight on '" + name + "', a transform of amputed variable '" + in +
                                        "'");
            }
        }
        if (look.is_outcome(name))
            terms.push_back({true, 0, w});
        else
            terms.push_back({false, look.column(name), w});
    }

    WssResult res;
    res.raw.resize(rows.size());
    for (size_t j = 0; j < rows.size(); ++j) {
        const size_t i = rows[j];
        double s = 0.0;
        for (const auto& term : terms) {
            if (term.w == 0.0) continue;
            const bool miss = term.outcome ? q.outcome_missing(i) : q.missing(i, term.col);
            if (miss) throw SpecError("weighted sum score needs complete rows");
            s += term.w * (term.outcome ? q.outcome(i) : q.value(i, term.col));
        }
        res.raw[j] = s;
    }

    res.scores.assign(rows.size(), 0.0);
    if (rows.size() < 2) {
        res.mcar = true;
        return res;
    }
    const double m = stats::mean(res.raw);
    const double sd = stats::sd(res.raw);
    if (!(sd > 1e-12 * (1.0 + std::fabs(m)))) {
        res.mcar = true;
        return res;
    }
    for (size_t j = 0; j < rows.size(); ++j) res.scores[j] = (res.raw[j] - m) / sd;
    return res;
}

std::vector<double> missingness_probs(std::span<const double> scores, TailType tail, double target) {
    if (!(target > 0.001 && target < 0.999))
        throw CalibrationError("target missingness " + std::to_string(target) + " outside (0.001, 0.999)");
    std::vector<double> s(scores.begin(), scores.end());
    if (s.empty()) return s;
    if (tail == TailType::BothTailed) {
        const double med = stats::median(s);
        for (auto& v : s) v = std::fabs(v - med);
    }
    const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
    std::vector<double> p(s.size(), target);
    if (*mx - *mn < 1e-12) return p;

    auto mean_at = [&](double c) {
        double acc = 0.0;
        for (double v : s) acc += stats::sigmoid(c + v);
        return acc / static_cast<double>(s.size());
    };
    double lo = stats::logit(target) - *mx - 1.0;
    double hi = stats::logit(target) - *mn + 1.0;
    const double flo = mean_at(lo), fhi = mean_at(hi);
    if (flo > target || fhi < target)
        throw CalibrationError("cannot bracket target " + std::to_string(target) + "; achievable mean in [" +
                               std::to_string(flo) + ", " + std::to_string(fhi) + "]");
    double c = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        c = 0.5 * (lo + hi);
        const double f = mean_at(c) - target;
        if (std::fabs(f) <= 1e-9) break;
        (f < 0 ? lo : hi) = c;
    }
    for (size_t i = 0; i < s.size(); ++i) p[i] = stats::sigmoid(c + s[i]);
    return p;
}

void validate_plan(const AmputationPlan& plan, const DataMatrix& d) {
    if (plan.patterns.empty()) throw SpecError("amputation plan has no patterns");
    if (plan.patterns.size() != plan.proportions.size())
        throw SpecError("amputation plan has " + std::to_string(plan.patterns.size()) + " patterns but " +
                        std::to_string(plan.proportions.size()) + " proportions");
    double total = 0.0;
    for (double v : plan.proportions) {
        if (!(v >= 0.0)) throw SpecError("negative pattern proportion");
        total += v;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw SpecError("pattern proportions sum to " + std::to_string(total));
    for (const auto& p : plan.patterns) {
        if (p.amputed.empty()) throw SpecError("pattern amputes no variables");
        if (!(p.missing_frac > 0.0 && p.missing_frac < 1.0)) throw SpecError("pattern missing_frac must be in (0, 1)");
        for (const auto& name : p.amputed)
            if (name != d.outcome_name() && !d.find(name))
                throw SpecError("pattern amputes unknown column '" + name + "'");
    }
}

AmputeReport ampute_detailed(const DataMatrix& d, const AmputationPlan& plan, const Rng& rng) {
    if (!d.complete()) throw SpecError("ampute requires fully observed input");
    validate_plan(plan, d);
    const DataMatrix q = apply_transforms(d, plan.transforms);
    const size_t n = d.rows();
    const size_t P = plan.patterns.size();

    AmputeReport rep;
    rep.pattern_of_row.assign(n, 0);
    rep.score_of_row.assign(n, 0.0);
    rep.masked_row.assign(n, 0);
    rep.mcar_pattern.assign(P, 0);

    Rng assign = rng.split(0);
    std::vector<std::vector<size_t>> members(P);
    for (size_t i = 0; i < n; ++i) {
        const double u = assign.uniform();
        double acc = 0.0;
        size_t p = P - 1;
        for (size_t j = 0; j < P; ++j) {
            acc += plan.proportions[j];
            if (u < acc) {
                p = j;
                break;
            }
        }
        // guard against rounding pushing u past a trailing zero-proportion pattern
        while (plan.proportions[p] == 0.0 && p > 0) --p;
        rep.pattern_of_row[i] = static_cast<int>(p);
        members[p].push_back(i);
    }

    std::vector<Column> cols = d.columns();
    std::vector<uint8_t> ymask = d.outcome_mask();
    for (size_t p = 0; p < P; ++p) {
        const auto& rows = members[p];
        if (rows.empty()) {
            if (plan.proportions[p] > 0) log::warn("ampute: pattern " + std::to_string(p + 1) + " received no rows; skipped");
            continue;
        }
        const Pattern& pat = plan.patterns[p];
        const WssResult wss = weighted_sum_scores(q, plan.transforms, pat, rows);
        rep.mcar_pattern[p] = wss.mcar;
        if (wss.mcar) log::info("ampute: pattern " + std::to_string(p + 1) + " has constant scores; missingness is MCAR");
        const auto probs = missingness_probs(wss.scores, pat.tail, pat.missing_frac);

        std::vector<size_t> targets;
        bool hits_outcome = false;
        for (const auto& name : pat.amputed) {
            if (name == d.outcome_name())
                hits_outcome = true;
            else
                targets.push_back(*d.find(name));
        }
        Rng draw = rng.split(p + 1);
        for (size_t j = 0; j < rows.size(); ++j) {
            const size_t i = rows[j];
            rep.score_of_row[i] = wss.scores[j];
            if (!draw.bernoulli(probs[j])) continue;
            rep.masked_row[i] = 1;
            for (size_t k : targets) cols[k].missing[i] = 1;
            if (hits_outcome) ymask[i] = 1;
        }
    }
    rep.data = DataMatrix(std::move(cols), d.outcome(), std::move(ymask), d.outcome_name());
    return rep;
}

DataMatrix ampute(const DataMatrix& d, const AmputationPlan& plan, const Rng& rng) {
    return ampute_detailed(d, plan, rng).data;
}

AmputationPlan parse_plan(const std::string& json_text) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("amputation plan is not valid JSON: ") + e.what());
    }
    AmputationPlan plan;
    try {
        if (j.contains("transforms")) {
            for (const auto& t : j.at("transforms")) {
                DerivedColumn dc;
                dc.op = transform_op_from_string(t.at("op").get<std::string>());
                dc.inputs = t.at("inputs").get<std::vector<std::string>>();
                if (t.contains("name")) {
                    dc.name = t.at("name").get<std::string>();
                } else {
                    TransformSpec tmp;
                    switch (dc.op) {
                        case TransformOp::Square: tmp.square(dc.inputs.at(0)); break;
                        case TransformOp::Cube: tmp.cube(dc.inputs.at(0)); break;
                        case TransformOp::Exp: tmp.exp(dc.inputs.at(0)); break;
                        case TransformOp::Product: tmp.product(dc.inputs.at(0), dc.inputs.at(1)); break;
                    }
                    dc.name = tmp.derived.back().name;
                }
                plan.transforms.derived.push_back(std::move(dc));
            }
        }
        for (const auto& p : j.at("patterns")) {
            Pattern pat;
            pat.amputed = p.at("amputed").get<std::vector<std::string>>();
            if (p.contains("weights")) pat.weights = p.at("weights").get<std::map<std::string, double>>();
            if (p.contains("tail")) pat.tail = tail_type_from_string(p.at("tail").get<std::string>());
            pat.missing_frac = p.at("missing_frac").get<double>();
            plan.patterns.push_back(std::move(pat));
        }
        if (j.contains("proportions"))
            plan.proportions = j.at("proportions").get<std::vector<double>>();
        else if (plan.patterns.size() == 1)
            plan.proportions = {1.0};
    } catch (const json::exception& e) {
        throw SchemaError(std::string("amputation plan: ") + e.what());
    }
    return plan;
}

std::string plan_to_json(const AmputationPlan& plan) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["transforms"] = ordered_json::array();
    for (const auto& dc : plan.transforms.derived)
        j["transforms"].push_back({{"name", dc.name}, {"op", to_string(dc.op)}, {"inputs", dc.inputs}});
    j["patterns"] = ordered_json::array();
    for (const auto& p : plan.patterns) {
        ordered_json pj;
        pj["amputed"] = p.amputed;
        pj["weights"] = ordered_json::object();
        for (const auto& [k, v] : p.weights) pj["weights"][k] = v;
        pj["tail"] = to_string(p.tail);
        pj["missing_frac"] = p.missing_frac;
        j["patterns"].push_back(std::move(pj));
    }
    j["proportions"] = plan.proportions;
    return j.dump(2);
}

AmputationPlan load_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_plan(ss.str());
}

} // namespace mivs
