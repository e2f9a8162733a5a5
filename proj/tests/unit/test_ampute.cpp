#include <doctest.h>

#include <numeric>

#include "helpers.h"
#include "mivs/ampute.h"
#include "mivs/error.h"
#include "mivs/sim.h"

using namespace mivs;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

DataMatrix normal_data(size_t n, size_t K, uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd X = testing::normal_matrix(n, K, rng);
    return testing::to_matrix(X, testing::coin_flips(n, rng));
}

} // namespace

TEST_CASE("weighted sum scores") {
    DataMatrix d({testing::column("x5", {1.0, 0.0, -1.0}), testing::column("x6", {2.0, 1.0, 0.5}),
                  testing::column("x7", {0.0, 0.0, 0.0})},
                 {0, 1, 0}, {0, 0, 0});
    TransformSpec t;
    t.product("x5", "x6");
    DataMatrix q = apply_transforms(d, t);
    Pattern p;
    p.amputed = {"x7"};
    p.weights = {{"x5", 1}, {"x6", 1}, {"x5*x6", 1}};
    std::vector<size_t> rows = {0, 1, 2};
    WssResult w = weighted_sum_scores(q, t, p, rows);
    CHECK(w.raw[0] == doctest::Approx(5.0));
    CHECK(mean_of(w.scores) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_FALSE(w.mcar);

    std::vector<size_t> one = {0};
    CHECK(weighted_sum_scores(q, t, p, one).scores[0] == 0.0);

    Pattern zero;
    zero.amputed = {"x7"};
    WssResult z = weighted_sum_scores(q, t, zero, rows);
    CHECK(z.mcar);
    for (double s : z.scores) CHECK(s == 0.0);

    Pattern self;
    self.amputed = {"x5"};
    self.weights = {{"x5*x6", 1.0}};
    CHECK_THROWS_AS(weighted_sum_scores(q, t, self, rows), SpecError);
    Pattern unknown;
    unknown.amputed = {"x7"};
    unknown.weights = {{"x99", 1.0}};
    CHECK_THROWS_AS(weighted_sum_scores(q, t, unknown, rows), SpecError);
}

TEST_CASE("missingness probabilities calibrate") {
    std::vector<double> flat(10, 0.0);
    for (double p : missingness_probs(flat, TailType::RightTailed, 0.6)) CHECK(p == doctest::Approx(0.6));

    std::vector<double> two = {-1.0, 1.0};
    auto p = missingness_probs(two, TailType::RightTailed, 0.5);
    CHECK(p[1] > 0.5);
    CHECK(p[0] < 0.5);
    CHECK(mean_of(p) == doctest::Approx(0.5).epsilon(1e-8));

    Rng rng(2);
    std::vector<double> s(500);
    for (auto& v : s) v = rng.normal();
    for (double target : {0.05, 0.3, 0.9}) {
        CHECK(mean_of(missingness_probs(s, TailType::RightTailed, target)) == doctest::Approx(target).epsilon(1e-6));
        auto b = missingness_probs(s, TailType::BothTailed, target);
        CHECK(mean_of(b) == doctest::Approx(target).epsilon(1e-6));
    }
    CHECK_THROWS_AS(missingness_probs(s, TailType::RightTailed, 1.0), CalibrationError);
}

TEST_CASE("Monte Carlo calibration of right-tailed missingness") {
    double total = 0;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        std::vector<double> s(1000);
        for (auto& v : s) v = rng.normal();
        auto p = missingness_probs(s, TailType::RightTailed, 0.6);
        size_t hits = 0;
        for (double pi : p) hits += rng.bernoulli(pi);
        total += hits / 1000.0 / 50;
    }
    CHECK(std::abs(total - 0.6) < 0.02);
}

TEST_CASE("single-pattern amputation of the outcome") {
    DataMatrix d = normal_data(4000, 3, 4);
    AmputationPlan plan;
    Pattern p;
    p.amputed = {"y"};
    p.weights = {{"x1", 1.0}};
    p.missing_frac = 0.15;
    plan.patterns = {p};
    plan.proportions = {1.0};
    DataMatrix a = ampute(d, plan, Rng(3));
    CHECK(std::abs(a.outcome_missing_count() / 4000.0 - 0.15) < 0.02);
    for (size_t k = 0; k < 3; ++k) CHECK(a.missing_count(k) == 0);
}

TEST_CASE("amputation subset sizes follow the proportions") {
    DataMatrix d = normal_data(10000, 3, 5);
    AmputationPlan plan;
    Pattern p1, p2;
    p1.amputed = {"x1"};
    p1.weights = {{"x2", 1.0}};
    p2.amputed = {"x2"};
    p2.weights = {{"x3", 1.0}};
    plan.patterns = {p1, p2};
    plan.proportions = {0.5, 0.5};
    AmputeReport r = ampute_detailed(d, plan, Rng(8));
    size_t first = std::count(r.pattern_of_row.begin(), r.pattern_of_row.end(), 0);
    CHECK(std::abs(first - 5000.0) < 100.0);
    for (size_t i = 0; i < d.rows(); ++i) {
        if (r.pattern_of_row[i] == 0) CHECK_FALSE(r.data.missing(i, 1));
        if (r.pattern_of_row[i] == 1) CHECK_FALSE(r.data.missing(i, 0));
        CHECK_FALSE(r.data.missing(i, 2));
    }
}

TEST_CASE("amputation is deterministic and validates plans") {
    DataMatrix d = normal_data(300, 3, 6);
    AmputationPlan plan;
    Pattern p;
    p.amputed = {"x1"};
    p.weights = {{"x2", 1.0}};
    plan.patterns = {p};
    plan.proportions = {1.0};
    DataMatrix a = ampute(d, plan, Rng(1)), b = ampute(d, plan, Rng(1));
    for (size_t i = 0; i < 300; ++i) CHECK(a.missing(i, 0) == b.missing(i, 0));

    plan.proportions = {0.7};
    CHECK_THROWS_AS(validate_plan(plan, d), SpecError);
    plan.proportions = {1.0};
    plan.patterns[0].missing_frac = 0.0;
    CHECK_THROWS_AS(validate_plan(plan, d), SpecError);
}

TEST_CASE("plan JSON round trip") {
    AmputationPlan plan = build_scenario_plan(Missingness::Pct30);
    AmputationPlan back = parse_plan(plan_to_json(plan));
    REQUIRE(back.patterns.size() == plan.patterns.size());
    CHECK(back.proportions == plan.proportions);
    CHECK(back.transforms.derived.size() == plan.transforms.derived.size());
    for (size_t j = 0; j < plan.patterns.size(); ++j) {
        CHECK(back.patterns[j].amputed == plan.patterns[j].amputed);
        CHECK(back.patterns[j].weights == plan.patterns[j].weights);
        CHECK(back.patterns[j].tail == plan.patterns[j].tail);
    }
    CHECK_THROWS(parse_plan("{\"patterns\": 3}"));
}

TEST_CASE("scenario plans hit their targets") {
    struct Target {
        Missingness m;
        double overall, y;
    };
    for (Target t : {Target{Missingness::Pct15, 0.15, 0.075}, Target{Missingness::Pct60, 0.60, 0.40}}) {
        AmputationPlan plan = build_scenario_plan(t.m);
        double overall = 0, ymiss = 0;
        for (uint64_t s = 0; s < 5; ++s) {
            DgpSpec dgp;
            Generated g = generate(dgp, Rng(s).split(1));
            DataMatrix a = ampute(g.data, plan, Rng(s).split(2));
            overall += a.incomplete_row_fraction() / 5;
            ymiss += a.outcome_missing_count() / 1000.0 / 5;
        }
        CHECK(std::abs(overall - t.overall) < 0.03);
        CHECK(std::abs(ymiss - t.y) < 0.03);
    }
    CHECK_THROWS_AS(build_scenario_plan(Missingness::Complete), SpecError);
}
