#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.h"
#include "mivs/error.h"
#include "mivs/impute.h"

using namespace mivs;

namespace {

// x1, x2 standard normal; x3 = x1 + x2 + noise (R^2 ~ 0.9) with MCAR holes.
DataMatrix linear_holes(size_t n, double frac, uint64_t seed, std::vector<double>* truth) {
    Rng rng(seed);
    std::vector<double> a(n), b(n), c(n), y(n);
    std::vector<uint8_t> m(n);
    for (size_t i = 0; i < n; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
        c[i] = a[i] + b[i] + rng.normal(0.0, 0.47);
        y[i] = rng.bernoulli(0.5);
        m[i] = rng.bernoulli(frac);
    }
    if (truth) *truth = c;
    auto cc = testing::column("x3", c);
    cc.missing = m;
    return DataMatrix({testing::column("x1", a), testing::column("x2", b), cc}, y, std::vector<uint8_t>(n, 0));
}

} // namespace

TEST_CASE("complete data imputes to itself") {
    DataMatrix d = linear_holes(50, 0.0, 1, nullptr);
    for (ImputeKind k : {ImputeKind::Chained, ImputeKind::Forest}) {
        ImputeMethod m;
        m.kind = k;
        DataMatrix e = impute(d, m, Rng(2));
        for (size_t i = 0; i < 50; ++i)
            for (size_t j = 0; j < 3; ++j) CHECK(e.value(i, j) == d.value(i, j));
    }
}

TEST_CASE("predictive mean matching returns observed donors") {
    DataMatrix d = linear_holes(120, 0.2, 3, nullptr);
    ChainedParams p;
    p.pmm_k = 1;
    DataMatrix e = impute_chained(d, p, Rng(4));
    std::set<double> observed;
    for (size_t i = 0; i < d.rows(); ++i)
        if (!d.missing(i, 2)) observed.insert(d.value(i, 2));
    REQUIRE(d.missing_count(2) > 0);
    for (size_t i = 0; i < d.rows(); ++i) {
        CHECK_FALSE(e.missing(i, 2));
        if (d.missing(i, 2)) CHECK(observed.count(e.value(i, 2)) == 1);
    }
}

TEST_CASE("chained imputation beats marginal draws on linear data") {
    int wins = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        std::vector<double> truth;
        DataMatrix d = linear_holes(300, 0.3, 100 + seed, &truth);
        DataMatrix e = impute_chained(d, {}, Rng(seed));
        std::vector<double> obs;
        for (size_t i = 0; i < d.rows(); ++i)
            if (!d.missing(i, 2)) obs.push_back(d.value(i, 2));
        Rng draw(seed + 1000);
        double se = 0, sm = 0;
        for (size_t i = 0; i < d.rows(); ++i) {
            if (!d.missing(i, 2)) continue;
            se += std::pow(e.value(i, 2) - truth[i], 2);
            sm += std::pow(obs[draw.index(obs.size())] - truth[i], 2);
        }
        wins += se < sm;
    }
    CHECK(wins == 20);
}

TEST_CASE("chained imputation fills binary targets and the outcome") {
    Rng rng(7);
    const size_t n = 200;
    std::vector<double> a(n), b(n), y(n);
    std::vector<uint8_t> mb(n), my(n);
    for (size_t i = 0; i < n; ++i) {
        a[i] = rng.normal();
        b[i] = rng.bernoulli(0.5);
        y[i] = rng.bernoulli(0.4);
        mb[i] = rng.bernoulli(0.2);
        my[i] = rng.bernoulli(0.1);
    }
    auto cb = testing::column("x2", b, ColumnKind::Binary);
    cb.missing = mb;
    DataMatrix d({testing::column("x1", a), cb}, y, my);
    ImputeDiagnostics diag;
    DataMatrix e = impute_chained(d, {}, Rng(1), &diag);
    CHECK(e.complete());
    CHECK(diag.iterations == 10);
    for (size_t i = 0; i < n; ++i) {
        CHECK((e.value(i, 1) == 0.0 || e.value(i, 1) == 1.0));
        CHECK((e.outcome(i) == 0.0 || e.outcome(i) == 1.0));
    }
}

TEST_CASE("forest imputation of a constant binary column") {
    Rng rng(8);
    const size_t n = 80;
    std::vector<double> a(n), b(n, 1.0), y(n);
    std::vector<uint8_t> mb(n);
    for (size_t i = 0; i < n; ++i) {
        a[i] = rng.normal();
        y[i] = rng.bernoulli(0.5);
        mb[i] = i % 4 == 0;
    }
    auto cb = testing::column("x2", b, ColumnKind::Binary);
    cb.missing = mb;
    DataMatrix d({testing::column("x1", a), cb}, y, std::vector<uint8_t>(n, 0));
    ForestImputeParams p;
    p.n_trees = 20;
    DataMatrix e = impute_forest(d, p, Rng(2));
    for (size_t i = 0; i < n; ++i) CHECK(e.value(i, 1) == 1.0);
}

TEST_CASE("forest imputation beats mean imputation on a nonlinear column") {
    int wins = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const size_t n = 300;
        std::vector<double> x5(n), x6(n), x7(n), y(n);
        std::vector<uint8_t> m(n);
        for (size_t i = 0; i < n; ++i) {
            x5[i] = rng.normal();
            x6[i] = rng.gamma(4.0, 1.0 / 6.0);
            x7[i] = rng.normal(-0.4 * x5[i] + 0.4 * x6[i] + 0.3 * x5[i] * x6[i], 1.0) + 2 * x5[i] * x5[i];
            y[i] = rng.bernoulli(0.5);
            m[i] = rng.bernoulli(0.3);
        }
        auto c7 = testing::column("x7", x7);
        c7.missing = m;
        DataMatrix d({testing::column("x5", x5), testing::column("x6", x6), c7}, y, std::vector<uint8_t>(n, 0));
        ForestImputeParams p;
        p.n_trees = 50;
        DataMatrix e = impute_forest(d, p, Rng(seed + 50));
        double mean = 0;
        size_t obs = 0;
        for (size_t i = 0; i < n; ++i)
            if (!m[i]) mean += x7[i], ++obs;
        mean /= obs;
        double sf = 0, sm = 0;
        for (size_t i = 0; i < n; ++i) {
            if (!m[i]) continue;
            sf += std::pow(e.value(i, 2) - x7[i], 2);
            sm += std::pow(mean - x7[i], 2);
        }
        wins += sf < sm;
    }
    CHECK(wins == 10);
}

TEST_CASE("bootstrap resamples cover about 1 - 1/e of the rows") {
    DataMatrix d = linear_holes(1000, 0.0, 9, nullptr);
    ImputeMethod none;
    none.kind = ImputeKind::None;
    BootstrapImputeSet s = bootstrap_impute(d, 100, none, Rng(10));
    REQUIRE(s.replicates.size() == 100);
    double distinct = 0;
    for (const auto& rows : s.rows) distinct += std::set<size_t>(rows.begin(), rows.end()).size() / 100.0;
    CHECK(std::abs(distinct / 1000.0 - (1.0 - std::exp(-1.0))) < 0.03);

    BootstrapImputeSet t = bootstrap_impute(d, 100, none, Rng(10));
    CHECK(t.rows == s.rows);
}

TEST_CASE("bootstrap of one replicate is a plain resample") {
    DataMatrix d = linear_holes(30, 0.0, 11, nullptr);
    ImputeMethod m;
    BootstrapImputeSet s = bootstrap_impute(d, 1, m, Rng(12));
    REQUIRE(s.replicates.size() == 1);
    for (size_t i = 0; i < 30; ++i) CHECK(s.replicates[0].value(i, 0) == d.value(s.rows[0][i], 0));
}

TEST_CASE("imputation is deterministic under a fixed stream") {
    DataMatrix d = linear_holes(100, 0.3, 13, nullptr);
    ImputeMethod m;
    DataMatrix a = bootstrap_impute(d, 3, m, Rng(5)).replicates[2];
    DataMatrix b = bootstrap_impute(d, 3, m, Rng(5)).replicates[2];
    for (size_t i = 0; i < 100; ++i) CHECK(a.value(i, 2) == b.value(i, 2));
    CHECK_THROWS_AS(bootstrap_impute(d, 0, m, Rng(5)), SpecError);
}
