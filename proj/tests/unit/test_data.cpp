#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "helpers.h"
#include "mivs/csv.h"
#include "mivs/error.h"

using namespace mivs;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const std::string& name, const std::string& text) {
    fs::path p = fs::temp_directory_path() / ("mivs_unit_" + name);
    std::ofstream(p) << text;
    return p;
}

Schema schema_xy() {
    Schema s;
    s.columns = {{"x1", ColumnKind::Continuous}, {"x2", ColumnKind::Binary}};
    return s;
}

} // namespace

TEST_CASE("load_csv masks missing tokens") {
    auto p = write_file("na.csv", "x1,x2,y\n0.5,1,0\n1.5,NA,1\n-2,0,1\n");
    DataMatrix d = load_csv(p, schema_xy());
    CHECK(d.rows() == 3);
    CHECK(d.missing_count(0) == 0);
    CHECK(d.missing_count(1) == 1);
    CHECK(d.missing(1, 1));
    CHECK(std::isnan(d.value(1, 1)));
    CHECK(d.outcome_missing_count() == 0);
}

TEST_CASE("load_csv without missing tokens has no masks") {
    auto p = write_file("full.csv", "x1,x2,y\n0.5,1,0\n1.5,0,1\n");
    CHECK(load_csv(p, schema_xy()).masked_cells() == 0);
}

TEST_CASE("load_csv errors") {
    CHECK_THROWS_AS(load_csv(write_file("bin.csv", "x1,x2,y\n0.5,2,0\n"), schema_xy()), SchemaError);
    CHECK_THROWS_AS(load_csv(write_file("hdr.csv", "x1,x3,y\n0.5,1,0\n"), schema_xy()), SchemaError);
    CHECK_THROWS_AS(load_csv(write_file("num.csv", "x1,x2,y\nabc,1,0\n"), schema_xy()), ParseError);
    CHECK_THROWS_AS(load_csv(fs::temp_directory_path() / "mivs_unit_absent.csv", schema_xy()), IoError);
    try {
        load_csv(write_file("num2.csv", "x1,x2,y\n1,1,0\n0.5x,1,0\n"), schema_xy());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        std::string msg = e.what();
        CHECK(msg.find("x1") != std::string::npos);
        CHECK(msg.find('2') != std::string::npos);
    }
}

TEST_CASE("csv round trip preserves bits and masks") {
    Rng rng(11);
    std::vector<double> a(40), b(40), y(40);
    std::vector<uint8_t> ma(40), mb(40), my(40);
    for (size_t i = 0; i < 40; ++i) {
        a[i] = rng.normal() * std::pow(10.0, rng.normal() * 3);
        b[i] = rng.bernoulli(0.5);
        y[i] = rng.bernoulli(0.3);
        ma[i] = rng.bernoulli(0.2);
        mb[i] = rng.bernoulli(0.2);
        my[i] = rng.bernoulli(0.1);
    }
    auto ca = testing::column("x1", a);
    ca.missing = ma;
    auto cb = testing::column("x2", b, ColumnKind::Binary);
    cb.missing = mb;
    DataMatrix d({ca, cb}, y, my);
    fs::path p = fs::temp_directory_path() / "mivs_unit_rt.csv";
    save_csv(d, p);
    DataMatrix e = load_csv(p, schema_xy());
    for (size_t i = 0; i < 40; ++i) {
        for (size_t k = 0; k < 2; ++k) {
            REQUIRE(e.missing(i, k) == d.missing(i, k));
            if (!d.missing(i, k)) CHECK(e.value(i, k) == d.value(i, k));
        }
        CHECK(e.outcome_missing(i) == d.outcome_missing(i));
        if (!d.outcome_missing(i)) CHECK(e.outcome(i) == d.outcome(i));
    }
    save_csv(e, fs::temp_directory_path() / "mivs_unit_rt2.csv");
    std::ifstream f1(p), f2(fs::temp_directory_path() / "mivs_unit_rt2.csv");
    std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
}

TEST_CASE("infer_schema detects binary columns") {
    auto p = write_file("infer.csv", "a,b,y\n0.5,1,0\n1.5,NA,1\n2,0,1\n");
    Schema s = infer_schema(p);
    REQUIRE(s.columns.size() == 2);
    CHECK(s.columns[0].kind == ColumnKind::Continuous);
    CHECK(s.columns[1].kind == ColumnKind::Binary);
}

TEST_CASE("DataMatrix invariants") {
    CHECK_THROWS_AS(DataMatrix({testing::column("x", {0, 3}, ColumnKind::Binary)}, {0, 1}, {0, 0}), SchemaError);
    CHECK_THROWS_AS(DataMatrix({testing::column("x", {0, 1})}, {0, 2}, {0, 0}), SchemaError);
    auto c = testing::column("x", {0, 7}, ColumnKind::Binary);
    c.missing = {0, 1};
    DataMatrix d({c}, {0, 1}, {0, 0});
    CHECK(std::isnan(d.value(1, 0)));
    CHECK(d.incomplete_row_fraction() == doctest::Approx(0.5));
    CHECK(d.complete_cases().rows() == 1);
}

TEST_CASE("apply_transforms arithmetic and mask propagation") {
    auto x5 = testing::column("x5", {-0.4, 2.0, 1.0});
    auto x6 = testing::column("x6", {0.5, 1.0, 3.0});
    x6.missing = {0, 0, 1};
    DataMatrix d({x5, x6}, {0, 1, 0}, {0, 0, 0});
    TransformSpec t;
    t.product("x5", "x6").square("x5").cube("x5").exp("x6");
    DataMatrix q = apply_transforms(d, t);
    REQUIRE(q.cols() == 6);
    CHECK(q.value(0, 2) == doctest::Approx(-0.20));
    CHECK(q.value(1, 3) == 4.0);
    CHECK(q.value(1, 4) == 8.0);
    CHECK(q.value(1, 5) == doctest::Approx(std::exp(1.0)));
    for (size_t k = 2; k < 6; ++k) {
        bool needs_x6 = k == 2 || k == 5;
        CHECK(q.missing(2, k) == needs_x6);
        CHECK_FALSE(q.missing(0, k));
    }
    TransformSpec bad;
    bad.square("x9");
    CHECK_THROWS_AS(apply_transforms(d, bad), SpecError);
}

TEST_CASE("rng streams are reproducible and distinct") {
    Rng a(5, 3), b(5, 3), c(5, 4);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        uint64_t va = a(), vb = b(), vc = c();
        CHECK(va == vb);
        differs = differs || va != vc;
    }
    CHECK(differs);
    Rng root(9);
    Rng s1 = root.split(2);
    root();
    Rng s2 = root.split(2);
    CHECK(s1() == s2());

    Rng u(1);
    double mean = 0;
    for (int i = 0; i < 100000; ++i) mean += u.uniform() / 100000;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("to_dataset rejects masked cells") {
    auto c = testing::column("x", {1, 2});
    c.missing = {1, 0};
    DataMatrix d({c}, {0, 1}, {0, 0});
    CHECK_THROWS_AS(to_dataset(d), SpecError);
    CHECK(to_dataset(d.complete_cases()).rows() == 1);
}
