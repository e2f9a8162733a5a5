#include <doctest.h>

#include <json.hpp>

#include "cli_util.h"

using testing::run_cli;
using testing::slurp;
namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

} // namespace

TEST_CASE("help and version exit cleanly") {
    auto dir = testing::fresh_dir("cli_help");
    CHECK(run_cli("simulate --help", dir) == 0);
    CHECK(slurp(dir / "stdout.txt").find("--scenario") != std::string::npos);
    CHECK(run_cli("--version", dir) == 0);
}

TEST_CASE("usage errors exit 2 and name the flag") {
    auto dir = testing::fresh_dir("cli_usage");
    CHECK(run_cli("select --method lasso --out x.json --seed 1", dir) == 2);
    auto err = nlohmann::json::parse(slurp(dir / "stderr.txt"));
    CHECK(err["exit_code"] == 2);
    CHECK(err["message"].get<std::string>().find("--in") != std::string::npos);
    CHECK(run_cli("frobnicate", dir) == 2);
    CHECK(run_cli("generate --seed 1 --out " + q(dir / "g.csv") + " --n 10", dir) == 2);
    CHECK(run_cli("--threads 0 generate --seed 1 --out " + q(dir / "g.csv"), dir) == 2);
}

TEST_CASE("missing input exits 3") {
    auto dir = testing::fresh_dir("cli_io");
    CHECK(run_cli("select --method lasso --in " + q(dir / "absent.csv") + " --out " + q(dir / "o.json") + " --seed 1",
                  dir) == 3);
    auto err = nlohmann::json::parse(slurp(dir / "stderr.txt"));
    CHECK(err["exit_code"] == 3);
}

TEST_CASE("unknown settings keys are rejected") {
    auto dir = testing::fresh_dir("cli_settings");
    std::ofstream(dir / "s.json") << R"({"n": 100, "bogus": 1})";
    CHECK(run_cli("generate --seed 1 --out " + q(dir / "g.csv") + " --config " + q(dir / "s.json"), dir) == 2);
}

TEST_CASE("generate, ampute, select and replay") {
    auto dir = testing::fresh_dir("cli_flow");
    REQUIRE(run_cli("generate --n 120 --seed 3 --out " + q(dir / "full.csv"), dir) == 0);
    REQUIRE(run_cli("ampute --config pct30 --seed 4 --in " + q(dir / "full.csv") + " --out " + q(dir / "miss.csv"),
                    dir) == 0);
    CHECK(slurp(dir / "miss.csv").find("NA") != std::string::npos);
    REQUIRE(run_cli("select --method stepwise --impute mice --B 3 --pi 0.5 --seed 5 --in " + q(dir / "miss.csv") +
                        " --out " + q(dir / "sel.json"),
                    dir) == 0);
    auto sel = nlohmann::json::parse(slurp(dir / "sel.json"));
    CHECK(sel["B"] == 3);
    CHECK(sel["frequencies"].size() == 50);
    auto manifest = nlohmann::json::parse(slurp(dir / "sel.json.manifest.json"));
    CHECK(manifest["command"] == "select");
    CHECK(manifest["seed"] == 5);

    REQUIRE(run_cli("replay --manifest " + q(dir / "sel.json.manifest.json") + " --out " + q(dir / "sel2.json"), dir) ==
            0);
    auto a = nlohmann::json::parse(slurp(dir / "sel.json"));
    auto b = nlohmann::json::parse(slurp(dir / "sel2.json"));
    CHECK(a["frequencies"] == b["frequencies"]);
    CHECK(a["replicates"] == b["replicates"]);

    REQUIRE(run_cli("metrics --in " + q(dir / "sel.json") + " --truth x1,x2,x3,x4,x5,x6,x7,x8,x9,x10 --out " +
                        q(dir / "m.csv"),
                    dir) == 0);
    CHECK(slurp(dir / "m.csv").rfind("method,scenario,pi,", 0) == 0);
}
