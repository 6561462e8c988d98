#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "drna/cli_app.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"drna"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return drna::cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int data_rows(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);  // header
    int rows = 0;
    while (std::getline(in, line)) rows += !line.empty();
    return rows;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / tag) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const { return (path / sub).string(); }
};

}  // namespace

TEST_CASE("cli: run-tracking writes the error series and run summary") {
    TempDir tmp("drna_cli_tracking");
    const int code = run_cli({"run-tracking", "--pes", "2", "--k", "8", "--n0", "2", "--steps",
                              "5", "--runs", "2", "--seed", "7", "--out", tmp.str("a")});
    CHECK(code == 0);
    CHECK(data_rows(tmp.path / "a" / "errors.csv") == 5);
    CHECK(data_rows(tmp.path / "a" / "run_summary.csv") == 2);

    // Re-running the same configuration reproduces the files byte for byte.
    const int again = run_cli({"run-tracking", "--pes", "2", "--k", "8", "--n0", "2", "--steps",
                               "5", "--runs", "2", "--seed", "7", "--out", tmp.str("b")});
    CHECK(again == 0);
    CHECK(slurp(tmp.path / "a" / "errors.csv") == slurp(tmp.path / "b" / "errors.csv"));
    CHECK(slurp(tmp.path / "a" / "run_summary.csv") == slurp(tmp.path / "b" / "run_summary.csv"));
}

TEST_CASE("cli: output does not depend on the worker count") {
    TempDir tmp("drna_cli_workers");
    const std::vector<std::string> base{"run-tracking", "--pes", "2",    "--k",    "8",
                                        "--n0",         "2",     "--steps", "6",   "--runs",
                                        "3",            "--seed", "11"};
    auto with = [&](const std::string& workers, const std::string& out) {
        std::vector<std::string> args = base;
        args.insert(args.end(), {"--workers", workers, "--out", out});
        return run_cli(args);
    };
    CHECK(with("1", tmp.str("w1")) == 0);
    CHECK(with("3", tmp.str("w3")) == 0);
    CHECK(slurp(tmp.path / "w1" / "errors.csv") == slurp(tmp.path / "w3" / "errors.csv"));
    CHECK(slurp(tmp.path / "w1" / "run_summary.csv") ==
          slurp(tmp.path / "w3" / "run_summary.csv"));
}

TEST_CASE("cli: a single PE is a valid configuration") {
    TempDir tmp("drna_cli_single_pe");
    const int code = run_cli({"run-tracking", "--pes", "1", "--k", "16", "--steps", "4", "--runs",
                              "2", "--out", tmp.str()});
    CHECK(code == 0);
    CHECK(data_rows(tmp.path / "errors.csv") == 4);
}

TEST_CASE("cli: topology export") {
    TempDir tmp("drna_cli_topo");
    const int code =
        run_cli({"run-tracking", "--pes", "4", "--k", "8", "--n0", "2", "--steps", "3", "--runs",
                 "1", "--export-topology", "--out", tmp.str()});
    CHECK(code == 0);
    CHECK(fs::exists(tmp.path / "topology.csv"));
    CHECK(fs::exists(tmp.path / "exchange_map.csv"));
    CHECK(data_rows(tmp.path / "exchange_map.csv") == 4 * 8);
}

TEST_CASE("cli: assumption check verdicts") {
    TempDir tmp("drna_cli_assumption");
    // M=4 makes the default bound c^q/M^(q-eps) = 256/128 = 2, unbeatable by
    // a statistic that never exceeds 1.
    const int pass = run_cli({"run-assumption-check", "--pes", "4", "--k", "16", "--n0", "2",
                              "--steps", "10", "--runs", "2", "--out", tmp.str("pass")});
    CHECK(pass == 0);
    CHECK(data_rows(tmp.path / "pass" / "sup_moment.csv") == 11);

    // A tiny c makes the bound unreachable; the check must fail with exit 2
    // and still leave the series on disk.
    const int fail = run_cli({"run-assumption-check", "--pes", "4", "--k", "16", "--n0", "2",
                              "--steps", "10", "--runs", "2", "--c", "0.01", "--out",
                              tmp.str("fail")});
    CHECK(fail == 2);
    CHECK(data_rows(tmp.path / "fail" / "sup_moment.csv") == 11);
}

TEST_CASE("cli: rate fit needs at least two PE counts") {
    TempDir tmp("drna_cli_rate_one");
    const int code = run_cli({"run-rate-fit", "--pes-list", "4", "--k", "8", "--steps", "3",
                              "--runs", "2", "--proxy-particles", "32", "--out", tmp.str()});
    CHECK(code == 1);
    CHECK_FALSE(fs::exists(tmp.path / "rate_fit.csv"));
}

TEST_CASE("cli: rate fit smoke run") {
    TempDir tmp("drna_cli_rate");
    const int code =
        run_cli({"run-rate-fit", "--pes-list", "2", "4", "--k", "8", "--n0", "2", "--steps", "4",
                 "--runs", "2", "--proxy-particles", "32", "--out", tmp.str()});
    CHECK(code == 0);
    CHECK(fs::exists(tmp.path / "rate_fit.csv"));
    // An impossible requested band turns the same run into exit 2.
    const int banded =
        run_cli({"run-rate-fit", "--pes-list", "2", "4", "--k", "8", "--n0", "2", "--steps", "4",
                 "--runs", "2", "--proxy-particles", "32", "--zeta-min", "1000", "--out",
                 tmp.str("band")});
    CHECK(banded == 2);
}

TEST_CASE("cli: oracle check smoke run") {
    TempDir tmp("drna_cli_oracle");
    const int code = run_cli({"run-oracle-check", "--pes", "2", "--n0", "5", "--steps", "10",
                              "--runs", "4", "--k-grid", "2", "64", "--max-error", "1.0", "--out",
                              tmp.str()});
    CHECK(code == 0);
    CHECK(data_rows(tmp.path / "oracle_check.csv") == 2);

    // An unreachable error target fails with exit 2.
    const int strict = run_cli({"run-oracle-check", "--pes", "2", "--n0", "5", "--steps", "10",
                                "--runs", "4", "--k-grid", "2", "64", "--max-error", "1e-9",
                                "--out", tmp.str("strict")});
    CHECK(strict == 2);
}

TEST_CASE("cli: parse errors and help") {
    CHECK(run_cli({"run-tracking", "--no-such-flag"}) == 1);
    CHECK(run_cli({}) == 1);                   // a subcommand is required
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({"run-tracking", "--help"}) == 0);
    CHECK(run_cli({"run-tracking", "--pes", "0"}) == 1);  // rejected by validation
}

TEST_CASE("cli: config file supplies subcommand options") {
    TempDir tmp("drna_cli_config");
    const fs::path cfg = tmp.path / "run.ini";
    {
        std::ofstream out(cfg);
        out << "[run-tracking]\n"
            << "pes=2\n"
            << "k=8\n"
            << "n0=2\n"
            << "steps=4\n"
            << "runs=2\n"
            << "out=" << tmp.str("cfg_out") << "\n";
    }
    const int code = run_cli({"--config", cfg.string(), "run-tracking"});
    CHECK(code == 0);
    CHECK(data_rows(tmp.path / "cfg_out" / "errors.csv") == 4);
}
