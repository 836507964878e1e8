#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "sflab/cli.hpp"

using namespace sflab;
namespace fs = std::filesystem;

namespace {

struct TempRuns {
    fs::path dir;
    TempRuns() {
        dir = fs::temp_directory_path() / ("sflab_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        ::setenv("SFLAB_RUNS_DIR", dir.c_str(), 1);
    }
    ~TempRuns() { fs::remove_all(dir); }
};

int sh(const std::string& args, std::string* err = nullptr) {
    const std::string errfile = (fs::temp_directory_path() / ("sflab_cli_err_" + std::to_string(::getpid()))).string();
    const int rc = std::system((std::string(SFLAB_BIN) + " " + args + " >/dev/null 2>" + errfile).c_str());
    if (err) {
        std::ifstream in(errfile);
        std::stringstream ss;
        ss << in.rdbuf();
        *err = ss.str();
    }
    fs::remove(errfile);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

}  // namespace

TEST_CASE("empty config resolves to defaults") {
    Config c;
    apply_config_text(c, "", "empty");
    CHECK(c == Config());
    CHECK(c.real("optimizer.beta1") == 0.9);
    CHECK(c.real("optimizer.gamma") == 0.01);
    CHECK_NOTHROW(cli::validate("toy", c));
}

TEST_CASE("config errors name the key") {
    Config c;
    try {
        c.set("optimizer.betaa", "0.5");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key == "optimizer.betaa");
    }
    try {
        c.set("train.steps", "ten");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key == "train.steps");
    }
    c.set("optimizer.beta1", "1.0");
    try {
        cli::validate("toy", c);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key == "optimizer.beta1");
    }
    Config d;
    CHECK_THROWS_AS(apply_config_text(d, "optimizer.gamma 0.1\n", "x"), ConfigError);
    CHECK_NOTHROW(apply_config_text(d, "# comment\n\noptimizer.gamma = 0.1  # trailing\nmeta.version = 9\n", "x"));
    CHECK(d.real("optimizer.gamma") == 0.1);
}

TEST_CASE("manifest round trip") {
    Config c = cli::defaults_for("train-mlp");
    c.set("optimizer.gamma", "0.125");
    c.set("flow.y0", "1.5, 2");
    c.set("name", "rt");
    Config back = cli::defaults_for("toy");
    apply_config_text(back, cli::manifest_text("train-mlp", c, "now", "runs/rt-0"), "manifest");
    CHECK(back == c);
    Config again;
    apply_config_text(again, serialize(c), "serialized");
    CHECK(again == c);
}

TEST_CASE("exit codes and precedence through the binary") {
    TempRuns tmp;
    std::string err;
    CHECK(sh("frobnicate", &err) == 2);
    CHECK(sh("toy --no-such-flag 1") == 2);
    CHECK(sh("toy --beta1 1.0", &err) == 2);
    CHECK(err.find("optimizer.beta1") != std::string::npos);

    const fs::path cfg = tmp.dir / "cfg.txt";
    spit(cfg, "optimizer.gamma = 0.05\ntrain.steps = 50\nname = prec\n");
    CHECK(sh("toy --config " + cfg.string() + " --gamma 2e-3") == 0);
    const std::string manifest = slurp(tmp.dir / "prec-0" / "manifest.txt");
    CHECK(manifest.find("optimizer.gamma = 2e-3") != std::string::npos);
    CHECK(manifest.find("train.steps = 50") != std::string::npos);
    spit(cfg, "optimizer.bogus = 1\n");
    CHECK(sh("toy --config " + cfg.string(), &err) == 2);
    CHECK(err.find("optimizer.bogus") != std::string::npos);
}

TEST_CASE("weights and stability smoke runs") {
    TempRuns tmp;
    CHECK(sh("weights --T 1000 --beta 0.9 --C 50 --name w") == 0);
    const std::string csv = slurp(tmp.dir / "w-0" / "trajectory.csv");
    CHECK(csv.rfind("t,alpha_exact,alpha_approx\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1001);

    CHECK(sh("stability --beta 0.9 --gamma 0.01 --name s") == 0);
    const std::string st = slurp(tmp.dir / "s-0" / "trajectory.csv");
    std::istringstream ss(st);
    std::string header, row;
    std::getline(ss, header);
    std::getline(ss, row);
    CHECK(header.rfind("beta,gamma,lambda,threshold_theory,threshold_empirical,rel_gap", 0) == 0);
    std::vector<std::string> cells;
    std::stringstream rs(row);
    for (std::string cell; std::getline(rs, cell, ',');) cells.push_back(cell);
    REQUIRE(cells.size() >= 4);
    CHECK(std::stod(cells[3]) == doctest::Approx(2000.0));
    // every run directory has exactly one manifest and nothing outside it
    for (const auto& e : fs::directory_iterator(tmp.dir)) CHECK(fs::exists(e.path() / "manifest.txt"));
}

TEST_CASE("replay: identical, tampered, version bump") {
    TempRuns tmp;
    REQUIRE(sh("toy --train.steps 400 --checkpoint.every 100 --name r") == 0);
    const fs::path run = tmp.dir / "r-0";
    CHECK(fs::exists(run / "checkpoints" / "step-100.ckpt"));
    CHECK(fs::exists(run / "summary.txt"));
    CHECK(sh("replay " + run.string()) == 0);

    const std::string original = slurp(run / "trajectory.csv");
    std::string tampered = original;
    const std::size_t row3 = [&] {
        std::size_t p = 0;
        for (int i = 0; i < 3; ++i) p = tampered.find('\n', p) + 1;
        return p;
    }();
    tampered.insert(row3, "9");
    spit(run / "trajectory.csv", tampered);
    std::string err;
    CHECK(sh("replay " + run.string(), &err) == 1);
    CHECK(err.find("differs at row 4") != std::string::npos);

    spit(run / "trajectory.csv", original);
    std::string manifest = slurp(run / "manifest.txt");
    const std::string from = std::string("meta.version = ") + cli::kVersion;
    manifest.replace(manifest.find(from), from.size(), "meta.version = 0.0.1");
    spit(run / "manifest.txt", manifest);
    CHECK(sh("replay " + run.string(), &err) == 0);
    CHECK(err.find("warning") != std::string::npos);
}

TEST_CASE("central-flow comparison via the binary") {
    TempRuns tmp;
    CHECK(sh("central-flow --flow.kind sfscalaradam --flow.exact_c true --flow.compare true --name cf") == 0);
    const std::string summary = slurp(tmp.dir / "cf-0" / "summary.txt");
    CHECK(summary.find("compare.ratio") != std::string::npos);
    CHECK(slurp(tmp.dir / "cf-0" / "trajectory.csv").rfind("t,y1,y2,S,nu,sigma2,precond_sharpness\n", 0) == 0);
}
