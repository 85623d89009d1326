#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "agebranch/extinction.hpp"
#include "agebranch/io.hpp"
#include "agebranch/renewal.hpp"
#include "agebranch/simulate.hpp"
#include "agebranch/verify.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"

using namespace agebranch;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(AGEBRANCH_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string config_path(const std::string& name) {
  return std::string(AGEBRANCH_CONFIG_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("format_sig: shortest stable decimal form") {
  CHECK(format_sig(0.1) == "0.1");
  CHECK(format_sig(2.0) == "2");
  CHECK(format_sig(-1.5) == "-1.5");
  const std::string e12 = format_sig(std::exp(1.0));
  CHECK(std::stod(e12) == doctest::Approx(std::exp(1.0)).epsilon(1e-11));
}

TEST_CASE("csv artifacts: headers and row counts") {
  const auto spec = fixtures::expbase(0.05, 2.0);
  const auto sol = malthusian(spec);
  auto grid = mean_measure(spec, sol);
  CHECK(first_line(grid_csv(grid)) == "t,rho,z,M_f,Gamma_f");
  second_moment(spec, sol, grid);
  const std::string g = grid_csv(grid);
  std::size_t rows = 0;
  for (char c : g) rows += c == '\n' ? 1 : 0;
  CHECK(rows == grid.t.size() + 1);

  const auto ext = extinction_curve(spec);
  CHECK(first_line(extinction_csv(ext)) == "t,q_t");

  PhiCurve curve;
  curve.theta = {0.5, 1.0};
  curve.phi = {0.7, 0.6};
  curve.residual = {1e-4, 2e-4};
  CHECK(first_line(phi_csv(curve)) == "theta,phi,residual");

  auto s2 = spec;
  s2.sim.trajectories = 5;
  s2.sim.obs_times = {0.5, 1.0};
  s2.sim.seed = 4;
  const auto rs = run_ensemble(s2, s2.sim);
  const std::string tcsv = trajectories_csv(rs, s2.f, sol.alpha_tilde);
  CHECK(first_line(tcsv) ==
        "traj,seed,t,pop,sum_f,W_f,A_f,extinct,truncated");
  rows = 0;
  for (char c : tcsv) rows += c == '\n' ? 1 : 0;
  CHECK(rows == 5 * 2 + 1);
}

TEST_CASE("json artifacts: parse back with matching columns") {
  const auto spec = fixtures::expbase(0.05, 2.0);
  const auto sol = malthusian(spec);
  auto grid = mean_measure(spec, sol);
  const auto j = nlohmann::json::parse(grid_json(grid));
  REQUIRE(j.contains("t"));
  REQUIRE(j.contains("M_f"));
  CHECK(j["t"].size() == grid.t.size());
  CHECK(double(j["M_f"].back()) ==
        doctest::Approx(grid.M.back()).epsilon(1e-10));

  const auto ext = extinction_curve(spec);
  const auto je = nlohmann::json::parse(extinction_curve_json(ext));
  CHECK(je["t"].size() == je["q_t"].size());
}

TEST_CASE("report serialization: json fields and csv quoting") {
  CheckReport r;
  r.name = "demo";
  r.n = 10;
  r.surviving = 8;
  r.estimate = 1.5;
  r.target = 1.0;
  r.se = 0.25;
  r.statistic = 2.0;
  r.threshold = 4.0;
  r.pass = true;
  r.counted = false;
  r.seed = 42;
  r.note = "says \"hi\", twice";
  const auto j = nlohmann::json::parse(reports_json({r}));
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 1);
  CHECK(j[0]["name"] == "demo");
  CHECK(j[0]["surviving"] == 8);
  CHECK(j[0]["pass"] == true);
  CHECK(j[0]["counted"] == false);
  CHECK(j[0]["seed"] == 42);
  CHECK(j[0]["note"] == "says \"hi\", twice");

  const std::string csv = reports_csv({r});
  CHECK(csv.find("\"says \"\"hi\"\", twice\"") != std::string::npos);
}

TEST_CASE("write_text: creates parent directories") {
  const auto dir = fresh_dir("agebranch_io_test");
  const auto nested = dir / "a" / "b" / "c.txt";
  write_text(nested.string(), "payload");
  CHECK(slurp(nested) == "payload");
}

TEST_CASE("manifest: carries the reproducibility anchors") {
  RunManifest m;
  m.tool_version = "0.1.0";
  m.spec_digest = "abc";
  m.command = "solve mean";
  m.flags = {"--config", "x.json"};
  m.seed = 7;
  m.threads = 3;
  m.timestamp = "2026-01-01T00:00:00Z";
  const auto j = nlohmann::json::parse(manifest_json(m));
  CHECK(j["tool_version"] == "0.1.0");
  CHECK(j["spec_digest"] == "abc");
  CHECK(j["seed"] == 7);
  CHECK(j["threads"] == 3);
}

TEST_CASE("cli: usage and config errors exit 2, validation gates exit 1") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("definitely-not-a-command") == 2);
  CHECK(run_cli("solve malthusian") == 2);  // --config is required
  CHECK(run_cli("solve malthusian --config /nonexistent.json") == 2);

  const auto dir = fresh_dir("agebranch_cli_badcfg");
  const auto bad = dir / "bad.json";
  write_text(bad.string(), "{\"alpha\": {\"kind\": \"constant\"}}");
  CHECK(run_cli("validate --config " + bad.string()) == 2);

  // Valid but non-supercritical model: clean parse, failed checks.
  CHECK(run_cli("validate --config " +
                config_path("subcritical_geometric.json")) == 1);
  CHECK(run_cli("validate --config " + config_path("expbase.json")) == 0);
}

TEST_CASE("cli: solve artifacts land in --out with a manifest") {
  const auto dir = fresh_dir("agebranch_cli_solve");
  const int rc = run_cli("solve malthusian --config " +
                         config_path("expbase.json") + " --out " +
                         dir.string());
  CHECK(rc == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "malthusian.json"));
  CHECK(double(j["alpha_tilde"]) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(fs::exists(dir / "manifest.json"));

  CHECK(run_cli("solve extinction --config " + config_path("expbase.json") +
                " --out " + dir.string()) == 0);
  const auto je = nlohmann::json::parse(slurp(dir / "extinction.json"));
  CHECK(double(je["q"]) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(first_line(slurp(dir / "extinction_curve.csv")) == "t,q_t");
}

TEST_CASE("cli: simulate is reproducible byte for byte") {
  const auto d1 = fresh_dir("agebranch_cli_sim1");
  const auto d2 = fresh_dir("agebranch_cli_sim2");
  const std::string common = " --config " + config_path("expbase.json") +
                             " --trajectories 40 --seed 11";
  CHECK(run_cli("simulate" + common + " --out " + d1.string()) == 0);
  CHECK(run_cli("simulate" + common + " --threads 3 --out " + d2.string()) ==
        0);
  CHECK(slurp(d1 / "trajectories.csv") == slurp(d2 / "trajectories.csv"));
}

TEST_CASE("cli: verify subcommand writes reports and report bundles them") {
  const auto dir = fresh_dir("agebranch_cli_verify");
  const auto cfg = dir / "desk.json";
  // Desk-scale protocol: small ensembles keep this test quick.
  write_text(cfg.string(), R"({
    "alpha": {"kind": "constant", "value": 2.0},
    "offspring": {"kind": "deterministic", "n": 1},
    "lifetime": {"kind": "exponential", "rate": 1.0},
    "f": {"kind": "one"},
    "numerics": {"h": 0.01, "T": 6.0},
    "sim": {"trajectories": 500, "seed": 8, "obs_times": [1.0, 2.0],
            "t_first_moments": [2.0], "y_draws": 2000}
  })");
  CHECK(run_cli("verify first-moments --config " + cfg.string() + " --out " +
                dir.string()) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "verify_first_moments.json"));
  REQUIRE(j.is_array());
  CHECK(j.size() >= 2);
  for (const auto& r : j) CHECK(r["pass"] == true);

  CHECK(run_cli("report --config " + cfg.string() + " --out " +
                dir.string()) == 0);
  const auto rep = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(rep.contains("files"));
  bool saw = false;
  for (const auto& f : rep["files"])
    saw = saw || f["name"] == "verify_first_moments.json";
  CHECK(saw);
}

TEST_CASE("cli: --format json produces json twins of grid artifacts") {
  const auto dir = fresh_dir("agebranch_cli_fmt");
  CHECK(run_cli("solve mean --config " + config_path("expbase.json") +
                " --out " + dir.string() + " --format json") == 0);
  CHECK(fs::exists(dir / "mean.json"));
  CHECK_FALSE(fs::exists(dir / "mean.csv"));
  const auto j = nlohmann::json::parse(slurp(dir / "mean.json"));
  REQUIRE(j.contains("M_f"));
}
