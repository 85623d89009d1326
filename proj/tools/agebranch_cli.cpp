#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agebranch/extinction.hpp"
#include "agebranch/io.hpp"
#include "agebranch/model.hpp"
#include "agebranch/renewal.hpp"
#include "agebranch/simulate.hpp"
#include "agebranch/verify.hpp"
#include "agebranch/version.hpp"
#include "json.hpp"

namespace {

using nlohmann::ordered_json;

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<long> trajectories;
  std::optional<int> threads;
  std::string format;  // "", "csv" or "json"
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string iso_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// grids default to csv, reports to json; an explicit --format wins for both
bool grids_as_json(const Options& o) { return o.format == "json"; }
bool reports_as_csv(const Options& o) { return o.format == "csv"; }

struct Ctx {
  Options opt;
  agebranch::ModelSpec spec;
  std::string digest;
  std::string command;
};

Ctx make_ctx(const Options& opt, const std::string& command) {
  Ctx ctx;
  ctx.opt = opt;
  ctx.spec = agebranch::model_from_json(read_file(opt.config));
  if (opt.seed) ctx.spec.sim.seed = *opt.seed;
  if (opt.trajectories) {
    if (*opt.trajectories < 0)
      throw std::runtime_error("--trajectories must be >= 0");
    ctx.spec.sim.trajectories = *opt.trajectories;
  }
  if (opt.threads) ctx.spec.sim.threads = *opt.threads;
  ctx.digest = agebranch::model_digest(ctx.spec);
  ctx.command = command;
  return ctx;
}

std::string out_path(const Ctx& ctx, const std::string& name) {
  return (std::filesystem::path(ctx.opt.out) / name).string();
}

void write_manifest(const Ctx& ctx) {
  agebranch::RunManifest m;
  m.tool_version = agebranch::kVersion;
  m.spec_digest = ctx.digest;
  m.command = ctx.command;
  m.flags = {"config=" + ctx.opt.config, "out=" + ctx.opt.out,
             "format=" + (ctx.opt.format.empty() ? "default" : ctx.opt.format),
             "trajectories=" + std::to_string(ctx.spec.sim.trajectories)};
  m.seed = ctx.spec.sim.seed;
  m.threads = ctx.spec.sim.threads;
  m.timestamp = iso_now();
  agebranch::write_text(out_path(ctx, "manifest.json"),
                        agebranch::manifest_json(m));
}

void emit(const Ctx& ctx, const std::string& base, const std::string& csv,
          const std::string& json) {
  const bool as_json = grids_as_json(ctx.opt);
  agebranch::write_text(out_path(ctx, base + (as_json ? ".json" : ".csv")),
                        as_json ? json : csv);
}

ordered_json solution_json(const agebranch::MalthusianSolution& sol) {
  ordered_json j;
  j["alpha_tilde"] = sol.alpha_tilde;
  j["m"] = sol.m;
  j["c9"] = sol.c9;
  j["n1"] = sol.n1;
  j["residual"] = sol.residual;
  return j;
}

int cmd_validate(const Ctx& ctx) {
  const agebranch::ValidationReport rep = agebranch::validate(ctx.spec);
  ordered_json j;
  j["pass"] = rep.pass;
  j["m"] = rep.m;
  j["beta"] = rep.beta;
  j["spec_digest"] = ctx.digest;
  ordered_json checks = ordered_json::array();
  for (const auto& c : rep.checks) {
    ordered_json cj;
    cj["name"] = c.name;
    cj["value"] = c.value;
    cj["threshold"] = c.threshold;
    cj["pass"] = c.pass;
    checks.push_back(std::move(cj));
  }
  j["checks"] = std::move(checks);
  std::printf("%s\n", j.dump(2).c_str());
  return rep.pass ? 0 : 1;
}

int cmd_solve(const Ctx& ctx, const std::string& what) {
  using namespace agebranch;
  const MalthusianSolution sol = malthusian(ctx.spec);
  if (what == "malthusian") {
    write_text(out_path(ctx, "malthusian.json"),
               solution_json(sol).dump(2) + "\n");
  } else if (what == "mean") {
    const RenewalGrid grid = mean_measure(ctx.spec, sol);
    emit(ctx, "mean", grid_csv(grid), grid_json(grid));
  } else if (what == "second-moment") {
    RenewalGrid grid = mean_measure(ctx.spec, sol);
    second_moment(ctx.spec, sol, grid);
    emit(ctx, "second_moment", grid_csv(grid), grid_json(grid));
  } else if (what == "limits") {
    const LimitFunctionals lim = limit_functionals(ctx.spec, sol);
    const PsiFun psi(ctx.spec, sol);
    ordered_json j;
    j["solution"] = solution_json(sol);
    j["a_f"] = lim.a_f;
    j["A_f"] = lim.A_f;
    j["n1"] = lim.n1;
    j["A_sigma"] = lim.A_sigma;
    j["G_V"] = lim.G_V;
    j["tail_bound"] = lim.tail_bound;
    j["mean_Y"] = mean_Y(ctx.spec, sol);
    ordered_json ju = ordered_json::array(), jv = ordered_json::array();
    for (double u = 1e-3; u <= 10.0 + 1e-12; u *= 2.0) {
      ju.push_back(u);
      jv.push_back(psi(u));
    }
    j["psi"] = ordered_json{{"u", std::move(ju)}, {"value", std::move(jv)}};
    write_text(out_path(ctx, "limits.json"), j.dump(2) + "\n");
  } else if (what == "extinction") {
    const ExtinctionResult ext = extinction_curve(ctx.spec);
    ordered_json j;
    j["q"] = ext.q;
    j["q_mean_intensity"] = ext.q_mean_intensity;
    j["fixed_point_residual"] = ext.fixed_point_residual;
    write_text(out_path(ctx, "extinction.json"), j.dump(2) + "\n");
    emit(ctx, "extinction_curve", extinction_csv(ext),
         extinction_curve_json(ext));
  } else {  // phi
    const PhiCurve curve = phi_limit(ctx.spec, sol, default_theta_grid());
    emit(ctx, "phi", phi_csv(curve), phi_json(curve));
  }
  write_manifest(ctx);
  return 0;
}

int cmd_simulate(const Ctx& ctx) {
  using namespace agebranch;
  const MalthusianSolution sol = malthusian(ctx.spec);
  const auto rs = run_ensemble(ctx.spec, ctx.spec.sim);
  emit(ctx, "trajectories",
       trajectories_csv(rs, ctx.spec.f, sol.alpha_tilde),
       trajectories_json(rs, ctx.spec.f, sol.alpha_tilde));
  write_manifest(ctx);
  return 0;
}

int cmd_verify(const Ctx& ctx, const std::string& what) {
  using namespace agebranch;
  const MalthusianSolution sol = malthusian(ctx.spec);
  const SimConfig& sim = ctx.spec.sim;
  const std::size_t n = static_cast<std::size_t>(sim.trajectories);
  std::vector<CheckReport> reports;
  if (what == "first-moments") {
    reports = check_first_moments(ctx.spec, sol, sim.t_first_moments, n,
                                  sim.seed, static_cast<std::size_t>(sim.y_draws));
  } else if (what == "distributional") {
    reports = check_distributional(ctx.spec, sol, sim.t_distributional, n,
                                   sim.seed + 1);
  } else if (what == "variance") {
    reports = {check_variance(ctx.spec, sol, sim.t_variance, n, sim.seed + 2)};
  } else if (what == "clt") {
    reports = check_clt(ctx.spec, sol, sim.t_clt, sim.s0,
                        static_cast<std::size_t>(sim.clt_trajectories),
                        sim.seed + 3);
  } else {  // all
    reports = verify_all(ctx.spec);
  }
  std::string base = "verify_" + what;
  for (char& c : base)
    if (c == '-') c = '_';
  if (reports_as_csv(ctx.opt))
    agebranch::write_text(out_path(ctx, base + ".csv"), reports_csv(reports));
  else
    agebranch::write_text(out_path(ctx, base + ".json"), reports_json(reports));
  write_manifest(ctx);
  std::size_t failed = 0;
  for (const auto& r : reports)
    if (r.counted && !r.pass) ++failed;
  std::printf("%zu checks, %zu counted failures\n", reports.size(), failed);
  return failed == 0 ? 0 : 1;
}

int cmd_report(const Ctx& ctx) {
  namespace fs = std::filesystem;
  ordered_json j;
  j["tool_version"] = agebranch::kVersion;
  j["spec_digest"] = ctx.digest;
  ordered_json files = ordered_json::array();
  std::vector<fs::path> paths;
  if (fs::exists(ctx.opt.out))
    for (const auto& entry : fs::directory_iterator(ctx.opt.out))
      if (entry.is_regular_file() && entry.path().filename() != "report.json")
        paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  std::size_t checks = 0, failures = 0;
  for (const fs::path& p : paths) {
    ordered_json fj;
    fj["name"] = p.filename().string();
    fj["bytes"] = static_cast<std::uint64_t>(fs::file_size(p));
    const std::string name = p.filename().string();
    if (name.rfind("verify_", 0) == 0 && p.extension() == ".json") {
      const ordered_json reports = ordered_json::parse(read_file(p.string()));
      std::size_t local_fail = 0;
      for (const auto& r : reports)
        if (r.at("counted").get<bool>() && !r.at("pass").get<bool>())
          ++local_fail;
      checks += reports.size();
      failures += local_fail;
      fj["checks"] = reports.size();
      fj["failures"] = local_fail;
    }
    files.push_back(std::move(fj));
  }
  j["files"] = std::move(files);
  j["checks_seen"] = checks;
  j["failures_seen"] = failures;
  agebranch::write_text(out_path(ctx, "report.json"), j.dump(2) + "\n");
  std::printf("%s\n", out_path(ctx, "report.json").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"age-structured branching process toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  app.add_option("--config", opt.config, "model configuration (JSON)")
      ->required();
  app.add_option("--out", opt.out, "output directory (default ./out)");
  std::uint64_t seed_in = 0;
  auto* seed_opt = app.add_option("--seed", seed_in, "master seed override");
  long traj_in = 0;
  auto* traj_opt =
      app.add_option("--trajectories", traj_in, "trajectory count override");
  int threads_in = 0;
  auto* threads_opt =
      app.add_option("--threads", threads_in, "worker count (0 = auto)");
  app.add_option("--format", opt.format, "artifact format")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI::App* validate = app.add_subcommand("validate", "check the model config");
  CLI::App* solve = app.add_subcommand("solve", "analytic curves and constants");
  solve->require_subcommand(1);
  std::vector<CLI::App*> solve_subs;
  for (const char* name :
       {"malthusian", "mean", "second-moment", "limits", "extinction", "phi"})
    solve_subs.push_back(solve->add_subcommand(name));
  CLI::App* simulate = app.add_subcommand("simulate", "run a trajectory ensemble");
  CLI::App* verify = app.add_subcommand("verify", "statistical checks");
  verify->require_subcommand(1);
  std::vector<CLI::App*> verify_subs;
  for (const char* name :
       {"first-moments", "distributional", "variance", "clt", "all"})
    verify_subs.push_back(verify->add_subcommand(name));
  app.add_subcommand("report", "bundle output artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*seed_opt) opt.seed = seed_in;
    if (*traj_opt) opt.trajectories = traj_in;
    if (*threads_opt) opt.threads = threads_in;

    std::string command;
    std::string sub;
    if (*validate) {
      command = "validate";
    } else if (*solve) {
      sub = solve->get_subcommands().front()->get_name();
      command = "solve " + sub;
    } else if (*simulate) {
      command = "simulate";
    } else if (*verify) {
      sub = verify->get_subcommands().front()->get_name();
      command = "verify " + sub;
    } else {
      command = "report";
    }

    const Ctx ctx = make_ctx(opt, command);
    if (*validate) return cmd_validate(ctx);
    if (*solve) return cmd_solve(ctx, sub);
    if (*simulate) return cmd_simulate(ctx);
    if (*verify) return cmd_verify(ctx, sub);
    return cmd_report(ctx);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
