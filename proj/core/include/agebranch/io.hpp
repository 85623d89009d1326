#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agebranch/extinction.hpp"
#include "agebranch/model.hpp"
#include "agebranch/renewal.hpp"
#include "agebranch/simulate.hpp"
#include "agebranch/verify.hpp"

namespace agebranch {

// Shortest decimal form at 12 significant digits; deterministic across
// platforms, the reproducibility anchor of every CSV cell.
std::string format_sig(double v);

// Writes text to path, creating parent directories; throws on failure.
void write_text(const std::string& path, const std::string& text);

// Solved moment curves: t,rho,z,M_f,Gamma_f per grid node. Gamma_f cells
// are empty unless the second-moment block was filled.
std::string grid_csv(const RenewalGrid& grid);

// Laplace-limit curve: theta,phi,residual per node.
std::string phi_csv(const PhiCurve& curve);

// Extinction-by-time curve: t,q_t per node.
std::string extinction_csv(const ExtinctionResult& ext);

// One row per (trajectory, observation time):
// traj,seed,t,pop,sum_f,W_f,A_f,extinct,truncated. A_f is empty when the
// population is zero.
std::string trajectories_csv(const std::vector<TrajectoryResult>& rs,
                             const TestFunction& f, double alpha_tilde);

// Columnar JSON twins of the CSV artifacts, for --format json.
std::string grid_json(const RenewalGrid& grid);
std::string phi_json(const PhiCurve& curve);
std::string extinction_curve_json(const ExtinctionResult& ext);
std::string trajectories_json(const std::vector<TrajectoryResult>& rs,
                              const TestFunction& f, double alpha_tilde);

// JSON array with every CheckReport field, and its CSV twin (notes quoted).
std::string reports_json(const std::vector<CheckReport>& reports);
std::string reports_csv(const std::vector<CheckReport>& reports);

// Run provenance. Two runs with equal manifests minus the timestamp
// produce byte-identical data outputs.
struct RunManifest {
  std::string tool_version;
  std::string spec_digest;  // content digest of the canonicalized config
  std::string command;
  std::vector<std::string> flags;
  std::uint64_t seed = 0;
  int threads = 0;         // informational; never affects output bytes
  std::string timestamp;   // informational
};

std::string manifest_json(const RunManifest& m);

}  // namespace agebranch
