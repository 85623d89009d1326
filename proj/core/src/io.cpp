#include "agebranch/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <system_error>

#include "json.hpp"

namespace agebranch {

std::string format_sig(double v) {
  char buf[40];
  const auto res =
      std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec)
      throw std::runtime_error("write_text: cannot create " +
                               p.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_text: cannot open " + path);
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write_text: short write to " + path);
}

std::string grid_csv(const RenewalGrid& grid) {
  std::string out = "t,rho,z,M_f,Gamma_f\n";
  const bool with_gamma = grid.Gamma.size() == grid.t.size();
  for (std::size_t i = 0; i < grid.t.size(); ++i) {
    out += format_sig(grid.t[i]);
    out += ',';
    out += format_sig(grid.rho[i]);
    out += ',';
    out += format_sig(grid.z[i]);
    out += ',';
    out += format_sig(grid.M[i]);
    out += ',';
    if (with_gamma) out += format_sig(grid.Gamma[i]);
    out += '\n';
  }
  return out;
}

std::string phi_csv(const PhiCurve& curve) {
  std::string out = "theta,phi,residual\n";
  for (std::size_t i = 0; i < curve.theta.size(); ++i) {
    out += format_sig(curve.theta[i]);
    out += ',';
    out += format_sig(curve.phi[i]);
    out += ',';
    out += format_sig(curve.residual[i]);
    out += '\n';
  }
  return out;
}

std::string extinction_csv(const ExtinctionResult& ext) {
  std::string out = "t,q_t\n";
  for (std::size_t i = 0; i < ext.t.size(); ++i) {
    out += format_sig(ext.t[i]);
    out += ',';
    out += format_sig(ext.q_curve[i]);
    out += '\n';
  }
  return out;
}

std::string trajectories_csv(const std::vector<TrajectoryResult>& rs,
                             const TestFunction& f, double alpha_tilde) {
  std::string out = "traj,seed,t,pop,sum_f,W_f,A_f,extinct,truncated\n";
  for (const TrajectoryResult& tr : rs) {
    for (const Snapshot& snap : tr.snapshots) {
      const Observables o = observables(snap, f, alpha_tilde);
      out += std::to_string(tr.index);
      out += ',';
      out += std::to_string(tr.seed);
      out += ',';
      out += format_sig(snap.t);
      out += ',';
      out += std::to_string(o.pop);
      out += ',';
      out += format_sig(o.sum_f);
      out += ',';
      out += format_sig(o.w_f);
      out += ',';
      if (o.a_f) out += format_sig(*o.a_f);
      out += ',';
      out += tr.extinct ? '1' : '0';
      out += ',';
      out += tr.truncated ? '1' : '0';
      out += '\n';
    }
  }
  return out;
}

namespace {

nlohmann::ordered_json number_column(const std::vector<double>& v) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

}  // namespace

std::string grid_json(const RenewalGrid& grid) {
  nlohmann::ordered_json j;
  j["t"] = number_column(grid.t);
  j["rho"] = number_column(grid.rho);
  j["z"] = number_column(grid.z);
  j["M_f"] = number_column(grid.M);
  if (grid.Gamma.size() == grid.t.size()) j["Gamma_f"] = number_column(grid.Gamma);
  return j.dump(2) + "\n";
}

std::string phi_json(const PhiCurve& curve) {
  nlohmann::ordered_json j;
  j["theta"] = number_column(curve.theta);
  j["phi"] = number_column(curve.phi);
  j["residual"] = number_column(curve.residual);
  j["c_slope"] = curve.c_slope;
  return j.dump(2) + "\n";
}

std::string extinction_curve_json(const ExtinctionResult& ext) {
  nlohmann::ordered_json j;
  j["t"] = number_column(ext.t);
  j["q_t"] = number_column(ext.q_curve);
  return j.dump(2) + "\n";
}

std::string trajectories_json(const std::vector<TrajectoryResult>& rs,
                              const TestFunction& f, double alpha_tilde) {
  nlohmann::ordered_json traj = nlohmann::ordered_json::array();
  nlohmann::ordered_json seed = nlohmann::ordered_json::array();
  nlohmann::ordered_json t = nlohmann::ordered_json::array();
  nlohmann::ordered_json pop = nlohmann::ordered_json::array();
  nlohmann::ordered_json sum_f = nlohmann::ordered_json::array();
  nlohmann::ordered_json w_f = nlohmann::ordered_json::array();
  nlohmann::ordered_json a_f = nlohmann::ordered_json::array();
  nlohmann::ordered_json extinct = nlohmann::ordered_json::array();
  nlohmann::ordered_json truncated = nlohmann::ordered_json::array();
  for (const TrajectoryResult& tr : rs) {
    for (const Snapshot& snap : tr.snapshots) {
      const Observables o = observables(snap, f, alpha_tilde);
      traj.push_back(tr.index);
      seed.push_back(tr.seed);
      t.push_back(snap.t);
      pop.push_back(o.pop);
      sum_f.push_back(o.sum_f);
      w_f.push_back(o.w_f);
      if (o.a_f)
        a_f.push_back(*o.a_f);
      else
        a_f.push_back(nullptr);
      extinct.push_back(tr.extinct);
      truncated.push_back(tr.truncated);
    }
  }
  nlohmann::ordered_json j;
  j["traj"] = std::move(traj);
  j["seed"] = std::move(seed);
  j["t"] = std::move(t);
  j["pop"] = std::move(pop);
  j["sum_f"] = std::move(sum_f);
  j["W_f"] = std::move(w_f);
  j["A_f"] = std::move(a_f);
  j["extinct"] = std::move(extinct);
  j["truncated"] = std::move(truncated);
  return j.dump(2) + "\n";
}

std::string reports_csv(const std::vector<CheckReport>& reports) {
  std::string out =
      "name,n,surviving,estimate,target,se,statistic,threshold,pass,counted,seed,note\n";
  for (const CheckReport& r : reports) {
    out += csv_quote(r.name);
    out += ',';
    out += std::to_string(r.n);
    out += ',';
    out += std::to_string(r.surviving);
    out += ',';
    out += format_sig(r.estimate);
    out += ',';
    out += format_sig(r.target);
    out += ',';
    out += format_sig(r.se);
    out += ',';
    out += format_sig(r.statistic);
    out += ',';
    out += format_sig(r.threshold);
    out += ',';
    out += r.pass ? '1' : '0';
    out += ',';
    out += r.counted ? '1' : '0';
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += csv_quote(r.note);
    out += '\n';
  }
  return out;
}

std::string reports_json(const std::vector<CheckReport>& reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const CheckReport& r : reports) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["n"] = r.n;
    j["surviving"] = r.surviving;
    j["estimate"] = r.estimate;
    j["target"] = r.target;
    j["se"] = r.se;
    j["statistic"] = r.statistic;
    j["threshold"] = r.threshold;
    j["pass"] = r.pass;
    j["counted"] = r.counted;
    j["seed"] = r.seed;
    j["note"] = r.note;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool_version"] = m.tool_version;
  j["spec_digest"] = m.spec_digest;
  j["command"] = m.command;
  j["flags"] = m.flags;
  j["seed"] = m.seed;
  j["threads"] = m.threads;
  j["timestamp"] = m.timestamp;
  return j.dump(2) + "\n";
}

}  // namespace agebranch
