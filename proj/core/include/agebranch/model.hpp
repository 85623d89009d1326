#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "agebranch/rng.hpp"

namespace agebranch {

// Piecewise-linear interpolation on strictly increasing knots, constant
// beyond the first and last knot.
struct Table {
  std::vector<double> xs, ys;
  double operator()(double x) const;
  double max_y() const;
  double min_y() const;
};

// Birth intensity as a function of remaining lifetime. value() is the public
// contract (0 for arguments <= 0). interior() is the right-continuous
// version used inside quadratures: integrands are defined a.e. and the
// endpoint value at 0 must be the limit from the right, otherwise every
// kernel evaluation picks up an O(h) endpoint error.
struct RateFunction {
  enum class Kind { constant, table };
  Kind kind = Kind::constant;
  double c = 0.0;
  Table tab;

  double value(double x) const;
  double interior(double x) const;
  double sup() const;
  std::vector<double> breakpoints() const;

  static RateFunction constant(double v);
  static RateFunction table(std::vector<double> xs, std::vector<double> ys);
};

// Offspring-law parameter: scalar, or a table over remaining lifetime.
struct Param {
  bool is_table = false;
  double c = 0.0;
  Table tab;
  double at(double x) const { return is_table ? tab(x) : c; }
  double max() const { return is_table ? tab.max_y() : c; }
  double min() const { return is_table ? tab.min_y() : c; }
};

struct OffspringLaw {
  enum class Kind { deterministic, poisson, binary, geometric };
  Kind kind = Kind::deterministic;
  Param n;        // deterministic
  Param mean;     // poisson, geometric (support {0,1,2,...})
  Param p0, p2;   // binary (masses at 0 and 2; must sum to 1)

  double gf(double x, double s) const;         // E s^N, s in [0, 1]
  // E (1+w)^N - 1, accurate for |w| << 1 (expm1/log1p forms per family)
  double gf_m1(double x, double w) const;
  double mean_count(double x) const;           // E N
  double second_factorial(double x) const;     // E N(N-1)
  double pmf(double x, long k) const;
  double nlogn_moment(double x) const;         // E N log N
  long sample(double x, RngStream& rng) const; // consumes exactly one draw

  double sup_mean() const;
  double sup_second_factorial() const;
  std::vector<double> breakpoints() const;
};

struct LifetimeDist {
  enum class Kind { exponential, gamma, uniform, weibull };
  Kind kind = Kind::exponential;
  double a = 1.0, b = 0.0;  // rate | shape,scale | lo,hi | shape,scale

  double cdf(double x) const;
  double pdf(double x) const;
  double quantile(double p) const;          // p in [0, 1)
  double sample(RngStream& rng) const;
  std::vector<double> breakpoints() const;  // density discontinuities
};

// Bounded nonnegative test function on (0, inf); value(x) = 0 for x <= 0.
// `scale` is a programmatic hook (not part of the config schema) so the
// c*f covariance property can run through the identical code path.
struct TestFunction {
  enum class Kind { one, indicator, expdecay, table };
  Kind kind = Kind::one;
  double x0 = 1.0;    // indicator of (0, x0]
  double rate = 1.0;  // expdecay e^{-rate x}
  Table tab;
  double scale = 1.0;

  double value(double x) const;
  double interior(double x) const;  // right-continuous at 0
  double sup() const;
  std::vector<double> breakpoints() const;  // jump/kink abscissae
};

struct NumericsConfig {
  double h = 0.01;
  double T = 12.0;
  double tail_q = 1e-10;
  double tol = 1e-10;
  int max_iter = 10000;
};

struct SimConfig {
  long trajectories = 10000;
  std::uint64_t seed = 1;
  std::vector<double> obs_times = {2, 4, 6, 8, 10};
  long max_pop = 1000000;
  int threads = 0;  // 0 = hardware concurrency
  // verification protocol
  std::vector<double> t_first_moments = {2, 4, 5, 6, 8};
  double t_distributional = 8.0;
  double t_variance = 4.0;
  double t_clt = 8.0;
  double s0 = 2.0;
  long clt_trajectories = 2000;
  long y_draws = 100000;
  std::vector<double> thetas = {0.5, 1.0, 2.0};
  std::vector<double> gf_points = {0.3, 0.6, 0.9};
};

struct ModelSpec {
  RateFunction alpha;
  OffspringLaw offspring;
  LifetimeDist lifetime;
  TestFunction f;
  NumericsConfig numerics;
  SimConfig sim;
};

// Strict schema: unknown keys anywhere are errors, every record is tagged by
// "kind". Throws std::runtime_error with a path-qualified message.
ModelSpec model_from_json(const std::string& text);
std::string model_to_canonical_json(const ModelSpec& spec);
// FNV-1a over the canonical form; the reproducibility anchor in manifests.
std::string model_digest(const ModelSpec& spec);

struct ValidationCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool pass = false;
  double m = 0.0;     // mean total offspring per individual
  double beta = 0.0;  // sup of alpha * mean offspring count
};

ValidationReport validate(const ModelSpec& spec);

// m = E[total children over a full lifetime]
double mean_total_offspring(const ModelSpec& spec);

// Upper end of the lifetime support used by every quadrature:
// quantile(1 - tail_q).
double support_end(const ModelSpec& spec);

}  // namespace agebranch
