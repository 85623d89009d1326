#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "agebranch/model.hpp"
#include "agebranch/quadrature.hpp"

// Internal helpers shared by the deterministic solvers. Not installed.
namespace agebranch::detail {

// alpha(r) * E[offspring count at r] and the second-factorial analogue
inline double w1(const ModelSpec& s, double r) {
  return s.alpha.interior(r) * s.offspring.mean_count(r);
}
inline double w2(const ModelSpec& s, double r) {
  return s.alpha.interior(r) * s.offspring.second_factorial(r);
}

// True when the offspring parameters are all scalars, so g(x, s) does not
// depend on the age argument.
inline bool constant_offspring(const ModelSpec& s) {
  const OffspringLaw& o = s.offspring;
  for (const Param* p : {&o.n, &o.mean, &o.p0, &o.p2})
    if (p->is_table) return false;
  return true;
}

// True when the kernel r -> alpha(r), offspring params are all scalars, so
// kernel-weighted lifetime integrals collapse to cdf differences.
inline bool constant_kernel(const ModelSpec& s) {
  return s.alpha.kind == RateFunction::Kind::constant && constant_offspring(s);
}

// Column offset of an on-lattice jump of f at x0, or -1 when there is none.
// The jump size is written through jump_out.
inline std::ptrdiff_t jump_column(const TestFunction& f, double h,
                                  double& jump_out) {
  jump_out = 0.0;
  if (f.kind != TestFunction::Kind::indicator) return -1;
  const double pos = f.x0 / h;
  const long long r = std::llround(pos);
  if (r >= 1 &&
      std::fabs(pos - static_cast<double>(r)) <= 1e-9 * std::max(1.0, pos)) {
    jump_out = f.interior(f.x0);
    return static_cast<std::ptrdiff_t>(r);
  }
  return -1;
}

// Kink abscissae of r -> alpha(r) * (offspring moment)(r)
inline std::vector<double> kernel_breaks(const ModelSpec& s) {
  std::vector<double> b = s.alpha.breakpoints();
  for (double v : s.offspring.breakpoints()) b.push_back(v);
  return b;
}

// Trapezoid-consistent evaluation of f at a lattice point: a jump landing
// exactly on a node contributes its two-sided average.
inline double f_avg(const TestFunction& f, double x) {
  if (f.kind == TestFunction::Kind::indicator && std::fabs(x - f.x0) <= 1e-9)
    return 0.5 * f.interior(f.x0);
  return f.interior(x);
}

// Same convention for the lifetime density (uniform law jumps at its
// support edges; equal-width cells on both sides cancel the O(step) error).
inline double pdf_avg(const LifetimeDist& d, double x) {
  for (double b : d.breakpoints())
    if (std::fabs(x - b) <= 1e-9)
      return 0.5 * (d.pdf(b - 2e-9) + d.pdf(b + 2e-9));
  return d.pdf(x);
}

// Fixed base step for kernel quadratures. Decoupled from numerics.h so the
// kernels stay effectively exact while grid-step halving isolates the O(h^2)
// behaviour of the convolution solvers.
inline constexpr double kFineStep = 0.002;

// Guard shared by every solver that integrates against the lifetime density.
inline void require_bounded_density(const ModelSpec& spec) {
  if (!std::isfinite(spec.lifetime.pdf(0.0)))
    throw std::runtime_error(
        "lifetime density is unbounded at zero (shape < 1); "
        "the quadrature-based solvers require a bounded density");
}

// Number of time-grid steps: T snapped to the step lattice when within
// rounding distance, otherwise rounded up one node.
inline std::size_t horizon_nodes(const NumericsConfig& n) {
  const double ratio = n.T / n.h;
  long long nt = std::llround(ratio);
  if (std::fabs(ratio - static_cast<double>(nt)) > 1e-9 * std::max(1.0, ratio))
    nt = static_cast<long long>(std::ceil(ratio - 1e-12));
  if (nt < 1) nt = 1;
  return static_cast<std::size_t>(nt);
}

// Normalized trapezoid G-weights on the age lattice j*step, j = 0..nx, so
// that a flat integrand averages to exactly 1.
inline std::vector<double> age_weights(const ModelSpec& spec, double step,
                                       std::size_t nx) {
  std::vector<double> w(nx + 1);
  for (std::size_t j = 0; j <= nx; ++j)
    w[j] = step * pdf_avg(spec.lifetime, static_cast<double>(j) * step);
  w[0] *= 0.5;
  w[nx] *= 0.5;
  double s = 0.0;
  for (double v : w) s += v;
  for (double& v : w) v /= s;
  return w;
}

// Linear interpolation on the uniform grid values v with step h, clamped to
// the grid range.
inline double grid_interp(const std::vector<double>& v, double h, double tt) {
  if (v.empty()) return 0.0;
  if (tt <= 0.0) return v.front();
  const double pos = tt / h;
  const std::size_t n = v.size() - 1;
  if (pos >= static_cast<double>(n)) return v.back();
  const std::size_t i = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(i);
  return v[i] + w * (v[i + 1] - v[i]);
}

}  // namespace agebranch::detail
