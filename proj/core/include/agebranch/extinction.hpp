#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "agebranch/model.hpp"
#include "agebranch/renewal.hpp"

namespace agebranch {

// Two ways to aggregate the age-dependent offspring law over one lifetime.
// counts keeps the full per-birth count distribution; mean_intensity
// replaces each birth by a unit-rate stream at the mean count, which
// matches counts exactly when every birth delivers one child.
enum class GfMode { counts, mean_intensity };

// Generating function of the total offspring of one particle over its whole
// life, evaluated at s in [0, 1]. Throws outside that range.
double offspring_total_gf(const ModelSpec& spec, double s, GfMode mode);

// Extinction probability and the extinction-by-time curve.
struct ExtinctionResult {
  double q = 1.0;                      // smallest fixed point, counts mode
  double q_mean_intensity = 1.0;       // same for the mean-intensity mode
  double fixed_point_residual = 0.0;   // |gf(q) - q| at the returned root
  std::vector<double> t;               // time nodes of the curve (empty
  std::vector<double> q_curve;         // unless the curve was marched)
};

// Smallest root of offspring_total_gf(s) = s on [0, 1], by bisection.
// Returns 1 in both modes when the mean total offspring is at most 1.
ExtinctionResult extinction_prob(const ModelSpec& spec);

// extinction_prob plus the curve t -> P(population dead by t), marched
// causally on the numerics grid from q(0) = 0. First-order accurate in h
// and monotone nondecreasing by construction.
ExtinctionResult extinction_curve(const ModelSpec& spec);

// One Laplace-functional march: L(t) = E exp(-theta <X_t, f>) on the time
// grid, together with the cumulant table u(t, x) when requested.
struct LaplaceMarch {
  double h = 0.0;
  double T = 0.0;
  double theta = 0.0;                  // scale multiplying f at time zero
  std::vector<double> t;
  std::vector<double> L;
  std::vector<double> xg;              // age lattice, kept only with u
  std::vector<std::vector<double>> u;  // u[i][j] = u_{t_i}(theta f)(x_j)

  double L_at(double tt) const;
  double u_at(double tt, double x) const;
};

// Marches the nonlinear cumulant equation with an implicit trapezoid step
// and a fixed-point corrector per node. Throws when the corrector does not
// reach relative tolerance 1e-8 within 10 sweeps.
LaplaceMarch march_laplace(const ModelSpec& spec, double theta,
                           bool keep_u = false);

// Laplace transform of the scaled-population limit W, sampled on a theta
// grid, with a consistency residual per node.
struct PhiCurve {
  std::vector<double> theta;     // ascending, first entry 0
  std::vector<double> phi;
  std::vector<double> residual;  // |fixed-point transform - phi|
  double c_slope = 0.0;          // -phi'(0), the mean of W
};

// Geometric default grid {0} plus 2.5e-4 * 2^k for k = 0..19.
std::vector<double> default_theta_grid();

// Evaluates phi on the given grid by marching each node to the horizon with
// initial scale theta * exp(-alpha_tilde * T). Throws when any residual
// exceeds 1e-2; a longer numerics.T tightens the march.
PhiCurve phi_limit(const ModelSpec& spec, const MalthusianSolution& sol,
                   const std::vector<double>& thetas);

// Single value phi(theta) by the same march, without the residual check.
double phi_at(const ModelSpec& spec, const MalthusianSolution& sol,
              double theta);

// Integral transform shared by the fixed-point residual and the Laplace
// objects below: int G(dx) exp{ int_0^x alpha(x-s) [g(x-s, inner(s)) - 1]
// ds }. inner maps ages into generating-function arguments, usually [0, 1].
double nested_transform(const ModelSpec& spec,
                        const std::function<double(double)>& inner);

// Laplace transform at theta >= 0 of the one-lifetime contribution Y to W.
double laplace_Y(const ModelSpec& spec, const MalthusianSolution& sol,
                 double theta);

// E[Y], by a central difference of laplace_Y at zero. Equals 1 when the
// limit functionals are normalized.
double mean_Y(const ModelSpec& spec, const MalthusianSolution& sol);

// Integrated small-value transform of W used by the x log x criterion:
// psi(u) = u^{-1} (E[Z^{-1}(1 - e^{-uZ})] - 1 + E[e^{-uY}]) where Z =
// exp(-alpha_tilde * s) and s is drawn from the discounted reproduction
// density. Precomputes the density lattice once; evaluations share it.
class PsiFun {
 public:
  PsiFun(const ModelSpec& spec, const MalthusianSolution& sol);
  double operator()(double u) const;

 private:
  double a_ = 0.0;  // Malthusian rate
  // coarse / fine lattice pair for step extrapolation
  std::vector<double> s1_, r1_, s2_, r2_;
  const ModelSpec* spec_ = nullptr;
};

// One-call convenience wrapper around PsiFun.
double psi_fun(const ModelSpec& spec, const MalthusianSolution& sol, double u);

}  // namespace agebranch
