#pragma once

#include <vector>

#include "agebranch/model.hpp"

namespace agebranch {

// Solution of the growth-rate equation int_0^inf e^{-a t} rho(t) dt = 1.
struct MalthusianSolution {
  double alpha_tilde = 0.0;  // exponential growth rate of the mean population
  double m = 0.0;            // mean total offspring per individual
  double c9 = 0.0;           // int_0^inf u e^{-alpha_tilde u} rho(u) du
  double n1 = 0.0;           // limit of e^{-alpha_tilde t} * E[population]
  double residual = 0.0;     // |int e^{-alpha_tilde t} rho(t) dt - 1|
};

// Root solve by bracketing bisection on the decreasing Laplace transform of
// rho. Throws when the model is not supercritical or the lifetime density is
// unbounded at zero.
MalthusianSolution malthusian(const ModelSpec& spec);

// Reproduction kernel density rho(s) = int_s^inf alpha(x-s) gp1(x-s) G(dx)
// and its second-factorial analogue with gpp1 in place of gp1. Zero beyond
// the truncated lifetime support.
double repro_density(const ModelSpec& spec, double s);
double repro_density2(const ModelSpec& spec, double s);

// Uniform time grid carrying the solved moment curves, plus the age lattice
// and the mean-semigroup table needed by the second-moment machinery.
struct RenewalGrid {
  double h = 0.0;
  double T = 0.0;               // effective horizon nt * h
  std::vector<double> t;        // nodes i*h, i = 0..nt
  std::vector<double> rho;      // reproduction kernel on t
  std::vector<double> z;        // forcing int_t^inf f(x-t) G(dx)
  std::vector<double> M;        // mean curve M_f(t) = <G, pi_t f>
  // second-moment block (filled by second_moment)
  std::vector<double> rho2;     // second-factorial kernel on t
  std::vector<double> Q2;       // <G, (pi_t f)^2>
  std::vector<double> zeta;     // forcing of the variance renewal equation
  std::vector<double> Gamma_ren;  // solution of Gamma_ren = zeta + rho * Gamma_ren
  std::vector<double> Gamma;    // Var<X_t, f> = Q2 - M^2 + Gamma_ren
  std::vector<double> Pi;       // diagnostic e^{-alpha_tilde t} * zeta(t)
  double alpha_tilde = 0.0;
  // age lattice j*h, j = 0..nx, with normalized trapezoid G-weights
  std::vector<double> xg;
  std::vector<double> wG;
  // pi[i][j] = pi_{t_i} f (x_j); empty until second_moment runs
  std::vector<std::vector<double>> pi;

  double M_at(double tt) const;      // linear interpolation on the grid
  double Gamma_at(double tt) const;
  double Q2_at(double tt) const;
  double Gamma_ren_at(double tt) const;
  double pi_at(double tt, double x) const;  // bilinear on the solved table
};

// Solves M = z + rho * M on the grid (forward substitution, trapezoid
// convolution weights, implicit s = 0 endpoint).
RenewalGrid mean_measure(const ModelSpec& spec, const MalthusianSolution& sol);

// pi_t f(x) by direct quadrature of the one-particle mean identity, with
// M interpolated at off-node arguments. t must lie within the grid horizon.
double mean_semigroup(const ModelSpec& spec, const RenewalGrid& grid,
                      double t, double x);

// Fills the second-moment block of the grid: the semigroup table, Q2, the
// variance forcing zeta, Gamma_ren, the variance curve Gamma, and Pi.
void second_moment(const ModelSpec& spec, const MalthusianSolution& sol,
                   RenewalGrid& grid);

// One-particle conditional variance gamma_t f(x) of the subtree value at
// horizon t for a root with remaining lifetime x; needs the solved grid.
double variance_pointwise(const ModelSpec& spec, const RenewalGrid& grid,
                          double t, double x);

// Long-run limit functionals of the tilted renewal measure.
struct LimitFunctionals {
  double a_f = 0.0;      // limit of e^{-alpha_tilde t} M_f(t)
  double A_f = 0.0;      // a_f / n1: stationary-age average of f
  double n1 = 0.0;
  double A_sigma = 0.0;  // A applied to the variance profile
  double G_V = 0.0;      // <G, V>; equals 1 up to quadrature error
  double tail_bound = 0.0;  // analytic bound on the truncated tail mass
};

LimitFunctionals limit_functionals(const ModelSpec& spec,
                                   const MalthusianSolution& sol);

// Stationary-age distribution function A(x); nondecreasing, 0 at 0, -> 1.
double stationary_age_cdf(const ModelSpec& spec, const MalthusianSolution& sol,
                          double x);

// Harmonic profile V(x) = int_0^x alpha(x-r) gp1(x-r) e^{-alpha_tilde r} dr
// tabulated on a fine lattice over the truncated lifetime support. Also the
// variance profile of the normalized-fluctuation limit (same formula).
Table variance_profile(const ModelSpec& spec, const MalthusianSolution& sol);

// Variance constants for the fluctuation statistics.
struct CltVariance {
  double s0 = 0.0;
  double v_window = 0.0;    // variance of the fixed-window statistic B1(t, s0)
  double Df = 0.0;          // tail estimate of e^{-alpha_tilde t} Gamma(t)
  bool Df_converged = false;
  double v_limit = 0.0;     // A_sigma * Df; meaningful only when converged
  std::vector<double> diag_t;   // integrability diagnostic: (t, Pi(t))
  std::vector<double> diag_Pi;
};

CltVariance clt_variance(const ModelSpec& spec, const MalthusianSolution& sol,
                         const RenewalGrid& grid, const LimitFunctionals& lim,
                         double s0);

}  // namespace agebranch
