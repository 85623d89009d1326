#include "agebranch/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "agebranch/quadrature.hpp"
#include "detail.hpp"

namespace agebranch {

namespace {

using detail::kFineStep;

// int_s^xe k(x - s) G(dx) with k the first- or second-factorial birth
// kernel, fine trapezoid plus one Richardson halving.
double kernel_lifetime_integral(const ModelSpec& spec, double s, bool second) {
  const double xe = support_end(spec);
  if (s >= xe) return 0.0;
  std::vector<double> bx;
  for (double b : detail::kernel_breaks(spec)) bx.push_back(s + b);
  for (double b : spec.lifetime.breakpoints()) bx.push_back(b);
  auto at_step = [&](double step) {
    const auto xs = quad::nodes(s, xe, step, bx);
    std::vector<double> y(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double k = second ? detail::w2(spec, xs[i] - s)
                              : detail::w1(spec, xs[i] - s);
      y[i] = k * detail::pdf_avg(spec.lifetime, xs[i]);
    }
    return quad::trapz(xs, y);
  };
  return quad::richardson(at_step, kFineStep);
}

// rho(s), or its second-factorial analogue; a constant kernel collapses the
// integral to a cdf difference.
double rho_value(const ModelSpec& spec, double s, bool second) {
  if (s < 0.0) return 0.0;
  const double xe = support_end(spec);
  if (s >= xe) return 0.0;
  if (detail::constant_kernel(spec)) {
    const double c = second ? detail::w2(spec, 1.0) : detail::w1(spec, 1.0);
    return c * (spec.lifetime.cdf(xe) - spec.lifetime.cdf(s));
  }
  return kernel_lifetime_integral(spec, s, second);
}

// Forcing z(t) = int_t^xe f(x - t) G(dx); flat and indicator f reduce to
// cdf differences.
double z_value(const ModelSpec& spec, double t) {
  const double xe = support_end(spec);
  if (t >= xe) return 0.0;
  const TestFunction& f = spec.f;
  if (f.kind == TestFunction::Kind::one)
    return f.scale * (spec.lifetime.cdf(xe) - spec.lifetime.cdf(t));
  if (f.kind == TestFunction::Kind::indicator) {
    const double hi = std::min(t + f.x0, xe);
    return f.scale * (spec.lifetime.cdf(hi) - spec.lifetime.cdf(t));
  }
  std::vector<double> bx = spec.lifetime.breakpoints();
  for (double b : f.breakpoints()) bx.push_back(t + b);
  auto at_step = [&](double step) {
    const auto xs = quad::nodes(t, xe, step, bx);
    std::vector<double> y(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      y[i] = detail::f_avg(f, xs[i] - t) * detail::pdf_avg(spec.lifetime, xs[i]);
    return quad::trapz(xs, y);
  };
  return quad::richardson(at_step, kFineStep);
}

// Shared fine lattice over [0, xe] carrying the birth kernel, the lifetime
// density, and optionally the test function.
struct FineLattice {
  std::vector<double> xs, w1v, gv, fv;
};

FineLattice build_lattice(const ModelSpec& spec, double step, bool with_f) {
  FineLattice L;
  std::vector<double> b = detail::kernel_breaks(spec);
  for (double v : spec.lifetime.breakpoints()) b.push_back(v);
  if (with_f)
    for (double v : spec.f.breakpoints()) b.push_back(v);
  L.xs = quad::nodes(0.0, support_end(spec), step, b);
  const std::size_t n = L.xs.size();
  L.w1v.resize(n);
  L.gv.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    L.w1v[i] = detail::w1(spec, L.xs[i]);
    L.gv[i] = detail::pdf_avg(spec.lifetime, L.xs[i]);
  }
  if (with_f) {
    L.fv.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      L.fv[i] = detail::f_avg(spec.f, L.xs[i]);
  }
  return L;
}

// Laplace transform of rho at a, written as the lifetime integral of the
// exponentially discounted kernel primitive.
double transform_on(const FineLattice& L, double a) {
  const auto V = quad::decay_conv(L.xs, L.w1v, a);
  double s = 0.0;
  for (std::size_t i = 1; i < L.xs.size(); ++i)
    s += 0.5 * (L.xs[i] - L.xs[i - 1]) *
         (L.gv[i] * V[i] + L.gv[i - 1] * V[i - 1]);
  return s;
}

// int_0^inf u e^{-a u} rho(u) du via the same lifetime-integral reduction:
// the inner u-integral equals x * DC[w1](x) - DC[r w1](x).
double c9_on(const FineLattice& L, double a) {
  const std::size_t n = L.xs.size();
  const auto V = quad::decay_conv(L.xs, L.w1v, a);
  std::vector<double> rw(n);
  for (std::size_t i = 0; i < n; ++i) rw[i] = L.xs[i] * L.w1v[i];
  const auto Wr = quad::decay_conv(L.xs, rw, a);
  double s = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double yi = L.gv[i] * (L.xs[i] * V[i] - Wr[i]);
    const double yp = L.gv[i - 1] * (L.xs[i - 1] * V[i - 1] - Wr[i - 1]);
    s += 0.5 * (L.xs[i] - L.xs[i - 1]) * (yi + yp);
  }
  return s;
}

// N(1) = int G(dx) (1 - e^{-a x}) / a, the numerator of n1.
double n1_numer_on(const FineLattice& L, double a) {
  double s = 0.0;
  std::vector<double> y(L.xs.size());
  for (std::size_t i = 0; i < L.xs.size(); ++i)
    y[i] = L.gv[i] * (-std::expm1(-a * L.xs[i])) / a;
  for (std::size_t i = 1; i < L.xs.size(); ++i)
    s += 0.5 * (L.xs[i] - L.xs[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

}  // namespace

double repro_density(const ModelSpec& spec, double s) {
  return rho_value(spec, s, false);
}

double repro_density2(const ModelSpec& spec, double s) {
  return rho_value(spec, s, true);
}

MalthusianSolution malthusian(const ModelSpec& spec) {
  detail::require_bounded_density(spec);
  MalthusianSolution sol;
  sol.m = mean_total_offspring(spec);
  if (!(sol.m > 1.0))
    throw std::runtime_error(
        "mean total offspring is <= 1; the growth-rate equation has no "
        "positive root");
  const FineLattice L1 = build_lattice(spec, 0.001, false);
  const FineLattice L2 = build_lattice(spec, 0.0005, false);
  auto phi = [&](double a) {
    const double v1 = transform_on(L1, a);
    const double v2 = transform_on(L2, a);
    return v2 + (v2 - v1) / 3.0;
  };
  // phi is strictly decreasing with phi(0) = m > 1
  double lo = 0.0, hi = 1.0;
  int doublings = 0;
  while (phi(hi) > 1.0) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 60)
      throw std::runtime_error(
          "growth-rate bracket not found within 60 doublings");
  }
  double a = hi, val = phi(hi);
  for (int it = 0; it < 200; ++it) {
    a = 0.5 * (lo + hi);
    val = phi(a);
    if (std::fabs(val - 1.0) < 1e-13 || (hi - lo) < 1e-14 * (1.0 + hi)) break;
    (val > 1.0 ? lo : hi) = a;
  }
  sol.alpha_tilde = a;
  sol.residual = std::fabs(val - 1.0);
  const double c9a = c9_on(L1, a), c9b = c9_on(L2, a);
  sol.c9 = c9b + (c9b - c9a) / 3.0;
  const double na = n1_numer_on(L1, a), nb = n1_numer_on(L2, a);
  sol.n1 = (nb + (nb - na) / 3.0) / sol.c9;
  return sol;
}

RenewalGrid mean_measure(const ModelSpec& spec, const MalthusianSolution& sol) {
  detail::require_bounded_density(spec);
  RenewalGrid g;
  g.h = spec.numerics.h;
  g.alpha_tilde = sol.alpha_tilde;
  const std::size_t n = detail::horizon_nodes(spec.numerics);
  g.T = static_cast<double>(n) * g.h;
  g.t.resize(n + 1);
  g.rho.resize(n + 1);
  g.z.resize(n + 1);
  g.M.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    g.t[i] = static_cast<double>(i) * g.h;
    g.rho[i] = rho_value(spec, g.t[i], false);
    g.z[i] = z_value(spec, g.t[i]);
  }
  const double denom = 1.0 - 0.5 * g.h * g.rho[0];
  if (!(denom > 0.0))
    throw std::runtime_error(
        "numerics.h too large for the reproduction kernel; h * rho(0) must "
        "stay below 2");
  g.M[0] = g.z[0];
  for (std::size_t i = 1; i <= n; ++i) {
    double acc = 0.0;
    for (std::size_t s = 1; s < i; ++s) acc += g.rho[s] * g.M[i - s];
    g.M[i] = (g.z[i] + g.h * acc + 0.5 * g.h * g.rho[i] * g.M[0]) / denom;
  }
  return g;
}

double mean_semigroup(const ModelSpec& spec, const RenewalGrid& grid,
                      double t, double x) {
  if (grid.M.empty())
    throw std::runtime_error("mean_semigroup: mean grid is not solved");
  if (!(t >= 0.0) || t > grid.T + 1e-9)
    throw std::runtime_error("mean_semigroup: t outside the solved horizon");
  if (t == 0.0) return spec.f.value(x);
  const double base = spec.f.value(x - t);
  const double top = std::min(t, x);
  if (!(top > 0.0)) return base;
  std::vector<double> br;
  for (double b : detail::kernel_breaks(spec)) br.push_back(x - b);
  auto at_step = [&](double step) {
    const auto ss = quad::nodes(0.0, top, step, br);
    std::vector<double> y(ss.size());
    for (std::size_t i = 0; i < ss.size(); ++i)
      y[i] = detail::w1(spec, x - ss[i]) *
             detail::grid_interp(grid.M, grid.h, t - ss[i]);
    return quad::trapz(ss, y);
  };
  return base + quad::richardson(at_step, kFineStep);
}

void second_moment(const ModelSpec& spec, const MalthusianSolution& sol,
                   RenewalGrid& g) {
  if (g.M.empty())
    throw std::runtime_error("second_moment: mean grid is required first");
  const double h = g.h;
  const std::size_t nt = g.t.size() - 1;
  const double xe = support_end(spec);
  const auto nx = static_cast<std::size_t>(std::ceil(xe / h - 1e-9));

  // age lattice with normalized trapezoid G-weights, so a flat f gives
  // Q2(0) = 1 exactly
  g.xg.resize(nx + 1);
  for (std::size_t j = 0; j <= nx; ++j) g.xg[j] = static_cast<double>(j) * h;
  g.wG = detail::age_weights(spec, h, nx);

  std::vector<double> W(nx + 1);
  for (std::size_t j = 0; j <= nx; ++j) W[j] = detail::w1(spec, g.xg[j]);

  const double f0 = spec.f.interior(0.0);
  // column offset of an on-lattice jump of f, when there is one
  double jump = 0.0;
  const std::ptrdiff_t jump_off = detail::jump_column(spec.f, h, jump);
  const double half_jump_sq = 0.25 * jump * jump;

  g.pi.assign(nt + 1, std::vector<double>(nx + 1, 0.0));
  g.Q2.assign(nt + 1, 0.0);

  // Jump values averaged onto a node square to the squared average plus the
  // squared half-jump; without the correction Q2 picks up an O(h) bias.
  auto q2_row = [&](std::size_t i) {
    const std::vector<double>& row = g.pi[i];
    double q = 0.0;
    for (std::size_t j = 0; j <= nx; ++j) q += g.wG[j] * row[j] * row[j];
    if (i >= 1 && i <= nx && f0 != 0.0) q += g.wG[i] * 0.25 * f0 * f0;
    if (jump_off >= 0) {
      const std::size_t j = i + static_cast<std::size_t>(jump_off);
      if (j <= nx) q += g.wG[j] * half_jump_sq;
    }
    g.Q2[i] = q;
  };

  for (std::size_t j = 0; j <= nx; ++j)
    g.pi[0][j] = (j == 0) ? f0 : detail::f_avg(spec.f, g.xg[j]);
  q2_row(0);

  // The integral term of pi_t f(x) depends on (t, x) only through t - x, so
  // each diagonal of the table accumulates one trapezoid cell per step.
  std::vector<double> C(nt + nx + 1, 0.0);
  for (std::size_t i = 1; i <= nt; ++i) {
    for (std::size_t j = 1; j <= nx; ++j)
      C[i + nx - j] += 0.5 * h * (W[j - 1] * g.M[i - 1] + W[j] * g.M[i]);
    std::vector<double>& row = g.pi[i];
    for (std::size_t j = 0; j <= nx; ++j) {
      double fterm = 0.0;
      if (j > i)
        fterm = detail::f_avg(spec.f, g.xg[j - i]);
      else if (j == i)
        fterm = 0.5 * f0;
      row[j] = fterm + C[i + nx - j];
    }
    q2_row(i);
  }

  g.rho2.resize(nt + 1);
  for (std::size_t i = 0; i <= nt; ++i)
    g.rho2[i] = rho_value(spec, g.t[i], true);

  g.zeta.assign(nt + 1, 0.0);
  for (std::size_t i = 1; i <= nt; ++i) {
    double acc =
        0.5 * (g.rho2[0] * g.M[i] * g.M[i] + g.rho[0] * g.Q2[i]) +
        0.5 * (g.rho2[i] * g.M[0] * g.M[0] + g.rho[i] * g.Q2[0]);
    for (std::size_t s = 1; s < i; ++s)
      acc += g.rho2[s] * g.M[i - s] * g.M[i - s] + g.rho[s] * g.Q2[i - s];
    g.zeta[i] = h * acc;
  }

  g.Gamma_ren.assign(nt + 1, 0.0);
  const double denom = 1.0 - 0.5 * h * g.rho[0];
  for (std::size_t i = 1; i <= nt; ++i) {
    double acc = 0.0;
    for (std::size_t s = 1; s < i; ++s) acc += g.rho[s] * g.Gamma_ren[i - s];
    g.Gamma_ren[i] =
        (g.zeta[i] + h * acc + 0.5 * h * g.rho[i] * g.Gamma_ren[0]) / denom;
  }

  // Var<X_t, f> for a G-distributed root lifetime: the renewal part plus the
  // spread of the conditional mean across root lifetimes.
  g.Gamma.resize(nt + 1);
  g.Pi.resize(nt + 1);
  for (std::size_t i = 0; i <= nt; ++i) {
    double v = g.Q2[i] - g.M[i] * g.M[i] + g.Gamma_ren[i];
    if (v < 0.0 && v > -1e-9) v = 0.0;
    g.Gamma[i] = v;
    g.Pi[i] = std::exp(-sol.alpha_tilde * g.t[i]) * g.zeta[i];
  }
}

double variance_pointwise(const ModelSpec& spec, const RenewalGrid& g,
                          double t, double x) {
  if (g.Q2.empty())
    throw std::runtime_error(
        "variance_pointwise: second-moment curves are required first");
  if (!(t >= 0.0) || t > g.T + 1e-9)
    throw std::runtime_error(
        "variance_pointwise: t outside the solved horizon");
  const double top = std::min(t, x);
  if (!(top > 0.0)) return 0.0;
  std::vector<double> br;
  for (double b : detail::kernel_breaks(spec)) br.push_back(x - b);
  auto at_step = [&](double step) {
    const auto ss = quad::nodes(0.0, top, step, br);
    std::vector<double> y(ss.size());
    for (std::size_t i = 0; i < ss.size(); ++i) {
      const double r = x - ss[i];
      const double u = t - ss[i];
      const double Mu = detail::grid_interp(g.M, g.h, u);
      y[i] = detail::w2(spec, r) * Mu * Mu +
             detail::w1(spec, r) *
                 (detail::grid_interp(g.Q2, g.h, u) +
                  detail::grid_interp(g.Gamma_ren, g.h, u));
    }
    return quad::trapz(ss, y);
  };
  return quad::richardson(at_step, kFineStep);
}

LimitFunctionals limit_functionals(const ModelSpec& spec,
                                   const MalthusianSolution& sol) {
  detail::require_bounded_density(spec);
  const double a = sol.alpha_tilde;
  const FineLattice lat1 = build_lattice(spec, 0.001, true);
  const FineLattice lat2 = build_lattice(spec, 0.0005, true);
  double Nf[2], N1[2], GV[2], NV[2];
  const FineLattice* Ls[2] = {&lat1, &lat2};
  for (int k = 0; k < 2; ++k) {
    const FineLattice& L = *Ls[k];
    const std::size_t n = L.xs.size();
    const auto V = quad::decay_conv(L.xs, L.w1v, a);
    const auto DCV = quad::decay_conv(L.xs, V, a);
    const auto DCf = quad::decay_conv(L.xs, L.fv, a);
    double nf = 0.0, n1 = 0.0, gv = 0.0, nv = 0.0;
    double pf = 0.0, p1 = 0.0, pg = 0.0, pv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = L.gv[i];
      const double yf = g * DCf[i];
      const double y1 = g * (-std::expm1(-a * L.xs[i])) / a;
      const double yg = g * V[i];
      const double yv = g * DCV[i];
      if (i > 0) {
        const double dx = 0.5 * (L.xs[i] - L.xs[i - 1]);
        nf += dx * (yf + pf);
        n1 += dx * (y1 + p1);
        gv += dx * (yg + pg);
        nv += dx * (yv + pv);
      }
      pf = yf;
      p1 = y1;
      pg = yg;
      pv = yv;
    }
    Nf[k] = nf;
    N1[k] = n1;
    GV[k] = gv;
    NV[k] = nv;
  }
  auto rich = [](const double v[2]) { return v[1] + (v[1] - v[0]) / 3.0; };
  LimitFunctionals lim;
  lim.n1 = sol.n1;
  lim.a_f = rich(Nf) / sol.c9;
  lim.A_f = lim.a_f / sol.n1;
  lim.A_sigma = rich(NV) / rich(N1);
  lim.G_V = rich(GV);
  // first-order bound on what truncating the lifetime support can remove
  // from the numerator integrals
  lim.tail_bound = spec.numerics.tail_q * std::max(1.0, spec.f.sup()) / a;
  return lim;
}

double stationary_age_cdf(const ModelSpec& spec, const MalthusianSolution& sol,
                          double x) {
  detail::require_bounded_density(spec);
  if (!(x > 0.0)) return 0.0;
  const double a = sol.alpha_tilde;
  const double xe = support_end(spec);
  std::vector<double> br = spec.lifetime.breakpoints();
  br.push_back(x);
  auto at_step = [&](double step) {
    const auto ys = quad::nodes(0.0, xe, step, br);
    double num = 0.0, den = 0.0, pn = 0.0, pd = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double g = detail::pdf_avg(spec.lifetime, ys[i]);
      const double tail = std::max(0.0, ys[i] - x);
      const double yn = g * (std::exp(-a * tail) - std::exp(-a * ys[i])) / a;
      const double yd = g * (-std::expm1(-a * ys[i])) / a;
      if (i > 0) {
        const double dx = 0.5 * (ys[i] - ys[i - 1]);
        num += dx * (yn + pn);
        den += dx * (yd + pd);
      }
      pn = yn;
      pd = yd;
    }
    return num / den;
  };
  return quad::richardson(at_step, kFineStep);
}

Table variance_profile(const ModelSpec& spec, const MalthusianSolution& sol) {
  detail::require_bounded_density(spec);
  const FineLattice L = build_lattice(spec, 0.0005, false);
  const auto V = quad::decay_conv(L.xs, L.w1v, sol.alpha_tilde);
  // thin by index stride to ~0.005 spacing; kept knots carry their exact
  // fine-pass values
  Table tab;
  for (std::size_t i = 0; i + 1 < L.xs.size(); i += 10) {
    tab.xs.push_back(L.xs[i]);
    tab.ys.push_back(V[i]);
  }
  if (tab.xs.back() < L.xs.back()) {
    tab.xs.push_back(L.xs.back());
    tab.ys.push_back(V.back());
  }
  return tab;
}

CltVariance clt_variance(const ModelSpec& spec, const MalthusianSolution& sol,
                         const RenewalGrid& grid, const LimitFunctionals& lim,
                         double s0) {
  if (grid.Q2.empty())
    throw std::runtime_error(
        "clt_variance: second-moment curves are required first");
  if (!(s0 >= 0.0) || s0 > grid.T + 1e-9)
    throw std::runtime_error("clt_variance: s0 outside the solved horizon");
  detail::require_bounded_density(spec);
  CltVariance out;
  out.s0 = s0;
  const double a = sol.alpha_tilde;
  const double xe = support_end(spec);
  const bool fast = detail::constant_kernel(spec);

  // e^{a s0} * v_window = N(gamma_{s0} f) / N(1), both numerator and
  // denominator on one lattice per step so the ratio extrapolates cleanly
  auto ratio_at = [&](double step) {
    const auto ss = quad::nodes(0.0, s0, step);
    const double hs = ss[1] - ss[0];
    const std::size_t ns = ss.size();
    std::vector<double> m2(ns), qg(ns);
    for (std::size_t i = 0; i < ns; ++i) {
      const double u = s0 - ss[i];
      const double Mu = detail::grid_interp(grid.M, grid.h, u);
      m2[i] = Mu * Mu;
      qg[i] = detail::grid_interp(grid.Q2, grid.h, u) +
              detail::grid_interp(grid.Gamma_ren, grid.h, u);
    }
    const auto C1 = quad::cumtrapz(ss, m2);
    const auto C2 = quad::cumtrapz(ss, qg);

    std::vector<double> br = spec.lifetime.breakpoints();
    br.push_back(s0);
    for (double b : detail::kernel_breaks(spec)) br.push_back(b);
    const auto rs = quad::nodes(0.0, xe, step, br);
    std::vector<double> gam(rs.size(), 0.0);
    if (fast) {
      const double c2 = detail::w2(spec, 1.0), c1 = detail::w1(spec, 1.0);
      for (std::size_t i = 0; i < rs.size(); ++i) {
        const double y = std::min(rs[i], s0);
        gam[i] = c2 * detail::grid_interp(C1, hs, y) +
                 c1 * detail::grid_interp(C2, hs, y);
      }
    } else {
      for (std::size_t i = 0; i < rs.size(); ++i) {
        const double top = std::min(rs[i], s0);
        if (!(top > 0.0)) continue;
        std::vector<double> ib;
        for (double b : detail::kernel_breaks(spec)) ib.push_back(rs[i] - b);
        const auto sv = quad::nodes(0.0, top, step, ib);
        std::vector<double> y(sv.size());
        for (std::size_t k = 0; k < sv.size(); ++k) {
          const double r = rs[i] - sv[k];
          y[k] = detail::w2(spec, r) * detail::grid_interp(m2, hs, sv[k]) +
                 detail::w1(spec, r) * detail::grid_interp(qg, hs, sv[k]);
        }
        gam[i] = quad::trapz(sv, y);
      }
    }
    const auto DCg = quad::decay_conv(rs, gam, a);
    double num = 0.0, den = 0.0, pn = 0.0, pd = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const double g = detail::pdf_avg(spec.lifetime, rs[i]);
      const double yn = g * DCg[i];
      const double yd = g * (-std::expm1(-a * rs[i])) / a;
      if (i > 0) {
        const double dx = 0.5 * (rs[i] - rs[i - 1]);
        num += dx * (yn + pn);
        den += dx * (yd + pd);
      }
      pn = yn;
      pd = yd;
    }
    return num / den;
  };
  out.v_window =
      s0 > 0.0 ? std::exp(-a * s0) * quad::richardson(ratio_at, kFineStep)
               : 0.0;

  // normalized-variance tail over the last quarter of the grid
  const std::size_t nt = grid.t.size() - 1;
  const std::size_t q3 = (3 * nt) / 4;
  const double r_lo = std::exp(-a * grid.t[q3]) * grid.Gamma[q3];
  const double r_hi = std::exp(-a * grid.t[nt]) * grid.Gamma[nt];
  out.Df = r_hi;
  const double ref = std::max(std::fabs(r_hi), std::fabs(r_lo));
  out.Df_converged = ref == 0.0 || std::fabs(r_hi - r_lo) <= 0.05 * ref;
  out.v_limit = lim.A_sigma * out.Df;
  out.diag_t = grid.t;
  out.diag_Pi = grid.Pi;
  return out;
}

double RenewalGrid::M_at(double tt) const {
  return detail::grid_interp(M, h, tt);
}

double RenewalGrid::Gamma_at(double tt) const {
  return detail::grid_interp(Gamma, h, tt);
}

double RenewalGrid::Q2_at(double tt) const {
  return detail::grid_interp(Q2, h, tt);
}

double RenewalGrid::Gamma_ren_at(double tt) const {
  return detail::grid_interp(Gamma_ren, h, tt);
}

double RenewalGrid::pi_at(double tt, double x) const {
  if (pi.empty())
    throw std::runtime_error(
        "pi_at: semigroup table is empty; run second_moment first");
  const std::size_t nt = pi.size() - 1;
  const std::size_t nx = pi[0].size() - 1;
  const double pt = std::clamp(tt / h, 0.0, static_cast<double>(nt));
  const double px = std::clamp(x / h, 0.0, static_cast<double>(nx));
  std::size_t i = static_cast<std::size_t>(pt);
  std::size_t j = static_cast<std::size_t>(px);
  if (i >= nt) i = nt - 1;
  if (j >= nx) j = nx - 1;
  const double wt = pt - static_cast<double>(i);
  const double wx = px - static_cast<double>(j);
  return (1.0 - wt) * ((1.0 - wx) * pi[i][j] + wx * pi[i][j + 1]) +
         wt * ((1.0 - wx) * pi[i + 1][j] + wx * pi[i + 1][j + 1]);
}

}  // namespace agebranch
