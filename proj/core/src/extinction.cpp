#include "agebranch/extinction.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

#include "detail.hpp"

namespace agebranch {

namespace {

using detail::kFineStep;

std::vector<double> transform_breaks(const ModelSpec& spec) {
  auto br = detail::kernel_breaks(spec);
  for (double b : spec.lifetime.breakpoints()) br.push_back(b);
  return br;
}

double smallest_fixed_point(const ModelSpec& spec, GfMode mode) {
  auto excess = [&](double s) { return offspring_total_gf(spec, s, mode) - s; };
  double lo = 0.0;
  double hi = 1.0 - 1e-12;
  // the map is convex with a positive value at 0, so the smallest root is
  // the only sign change left of the upper bracket
  if (excess(hi) >= 0.0) return 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (excess(mid) >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double laplace_Y_impl(const ModelSpec& spec, double alpha_tilde, double theta) {
  return nested_transform(spec, [&](double s) {
    return std::exp(-theta * std::exp(-alpha_tilde * s));
  });
}

// E[e^{-uY}] - 1 + u without cancellation: the exact first-order term is
// folded into the integrand, so the result carries the u^2 scale directly.
double laplace_Y_centered(const ModelSpec& spec, double a, double u) {
  const double xe = support_end(spec);
  const auto br = transform_breaks(spec);
  const bool fast = detail::constant_kernel(spec);
  const double base = fast ? kFineStep : 0.01;
  auto at_step = [&](double step) {
    const auto xs = quad::nodes(0.0, xe, step, br);
    const std::size_t n = xs.size();
    std::vector<double> K(n, 0.0), m1(n, 0.0);
    if (fast) {
      const double al = spec.alpha.interior(0.0);
      const double gp1 = spec.offspring.mean_count(0.0);
      std::vector<double> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double innr = std::exp(-u * std::exp(-a * xs[i]));
        y[i] = al * (spec.offspring.gf(0.0, innr) - 1.0);
        m1[i] = al * gp1 * -std::expm1(-a * xs[i]) / a;
      }
      K = quad::cumtrapz(xs, y);
    } else {
      std::vector<double> innr(n), dis(n);
      for (std::size_t i = 0; i < n; ++i) {
        innr[i] = std::exp(-u * std::exp(-a * xs[i]));
        dis[i] = std::exp(-a * xs[i]);
      }
      for (std::size_t i = 1; i < n; ++i) {
        double ak = 0.0, am = 0.0;
        double pk = spec.alpha.interior(xs[i]) *
                    (spec.offspring.gf(xs[i], innr[0]) - 1.0);
        double pm = spec.alpha.interior(xs[i]) *
                    spec.offspring.mean_count(xs[i]) * dis[0];
        for (std::size_t k = 1; k <= i; ++k) {
          const double age = xs[i] - xs[k];
          const double al = spec.alpha.interior(age);
          const double ck = al * (spec.offspring.gf(age, innr[k]) - 1.0);
          const double cm = al * spec.offspring.mean_count(age) * dis[k];
          const double w = 0.5 * (xs[k] - xs[k - 1]);
          ak += w * (pk + ck);
          am += w * (pm + cm);
          pk = ck;
          pm = cm;
        }
        K[i] = ak;
        m1[i] = am;
      }
    }
    double acc = 0.0, mass = 0.0, sm1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double w = 0.0;
      if (i > 0) w += 0.5 * (xs[i] - xs[i - 1]);
      if (i + 1 < n) w += 0.5 * (xs[i + 1] - xs[i]);
      w *= detail::pdf_avg(spec.lifetime, xs[i]);
      acc += w * (std::expm1(K[i]) + u * m1[i]);
      mass += w;
      sm1 += w * m1[i];
    }
    // expectations against the truncated support are taken normalized, so
    // the tail defect does not leak into the u^2-scale result
    return acc / mass + u * (1.0 - sm1 / mass);
  };
  return quad::richardson(at_step, base);
}

}  // namespace

double offspring_total_gf(const ModelSpec& spec, double s, GfMode mode) {
  if (!(s >= 0.0 && s <= 1.0))
    throw std::invalid_argument("offspring_total_gf: s must lie in [0, 1]");
  detail::require_bounded_density(spec);
  const double xe = support_end(spec);
  const auto br = transform_breaks(spec);
  const double sm1 = s - 1.0;
  auto at_step = [&](double step) {
    const auto xs = quad::nodes(0.0, xe, step, br);
    const std::size_t n = xs.size();
    std::vector<double> k(n);
    if (mode == GfMode::counts) {
      for (std::size_t i = 0; i < n; ++i)
        k[i] =
            spec.alpha.interior(xs[i]) * (spec.offspring.gf(xs[i], s) - 1.0);
    } else {
      for (std::size_t i = 0; i < n; ++i) k[i] = detail::w1(spec, xs[i]);
    }
    const auto K = quad::cumtrapz(xs, k);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = mode == GfMode::counts ? K[i] : sm1 * K[i];
      y[i] = detail::pdf_avg(spec.lifetime, xs[i]) * std::exp(e);
    }
    return quad::trapz(xs, y);
  };
  return quad::richardson(at_step, kFineStep);
}

ExtinctionResult extinction_prob(const ModelSpec& spec) {
  ExtinctionResult r;
  if (mean_total_offspring(spec) <= 1.0) {
    r.q = 1.0;
    r.q_mean_intensity = 1.0;
    r.fixed_point_residual =
        std::fabs(offspring_total_gf(spec, 1.0, GfMode::counts) - 1.0);
    return r;
  }
  r.q = smallest_fixed_point(spec, GfMode::counts);
  r.q_mean_intensity = smallest_fixed_point(spec, GfMode::mean_intensity);
  r.fixed_point_residual =
      std::fabs(offspring_total_gf(spec, r.q, GfMode::counts) - r.q);
  return r;
}

ExtinctionResult extinction_curve(const ModelSpec& spec) {
  ExtinctionResult r = extinction_prob(spec);
  detail::require_bounded_density(spec);
  const double h = spec.numerics.h;
  const std::size_t nt = detail::horizon_nodes(spec.numerics);
  const double h16 = h / 16.0;
  const double xe = support_end(spec);
  const auto nx16 = static_cast<std::size_t>(std::ceil(xe / h16 - 1e-9));
  const std::size_t jcap = std::min(nx16, 16 * nt);
  const bool coff = detail::constant_offspring(spec);

  std::vector<double> av(jcap + 1), pw(jcap + 1);
  for (std::size_t k = 0; k <= jcap; ++k) {
    const double x = static_cast<double>(k) * h16;
    av[k] = spec.alpha.interior(x);
    pw[k] = h16 * detail::pdf_avg(spec.lifetime, x);
  }

  r.t.resize(nt + 1);
  for (std::size_t i = 0; i <= nt; ++i) r.t[i] = static_cast<double>(i) * h;
  r.q_curve.assign(nt + 1, 0.0);

  // Death by t needs the root gone by t and every subtree gone in its
  // remaining window, so each time node integrates the offspring transform
  // at earlier curve values over lifetimes up to t. The inner lifetime
  // integral is accumulated per diagonal on a sixteenth-step sublattice:
  // cells older than one coarse step are invariant under the shift
  // (i, j) -> (i + 1, j + 16), so only the newest sixteen cells plus the
  // endpoint cell are computed per node, via prefix sums.
  std::vector<double> C(16 * nt + 1, 0.0);
  std::vector<double> Ga, Gb;
  std::vector<double> Pa(jcap + 1, 0.0), Pb(jcap + 1, 0.0), SA(jcap + 1, 0.0);

  for (std::size_t i = 1; i <= nt; ++i) {
    const std::size_t jmax = std::min(16 * i, nx16);
    const double qa = r.q_curve[i - 1];
    Gb = std::move(Ga);
    Ga.assign(jmax + 1, 0.0);
    if (coff) {
      std::fill(Ga.begin(), Ga.end(), spec.offspring.gf(0.0, qa) - 1.0);
    } else {
      for (std::size_t k = 0; k <= jmax; ++k)
        Ga[k] = spec.offspring.gf(static_cast<double>(k) * h16, qa) - 1.0;
    }
    for (std::size_t k = 0; k <= jmax; ++k) Pa[k] = av[k] * Ga[k];
    SA[0] = Pa[0];
    for (std::size_t k = 1; k <= jmax; ++k) SA[k] = SA[k - 1] + Pa[k];
    if (!Gb.empty())
      for (std::size_t k = 0; k < Gb.size(); ++k) Pb[k] = av[k] * Gb[k];

    double acc = 0.5 * pw[0];
    for (std::size_t j = 1; j <= jmax; ++j) {
      const std::size_t D = 16 * i - j;
      if (j <= 16) {
        C[D] = j >= 2 ? 0.5 * h16 * (Pa[j - 1] + 2.0 * (SA[j - 2] - Pa[0]) +
                                     Pa[0])
                      : 0.0;
      } else {
        C[D] += 0.5 * h16 *
                (Pa[j - 1] + 2.0 * (SA[j - 2] - SA[j - 17]) + Pb[j - 17]);
      }
      const double K = C[D] + 0.5 * h16 * (Pa[j] + Pa[j - 1]);
      const double w = j == jmax ? 0.5 * pw[j] : pw[j];
      acc += w * std::exp(K);
    }
    r.q_curve[i] = acc;
  }
  return r;
}

double LaplaceMarch::L_at(double tt) const {
  if (L.empty()) throw std::runtime_error("L_at: march is empty");
  return detail::grid_interp(L, h, tt);
}

double LaplaceMarch::u_at(double tt, double x) const {
  if (u.empty())
    throw std::runtime_error("u_at: march was run without keep_u");
  const std::size_t nt = u.size() - 1;
  const std::size_t nx = u[0].size() - 1;
  const double pt = std::clamp(tt / h, 0.0, static_cast<double>(nt));
  const double px = std::clamp(x / h, 0.0, static_cast<double>(nx));
  std::size_t i = static_cast<std::size_t>(pt);
  std::size_t j = static_cast<std::size_t>(px);
  if (i >= nt) i = nt - 1;
  if (j >= nx) j = nx - 1;
  const double wt = pt - static_cast<double>(i);
  const double wx = px - static_cast<double>(j);
  return (1.0 - wt) * ((1.0 - wx) * u[i][j] + wx * u[i][j + 1]) +
         wt * ((1.0 - wx) * u[i + 1][j] + wx * u[i + 1][j + 1]);
}

LaplaceMarch march_laplace(const ModelSpec& spec, double theta, bool keep_u) {
  if (!(theta >= 0.0))
    throw std::invalid_argument("march_laplace: theta must be nonnegative");
  detail::require_bounded_density(spec);
  LaplaceMarch R;
  R.h = spec.numerics.h;
  R.theta = theta;
  const double h = R.h;
  const std::size_t nt = detail::horizon_nodes(spec.numerics);
  R.T = static_cast<double>(nt) * h;
  const double xe = support_end(spec);
  const auto nx = static_cast<std::size_t>(std::ceil(xe / h - 1e-9));

  R.t.resize(nt + 1);
  for (std::size_t i = 0; i <= nt; ++i) R.t[i] = static_cast<double>(i) * h;
  std::vector<double> xg(nx + 1);
  for (std::size_t j = 0; j <= nx; ++j) xg[j] = static_cast<double>(j) * h;
  const auto wG = detail::age_weights(spec, h, nx);
  std::vector<double> av(nx + 1);
  for (std::size_t j = 0; j <= nx; ++j) av[j] = spec.alpha.interior(xg[j]);
  const bool coff = detail::constant_offspring(spec);

  const double f0 = spec.f.interior(0.0);
  const double fdiag = 0.5 * theta * f0;
  // a jump of f averaged onto a node contributes both one-sided values to
  // the Laplace average, which is the midpoint value times cosh(half jump)
  const double chd = std::cosh(fdiag);
  double jump = 0.0;
  const std::ptrdiff_t joff = detail::jump_column(spec.f, h, jump);
  const double chj = joff >= 0 ? std::cosh(0.5 * theta * jump) : 1.0;
  std::vector<double> fterm(nx + 1, 0.0);
  for (std::size_t d = 1; d <= nx; ++d)
    fterm[d] = theta * detail::f_avg(spec.f, static_cast<double>(d) * h);

  auto fill_om = [&](std::vector<double>& om, double Lv) {
    if (coff) {
      const double gm = 1.0 - spec.offspring.gf(0.0, Lv);
      for (std::size_t j = 0; j <= nx; ++j) om[j] = av[j] * gm;
    } else {
      for (std::size_t j = 0; j <= nx; ++j)
        om[j] = av[j] * (1.0 - spec.offspring.gf(xg[j], Lv));
    }
  };

  R.L.assign(nt + 1, 0.0);
  if (theta == 0.0) {
    std::fill(R.L.begin(), R.L.end(), 1.0);
    if (keep_u) {
      R.xg = xg;
      R.u.assign(nt + 1, std::vector<double>(nx + 1, 0.0));
    }
    return R;
  }
  std::vector<double> u0(nx + 1);
  u0[0] = theta * f0;
  for (std::size_t j = 1; j <= nx; ++j)
    u0[j] = theta * detail::f_avg(spec.f, xg[j]);
  {
    double acc = wG[0] * std::exp(-u0[0]);
    for (std::size_t j = 1; j <= nx; ++j) {
      double term = wG[j] * std::exp(-u0[j]);
      if (joff >= 0 && j == static_cast<std::size_t>(joff)) term *= chj;
      acc += term;
    }
    R.L[0] = acc;
  }
  if (keep_u) {
    R.xg = xg;
    R.u.reserve(nt + 1);
    R.u.push_back(u0);
  }

  // diagonal sums of committed trapezoid cells, indexed by j - i + nt
  std::vector<double> C(nt + nx + 1, 0.0);
  std::vector<double> om_prev(nx + 1), om_cur(nx + 1), urow(nx + 1, 0.0);

  for (std::size_t i = 1; i <= nt; ++i) {
    fill_om(om_prev, R.L[i - 1]);
    double Lc = R.L[i - 1];
    bool done = false;
    for (int it = 0; it < 10 && !done; ++it) {
      fill_om(om_cur, Lc);
      double acc = wG[0];
      for (std::size_t j = 1; j <= nx; ++j) {
        double uv = C[j - i + nt] + 0.5 * h * (om_prev[j - 1] + om_cur[j]);
        if (j > i)
          uv += fterm[j - i];
        else if (j == i)
          uv += fdiag;
        double term = std::exp(-uv);
        if (j == i && f0 != 0.0) term *= chd;
        if (joff >= 0 && j == i + static_cast<std::size_t>(joff)) term *= chj;
        acc += wG[j] * term;
      }
      // convergence is judged against the step change, not against L
      // itself, so nearly flat steps still run the implicit correction
      done = std::fabs(acc - Lc) <=
             std::max(1e-8 * std::fabs(acc - R.L[i - 1]), 1e-15);
      Lc = acc;
    }
    if (!done)
      throw std::runtime_error(
          "march_laplace: corrector did not converge in 10 sweeps; refine "
          "numerics.h");
    R.L[i] = Lc;
    // commit the cells that produced the accepted value
    for (std::size_t j = 1; j <= nx; ++j) {
      const double cell = 0.5 * h * (om_prev[j - 1] + om_cur[j]);
      if (keep_u) {
        double uv = C[j - i + nt] + cell;
        if (j > i)
          uv += fterm[j - i];
        else if (j == i)
          uv += fdiag;
        urow[j] = uv;
      }
      C[j - i + nt] += cell;
    }
    if (keep_u) {
      urow[0] = 0.0;
      R.u.push_back(urow);
    }
  }
  return R;
}

std::vector<double> default_theta_grid() {
  std::vector<double> g{0.0};
  double v = 2.5e-4;
  for (int k = 0; k < 20; ++k) {
    g.push_back(v);
    v *= 2.0;
  }
  return g;
}

double phi_at(const ModelSpec& spec, const MalthusianSolution& sol,
              double theta) {
  if (!(theta >= 0.0))
    throw std::invalid_argument("phi_at: theta must be nonnegative");
  if (theta == 0.0) return 1.0;
  const double T =
      static_cast<double>(detail::horizon_nodes(spec.numerics)) *
      spec.numerics.h;
  const double scale = theta * std::exp(-sol.alpha_tilde * T);
  return march_laplace(spec, scale, false).L.back();
}

PhiCurve phi_limit(const ModelSpec& spec, const MalthusianSolution& sol,
                   const std::vector<double>& thetas) {
  PhiCurve out;
  out.theta = thetas;
  std::sort(out.theta.begin(), out.theta.end());
  out.theta.erase(std::unique(out.theta.begin(), out.theta.end()),
                  out.theta.end());
  if (out.theta.empty() || !(out.theta.front() >= 0.0))
    throw std::invalid_argument("phi_limit: thetas must be nonnegative");
  if (out.theta.front() > 0.0) out.theta.insert(out.theta.begin(), 0.0);

  out.c_slope = limit_functionals(spec, sol).a_f;
  const std::size_t n = out.theta.size();
  out.phi.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    out.phi[k] = phi_at(spec, sol, out.theta[k]);

  // interpolate phi at off-grid arguments, log-linearly in theta between
  // positive nodes and by the exact slope form below the smallest one
  std::vector<double> lg;
  for (std::size_t k = 1; k < n; ++k) lg.push_back(std::log(out.theta[k]));
  auto phi_interp = [&](double th) {
    if (th <= 0.0) return 1.0;
    if (n < 2 || th <= out.theta[1]) {
      const double lin = 1.0 - out.c_slope * th;
      return n >= 2 && th == out.theta[1] ? out.phi[1] : std::max(lin, 0.0);
    }
    if (th >= out.theta[n - 1]) return out.phi[n - 1];
    const double lt = std::log(th);
    const auto it = std::upper_bound(lg.begin(), lg.end(), lt);
    const std::size_t k = static_cast<std::size_t>(it - lg.begin());
    const double w = (lt - lg[k - 1]) / (lg[k] - lg[k - 1]);
    return out.phi[k] + w * (out.phi[k + 1] - out.phi[k]);
  };

  out.residual.resize(n);
  const double a = sol.alpha_tilde;
  for (std::size_t k = 0; k < n; ++k) {
    const double th = out.theta[k];
    const double rhs = nested_transform(
        spec, [&](double s) { return phi_interp(th * std::exp(-a * s)); });
    out.residual[k] = std::fabs(rhs - out.phi[k]);
    if (!(out.residual[k] <= 1e-2))
      throw std::runtime_error(
          "phi_limit: fixed-point residual above 1e-2 at theta = " +
          std::to_string(th) + "; increase numerics.T");
  }
  return out;
}

double nested_transform(const ModelSpec& spec,
                        const std::function<double(double)>& inner) {
  detail::require_bounded_density(spec);
  const double xe = support_end(spec);
  const auto br = transform_breaks(spec);
  const bool coff = detail::constant_offspring(spec);
  const bool calpha = spec.alpha.kind == RateFunction::Kind::constant;
  // the age-resolved paths cost a quadratic sweep, so they run coarser
  const double base = coff && calpha ? kFineStep : (coff ? 0.004 : 0.01);
  auto at_step = [&](double step) {
    const auto xs = quad::nodes(0.0, xe, step, br);
    const std::size_t n = xs.size();
    std::vector<double> K(n, 0.0);
    if (coff) {
      std::vector<double> c(n);
      for (std::size_t i = 0; i < n; ++i)
        c[i] = spec.offspring.gf(0.0, inner(xs[i])) - 1.0;
      if (calpha) {
        const double al = spec.alpha.interior(0.0);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = al * c[i];
        K = quad::cumtrapz(xs, y);
      } else {
        for (std::size_t i = 1; i < n; ++i) {
          double acc = 0.0;
          double prev = spec.alpha.interior(xs[i] - xs[0]) * c[0];
          for (std::size_t k = 1; k <= i; ++k) {
            const double cur = spec.alpha.interior(xs[i] - xs[k]) * c[k];
            acc += 0.5 * (xs[k] - xs[k - 1]) * (prev + cur);
            prev = cur;
          }
          K[i] = acc;
        }
      }
    } else {
      std::vector<double> iv(n);
      for (std::size_t i = 0; i < n; ++i) iv[i] = inner(xs[i]);
      for (std::size_t i = 1; i < n; ++i) {
        double acc = 0.0;
        double prev =
            spec.alpha.interior(xs[i]) * (spec.offspring.gf(xs[i], iv[0]) - 1.0);
        for (std::size_t k = 1; k <= i; ++k) {
          const double age = xs[i] - xs[k];
          const double cur =
              spec.alpha.interior(age) * (spec.offspring.gf(age, iv[k]) - 1.0);
          acc += 0.5 * (xs[k] - xs[k - 1]) * (prev + cur);
          prev = cur;
        }
        K[i] = acc;
      }
    }
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
      y[i] = detail::pdf_avg(spec.lifetime, xs[i]) * std::exp(K[i]);
    return quad::trapz(xs, y);
  };
  return quad::richardson(at_step, base);
}

double laplace_Y(const ModelSpec& spec, const MalthusianSolution& sol,
                 double theta) {
  if (!(theta >= 0.0))
    throw std::invalid_argument("laplace_Y: theta must be nonnegative");
  return laplace_Y_impl(spec, sol.alpha_tilde, theta);
}

double mean_Y(const ModelSpec& spec, const MalthusianSolution& sol) {
  const double d = 1e-4;
  return (laplace_Y_impl(spec, sol.alpha_tilde, -d) -
          laplace_Y_impl(spec, sol.alpha_tilde, d)) /
         (2.0 * d);
}

PsiFun::PsiFun(const ModelSpec& spec, const MalthusianSolution& sol)
    : a_(sol.alpha_tilde), spec_(&spec) {
  const double xe = support_end(spec);
  const auto br = transform_breaks(spec);
  // each density value is already extrapolated, so a coarser pair is fine
  // when per-node evaluation is expensive
  const double base = detail::constant_kernel(spec) ? kFineStep : 0.02;
  s1_ = quad::nodes(0.0, xe, base, br);
  s2_ = quad::nodes(0.0, xe, 0.5 * base, br);
  r1_.resize(s1_.size());
  r2_.resize(s2_.size());
  for (std::size_t i = 0; i < s1_.size(); ++i)
    r1_[i] = repro_density(spec, s1_[i]);
  for (std::size_t i = 0; i < s2_.size(); ++i)
    r2_[i] = repro_density(spec, s2_[i]);
}

double PsiFun::operator()(double u) const {
  if (!(u > 0.0)) throw std::invalid_argument("psi_fun: u must be positive");
  auto part_on = [&](const std::vector<double>& ss,
                     const std::vector<double>& rr) {
    std::vector<double> y(ss.size());
    for (std::size_t i = 0; i < ss.size(); ++i) {
      const double z = std::exp(-a_ * ss[i]);
      y[i] = -(std::expm1(-u * z) + u * z) * rr[i];
    }
    return quad::trapz(ss, y);
  };
  const double t1 = part_on(s1_, r1_);
  const double t2 = part_on(s2_, r2_);
  const double repro_part = (t2 + (t2 - t1) / 3.0) / u;
  return repro_part + laplace_Y_centered(*spec_, a_, u) / u;
}

double psi_fun(const ModelSpec& spec, const MalthusianSolution& sol,
               double u) {
  return PsiFun(spec, sol)(u);
}

}  // namespace agebranch
