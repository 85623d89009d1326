#include <cmath>
#include <vector>

#include "agebranch/extinction.hpp"
#include "agebranch/renewal.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace agebranch;

TEST_CASE("total-offspring gf: closed form and aggregation gap") {
  const auto base = fixtures::expbase();
  // Base model: N_total | L ~ Poisson(2L), L ~ Exp(1), so
  // E s^{N_total} = 1 / (3 - 2s) in both aggregation modes.
  for (double s : {0.0, 0.25, 0.5, 0.9}) {
    const double exact = 1.0 / (3.0 - 2.0 * s);
    CHECK(offspring_total_gf(base, s, GfMode::counts) ==
          doctest::Approx(exact).epsilon(1e-8));
    CHECK(offspring_total_gf(base, s, GfMode::mean_intensity) ==
          doctest::Approx(exact).epsilon(1e-8));
  }
  CHECK(std::fabs(offspring_total_gf(base, 1.0, GfMode::counts) - 1.0) <
        1e-9);

  // Poisson offspring with unit mean: the per-birth distribution matters.
  // The two modes differ by a frozen reference gap at s = 1/2.
  const auto pois = fixtures::exppois();
  const double gc = offspring_total_gf(pois, 0.5, GfMode::counts);
  const double gm = offspring_total_gf(pois, 0.5, GfMode::mean_intensity);
  CHECK(gm == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(gc - gm ==
        doctest::Approx(fixtures::frozen::kPoisTotalGfGapHalf).epsilon(1e-6));
}

TEST_CASE("extinction probability: fixed points on both fixtures") {
  const auto base = extinction_prob(fixtures::expbase());
  CHECK(std::fabs(base.q - 0.5) < 1e-9);
  CHECK(base.fixed_point_residual < 1e-9);
  CHECK(std::fabs(base.q_mean_intensity - 0.5) < 1e-9);

  const auto pois = extinction_prob(fixtures::exppois());
  CHECK(pois.q == doctest::Approx(fixtures::frozen::kPoisQ).epsilon(1e-7));
  CHECK(std::fabs(pois.q_mean_intensity - 0.5) < 1e-9);

  // Subcritical mean offspring forces q = 1 in both modes.
  const auto sub = extinction_prob(fixtures::subcritical());
  CHECK(sub.q == 1.0);
  CHECK(sub.q_mean_intensity == 1.0);
}

TEST_CASE("extinction curve: monotone, below q, matches closed form") {
  const auto spec = fixtures::expbase();
  const auto res = extinction_curve(spec);
  REQUIRE(res.t.size() == res.q_curve.size());
  REQUIRE(res.t.size() > 10);
  CHECK(res.q_curve.front() == doctest::Approx(0.0));
  for (std::size_t i = 1; i < res.q_curve.size(); ++i) {
    CHECK(res.q_curve[i] >= res.q_curve[i - 1] - 1e-13);
    CHECK(res.q_curve[i] <= res.q + 1e-12);
  }
  // Closed form q(t) = (e^t - 1) / (2 e^t - 1); the march is first order.
  auto q_at = [&](double t) {
    const std::size_t i =
        std::size_t(std::lround(t / (res.t[1] - res.t[0])));
    return res.q_curve[i];
  };
  for (double t : {1.0, 2.0, 4.0}) {
    CHECK(q_at(t) ==
          doctest::Approx(fixtures::base_extinct_curve(t)).epsilon(2e-3));
  }
  CHECK(q_at(12.0) ==
        doctest::Approx(fixtures::frozen::kBaseQ12).epsilon(1e-5));

  // Step halving shrinks the t = 2 error linearly.
  auto err = [](double h) {
    const auto r = extinction_curve(fixtures::expbase(h, 4.0));
    const std::size_t i = std::size_t(std::lround(2.0 / h));
    return std::fabs(r.q_curve[i] - fixtures::base_extinct_curve(2.0));
  };
  const double ratio = err(0.02) / err(0.01);
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.5);
}

TEST_CASE("laplace march: frozen references and exact theta = 0") {
  const auto spec = fixtures::expbase(0.01, 6.0);
  const auto march = march_laplace(spec, 1.0);
  CHECK(march.L_at(0.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(march.L_at(1.0) ==
        doctest::Approx(fixtures::frozen::kBaseMarchL1).epsilon(1e-4));
  CHECK(march.L_at(2.0) ==
        doctest::Approx(fixtures::frozen::kBaseMarchL2).epsilon(1e-4));
  // L is a Laplace transform of a nonnegative variable: values in (0, 1],
  // and for f == 1 the mass at zero population keeps L above q(t) - o(1).
  for (double t : {0.5, 3.0, 6.0}) {
    CHECK(march.L_at(t) > 0.0);
    CHECK(march.L_at(t) <= 1.0);
  }

  const auto zero = march_laplace(spec, 0.0);
  for (double t : {0.0, 2.0, 6.0}) CHECK(zero.L_at(t) == 1.0);
}

TEST_CASE("laplace march: cumulant table consistent with the curve") {
  const auto spec = fixtures::expbase(0.01, 4.0);
  const auto march = march_laplace(spec, 0.5, true);
  REQUIRE_FALSE(march.u.empty());
  // L(t) = int G(dx) e^{-u_t(x)} up to quadrature error.
  const double t = 3.0;
  double acc = 0.0;
  const auto& xg = march.xg;
  std::vector<double> vals(xg.size());
  for (std::size_t j = 0; j < xg.size(); ++j)
    vals[j] = std::exp(-march.u_at(t, xg[j]));
  for (std::size_t j = 1; j < xg.size(); ++j) {
    const double w = xg[j] - xg[j - 1];
    const double mid_pdf = spec.lifetime.pdf(0.5 * (xg[j] + xg[j - 1]));
    acc += 0.5 * w * mid_pdf * (vals[j] + vals[j - 1]);
  }
  CHECK(acc == doctest::Approx(march.L_at(t)).epsilon(5e-3));
}

TEST_CASE("limit transform: closed form, tail, and slope") {
  const auto spec = fixtures::expbase();
  const auto sol = malthusian(spec);
  for (double theta : {0.25, 1.0, 4.0}) {
    CHECK(phi_at(spec, sol, theta) ==
          doctest::Approx(fixtures::base_phi(theta)).epsilon(2e-3));
  }
  const auto curve = phi_limit(spec, sol, default_theta_grid());
  REQUIRE(curve.theta.size() == curve.phi.size());
  double max_res = 0.0;
  for (double r : curve.residual) max_res = std::max(max_res, r);
  CHECK(max_res < 1e-2);
  // -phi'(0) = E W = 1: the transform slope recovers the limit mean.
  CHECK(curve.c_slope == doctest::Approx(1.0).epsilon(1e-3));
  // Large theta: transform tends to the extinction probability.
  CHECK(phi_at(spec, sol, 100.0) == doctest::Approx(0.5).epsilon(1e-2));
  // Monotone nonincreasing in theta.
  for (std::size_t i = 1; i < curve.phi.size(); ++i)
    CHECK(curve.phi[i] <= curve.phi[i - 1] + 1e-10);
}

TEST_CASE("size-biased limit: transform, mean, and nested identity") {
  const auto spec = fixtures::expbase();
  const auto sol = malthusian(spec);
  CHECK(laplace_Y(spec, sol, 1.0) ==
        doctest::Approx(fixtures::frozen::kBaseLaplaceY1).epsilon(1e-6));
  CHECK(laplace_Y(spec, sol, 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(mean_Y(spec, sol) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(mean_Y(fixtures::exppois(), malthusian(fixtures::exppois())) ==
        doctest::Approx(1.0).epsilon(1e-6));

  // nested_transform with inner == 1 integrates gf at argument 1: mass 1.
  CHECK(nested_transform(spec, [](double) { return 1.0; }) ==
        doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("centered transform: frozen value, positivity, small-u decay") {
  const auto spec = fixtures::expbase();
  const auto sol = malthusian(spec);
  const PsiFun psi(spec, sol);
  CHECK(psi(1.0) ==
        doctest::Approx(fixtures::frozen::kBasePsi1).epsilon(1e-8));
  CHECK(psi_fun(spec, sol, 1.0) == doctest::Approx(psi(1.0)));
  for (double u = 1e-3; u <= 10.0; u *= 2.0) CHECK(psi(u) >= 0.0);
  CHECK(psi(1e-6) < 1e-4);
  // psi(u)/u -> (E Y^2 - E Z)/2 = (2 - 2/3)/2 = 2/3 on the base model.
  CHECK(psi(1e-4) == doctest::Approx(2.0 / 3.0 * 1e-4).epsilon(2e-2));
}
