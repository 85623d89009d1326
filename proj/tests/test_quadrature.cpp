#include <cmath>
#include <vector>

#include "agebranch/quadrature.hpp"
#include "doctest.h"

using namespace agebranch;

TEST_CASE("nodes: uniform lattice honoring breakpoints") {
  const auto x = quad::nodes(0.0, 1.0, 0.25);
  REQUIRE(x.size() == 5);
  CHECK(x.front() == doctest::Approx(0.0));
  CHECK(x.back() == doctest::Approx(1.0));
  CHECK(x[2] == doctest::Approx(0.5));

  const auto xb = quad::nodes(0.0, 1.0, 0.3, {0.5});
  bool has_half = false;
  for (double v : xb) has_half = has_half || std::fabs(v - 0.5) < 1e-14;
  CHECK(has_half);
  for (std::size_t i = 1; i < xb.size(); ++i) {
    CHECK(xb[i] - xb[i - 1] <= 0.3 + 1e-12);
    CHECK(xb[i] > xb[i - 1]);
  }

  const auto deg = quad::nodes(2.0, 2.0, 0.1);
  REQUIRE_FALSE(deg.empty());
  for (double v : deg) CHECK(v == 2.0);

  const auto out = quad::nodes(0.0, 1.0, 0.25, {-1.0, 0.0, 1.0, 3.0});
  CHECK(out.front() == doctest::Approx(0.0));
  CHECK(out.back() == doctest::Approx(1.0));
}

TEST_CASE("trapz and cumtrapz: exact on linear data") {
  const auto x = quad::nodes(0.0, 2.0, 0.5);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 3.0 * x[i] + 1.0;
  CHECK(quad::trapz(x, y) == doctest::Approx(8.0).epsilon(1e-14));

  const auto c = quad::cumtrapz(x, y);
  REQUIRE(c.size() == x.size());
  CHECK(c.front() == 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double exact = 1.5 * x[i] * x[i] + x[i];
    CHECK(c[i] == doctest::Approx(exact).epsilon(1e-14));
  }
}

TEST_CASE("trapz: second-order convergence on exp") {
  auto err = [](double step) {
    const auto x = quad::nodes(0.0, 1.0, step);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::exp(x[i]);
    return std::fabs(quad::trapz(x, y) - (std::exp(1.0) - 1.0));
  };
  const double e1 = err(0.02);
  const double e2 = err(0.01);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("decay_conv: matches closed form and stays finite for large decay") {
  // w == 1: integral of e^{-a(t-r)} dr over [0, t] is (1 - e^{-a t}) / a.
  const double a = 2.0;
  const auto x = quad::nodes(0.0, 3.0, 0.005);
  std::vector<double> w(x.size(), 1.0);
  const auto g = quad::decay_conv(x, w, a);
  REQUIRE(g.size() == x.size());
  for (std::size_t i = 0; i < x.size(); i += 100) {
    const double exact = (1.0 - std::exp(-a * x[i])) / a;
    CHECK(g[i] == doctest::Approx(exact).epsilon(1e-5));
  }

  // Horizon far beyond where e^{a r} would overflow.
  const auto xl = quad::nodes(0.0, 800.0, 0.02);
  std::vector<double> wl(xl.size(), 1.0);
  const auto gl = quad::decay_conv(xl, wl, 5.0);
  CHECK(std::isfinite(gl.back()));
  CHECK(gl.back() == doctest::Approx(0.2).epsilon(1e-2));
}

TEST_CASE("richardson: cancels the h^2 term") {
  // f(h) = 1 + h^2 + h^4 extrapolates to 1 + O(h^4).
  auto f = [](double h) { return 1.0 + h * h + h * h * h * h; };
  const double v = quad::richardson(f, 0.1);
  CHECK(std::fabs(v - 1.0) < 1e-4);
  CHECK(std::fabs(v - 1.0) < std::fabs(f(0.05) - 1.0));
}
