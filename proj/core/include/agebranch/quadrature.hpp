#pragma once

#include <vector>

namespace agebranch::quad {

// Node set over [a, b]: a uniform lattice of step <= `step` between
// consecutive breakpoints. Composite trapezoid on such nodes keeps the clean
// h^2 Euler-Maclaurin leading term on every smooth piece, so one Richardson
// halving cancels it.
std::vector<double> nodes(double a, double b, double step,
                          const std::vector<double>& breaks = {});

double trapz(const std::vector<double>& x, const std::vector<double>& y);

// out[i] = trapezoid integral of y over [x[0], x[i]]
std::vector<double> cumtrapz(const std::vector<double>& x,
                             const std::vector<double>& y);

// out[i] = int_{x[0]}^{x[i]} e^{-a (x[i]-r)} w(r) dr, trapezoid per cell.
// Equals e^{-a x} * cumtrapz(e^{a r} w) in exact arithmetic, but the shifted
// recurrence never holds e^{a r} itself, so nothing overflows for large a*x.
std::vector<double> decay_conv(const std::vector<double>& x,
                               const std::vector<double>& w, double a);

// One Richardson halving for a quantity whose discretization error is
// C*step^2 + higher order: f must evaluate the quantity at a given step.
template <class F>
double richardson(F&& f, double step) {
  const double v1 = f(step);
  const double v2 = f(0.5 * step);
  return v2 + (v2 - v1) / 3.0;
}

}  // namespace agebranch::quad
