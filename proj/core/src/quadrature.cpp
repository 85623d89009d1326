#include "agebranch/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace agebranch::quad {

std::vector<double> nodes(double a, double b, double step,
                          const std::vector<double>& breaks) {
  if (!(b >= a)) throw std::invalid_argument("quad::nodes: b < a");
  if (!(step > 0.0)) throw std::invalid_argument("quad::nodes: step <= 0");
  std::vector<double> edges{a};
  const double eps = 1e-12 * (1.0 + std::fabs(b - a));
  std::vector<double> br = breaks;
  std::sort(br.begin(), br.end());
  for (double p : br)
    if (p > a + eps && p < b - eps &&
        std::fabs(p - edges.back()) > eps)
      edges.push_back(p);
  edges.push_back(b);

  std::vector<double> out;
  out.push_back(a);
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double p = edges[k], q = edges[k + 1];
    const auto n = static_cast<std::size_t>(std::ceil((q - p) / step - 1e-9));
    const std::size_t m = std::max<std::size_t>(n, 1);
    for (std::size_t i = 1; i <= m; ++i)
      out.push_back(p + (q - p) * static_cast<double>(i) / static_cast<double>(m));
  }
  return out;
}

double trapz(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

std::vector<double> cumtrapz(const std::vector<double>& x,
                             const std::vector<double>& y) {
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i)
    out[i] = out[i - 1] + 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return out;
}

std::vector<double> decay_conv(const std::vector<double>& x,
                               const std::vector<double>& w, double a) {
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double dx = x[i] - x[i - 1];
    const double decay = std::exp(-a * dx);
    out[i] = out[i - 1] * decay + 0.5 * dx * (decay * w[i - 1] + w[i]);
  }
  return out;
}

}  // namespace agebranch::quad
