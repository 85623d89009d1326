#include "agebranch/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "agebranch/quadrature.hpp"
#include "json.hpp"

namespace agebranch {

using nlohmann::json;

// ---------------------------------------------------------------- Table

double Table::operator()(double x) const {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - xs.begin());
  const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return ys[i - 1] + t * (ys[i] - ys[i - 1]);
}

double Table::max_y() const { return *std::max_element(ys.begin(), ys.end()); }
double Table::min_y() const { return *std::min_element(ys.begin(), ys.end()); }

// --------------------------------------------------------- RateFunction

double RateFunction::value(double x) const {
  if (x <= 0.0) return 0.0;
  return kind == Kind::constant ? c : tab(x);
}

double RateFunction::interior(double x) const {
  return kind == Kind::constant ? c : tab(x);
}

double RateFunction::sup() const {
  return kind == Kind::constant ? c : tab.max_y();
}

std::vector<double> RateFunction::breakpoints() const {
  return kind == Kind::table ? tab.xs : std::vector<double>{};
}

RateFunction RateFunction::constant(double v) {
  RateFunction r;
  r.kind = Kind::constant;
  r.c = v;
  return r;
}

RateFunction RateFunction::table(std::vector<double> xs, std::vector<double> ys) {
  RateFunction r;
  r.kind = Kind::table;
  r.tab = Table{std::move(xs), std::move(ys)};
  return r;
}

// --------------------------------------------------------- OffspringLaw

namespace {

long det_count(const Param& n, double x) {
  return std::lround(n.at(x));
}

double geom_p(double mean) { return 1.0 / (1.0 + mean); }

}  // namespace

double OffspringLaw::gf(double x, double s) const {
  // generating functions are exactly 1 at s = 1; the family formulas can
  // miss by an ulp through parameter rounding
  if (s == 1.0) return 1.0;
  switch (kind) {
    case Kind::deterministic: {
      const long k = det_count(n, x);
      return std::pow(s, static_cast<double>(k));
    }
    case Kind::poisson:
      return std::exp(mean.at(x) * (s - 1.0));
    case Kind::binary:
      return p0.at(x) + p2.at(x) * s * s;
    case Kind::geometric: {
      const double p = geom_p(mean.at(x));
      return p / (1.0 - (1.0 - p) * s);
    }
  }
  return 0.0;
}

double OffspringLaw::gf_m1(double x, double w) const {
  switch (kind) {
    case Kind::deterministic: {
      const long k = det_count(n, x);
      if (k == 0) return 0.0;
      return std::expm1(static_cast<double>(k) * std::log1p(w));
    }
    case Kind::poisson:
      return std::expm1(mean.at(x) * w);
    case Kind::binary:
      return p2.at(x) * w * (2.0 + w);
    case Kind::geometric: {
      const double p = geom_p(mean.at(x));
      return (1.0 - p) * w / (p - (1.0 - p) * w);
    }
  }
  return 0.0;
}

double OffspringLaw::mean_count(double x) const {
  switch (kind) {
    case Kind::deterministic: return static_cast<double>(det_count(n, x));
    case Kind::poisson: return mean.at(x);
    case Kind::binary: return 2.0 * p2.at(x);
    case Kind::geometric: return mean.at(x);
  }
  return 0.0;
}

double OffspringLaw::second_factorial(double x) const {
  switch (kind) {
    case Kind::deterministic: {
      const double k = static_cast<double>(det_count(n, x));
      return k * (k - 1.0);
    }
    case Kind::poisson: {
      const double m = mean.at(x);
      return m * m;
    }
    case Kind::binary: return 2.0 * p2.at(x);
    case Kind::geometric: {
      const double m = mean.at(x);
      return 2.0 * m * m;
    }
  }
  return 0.0;
}

double OffspringLaw::pmf(double x, long k) const {
  if (k < 0) return 0.0;
  switch (kind) {
    case Kind::deterministic: return k == det_count(n, x) ? 1.0 : 0.0;
    case Kind::poisson: {
      const double m = mean.at(x);
      if (m == 0.0) return k == 0 ? 1.0 : 0.0;
      return std::exp(static_cast<double>(k) * std::log(m) - m -
                      std::lgamma(static_cast<double>(k) + 1.0));
    }
    case Kind::binary:
      if (k == 0) return p0.at(x);
      if (k == 2) return p2.at(x);
      return 0.0;
    case Kind::geometric: {
      const double p = geom_p(mean.at(x));
      return p * std::pow(1.0 - p, static_cast<double>(k));
    }
  }
  return 0.0;
}

double OffspringLaw::nlogn_moment(double x) const {
  switch (kind) {
    case Kind::deterministic: {
      const double k = static_cast<double>(det_count(n, x));
      return k > 1.0 ? k * std::log(k) : 0.0;
    }
    case Kind::binary:
      return 2.0 * std::log(2.0) * p2.at(x);
    case Kind::poisson:
    case Kind::geometric: {
      double s = 0.0;
      for (long k = 2; k < 200000; ++k) {
        const double term =
            static_cast<double>(k) * std::log(static_cast<double>(k)) * pmf(x, k);
        s += term;
        if (term < 1e-16 && static_cast<double>(k) > mean_count(x) + 5.0) break;
      }
      return s;
    }
  }
  return 0.0;
}

long OffspringLaw::sample(double x, RngStream& rng) const {
  // exactly one draw per call, for every family, so the event stream layout
  // does not depend on the law
  switch (kind) {
    case Kind::deterministic: {
      (void)rng.next();
      return det_count(n, x);
    }
    case Kind::poisson: {
      const double m = mean.at(x);
      double u = rng.u01();
      double p = std::exp(-m), cum = p;
      long k = 0;
      const long cap = static_cast<long>(m + 40.0 * std::sqrt(m + 1.0) + 100.0);
      while (u > cum && k < cap) {
        ++k;
        p *= m / static_cast<double>(k);
        cum += p;
      }
      return k;
    }
    case Kind::binary:
      return rng.u01() <= p0.at(x) ? 0 : 2;
    case Kind::geometric: {
      const double p = geom_p(mean.at(x));
      if (p >= 1.0) {
        (void)rng.next();
        return 0;
      }
      const double u = rng.u01();
      return static_cast<long>(std::log(u) / std::log1p(-p));
    }
  }
  return 0;
}

double OffspringLaw::sup_mean() const {
  switch (kind) {
    case Kind::deterministic: return n.max();
    case Kind::poisson:
    case Kind::geometric: return mean.max();
    case Kind::binary: return 2.0 * p2.max();
  }
  return 0.0;
}

double OffspringLaw::sup_second_factorial() const {
  switch (kind) {
    case Kind::deterministic: return n.max() * (n.max() - 1.0);
    case Kind::poisson: return mean.max() * mean.max();
    case Kind::binary: return 2.0 * p2.max();
    case Kind::geometric: return 2.0 * mean.max() * mean.max();
  }
  return 0.0;
}

std::vector<double> OffspringLaw::breakpoints() const {
  std::vector<double> out;
  for (const Param* p : {&n, &mean, &p0, &p2})
    if (p->is_table) out.insert(out.end(), p->tab.xs.begin(), p->tab.xs.end());
  return out;
}

// --------------------------------------------------------- LifetimeDist

namespace {

// regularized lower incomplete gamma P(a, x), series + continued fraction
double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // Lentz continued fraction for Q(a, x)
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - lg) * h;
}

}  // namespace

double LifetimeDist::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  switch (kind) {
    case Kind::exponential: return -std::expm1(-a * x);
    case Kind::gamma: return gamma_p(a, x / b);
    case Kind::uniform:
      if (x <= a) return 0.0;
      if (x >= b) return 1.0;
      return (x - a) / (b - a);
    case Kind::weibull: return -std::expm1(-std::pow(x / b, a));
  }
  return 0.0;
}

double LifetimeDist::pdf(double x) const {
  switch (kind) {
    case Kind::exponential:
      return x < 0.0 ? 0.0 : a * std::exp(-a * x);
    case Kind::gamma: {
      if (x < 0.0) return 0.0;
      if (x == 0.0) {
        if (a > 1.0) return 0.0;
        if (a == 1.0) return 1.0 / b;
        return std::numeric_limits<double>::infinity();
      }
      return std::exp((a - 1.0) * std::log(x / b) - x / b - std::lgamma(a)) / b;
    }
    case Kind::uniform:
      return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0;
    case Kind::weibull: {
      if (x < 0.0) return 0.0;
      if (x == 0.0) {
        if (a > 1.0) return 0.0;
        if (a == 1.0) return 1.0 / b;
        return std::numeric_limits<double>::infinity();
      }
      const double z = x / b;
      return (a / b) * std::pow(z, a - 1.0) * std::exp(-std::pow(z, a));
    }
  }
  return 0.0;
}

double LifetimeDist::quantile(double p) const {
  if (p < 0.0 || p >= 1.0)
    throw std::domain_error("LifetimeDist::quantile: p outside [0,1)");
  if (p == 0.0) return kind == Kind::uniform ? a : 0.0;
  switch (kind) {
    case Kind::exponential: return -std::log1p(-p) / a;
    case Kind::uniform: return a + p * (b - a);
    case Kind::weibull: return b * std::pow(-std::log1p(-p), 1.0 / a);
    case Kind::gamma: {
      // bracket then bisect on the cdf; called rarely, robustness over speed
      double hi = b * (a + 1.0);
      while (cdf(hi) < p) hi *= 2.0;
      double lo = 0.0;
      for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < p) lo = mid; else hi = mid;
        if (hi - lo < 1e-14 * (1.0 + hi)) break;
      }
      return 0.5 * (lo + hi);
    }
  }
  return 0.0;
}

double LifetimeDist::sample(RngStream& rng) const {
  switch (kind) {
    case Kind::exponential: return rng.exp1() / a;
    case Kind::uniform: return a + (b - a) * rng.u01();
    case Kind::weibull: return b * std::pow(rng.exp1(), 1.0 / a);
    case Kind::gamma: {
      // Marsaglia-Tsang; the boost for shape < 1 multiplies by U^{1/shape}
      double shape = a;
      double boost = 1.0;
      if (shape < 1.0) {
        boost = std::pow(rng.u01(), 1.0 / shape);
        shape += 1.0;
      }
      const double d = shape - 1.0 / 3.0;
      const double cc = 1.0 / std::sqrt(9.0 * d);
      for (;;) {
        double z, v;
        do {
          z = rng.normal();
          v = 1.0 + cc * z;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.u01();
        if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v))
          return boost * d * v * b;
      }
    }
  }
  return 0.0;
}

std::vector<double> LifetimeDist::breakpoints() const {
  // the origin is an integration-range edge everywhere, never an interior kink
  if (kind == Kind::uniform) {
    if (a > 0.0) return {a, b};
    return {b};
  }
  return {};
}

// --------------------------------------------------------- TestFunction

double TestFunction::value(double x) const {
  if (x <= 0.0) return 0.0;
  return interior(x);
}

double TestFunction::interior(double x) const {
  switch (kind) {
    case Kind::one: return scale;
    case Kind::indicator: return x <= x0 ? scale : 0.0;
    case Kind::expdecay: return scale * std::exp(-rate * std::max(x, 0.0));
    case Kind::table: return scale * tab(x);
  }
  return 0.0;
}

double TestFunction::sup() const {
  switch (kind) {
    case Kind::one:
    case Kind::indicator: return std::fabs(scale);
    case Kind::expdecay: return std::fabs(scale);
    case Kind::table: return std::fabs(scale) * std::max(std::fabs(tab.max_y()), std::fabs(tab.min_y()));
  }
  return 0.0;
}

std::vector<double> TestFunction::breakpoints() const {
  switch (kind) {
    case Kind::indicator: return {x0};
    case Kind::table: return tab.xs;
    default: return {};
  }
}

// ------------------------------------------------------------- parsing

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("config error at " + path + ": " + what);
}

void require_keys(const json& j, const std::string& path,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) { known = true; break; }
    if (!known) fail(path, "unknown key '" + item.key() + "'");
  }
}

double get_num(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

double get_field(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) fail(path, std::string("missing key '") + key + "'");
  return get_num(j.at(key), path + "." + key);
}

std::string get_kind(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("kind"))
    fail(path, "expected a tagged object with a 'kind' key");
  if (!j.at("kind").is_string()) fail(path + ".kind", "expected a string");
  return j.at("kind").get<std::string>();
}

Table parse_table(const json& j, const std::string& path) {
  if (!j.contains("xs") || !j.contains("ys"))
    fail(path, "table needs 'xs' and 'ys' arrays");
  const json& jx = j.at("xs");
  const json& jy = j.at("ys");
  if (!jx.is_array() || !jy.is_array() || jx.size() != jy.size() || jx.size() < 2)
    fail(path, "'xs' and 'ys' must be equally sized arrays with >= 2 entries");
  Table t;
  for (std::size_t i = 0; i < jx.size(); ++i) {
    t.xs.push_back(get_num(jx[i], path + ".xs"));
    t.ys.push_back(get_num(jy[i], path + ".ys"));
  }
  for (std::size_t i = 1; i < t.xs.size(); ++i)
    if (!(t.xs[i] > t.xs[i - 1])) fail(path + ".xs", "knots must be strictly increasing");
  return t;
}

Param parse_param(const json& j, const std::string& path) {
  Param p;
  if (j.is_number()) {
    p.is_table = false;
    p.c = get_num(j, path);
    return p;
  }
  if (j.is_object()) {
    require_keys(j, path, {"xs", "ys"});
    p.is_table = true;
    p.tab = parse_table(j, path);
    return p;
  }
  fail(path, "expected a number or an {xs, ys} table");
}

RateFunction parse_alpha(const json& j) {
  const std::string kind = get_kind(j, "alpha");
  if (kind == "constant") {
    require_keys(j, "alpha", {"kind", "value"});
    const double v = get_field(j, "alpha", "value");
    if (v < 0.0) fail("alpha.value", "must be >= 0");
    return RateFunction::constant(v);
  }
  if (kind == "table") {
    require_keys(j, "alpha", {"kind", "xs", "ys"});
    Table t = parse_table(j, "alpha");
    if (t.min_y() < 0.0) fail("alpha.ys", "must be >= 0");
    return RateFunction::table(std::move(t.xs), std::move(t.ys));
  }
  fail("alpha.kind", "unknown kind '" + kind + "'");
}

OffspringLaw parse_offspring(const json& j) {
  OffspringLaw law;
  const std::string kind = get_kind(j, "offspring");
  if (kind == "deterministic") {
    require_keys(j, "offspring", {"kind", "n"});
    law.kind = OffspringLaw::Kind::deterministic;
    law.n = parse_param(j.at("n"), "offspring.n");
    const auto check_int = [&](double v) {
      if (v < 0.0 || std::fabs(v - std::round(v)) > 1e-9)
        fail("offspring.n", "must be a nonnegative integer");
    };
    if (law.n.is_table)
      for (double v : law.n.tab.ys) check_int(v);
    else
      check_int(law.n.c);
  } else if (kind == "poisson") {
    require_keys(j, "offspring", {"kind", "mean"});
    law.kind = OffspringLaw::Kind::poisson;
    law.mean = parse_param(j.at("mean"), "offspring.mean");
    if (law.mean.min() < 0.0) fail("offspring.mean", "must be >= 0");
  } else if (kind == "binary") {
    require_keys(j, "offspring", {"kind", "p0", "p2"});
    law.kind = OffspringLaw::Kind::binary;
    law.p0 = parse_param(j.at("p0"), "offspring.p0");
    law.p2 = parse_param(j.at("p2"), "offspring.p2");
    if (law.p0.min() < 0.0 || law.p0.max() > 1.0) fail("offspring.p0", "must lie in [0,1]");
    if (law.p2.min() < 0.0 || law.p2.max() > 1.0) fail("offspring.p2", "must lie in [0,1]");
  } else if (kind == "geometric") {
    require_keys(j, "offspring", {"kind", "mean"});
    law.kind = OffspringLaw::Kind::geometric;
    law.mean = parse_param(j.at("mean"), "offspring.mean");
    if (law.mean.min() < 0.0) fail("offspring.mean", "must be >= 0");
  } else {
    fail("offspring.kind", "unknown kind '" + kind + "'");
  }
  return law;
}

LifetimeDist parse_lifetime(const json& j) {
  LifetimeDist d;
  const std::string kind = get_kind(j, "lifetime");
  if (kind == "exponential") {
    require_keys(j, "lifetime", {"kind", "rate"});
    d.kind = LifetimeDist::Kind::exponential;
    d.a = get_field(j, "lifetime", "rate");
    if (d.a <= 0.0) fail("lifetime.rate", "must be > 0");
  } else if (kind == "gamma") {
    require_keys(j, "lifetime", {"kind", "shape", "scale"});
    d.kind = LifetimeDist::Kind::gamma;
    d.a = get_field(j, "lifetime", "shape");
    d.b = get_field(j, "lifetime", "scale");
    if (d.a <= 0.0 || d.b <= 0.0) fail("lifetime", "shape and scale must be > 0");
  } else if (kind == "uniform") {
    require_keys(j, "lifetime", {"kind", "lo", "hi"});
    d.kind = LifetimeDist::Kind::uniform;
    d.a = get_field(j, "lifetime", "lo");
    d.b = get_field(j, "lifetime", "hi");
    if (d.a < 0.0 || d.b <= d.a) fail("lifetime", "need 0 <= lo < hi");
  } else if (kind == "weibull") {
    require_keys(j, "lifetime", {"kind", "shape", "scale"});
    d.kind = LifetimeDist::Kind::weibull;
    d.a = get_field(j, "lifetime", "shape");
    d.b = get_field(j, "lifetime", "scale");
    if (d.a <= 0.0 || d.b <= 0.0) fail("lifetime", "shape and scale must be > 0");
  } else {
    fail("lifetime.kind", "unknown kind '" + kind + "'");
  }
  return d;
}

TestFunction parse_f(const json& j) {
  TestFunction f;
  const std::string kind = get_kind(j, "f");
  if (kind == "one") {
    require_keys(j, "f", {"kind"});
    f.kind = TestFunction::Kind::one;
  } else if (kind == "indicator") {
    require_keys(j, "f", {"kind", "x"});
    f.kind = TestFunction::Kind::indicator;
    f.x0 = get_field(j, "f", "x");
    if (f.x0 <= 0.0) fail("f.x", "must be > 0");
  } else if (kind == "expdecay") {
    require_keys(j, "f", {"kind", "rate"});
    f.kind = TestFunction::Kind::expdecay;
    f.rate = get_field(j, "f", "rate");
    if (f.rate < 0.0) fail("f.rate", "must be >= 0");
  } else if (kind == "table") {
    require_keys(j, "f", {"kind", "xs", "ys"});
    f.kind = TestFunction::Kind::table;
    f.tab = parse_table(j, "f");
  } else {
    fail("f.kind", "unknown kind '" + kind + "'");
  }
  return f;
}

NumericsConfig parse_numerics(const json& j) {
  NumericsConfig n;
  require_keys(j, "numerics", {"h", "T", "tail_q", "tol", "max_iter"});
  if (j.contains("h")) n.h = get_field(j, "numerics", "h");
  if (j.contains("T")) n.T = get_field(j, "numerics", "T");
  if (j.contains("tail_q")) n.tail_q = get_field(j, "numerics", "tail_q");
  if (j.contains("tol")) n.tol = get_field(j, "numerics", "tol");
  if (j.contains("max_iter")) {
    const double v = get_field(j, "numerics", "max_iter");
    n.max_iter = static_cast<int>(v);
    if (n.max_iter < 10 || std::fabs(v - n.max_iter) > 0)
      fail("numerics.max_iter", "must be an integer >= 10");
  }
  if (n.h <= 0.0) fail("numerics.h", "must be > 0");
  if (n.T < n.h) fail("numerics.T", "must be >= h");
  if (n.tail_q <= 0.0 || n.tail_q >= 1e-3) fail("numerics.tail_q", "must lie in (0, 1e-3)");
  if (n.tol <= 0.0) fail("numerics.tol", "must be > 0");
  return n;
}

std::vector<double> parse_double_array(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(get_num(v, path));
  return out;
}

SimConfig parse_sim(const json& j, const NumericsConfig& numerics) {
  SimConfig s;
  require_keys(j, "sim",
               {"trajectories", "seed", "obs_times", "max_pop", "threads",
                "t_first_moments", "t_distributional", "t_variance", "t_clt",
                "s0", "clt_trajectories", "y_draws", "thetas", "gf_points"});
  if (j.contains("trajectories")) {
    s.trajectories = static_cast<long>(get_field(j, "sim", "trajectories"));
    if (s.trajectories < 1) fail("sim.trajectories", "must be >= 1");
  }
  if (j.contains("seed")) {
    const double v = get_field(j, "sim", "seed");
    if (v < 0.0) fail("sim.seed", "must be >= 0");
    s.seed = static_cast<std::uint64_t>(v);
  }
  if (j.contains("obs_times"))
    s.obs_times = parse_double_array(j.at("obs_times"), "sim.obs_times");
  if (j.contains("max_pop")) {
    s.max_pop = static_cast<long>(get_field(j, "sim", "max_pop"));
    if (s.max_pop < 10) fail("sim.max_pop", "must be >= 10");
  }
  if (j.contains("threads")) {
    s.threads = static_cast<int>(get_field(j, "sim", "threads"));
    if (s.threads < 0) fail("sim.threads", "must be >= 0");
  }
  if (j.contains("t_first_moments"))
    s.t_first_moments = parse_double_array(j.at("t_first_moments"), "sim.t_first_moments");
  if (j.contains("t_distributional")) s.t_distributional = get_field(j, "sim", "t_distributional");
  if (j.contains("t_variance")) s.t_variance = get_field(j, "sim", "t_variance");
  if (j.contains("t_clt")) s.t_clt = get_field(j, "sim", "t_clt");
  if (j.contains("s0")) s.s0 = get_field(j, "sim", "s0");
  if (j.contains("clt_trajectories")) {
    s.clt_trajectories = static_cast<long>(get_field(j, "sim", "clt_trajectories"));
    if (s.clt_trajectories < 10) fail("sim.clt_trajectories", "must be >= 10");
  }
  if (j.contains("y_draws")) {
    s.y_draws = static_cast<long>(get_field(j, "sim", "y_draws"));
    if (s.y_draws < 100) fail("sim.y_draws", "must be >= 100");
  }
  if (j.contains("thetas")) s.thetas = parse_double_array(j.at("thetas"), "sim.thetas");
  if (j.contains("gf_points")) s.gf_points = parse_double_array(j.at("gf_points"), "sim.gf_points");

  // user-provided times are validated against the horizon; defaults are
  // clipped into it instead
  auto check_time = [&](double t, const char* name) {
    if (t < 0.0 || t > numerics.T)
      fail(std::string("sim.") + name, "times must lie in [0, numerics.T]");
  };
  auto clip_list = [&](std::vector<double>& v) {
    std::erase_if(v, [&](double t) { return t > numerics.T; });
    if (v.empty()) v.push_back(numerics.T);
  };
  if (j.contains("obs_times"))
    for (double t : s.obs_times) check_time(t, "obs_times");
  else
    clip_list(s.obs_times);
  if (j.contains("t_first_moments"))
    for (double t : s.t_first_moments) check_time(t, "t_first_moments");
  else
    clip_list(s.t_first_moments);
  if (j.contains("t_distributional")) check_time(s.t_distributional, "t_distributional");
  else s.t_distributional = std::min(s.t_distributional, numerics.T);
  if (j.contains("t_variance")) check_time(s.t_variance, "t_variance");
  else s.t_variance = std::min(s.t_variance, numerics.T);
  if (j.contains("t_clt")) check_time(s.t_clt, "t_clt");
  else s.t_clt = std::min(s.t_clt, numerics.T);
  if (!std::is_sorted(s.obs_times.begin(), s.obs_times.end()))
    fail("sim.obs_times", "must be sorted ascending");
  if (!j.contains("s0")) s.s0 = std::min(s.s0, numerics.T);
  if (s.s0 <= 0.0 || s.s0 > numerics.T) fail("sim.s0", "must lie in (0, numerics.T]");
  for (double th : s.thetas)
    if (th < 0.0) fail("sim.thetas", "must be >= 0");
  for (double gp : s.gf_points)
    if (gp < 0.0 || gp >= 1.0) fail("sim.gf_points", "must lie in [0, 1)");
  return s;
}

}  // namespace

ModelSpec model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config error: invalid JSON: ") + e.what());
  }
  require_keys(j, "(top level)", {"alpha", "offspring", "lifetime", "f", "numerics", "sim"});
  for (const char* k : {"alpha", "offspring", "lifetime", "f"})
    if (!j.contains(k)) fail("(top level)", std::string("missing key '") + k + "'");

  ModelSpec spec;
  spec.alpha = parse_alpha(j.at("alpha"));
  spec.offspring = parse_offspring(j.at("offspring"));
  spec.lifetime = parse_lifetime(j.at("lifetime"));
  spec.f = parse_f(j.at("f"));
  if (j.contains("numerics")) spec.numerics = parse_numerics(j.at("numerics"));
  if (j.contains("sim")) spec.sim = parse_sim(j.at("sim"), spec.numerics);
  return spec;
}

// ------------------------------------------------- canonical form, digest

namespace {

json table_json(const Table& t) { return json{{"xs", t.xs}, {"ys", t.ys}}; }

json param_json(const Param& p) {
  if (p.is_table) return table_json(p.tab);
  return json(p.c);
}

}  // namespace

std::string model_to_canonical_json(const ModelSpec& spec) {
  json j;
  switch (spec.alpha.kind) {
    case RateFunction::Kind::constant:
      j["alpha"] = {{"kind", "constant"}, {"value", spec.alpha.c}};
      break;
    case RateFunction::Kind::table: {
      j["alpha"] = table_json(spec.alpha.tab);
      j["alpha"]["kind"] = "table";
      break;
    }
  }
  switch (spec.offspring.kind) {
    case OffspringLaw::Kind::deterministic:
      j["offspring"] = {{"kind", "deterministic"}, {"n", param_json(spec.offspring.n)}};
      break;
    case OffspringLaw::Kind::poisson:
      j["offspring"] = {{"kind", "poisson"}, {"mean", param_json(spec.offspring.mean)}};
      break;
    case OffspringLaw::Kind::binary:
      j["offspring"] = {{"kind", "binary"},
                        {"p0", param_json(spec.offspring.p0)},
                        {"p2", param_json(spec.offspring.p2)}};
      break;
    case OffspringLaw::Kind::geometric:
      j["offspring"] = {{"kind", "geometric"}, {"mean", param_json(spec.offspring.mean)}};
      break;
  }
  switch (spec.lifetime.kind) {
    case LifetimeDist::Kind::exponential:
      j["lifetime"] = {{"kind", "exponential"}, {"rate", spec.lifetime.a}};
      break;
    case LifetimeDist::Kind::gamma:
      j["lifetime"] = {{"kind", "gamma"}, {"shape", spec.lifetime.a}, {"scale", spec.lifetime.b}};
      break;
    case LifetimeDist::Kind::uniform:
      j["lifetime"] = {{"kind", "uniform"}, {"lo", spec.lifetime.a}, {"hi", spec.lifetime.b}};
      break;
    case LifetimeDist::Kind::weibull:
      j["lifetime"] = {{"kind", "weibull"}, {"shape", spec.lifetime.a}, {"scale", spec.lifetime.b}};
      break;
  }
  switch (spec.f.kind) {
    case TestFunction::Kind::one: j["f"] = {{"kind", "one"}}; break;
    case TestFunction::Kind::indicator:
      j["f"] = {{"kind", "indicator"}, {"x", spec.f.x0}};
      break;
    case TestFunction::Kind::expdecay:
      j["f"] = {{"kind", "expdecay"}, {"rate", spec.f.rate}};
      break;
    case TestFunction::Kind::table: {
      j["f"] = table_json(spec.f.tab);
      j["f"]["kind"] = "table";
      break;
    }
  }
  j["numerics"] = {{"h", spec.numerics.h},
                   {"T", spec.numerics.T},
                   {"tail_q", spec.numerics.tail_q},
                   {"tol", spec.numerics.tol},
                   {"max_iter", spec.numerics.max_iter}};
  j["sim"] = {{"trajectories", spec.sim.trajectories},
              {"seed", spec.sim.seed},
              {"obs_times", spec.sim.obs_times},
              {"max_pop", spec.sim.max_pop},
              {"threads", spec.sim.threads},
              {"t_first_moments", spec.sim.t_first_moments},
              {"t_distributional", spec.sim.t_distributional},
              {"t_variance", spec.sim.t_variance},
              {"t_clt", spec.sim.t_clt},
              {"s0", spec.sim.s0},
              {"clt_trajectories", spec.sim.clt_trajectories},
              {"y_draws", spec.sim.y_draws},
              {"thetas", spec.sim.thetas},
              {"gf_points", spec.sim.gf_points}};
  return j.dump();
}

std::string model_digest(const ModelSpec& spec) {
  const std::string s = model_to_canonical_json(spec);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  std::ostringstream out;
  out << std::hex;
  for (int i = 15; i >= 0; --i) out << ((h >> (4 * i)) & 0xf);
  return out.str();
}

// ----------------------------------------------------------- validation

double support_end(const ModelSpec& spec) {
  return spec.lifetime.quantile(1.0 - spec.numerics.tail_q);
}

double mean_total_offspring(const ModelSpec& spec) {
  const double xe = support_end(spec);
  std::vector<double> breaks = spec.alpha.breakpoints();
  for (double b : spec.offspring.breakpoints()) breaks.push_back(b);
  for (double b : spec.lifetime.breakpoints()) breaks.push_back(b);
  auto at_step = [&](double step) {
    const auto xs = quad::nodes(0.0, xe, step, breaks);
    std::vector<double> w(xs.size()), outer(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      w[i] = spec.alpha.interior(xs[i]) * spec.offspring.mean_count(xs[i]);
    const auto K = quad::cumtrapz(xs, w);
    for (std::size_t i = 0; i < xs.size(); ++i)
      outer[i] = K[i] * spec.lifetime.pdf(xs[i]);
    return quad::trapz(xs, outer);
  };
  // fixed base step: the result is a property of the model, not of the grid
  return quad::richardson(at_step, 0.002);
}

ValidationReport validate(const ModelSpec& spec) {
  ValidationReport rep;
  const double xe = support_end(spec);

  std::vector<double> grid;
  for (int i = 0; i <= 256; ++i) grid.push_back(xe * i / 256.0);
  for (double b : spec.alpha.breakpoints()) grid.push_back(b);
  for (double b : spec.offspring.breakpoints()) grid.push_back(b);
  std::sort(grid.begin(), grid.end());

  auto push = [&](const std::string& name, double value, double threshold, bool pass) {
    rep.checks.push_back({name, value, threshold, pass});
  };

  const double inf = std::numeric_limits<double>::infinity();

  double alpha_min = inf, alpha_sup = spec.alpha.sup();
  double mean_sup = 0.0, second_sup = 0.0, nlogn_sup = 0.0, beta = 0.0;
  double pgf_dev = 0.0, pmf_dev = 0.0;
  for (double x : grid) {
    alpha_min = std::min(alpha_min, spec.alpha.interior(x));
    const double m1 = spec.offspring.mean_count(x);
    mean_sup = std::max(mean_sup, m1);
    second_sup = std::max(second_sup, spec.offspring.second_factorial(x));
    nlogn_sup = std::max(nlogn_sup, spec.offspring.nlogn_moment(x));
    beta = std::max(beta, spec.alpha.interior(x) * m1);
    if (spec.offspring.kind == OffspringLaw::Kind::binary)
      pgf_dev = std::max(pgf_dev, std::fabs(spec.offspring.p0.at(x) +
                                            spec.offspring.p2.at(x) - 1.0));
  }
  for (double x : {grid.front(), grid[grid.size() / 2], grid.back()}) {
    double mass = 0.0;
    for (long k = 0; k < 100000; ++k) {
      const double p = spec.offspring.pmf(x, k);
      mass += p;
      if (mass > 1.0 - 1e-14 || (k > spec.offspring.mean_count(x) + 50 && p < 1e-15)) break;
    }
    pmf_dev = std::max(pmf_dev, std::fabs(mass - 1.0));
  }

  push("intensity_nonnegative", alpha_min, 0.0, alpha_min >= 0.0);
  push("intensity_bounded", alpha_sup, inf, std::isfinite(alpha_sup));
  push("offspring_mean_bounded", mean_sup, inf, std::isfinite(mean_sup));
  push("offspring_second_factorial_bounded", second_sup, inf, std::isfinite(second_sup));
  push("offspring_nlogn_bounded", nlogn_sup, inf, std::isfinite(nlogn_sup));
  push("pgf_normalized", pgf_dev, 1e-12, pgf_dev <= 1e-12);
  push("pmf_mass", pmf_dev, 1e-10, pmf_dev <= 1e-10);

  const double g0 = spec.lifetime.cdf(0.0);
  push("lifetime_no_mass_at_zero", g0, 0.0, g0 == 0.0);
  const double pdf0 = spec.lifetime.pdf(0.0);
  push("lifetime_density_bounded_at_zero", pdf0, inf, std::isfinite(pdf0));

  double rt_dev = 0.0;
  for (int i = 1; i < 64; ++i) {
    const double x = spec.lifetime.quantile(i / 64.0 * (1.0 - spec.numerics.tail_q));
    rt_dev = std::max(rt_dev, std::fabs(spec.lifetime.quantile(spec.lifetime.cdf(x)) - x));
  }
  push("quantile_roundtrip", rt_dev, 1e-9, rt_dev <= 1e-9);

  rep.m = mean_total_offspring(spec);
  rep.beta = beta;
  push("intensity_offspring_product_bounded", beta, inf, std::isfinite(beta));
  push("supercritical_mean_offspring", rep.m, 1.0, rep.m > 1.0);

  rep.pass = true;
  for (const auto& c : rep.checks) rep.pass = rep.pass && c.pass;
  return rep;
}

}  // namespace agebranch
