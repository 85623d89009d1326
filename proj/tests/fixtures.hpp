#pragma once

#include <cmath>
#include <string>

#include "agebranch/model.hpp"

// Shared fixtures for the test suite. Two closed-form models anchor most
// checks: both have constant birth intensity 2 and unit-rate exponential
// lifespans, so the mean grows like e^t and the growth-rate equation has
// root exactly 1. The deterministic single-child variant ("base") has
// fluctuation variance 3(e^{2t} - e^t) and escape probability 1/2; the
// Poisson(1) variant has variance 5(e^{2t} - e^t) and escape probability
// 0.394817... (survival), i.e. smallest fixed point 0.605182...
namespace fixtures {

inline agebranch::ModelSpec make(const std::string& body) {
  return agebranch::model_from_json(body);
}

inline std::string numerics(double h, double T) {
  return "\"numerics\": {\"h\": " + std::to_string(h) +
         ", \"T\": " + std::to_string(T) + "}";
}

inline agebranch::ModelSpec expbase(double h = 0.01, double T = 12.0) {
  return make(R"({
    "alpha": {"kind": "constant", "value": 2.0},
    "offspring": {"kind": "deterministic", "n": 1},
    "lifetime": {"kind": "exponential", "rate": 1.0},
    "f": {"kind": "one"},
    )" + numerics(h, T) + "}");
}

inline agebranch::ModelSpec exppois(double h = 0.01, double T = 12.0) {
  return make(R"({
    "alpha": {"kind": "constant", "value": 2.0},
    "offspring": {"kind": "poisson", "mean": 1.0},
    "lifetime": {"kind": "exponential", "rate": 1.0},
    "f": {"kind": "one"},
    )" + numerics(h, T) + "}");
}

inline agebranch::ModelSpec expbase_indicator(double h = 0.01,
                                              double T = 12.0) {
  return make(R"({
    "alpha": {"kind": "constant", "value": 2.0},
    "offspring": {"kind": "deterministic", "n": 1},
    "lifetime": {"kind": "exponential", "rate": 1.0},
    "f": {"kind": "indicator", "x": 1.0},
    )" + numerics(h, T) + "}");
}

inline agebranch::ModelSpec subcritical(double h = 0.01, double T = 8.0) {
  return make(R"({
    "alpha": {"kind": "constant", "value": 0.4},
    "offspring": {"kind": "geometric", "mean": 1.0},
    "lifetime": {"kind": "exponential", "rate": 1.0},
    "f": {"kind": "one"},
    )" + numerics(h, T) + "}");
}

inline agebranch::ModelSpec zero_alpha(double h = 0.01, double T = 4.0) {
  return make(R"({
    "alpha": {"kind": "constant", "value": 0.0},
    "offspring": {"kind": "deterministic", "n": 1},
    "lifetime": {"kind": "exponential", "rate": 1.0},
    "f": {"kind": "one"},
    )" + numerics(h, T) + "}");
}

// Mixed-feature model: tabulated intensity, age-dependent Poisson mean,
// gamma lifespans, exponentially decaying test function. No closed form;
// used for invariance and plumbing checks.
inline agebranch::ModelSpec mixed(double h = 0.02, double T = 10.0) {
  return make(R"({
    "alpha": {"kind": "table", "xs": [0.0, 0.5, 1.0, 2.0, 4.0],
              "ys": [1.0, 2.5, 3.0, 2.0, 1.5]},
    "offspring": {"kind": "poisson",
                  "mean": {"xs": [0.0, 1.0, 3.0], "ys": [0.5, 1.5, 1.0]}},
    "lifetime": {"kind": "gamma", "shape": 2.0, "scale": 0.8},
    "f": {"kind": "expdecay", "rate": 0.5},
    )" + numerics(h, T) + "}");
}

// Closed forms for the base model.
inline double base_mean(double t) { return std::exp(t); }
inline double base_variance(double t) {
  return 3.0 * (std::exp(2.0 * t) - std::exp(t));
}
inline double pois_variance(double t) {
  return 5.0 * (std::exp(2.0 * t) - std::exp(t));
}
inline double base_age_cdf(double x) { return 1.0 - std::exp(-x); }
inline double base_profile(double x) { return 2.0 * (1.0 - std::exp(-x)); }
inline double base_extinct_curve(double t) {
  const double e = std::exp(t);
  return (e - 1.0) / (2.0 * e - 1.0);
}
inline double base_phi(double theta) {
  return 0.5 + 0.25 / (0.5 + theta);
}

// Reference values computed once with an independent high-resolution
// implementation and frozen. Tests compare against these literals.
namespace frozen {
constexpr double kPoisQ = 0.6051825771412829;
constexpr double kBaseQ12 = 0.4999984639421927;
constexpr double kBasePsi1 = 0.2656178780015781;
constexpr double kBaseLaplaceY1 = 0.5298589956586934;
constexpr double kBaseWindowVar2 = 16.71025481011131;
constexpr double kPoisWindowVar2 = 29.48836700797261;
constexpr double kBaseGamma1 = 14.012322811414817;
constexpr double kBaseGamma4 = 8779.079511025753;
constexpr double kBaseMarchL1 = 0.45835210411507005;
constexpr double kBaseMarchL2 = 0.48544496152133976;
constexpr double kPoisTotalGfGapHalf = 0.0596162928648285;
constexpr double kBaseAgeInd01 = 0.6321205588285577;
constexpr double kBaseProfile07 = 1.006829392417181;
}  // namespace frozen

}  // namespace fixtures
