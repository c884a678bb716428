#include "gaussrt/special.h"

#include <cmath>
#include <limits>
#include <numbers>

namespace gaussrt {

double erf_diff(double a, double b) {
  if (a == b) return 0;
  if (a >= 0 && b >= 0) return std::erfc(a) - std::erfc(b);
  if (a <= 0 && b <= 0) return std::erfc(-b) - std::erfc(-a);
  return std::erf(b) - std::erf(a);
}

// Rational approximation of the inverse normal CDF (relative error
// 1.15e-9), followed by Halley steps.
static double inverse_normal_rational(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
      -2.759285104469687e+02, 1.383577518672690e+02, -3.066479806614716e+01,
      2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
      -1.556989798598866e+02, 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
      -2.400758277161838e+00, -2.549732539343734e+00, 4.374664141464968e+00,
      2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
      2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    auto q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
               c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - p_low) {
    auto q = std::sqrt(-2 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
               c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  auto q = p - 0.5;
  auto r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

// Solves erfc(x) = y for y in (0, 2). Upper tail is refined in terms of
// erfc directly so tiny y keep full relative precision.
double erfcinv(double y) {
  if (y <= 0) return std::numeric_limits<double>::infinity();
  if (y >= 2) return -std::numeric_limits<double>::infinity();
  if (y > 1) return -erfcinv(2 - y);
  // erfc(x) = 2 Phi(-x sqrt2)
  auto x = -inverse_normal_rational(y / 2) / std::numbers::sqrt2;
  for (int i = 0; i < 2; i++) {
    auto f      = std::erfc(x) - y;
    auto dfdx   = -2 / std::sqrt(std::numbers::pi) * std::exp(-x * x);
    if (dfdx == 0) break;
    auto newton = f / dfdx;
    // Halley correction: f'' / f' = -2x
    x -= newton / (1 + x * newton);
  }
  return x;
}

double erfinv(double y) {
  if (y <= -1) return -std::numeric_limits<double>::infinity();
  if (y >= 1) return std::numeric_limits<double>::infinity();
  if (y < 0) return -erfinv(-y);
  if (y > 0.5) return erfcinv(1 - y);
  auto x = -inverse_normal_rational((1 - y) / 2) / std::numbers::sqrt2;
  for (int i = 0; i < 2; i++) {
    auto f      = std::erf(x) - y;
    auto dfdx   = 2 / std::sqrt(std::numbers::pi) * std::exp(-x * x);
    auto newton = f / dfdx;
    x -= newton / (1 + x * newton);
  }
  return x;
}

double normal_quantile(double p) {
  return -std::numbers::sqrt2 * erfcinv(2 * p);
}

}  // namespace gaussrt
