// Error function helpers. erf/erfc come from libm; the inverses are built on
// a rational inverse-normal approximation refined against std::erfc.

#pragma once

namespace gaussrt {

// erf(b) - erf(a), computed through erfc when both arguments share a sign so
// the difference of two values close to +-1 does not cancel.
double erf_diff(double a, double b);

// Inverse of erf on (-1, 1); +-inf at the endpoints.
double erfinv(double y);

// Inverse of erfc on (0, 2); +-inf at the endpoints.
double erfcinv(double y);

// Inverse standard normal CDF.
double normal_quantile(double p);

}  // namespace gaussrt
