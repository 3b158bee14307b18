// Analytic fully developed velocity profile of a rectangular duct
// (Fourier-series solution), normalized to a prescribed volumetric flux.
// Serves as the independent oracle for the flow solver.
#pragma once

#include <cmath>
#include <stdexcept>

namespace micromix {

namespace detail {
// cosh(a)/cosh(b) for 0 <= a <= b without overflow.
inline double cosh_ratio(double a, double b) {
  return std::exp(a - b) * (1.0 + std::exp(-2.0 * a)) /
         (1.0 + std::exp(-2.0 * b));
}
}  // namespace detail

// Axial velocity (m/s) at in-plane position (x, z) of a duct of width W and
// height H carrying volumetric flux Q (SI units). The series is normalized
// so that its exact integral over the cross-section equals Q, independent
// of truncation.
inline double analytic_duct_velocity(double width_m, double height_m,
                                     double q_m3_s, double x_m, double z_m,
                                     int n_terms = 250) {
  if (x_m < -1e-12 || x_m > width_m + 1e-12 || z_m < -1e-12 ||
      z_m > height_m + 1e-12)
    throw std::invalid_argument("analytic_duct_velocity: point outside duct");
  if (n_terms < 1)
    throw std::invalid_argument("analytic_duct_velocity: n_terms must be >= 1");
  const double pi = std::acos(-1.0);
  const double W = width_m, H = height_m;
  const double xm = std::abs(x_m - 0.5 * W);
  double s = 0.0;       // series value at (x, z)
  double s_int = 0.0;   // exact integral of the series over the section
  for (int t = 0; t < n_terms; ++t) {
    const int n = 2 * t + 1;
    const double npH = n * pi / H;
    const double inv_n3 = 1.0 / (static_cast<double>(n) * n * n);
    const double ratio = detail::cosh_ratio(npH * xm, npH * 0.5 * W);
    s += inv_n3 * (1.0 - ratio) * std::sin(npH * z_m);
    s_int += inv_n3 * (2.0 / npH) *
             (W - (2.0 / npH) * std::tanh(npH * 0.5 * W));
  }
  return q_m3_s * s / s_int;
}

}  // namespace micromix
