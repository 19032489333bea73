#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dksd/errors.hpp"
#include "dksd/linalg.hpp"

namespace dksd {

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double two_pi = 2.0 * pi;

// Half-width of the clamp window that keeps polar angles away from the
// chart singularities sin(theta^i) = 0. The pole set has measure zero, so
// clamping perturbs data by at most eps_pole radians while keeping log J
// and every score finite.
inline constexpr double eps_pole = 1e-8;

// Point on the unit hypersphere S^{d-1} in Cartesian coordinates.
// Invariant: d >= 2 and | ||x|| - 1 | <= 1e-12.
struct unit_vector {
  std::vector<double> coords;

  std::size_t dim() const { return coords.size(); }
  double operator[](std::size_t i) const { return coords[i]; }
};

// Spherical angles theta^1..theta^{d-1}: the first d-2 in [0, pi), the
// last in [0, 2*pi).
struct spherical_coord {
  std::vector<double> angles;

  std::size_t dim() const { return angles.size() + 1; }
};

// Chart derivatives at a point: column i of `cols` is dx/dtheta^i, so the
// matrix is d x (d-1). Columns are orthogonal to the base point and column
// i has norm prod_{j<i} |sin theta^j|.
struct tangent_basis {
  matd cols;
};

// Validating constructor for externally supplied coordinates.
inline unit_vector make_unit_vector(std::vector<double> coords) {
  if (coords.size() < 2)
    throw validation_error("unit_vector: dimension must be at least 2");
  double n = norm2(coords);
  if (std::abs(n - 1.0) > 1e-12)
    throw validation_error("unit_vector: norm deviates from 1 by " +
                           std::to_string(std::abs(n - 1.0)));
  return unit_vector{std::move(coords)};
}

// Normalizes an arbitrary nonzero vector onto the sphere.
inline unit_vector normalized(std::vector<double> v) {
  if (v.size() < 2)
    throw validation_error("unit_vector: dimension must be at least 2");
  const double n = norm2(v);
  if (n == 0.0) throw validation_error("unit_vector: zero vector");
  for (double& x : v) x /= n;
  return unit_vector{std::move(v)};
}

inline double dot(const unit_vector& a, const unit_vector& b) {
  if (a.dim() != b.dim())
    throw dimension_error("dot: mismatched dimensions");
  return dot(a.coords, b.coords);
}

// x_k = cos(theta^k) * prod_{j<k} sin(theta^j), last component the full
// sine product. Accepts any real angles so finite-difference probes can
// step outside the canonical ranges.
inline unit_vector to_cartesian(const spherical_coord& t) {
  const std::size_t d = t.dim();
  if (d < 2) throw dimension_error("to_cartesian: need at least one angle");
  std::vector<double> x(d);
  double sines = 1.0;
  for (std::size_t k = 0; k + 1 < d; ++k) {
    x[k] = std::cos(t.angles[k]) * sines;
    sines *= std::sin(t.angles[k]);
  }
  x[d - 1] = sines;
  return unit_vector{std::move(x)};
}

// Inverse chart: theta^i = atan2(||x_{i+1:}||, x_i) for the polar angles,
// then atan2 on the trailing pair wrapped to [0, 2*pi). atan2 keeps every
// branch stable; points on the singular set come back with theta^i in
// {0, pi} and must be clamped before any score evaluation.
inline spherical_coord to_spherical(const unit_vector& x) {
  const std::size_t d = x.dim();
  if (d < 2) throw dimension_error("to_spherical: need dimension >= 2");
  std::vector<double> tail_sq(d + 1, 0.0);
  for (std::size_t i = d; i-- > 0;)
    tail_sq[i] = tail_sq[i + 1] + x[i] * x[i];

  std::vector<double> a(d - 1);
  for (std::size_t i = 0; i + 2 < d; ++i)
    a[i] = std::atan2(std::sqrt(tail_sq[i + 1]), x[i]);
  double last = std::atan2(x[d - 1], x[d - 2]);
  if (last < 0.0) last += two_pi;
  if (last >= two_pi) last = 0.0;
  a[d - 2] = last;
  return spherical_coord{std::move(a)};
}

// Clamps the polar angles into [eps_pole, pi - eps_pole]. The azimuthal
// angle needs no clamping: the chart is periodic there.
inline spherical_coord clamp_poles(spherical_coord t) {
  for (std::size_t i = 0; i + 1 < t.angles.size(); ++i) {
    if (t.angles[i] < eps_pole) t.angles[i] = eps_pole;
    if (t.angles[i] > pi - eps_pole) t.angles[i] = pi - eps_pole;
  }
  return t;
}

inline spherical_coord to_spherical_clamped(const unit_vector& x) {
  return clamp_poles(to_spherical(x));
}

// Volume element J = prod_i sin^{d-1-i}(theta^i); identically 1 when d=2.
inline double jacobian(const spherical_coord& t) {
  const std::size_t d = t.dim();
  double j = 1.0;
  for (std::size_t i = 0; i + 2 < d; ++i)
    j *= std::pow(std::sin(t.angles[i]), static_cast<double>(d - 2 - i));
  return j;
}

// d/dtheta^i log J = (d-1-i) cot(theta^i) for the polar angles, 0 for the
// azimuthal one (1-based exponent; written 0-based below).
inline std::vector<double> grad_log_jacobian(const spherical_coord& t) {
  const std::size_t d = t.dim();
  std::vector<double> g(d - 1, 0.0);
  for (std::size_t i = 0; i + 2 < d; ++i) {
    const double s = std::sin(t.angles[i]);
    if (std::abs(s) < 0.5 * eps_pole)
      throw pole_error("grad_log_jacobian: angle " + std::to_string(i + 1) +
                       " sits on the chart singularity");
    g[i] = static_cast<double>(d - 2 - i) * std::cos(t.angles[i]) / s;
  }
  return g;
}

// Columnwise derivative of the chart map; see tangent_basis.
inline tangent_basis tangent_basis_at(const spherical_coord& t) {
  const std::size_t d = t.dim();
  matd cols(d, d - 1);
  for (std::size_t i = 0; i + 1 < d; ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < i; ++j) prod *= std::sin(t.angles[j]);
    cols(i, i) = -std::sin(t.angles[i]) * prod;
    prod *= std::cos(t.angles[i]);
    for (std::size_t k = i + 1; k + 1 < d; ++k) {
      cols(k, i) = std::cos(t.angles[k]) * prod;
      prod *= std::sin(t.angles[k]);
    }
    cols(d - 1, i) = prod;
  }
  return tangent_basis{std::move(cols)};
}

// Surface area of S^{d-1}: 2 pi^{d/2} / Gamma(d/2).
inline double surface_area(std::size_t d) {
  const double hd = 0.5 * static_cast<double>(d);
  return 2.0 * std::exp(hd * std::log(pi) - std::lgamma(hd));
}

}  // namespace dksd
