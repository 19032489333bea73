#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "dksd/errors.hpp"
#include "dksd/linalg.hpp"
#include "dksd/rng.hpp"
#include "dksd/sphere.hpp"

namespace dksd {

// Rejection-sampler diagnostics.
struct sampler_report {
  std::int64_t n_requested = 0;
  std::int64_t n_accepted = 0;
  std::int64_t n_proposed = 0;
  double acceptance_rate = 1.0;
};

struct sample_result {
  std::vector<unit_vector> samples;
  sampler_report report;
};

inline constexpr std::int64_t rejection_stall_limit = 1'000'000;

namespace detail {

inline std::vector<double> standard_normals(std::size_t d, splitmix64& rng) {
  std::vector<double> z(d);
  for (double& v : z) v = rng.next_normal();
  return z;
}

// Reflection taking e_1 to mu (and mu to e_1), applied in place.
inline void reflect_e1_to(const unit_vector& mu, std::vector<double>& y) {
  const std::size_t d = mu.dim();
  std::vector<double> u(d);
  u[0] = 1.0 - mu[0];
  for (std::size_t i = 1; i < d; ++i) u[i] = -mu[i];
  const double uu = dot(u, u);
  if (uu < 1e-30) return;  // mu is e_1 already
  const double f = 2.0 * dot(u, y) / uu;
  for (std::size_t i = 0; i < d; ++i) y[i] -= f * u[i];
}

}  // namespace detail

// Normalized standard Gaussian draws: exact uniform law on S^{d-1}.
inline std::vector<unit_vector> sample_uniform_sphere(std::size_t d,
                                                      std::size_t n,
                                                      splitmix64& rng) {
  if (d < 2) throw validation_error("sample_uniform_sphere: d must be >= 2");
  if (n < 1) throw validation_error("sample_uniform_sphere: n must be >= 1");
  std::vector<unit_vector> out;
  out.reserve(n);
  while (out.size() < n) {
    std::vector<double> z = detail::standard_normals(d, rng);
    const double r = norm2(z);
    if (r == 0.0) continue;
    for (double& v : z) v /= r;
    out.push_back(unit_vector{std::move(z)});
  }
  return out;
}

// Exact vMF(mu, kappa) draws by Wood's rejection scheme: the cosine w of
// the angle to the pole is proposed through a Beta((d-1)/2, (d-1)/2)
// transform and accepted on the log criterion, combined with a uniform
// tangent direction and reflected from the e_1 frame onto mu.
inline sample_result sample_vmf(const unit_vector& mu, double kappa,
                                std::size_t n, splitmix64& rng) {
  const std::size_t d = mu.dim();
  if (d < 2) throw validation_error("sample_vmf: d must be >= 2");
  if (!(kappa > 0.0)) throw validation_error("sample_vmf: kappa must be > 0");
  if (std::abs(norm2(mu.coords) - 1.0) > 1e-12)
    throw validation_error("sample_vmf: mu must be a unit vector");
  if (n < 1) throw validation_error("sample_vmf: n must be >= 1");

  const double dm1 = static_cast<double>(d - 1);
  const double b = (-2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1)) / dm1;
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);

  sample_result out;
  out.report.n_requested = static_cast<std::int64_t>(n);
  out.samples.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    double w = 0.0;
    std::int64_t consecutive_rejects = 0;
    while (true) {
      ++out.report.n_proposed;
      // Beta((d-1)/2, (d-1)/2) via paired chi-square sums; 2 * (d-1)/2 is
      // an integer, so Gamma((d-1)/2) is half a chi-square with d-1 dof.
      double q1 = 0.0, q2 = 0.0;
      for (std::size_t k = 0; k + 1 < d; ++k) {
        const double z1 = rng.next_normal();
        const double z2 = rng.next_normal();
        q1 += z1 * z1;
        q2 += z2 * z2;
      }
      const double z = q1 / (q1 + q2);
      w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
      const double u = rng.next_uniform();
      if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
      if (++consecutive_rejects >= rejection_stall_limit)
        throw rejection_stall("sample_vmf: rejection sampler stalled");
    }
    ++out.report.n_accepted;

    // Uniform tangent direction on S^{d-2}; for d=2 that is a fair sign.
    std::vector<double> y(d);
    y[0] = w;
    const double t = std::sqrt(std::max(0.0, 1.0 - w * w));
    if (d == 2) {
      y[1] = (rng.next_uniform() < 0.5 ? -t : t);
    } else {
      while (true) {
        std::vector<double> v = detail::standard_normals(d - 1, rng);
        const double r = norm2(v);
        if (r == 0.0) continue;
        for (std::size_t k = 0; k + 1 < d; ++k) y[k + 1] = t * v[k] / r;
        break;
      }
    }
    detail::reflect_e1_to(mu, y);
    const double r = norm2(y);
    for (double& v : y) v /= r;
    out.samples.push_back(unit_vector{std::move(y)});
  }
  out.report.acceptance_rate =
      static_cast<double>(out.report.n_accepted) /
      static_cast<double>(out.report.n_proposed);
  return out;
}

// Exact draws from the quadratic Fisher-Bingham density exp(x'Ax) by
// rejection with angular central Gaussian proposals. The exponent is
// shifted so its largest eigenvalue is zero (a constant on the sphere),
// and the ACG spread solves the tuning equation sum_i 1/(b0 + 2 l_i) = 1
// over the shifted spectrum.
inline sample_result sample_fisher_bingham_quadratic(const matd& a,
                                                     std::size_t n,
                                                     splitmix64& rng) {
  const std::size_t d = a.rows();
  if (d < 2 || a.cols() != d)
    throw validation_error("sample_fisher_bingham_quadratic: A must be square, d >= 2");
  if (a.max_abs_asymmetry() > 1e-12)
    throw validation_error("sample_fisher_bingham_quadratic: A must be symmetric");
  if (n < 1)
    throw validation_error("sample_fisher_bingham_quadratic: n must be >= 1");

  const std::vector<double> eig = symmetric_eigenvalues(a);
  const double lmax = eig.front();

  // B = lmax I - A is positive semidefinite with smallest eigenvalue 0;
  // the target density is proportional to exp(-x'Bx).
  matd bm(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      bm(i, j) = (i == j ? lmax : 0.0) - a(i, j);
  std::vector<double> lam(d);
  double lam_max = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    lam[i] = lmax - eig[i];
    lam_max = std::max(lam_max, std::abs(lam[i]));
  }

  // Monotone-decreasing tuning function; bisect on the documented bracket.
  const auto tune = [&](double b0) {
    double s = 0.0;
    for (double l : lam) s += 1.0 / (b0 + 2.0 * l);
    return s - 1.0;
  };
  double lo = 1e-10;
  double hi = 2.0 * static_cast<double>(d) * (1.0 + lam_max);
  if (!(tune(lo) > 0.0) || !(tune(hi) < 0.0))
    throw tuning_failure("sample_fisher_bingham_quadratic: no bracketed root");
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (tune(mid) > 0.0 ? lo : hi) = mid;
  }
  const double b0 = 0.5 * (lo + hi);

  matd omega = matd::identity(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) omega(i, j) += (2.0 / b0) * bm(i, j);
  const matd chol = cholesky_factor(omega);
  const double dd = static_cast<double>(d);
  const double log_m = -0.5 * (dd - b0) + 0.5 * dd * std::log(dd / b0);

  sample_result out;
  out.report.n_requested = static_cast<std::int64_t>(n);
  out.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t consecutive_rejects = 0;
    while (true) {
      ++out.report.n_proposed;
      // y ~ N(0, Omega^{-1}) from L^T y = z; normalizing gives the ACG draw.
      const std::vector<double> z = detail::standard_normals(d, rng);
      std::vector<double> y = solve_upper_from_lower(chol, z);
      const double r = norm2(y);
      if (r == 0.0) continue;
      for (double& v : y) v /= r;
      const double t = quadratic_form(bm, y);
      const double log_ratio =
          -t + 0.5 * dd * std::log1p(2.0 * t / b0) - log_m;
      if (std::log(rng.next_uniform()) < log_ratio) {
        ++out.report.n_accepted;
        out.samples.push_back(unit_vector{std::move(y)});
        break;
      }
      if (++consecutive_rejects >= rejection_stall_limit)
        throw rejection_stall("sample_fisher_bingham_quadratic: sampler stalled");
    }
  }
  out.report.acceptance_rate =
      static_cast<double>(out.report.n_accepted) /
      static_cast<double>(out.report.n_proposed);
  return out;
}

}  // namespace dksd
