#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "dksd/errors.hpp"
#include "dksd/gof.hpp"
#include "dksd/rng.hpp"
#include "dksd/sphere.hpp"
#include "dksd/stein.hpp"

namespace dksd {

struct uniformity_outcome {
  double statistic = 0.0;
  double critical_value = 0.0;
  bool reject = false;
};

// Rayleigh test of circular uniformity. R_n is asymptotically chi^2 with
// 2 degrees of freedom, whose upper-alpha quantile is -2 ln(alpha) in
// closed form.
inline uniformity_outcome rayleigh_test(const std::vector<double>& angles,
                                        double alpha) {
  if (angles.size() < 2)
    throw validation_error("rayleigh_test: need at least 2 angles");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw validation_error("rayleigh_test: alpha must lie in (0,1)");
  double c = 0.0, s = 0.0;
  for (double t : angles) {
    c += std::cos(t);
    s += std::sin(t);
  }
  uniformity_outcome out;
  out.statistic = 2.0 / static_cast<double>(angles.size()) * (c * c + s * s);
  out.critical_value = -2.0 * std::log(alpha);
  out.reject = out.statistic > out.critical_value;
  return out;
}

// Kuiper test of circular uniformity against the fixed-origin cdf
// F(theta) = theta / 2 pi. Critical values for the sqrt(n)-scaled statistic.
inline uniformity_outcome kuiper_test(std::vector<double> angles,
                                      double alpha) {
  const std::size_t n = angles.size();
  if (n < 2) throw validation_error("kuiper_test: need at least 2 angles");

  double critical = 0.0;
  if (std::abs(alpha - 0.10) < 1e-12)
    critical = 1.620;
  else if (std::abs(alpha - 0.05) < 1e-12)
    critical = 1.747;
  else if (std::abs(alpha - 0.01) < 1e-12)
    critical = 2.001;
  else
    throw unsupported_alpha(
        "kuiper_test: alpha must be one of 0.10, 0.05, 0.01");

  std::sort(angles.begin(), angles.end());
  const double rn = std::sqrt(static_cast<double>(n));
  double dplus = -std::numeric_limits<double>::infinity();
  double dminus = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = angles[i] / two_pi;
    dplus = std::max(dplus, static_cast<double>(i + 1) / n - u);
    dminus = std::max(dminus, u - static_cast<double>(i) / n);
  }

  uniformity_outcome out;
  out.statistic = rn * dplus + rn * dminus;
  out.critical_value = critical;
  out.reject = out.statistic > out.critical_value;
  return out;
}

// Unbiased MMD^2 with the vMF kernel.
inline double mmd_u_statistic(const std::vector<unit_vector>& x,
                              const std::vector<unit_vector>& y,
                              double kappa) {
  const std::size_t n = x.size();
  const std::size_t m = y.size();
  if (n < 2 || m < 2)
    throw validation_error("mmd_u_statistic: need at least 2 per sample");
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) sxx += kernel_eval(kappa, x[i], x[j]);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) syy += kernel_eval(kappa, y[i], y[j]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) sxy += kernel_eval(kappa, x[i], y[j]);
  return sxx / (static_cast<double>(n) * (n - 1)) +
         syy / (static_cast<double>(m) * (m - 1)) -
         2.0 * sxy / (static_cast<double>(n) * m);
}

namespace detail {

inline double mmd_u_from_pooled(const matd& k,
                                const std::vector<std::size_t>& labels,
                                std::size_t n, std::size_t m) {
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) sxx += k(labels[i], labels[j]);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) syy += k(labels[n + i], labels[n + j]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) sxy += k(labels[i], labels[n + j]);
  return sxx / (static_cast<double>(n) * (n - 1)) +
         syy / (static_cast<double>(m) * (m - 1)) -
         2.0 * sxy / (static_cast<double>(n) * m);
}

}  // namespace detail

struct mmd_outcome {
  double statistic = 0.0;
  double threshold = 0.0;
  bool reject = false;
  double kappa = 0.0;
};

// Two-sample MMD test calibrated by label permutation, which is exact under
// exchangeability and parameter-free.
inline mmd_outcome mmd_two_sample_test(const std::vector<unit_vector>& x,
                                       const std::vector<unit_vector>& y,
                                       double kappa, double alpha, int b,
                                       splitmix64& rng) {
  const std::size_t n = x.size();
  const std::size_t m = y.size();
  if (n < 10 || m < 10)
    throw validation_error("mmd_two_sample_test: need n, m >= 10");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw validation_error("mmd_two_sample_test: alpha must lie in (0,1)");
  if (b < 100)
    throw validation_error("mmd_two_sample_test: need at least 100 permutations");

  const std::size_t total = n + m;
  matd k(total, total);
  std::vector<const unit_vector*> pooled;
  pooled.reserve(total);
  for (const auto& v : x) pooled.push_back(&v);
  for (const auto& v : y) pooled.push_back(&v);
  for (std::size_t i = 0; i < total; ++i)
    for (std::size_t j = i; j < total; ++j) {
      const double kv = kernel_eval(kappa, *pooled[i], *pooled[j]);
      k(i, j) = kv;
      k(j, i) = kv;
    }

  std::vector<std::size_t> labels(total);
  std::iota(labels.begin(), labels.end(), std::size_t{0});
  mmd_outcome out;
  out.kappa = kappa;
  out.statistic = detail::mmd_u_from_pooled(k, labels, n, m);

  std::vector<double> draws(b);
  for (int t = 0; t < b; ++t) {
    std::vector<std::size_t> perm = detail::shuffled_indices(total, rng);
    draws[t] = detail::mmd_u_from_pooled(k, perm, n, m);
  }
  out.threshold = upper_quantile(draws, alpha);
  out.reject = out.statistic > out.threshold;
  return out;
}

// Kernel choice for the MMD baseline, mirroring the dKSD selection rule:
// maximize MMD_u^2 / (sigma_hat + lambda) on a held-out paired split. Uses
// the symmetric pair kernel h((x,y),(x',y')) so the sigma estimator from
// the dKSD path applies unchanged.
inline double select_kappa_mmd(const std::vector<unit_vector>& x,
                               const std::vector<unit_vector>& y,
                               const std::vector<double>& grid,
                               double split_fraction, double lambda,
                               splitmix64& rng) {
  if (grid.empty()) throw validation_error("select_kappa_mmd: grid is empty");
  if (!(split_fraction > 0.0 && split_fraction < 1.0))
    throw validation_error("select_kappa_mmd: split fraction must lie in (0,1)");
  if (!(lambda > 0.0))
    throw validation_error("select_kappa_mmd: lambda must be > 0");
  std::size_t c = static_cast<std::size_t>(std::floor(
      split_fraction * static_cast<double>(std::min(x.size(), y.size()))));
  c = std::max<std::size_t>(c, 10);
  if (c > std::min(x.size(), y.size()))
    throw validation_error("select_kappa_mmd: not enough samples to split");

  const std::vector<std::size_t> ix = detail::shuffled_indices(x.size(), rng);
  const std::vector<std::size_t> iy = detail::shuffled_indices(y.size(), rng);

  std::vector<double> kappas = grid;
  std::sort(kappas.begin(), kappas.end());
  kappas.erase(std::unique(kappas.begin(), kappas.end()), kappas.end());

  double best_kappa = kappas.front();
  double best = -std::numeric_limits<double>::infinity();
  for (double kappa : kappas) {
    stein_gram_matrix h;
    h.n = c;
    h.values.assign(c * c, 0.0);
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = i; j < c; ++j) {
        const unit_vector& xi = x[ix[i]];
        const unit_vector& xj = x[ix[j]];
        const unit_vector& yi = y[iy[i]];
        const unit_vector& yj = y[iy[j]];
        const double v = kernel_eval(kappa, xi, xj) + kernel_eval(kappa, yi, yj) -
                         kernel_eval(kappa, xi, yj) - kernel_eval(kappa, xj, yi);
        h(i, j) = v;
        h(j, i) = v;
      }
    const double crit = dksd_u_statistic(h) / (estimate_sigma_u(h) + lambda);
    if (crit > best) {
      best = crit;
      best_kappa = kappa;
    }
  }
  return best_kappa;
}

}  // namespace dksd
