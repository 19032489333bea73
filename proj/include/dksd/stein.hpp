#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dksd/errors.hpp"
#include "dksd/linalg.hpp"
#include "dksd/models.hpp"
#include "dksd/sphere.hpp"

namespace dksd {

// von Mises-Fisher reproducing kernel exp(kappa x'x~) paired with the null
// model whose score enters the Stein operator. The kernel concentration is
// unrelated to any model kappa.
struct stein_kernel {
  double kappa;
  directional_model model;
};

inline stein_kernel make_stein_kernel(double kappa, directional_model model) {
  if (!(kappa > 0.0))
    throw validation_error("stein_kernel: kappa must be > 0");
  if (model.d < 2) throw validation_error("stein_kernel: model d must be >= 2");
  return stein_kernel{kappa, std::move(model)};
}

inline double kernel_eval(double kappa, const unit_vector& x,
                          const unit_vector& xt) {
  if (x.dim() != xt.dim())
    throw dimension_error("kernel_eval: dimension mismatch");
  return std::exp(kappa * dot(x, xt));
}

enum class deriv_side { first, second };

// First-order kernel derivative in spherical coordinates, by the chain
// rule: d/dtheta^i k = kappa (dx/dtheta^i . x~) k, and symmetrically for
// the second argument.
inline std::vector<double> kernel_grad_theta(double kappa,
                                             const spherical_coord& t,
                                             const spherical_coord& tt,
                                             deriv_side side) {
  if (t.dim() != tt.dim())
    throw dimension_error("kernel_grad_theta: dimension mismatch");
  const std::size_t d = t.dim();
  const unit_vector x = to_cartesian(t);
  const unit_vector xt = to_cartesian(tt);
  const double k = std::exp(kappa * dot(x, xt));
  const tangent_basis basis =
      side == deriv_side::first ? tangent_basis_at(t) : tangent_basis_at(tt);
  const unit_vector& other = side == deriv_side::first ? xt : x;
  std::vector<double> g(d - 1);
  for (std::size_t i = 0; i + 1 < d; ++i) {
    double acc = 0.0;
    for (std::size_t r = 0; r < d; ++r) acc += basis.cols(r, i) * other[r];
    g[i] = kappa * acc * k;
  }
  return g;
}

// Matched-index mixed second derivatives: component i is
// [kappa (dx/dtheta^i . dx~/dtheta~^i)
//  + kappa^2 (dx/dtheta^i . x~)(x . dx~/dtheta~^i)] k.
inline std::vector<double> kernel_cross_hessian_trace_terms(
    double kappa, const spherical_coord& t, const spherical_coord& tt) {
  if (t.dim() != tt.dim())
    throw dimension_error("kernel_cross_hessian_trace_terms: dimension mismatch");
  const std::size_t d = t.dim();
  const unit_vector x = to_cartesian(t);
  const unit_vector xt = to_cartesian(tt);
  const double k = std::exp(kappa * dot(x, xt));
  const tangent_basis bt = tangent_basis_at(t);
  const tangent_basis btt = tangent_basis_at(tt);
  std::vector<double> out(d - 1);
  for (std::size_t i = 0; i + 1 < d; ++i) {
    double cross = 0.0, u = 0.0, v = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      cross += bt.cols(r, i) * btt.cols(r, i);
      u += bt.cols(r, i) * xt[r];
      v += x[r] * btt.cols(r, i);
    }
    out[i] = (kappa * cross + kappa * kappa * u * v) * k;
  }
  return out;
}

// d/dtheta^i log(q J): the model score plus the volume-element term.
inline std::vector<double> augmented_score(const directional_model& m,
                                           const spherical_coord& t) {
  std::vector<double> s = score_spherical(m, t);
  const std::vector<double> gj = grad_log_jacobian(t);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += gj[i];
  return s;
}

// Smooth test function bundle for the Stein operator: values f_i(theta)
// and the matched-index derivatives df_i/dtheta^i.
struct test_function_eval {
  std::vector<double> values;
  std::vector<double> diag_derivs;
};
using stein_test_function =
    std::function<test_function_eval(const spherical_coord&)>;

// A_q f = sum_i (df_i/dtheta^i + f_i d/dtheta^i log(qJ)).
inline double stein_op_apply(const directional_model& m,
                             const stein_test_function& f,
                             const spherical_coord& t) {
  const test_function_eval fe = f(t);
  const std::vector<double> s = augmented_score(m, t);
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    acc += fe.diag_derivs[i] + fe.values[i] * s[i];
  return acc;
}

// Per-sample cache for Gram assembly: one conversion, one tangent basis and
// one augmented score per point instead of per pair.
struct stein_point {
  spherical_coord theta;
  unit_vector x;
  tangent_basis basis;
  std::vector<double> score;
};

inline stein_point make_stein_point(const directional_model& m,
                                    const spherical_coord& theta) {
  stein_point p;
  p.theta = theta;
  p.x = to_cartesian(theta);
  p.basis = tangent_basis_at(theta);
  p.score = augmented_score(m, theta);
  return p;
}

// h_q(x, x~) of the discrepancy: k <s,s~> + <s, d~k> + <s~, dk> + tr d d~ k.
// Written so that swapping the arguments produces a bitwise-identical
// value.
inline double h_q_pair(double kappa, const stein_point& p,
                       const stein_point& q) {
  const std::size_t d = p.x.dim();
  const double k = std::exp(kappa * dot(p.x, q.x));
  double ss = 0.0, sp = 0.0, sq = 0.0, cross = 0.0, uu = 0.0;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    double up = 0.0, uq = 0.0, cc = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      up += p.basis.cols(r, i) * q.x[r];
      uq += q.basis.cols(r, i) * p.x[r];
      cc += p.basis.cols(r, i) * q.basis.cols(r, i);
    }
    ss += p.score[i] * q.score[i];
    sp += p.score[i] * uq;  // <s(theta), d/dtheta~ k> core
    sq += q.score[i] * up;  // <s(theta~), d/dtheta k> core
    cross += cc;
    uu += up * uq;
  }
  return k * (ss + kappa * (sp + sq) + kappa * cross + kappa * kappa * uu);
}

inline double h_q(const stein_kernel& kernel, const spherical_coord& t,
                  const spherical_coord& tt) {
  if (t.dim() != tt.dim() || t.dim() != kernel.model.d)
    throw dimension_error("h_q: dimension mismatch");
  return h_q_pair(kernel.kappa, make_stein_point(kernel.model, t),
                  make_stein_point(kernel.model, tt));
}

// Symmetric dense container for h_q(x_i, x_j).
struct stein_gram_matrix {
  std::size_t n = 0;
  std::vector<double> values;  // row-major n x n

  double operator()(std::size_t i, std::size_t j) const {
    return values[i * n + j];
  }
  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }

  matd to_matd() const {
    matd m(n, n);
    m.data() = values;
    return m;
  }
};

inline std::vector<stein_point> make_stein_points(
    const directional_model& m, const std::vector<unit_vector>& samples) {
  std::vector<stein_point> pts;
  pts.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].dim() != m.d)
      throw dimension_error("stein points: sample " + std::to_string(i) +
                            " has dimension " + std::to_string(samples[i].dim()));
    try {
      pts.push_back(make_stein_point(m, to_spherical_clamped(samples[i])));
    } catch (const pole_error& e) {
      throw pole_error("sample " + std::to_string(i) + ": " + e.what());
    }
  }
  return pts;
}

inline stein_gram_matrix stein_gram_from_points(
    double kappa, const std::vector<stein_point>& pts) {
  stein_gram_matrix g;
  g.n = pts.size();
  g.values.assign(g.n * g.n, 0.0);
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = i; j < g.n; ++j) {
      const double h = h_q_pair(kappa, pts[i], pts[j]);
      g(i, j) = h;
      g(j, i) = h;
    }
  }
  return g;
}

// H_ij = h_q(x_i, x_j), upper triangle computed and mirrored.
inline stein_gram_matrix stein_gram(const stein_kernel& kernel,
                                    const std::vector<unit_vector>& samples) {
  if (samples.size() < 2)
    throw validation_error("stein_gram: need at least 2 samples");
  return stein_gram_from_points(kernel.kappa,
                                make_stein_points(kernel.model, samples));
}

}  // namespace dksd
