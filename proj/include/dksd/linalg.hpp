#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "dksd/errors.hpp"

namespace dksd {

// Dense row-major matrix. Sized for the workloads here: d x d model
// parameters and n x n Gram matrices with n in the hundreds.
class matd {
 public:
  matd() = default;
  matd(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

  static matd identity(std::size_t n) {
    matd m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return v_[i * cols_ + j];
  }

  const std::vector<double>& data() const { return v_; }
  std::vector<double>& data() { return v_; }

  matd transposed() const {
    matd t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double max_abs_asymmetry() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j)
        worst = std::max(worst, std::abs((*this)(i, j) - (*this)(j, i)));
    return worst;
  }

  void symmetrize() {
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j) {
        const double m = 0.5 * ((*this)(i, j) + (*this)(j, i));
        (*this)(i, j) = m;
        (*this)(j, i) = m;
      }
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double x : v_) s += x * x;
    return std::sqrt(s);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> v_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline std::vector<double> matvec(const matd& m, const std::vector<double>& x) {
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline double quadratic_form(const matd& m, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) r += m(i, j) * x[j];
    s += x[i] * r;
  }
  return s;
}

struct sym_eigen_result {
  std::vector<double> values;  // descending
  matd vectors;                // column j pairs with values[j]; empty if not requested
};

namespace detail {

// Householder reduction to tridiagonal form (EISPACK tred2 lineage).
// On exit d holds the diagonal and e[1..n-1] the subdiagonal; when
// want_vectors is set, a is overwritten with the accumulated transform.
inline void tridiagonalize(matd& a, std::vector<double>& d,
                           std::vector<double>& e, bool want_vectors) {
  const std::size_t n = a.rows();
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  if (n == 1) {
    d[0] = a(0, 0);
    if (want_vectors) a(0, 0) = 1.0;
    return;
  }

  for (std::size_t i = n - 1; i >= 1; --i) {
    const std::size_t l = i - 1;
    double h = 0.0;
    double scale = 0.0;
    if (l > 0) {
      for (std::size_t k = 0; k <= l; ++k) scale += std::abs(a(i, k));
      if (scale == 0.0) {
        e[i] = a(i, l);
      } else {
        for (std::size_t k = 0; k <= l; ++k) {
          a(i, k) /= scale;
          h += a(i, k) * a(i, k);
        }
        double f = a(i, l);
        double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        a(i, l) = f - g;
        f = 0.0;
        for (std::size_t j = 0; j <= l; ++j) {
          if (want_vectors) a(j, i) = a(i, j) / h;
          g = 0.0;
          for (std::size_t k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
          for (std::size_t k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
          e[j] = g / h;
          f += e[j] * a(i, j);
        }
        const double hh = f / (h + h);
        for (std::size_t j = 0; j <= l; ++j) {
          f = a(i, j);
          e[j] = g = e[j] - hh * f;
          for (std::size_t k = 0; k <= j; ++k)
            a(j, k) -= f * e[k] + g * a(i, k);
        }
      }
    } else {
      e[i] = a(i, l);
    }
    d[i] = h;
  }

  if (want_vectors) {
    d[0] = 0.0;
    e[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i] != 0.0) {
        for (std::size_t j = 0; j < i; ++j) {
          double g = 0.0;
          for (std::size_t k = 0; k < i; ++k) g += a(i, k) * a(k, j);
          for (std::size_t k = 0; k < i; ++k) a(k, j) -= g * a(k, i);
        }
      }
      d[i] = a(i, i);
      a(i, i) = 1.0;
      for (std::size_t j = 0; j < i; ++j) {
        a(j, i) = 0.0;
        a(i, j) = 0.0;
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i);
  }
}

// Implicit-shift QL iteration on a tridiagonal matrix (EISPACK tql2
// lineage). Rotations are accumulated into z when it is non-empty.
// iter_budget is the total rotation-sweep budget across all eigenvalues,
// as a multiple of n.
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e,
                           matd* z, int iter_budget) {
  const std::size_t n = d.size();
  if (n <= 1) return;
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  long long budget = static_cast<long long>(iter_budget) *
                     static_cast<long long>(n);

  // Matrix-scale deflation threshold; a locally-relative test stalls on the
  // near-zero tail of graded spectra (kernel Gram matrices).
  double tst1 = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        if (std::abs(e[m]) <= eps * tst1) break;
      }
      if (m != l) {
        if (--budget < 0)
          throw not_converged("tridiagonal QL iteration budget exhausted");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0;
        double c = 1.0;
        double p = 0.0;
        bool underflow = false;
        for (std::size_t ii = m; ii-- > l;) {
          double f = s * e[ii];
          const double b = c * e[ii];
          r = std::hypot(f, g);
          e[ii + 1] = r;
          if (r == 0.0) {
            d[ii + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[ii + 1] - p;
          r = (d[ii] - g) * s + 2.0 * c * b;
          p = s * r;
          d[ii + 1] = g + p;
          g = c * r - b;
          if (z) {
            for (std::size_t k = 0; k < n; ++k) {
              f = (*z)(k, ii + 1);
              (*z)(k, ii + 1) = s * (*z)(k, ii) + c * f;
              (*z)(k, ii) = c * (*z)(k, ii) - s * f;
            }
          }
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace detail

// Full eigendecomposition of a dense symmetric matrix. Input symmetry is
// required to 1e-8 in max-abs terms and the matrix is symmetrized before
// reduction. Eigenvalues come back descending; vectors (column-matched)
// only when requested.
inline sym_eigen_result symmetric_eigensolve(matd m, bool want_vectors,
                                             int iter_budget = 30) {
  if (m.rows() != m.cols())
    throw dimension_error("symmetric_eigensolve: matrix must be square");
  if (m.rows() == 0) return {};
  if (m.max_abs_asymmetry() > 1e-8)
    throw validation_error("symmetric_eigensolve: matrix is not symmetric");
  m.symmetrize();

  const std::size_t n = m.rows();
  std::vector<double> d;
  std::vector<double> e;
  detail::tridiagonalize(m, d, e, want_vectors);
  detail::tridiagonal_ql(d, e, want_vectors ? &m : nullptr, iter_budget);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });

  sym_eigen_result out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = d[order[i]];
  if (want_vectors) {
    out.vectors = matd(n, n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i)
        out.vectors(i, j) = m(i, order[j]);
  }
  return out;
}

// Eigenvalues of a symmetric matrix, descending.
inline std::vector<double> symmetric_eigenvalues(const matd& m) {
  return symmetric_eigensolve(m, /*want_vectors=*/false).values;
}

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
inline matd cholesky_factor(const matd& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw dimension_error("cholesky_factor: square input");
  matd l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0)
          throw validation_error("cholesky_factor: matrix not positive definite");
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

// Solves L^T y = z for y given the lower-triangular factor L.
inline std::vector<double> solve_upper_from_lower(const matd& l,
                                                  const std::vector<double>& z) {
  const std::size_t n = l.rows();
  std::vector<double> y(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = z[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * y[k];
    y[i] = s / l(i, i);
  }
  return y;
}

}  // namespace dksd
