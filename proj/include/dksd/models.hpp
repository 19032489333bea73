#pragma once

#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dksd/errors.hpp"
#include "dksd/linalg.hpp"
#include "dksd/sphere.hpp"

namespace dksd {

enum class model_kind { uniform, von_mises_fisher, fisher_bingham };

// A null density q on S^{d-1} known up to a constant, with enough structure
// to produce the ambient gradient of log q analytically. log_scale is an
// additive constant on the log density; it never reaches any score or
// kernel computation, which is the point of the whole construction.
struct directional_model {
  model_kind kind = model_kind::uniform;
  std::size_t d = 0;

  // von Mises-Fisher
  unit_vector mu;
  double kappa = 0.0;

  // Fisher-Bingham, density proportional to exp(x'Ax + b'x)
  matd a;
  std::vector<double> b;

  double log_scale = 0.0;
};

inline directional_model uniform_model(std::size_t d) {
  if (d < 2) throw validation_error("uniform_model: d must be >= 2");
  directional_model m;
  m.kind = model_kind::uniform;
  m.d = d;
  return m;
}

inline directional_model vmf_model(unit_vector mu, double kappa) {
  if (mu.dim() < 2) throw validation_error("vmf_model: d must be >= 2");
  if (std::abs(norm2(mu.coords) - 1.0) > 1e-12)
    throw validation_error("vmf_model: mu must be a unit vector");
  if (!(kappa > 0.0)) throw validation_error("vmf_model: kappa must be > 0");
  directional_model m;
  m.kind = model_kind::von_mises_fisher;
  m.d = mu.dim();
  m.mu = std::move(mu);
  m.kappa = kappa;
  return m;
}

inline directional_model fb_model(matd a, std::vector<double> b = {}) {
  const std::size_t d = a.rows();
  if (d < 2 || a.cols() != d)
    throw validation_error("fb_model: A must be square with d >= 2");
  if (a.max_abs_asymmetry() > 1e-12)
    throw validation_error("fb_model: A must be symmetric");
  a.symmetrize();
  if (b.empty()) b.assign(d, 0.0);
  if (b.size() != d) throw dimension_error("fb_model: b has wrong length");
  directional_model m;
  m.kind = model_kind::fisher_bingham;
  m.d = d;
  m.a = std::move(a);
  m.b = std::move(b);
  return m;
}

// Unnormalized log density: 0, kappa mu'x, or x'Ax + b'x. Normalizers never
// appear here; the discrepancy machinery stays normalizer-free.
inline double log_density_unnormalized(const directional_model& m,
                                       const unit_vector& x) {
  if (x.dim() != m.d)
    throw dimension_error("log_density_unnormalized: dimension mismatch");
  switch (m.kind) {
    case model_kind::uniform:
      return m.log_scale;
    case model_kind::von_mises_fisher:
      return m.log_scale + m.kappa * dot(m.mu, x);
    case model_kind::fisher_bingham:
      return m.log_scale + quadratic_form(m.a, x.coords) + dot(m.b, x.coords);
  }
  return 0.0;
}

// Ambient gradient of the unnormalized log density.
inline std::vector<double> grad_log_density_ambient(const directional_model& m,
                                                    const unit_vector& x) {
  if (x.dim() != m.d)
    throw dimension_error("grad_log_density_ambient: dimension mismatch");
  switch (m.kind) {
    case model_kind::uniform:
      return std::vector<double>(m.d, 0.0);
    case model_kind::von_mises_fisher: {
      std::vector<double> g(m.d);
      for (std::size_t i = 0; i < m.d; ++i) g[i] = m.kappa * m.mu[i];
      return g;
    }
    case model_kind::fisher_bingham: {
      std::vector<double> g = matvec(m.a, x.coords);  // A symmetric: 2Ax + b
      for (std::size_t i = 0; i < m.d; ++i) g[i] = 2.0 * g[i] + m.b[i];
      return g;
    }
  }
  return {};
}

// d/dtheta^i log q via the chain rule through the tangent basis. Excludes
// the log J part, which the Stein operator adds separately.
inline std::vector<double> score_spherical(const directional_model& m,
                                           const spherical_coord& t) {
  if (t.dim() != m.d)
    throw dimension_error("score_spherical: dimension mismatch");
  if (m.kind == model_kind::uniform)
    return std::vector<double>(m.d - 1, 0.0);
  const unit_vector x = to_cartesian(t);
  const std::vector<double> g = grad_log_density_ambient(m, x);
  const tangent_basis basis = tangent_basis_at(t);
  std::vector<double> s(m.d - 1, 0.0);
  for (std::size_t i = 0; i + 1 < m.d; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < m.d; ++k) acc += g[k] * basis.cols(k, i);
    s[i] = acc;
  }
  return s;
}

// Modified Bessel function of the first kind by the ascending power series
// sum_m (z/2)^{2m+v} / (m! Gamma(m+v+1)), stopping once a term contributes
// less than 1e-16 relative. Well conditioned for the z <= ~64 range the
// kernel grid ever produces.
inline double bessel_i(double v, double z) {
  if (v < 0.0 || z < 0.0)
    throw validation_error("bessel_i: needs v >= 0 and z >= 0");
  if (z == 0.0) return v == 0.0 ? 1.0 : 0.0;
  const double q = 0.25 * z * z;
  double term = std::exp(v * std::log(0.5 * z) - std::lgamma(v + 1.0));
  double sum = term;
  for (int m = 1; m <= 200; ++m) {
    term *= q / (static_cast<double>(m) * (static_cast<double>(m) + v));
    sum += term;
    if (term < 1e-16 * sum) return sum;
  }
  throw not_converged("bessel_i: series did not converge in 200 terms");
}

// log C_d(kappa) with C_d(kappa) = kappa^{d/2-1} / ((2 pi)^{d/2} I_{d/2-1}).
// Only quadrature oracles and sampler diagnostics consume this; the test
// statistics never do.
inline double vmf_log_normalizer(std::size_t d, double kappa) {
  if (d < 2) throw validation_error("vmf_log_normalizer: d must be >= 2");
  if (!(kappa > 0.0))
    throw validation_error("vmf_log_normalizer: kappa must be > 0");
  const double hd = 0.5 * static_cast<double>(d);
  return (hd - 1.0) * std::log(kappa) - hd * std::log(two_pi) -
         std::log(bessel_i(hd - 1.0, kappa));
}

namespace detail {

inline std::string strip_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

inline double parse_real(const std::string& tok, std::size_t column) {
  if (tok.empty()) throw parse_error("expected a number", 1, column);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw parse_error("invalid number '" + tok + "'", 1, column);
  }
  if (used != tok.size())
    throw parse_error("trailing characters in number '" + tok + "'", 1, column);
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<double> parse_reals(const std::string& s, std::size_t column) {
  std::vector<double> out;
  for (const std::string& tok : split(s, ','))
    out.push_back(parse_real(tok, column));
  return out;
}

}  // namespace detail

// Parses the single-line model grammar:
//   uniform:d=<int>
//   vmf:mu=<comma reals>;kappa=<real>
//   fb:A=<rows '|' separated, entries ','>[;b=<comma reals>]
// Whitespace is ignored everywhere. Diagnostics carry a 1-based column into
// the stripped text. A nearly-symmetric A (asymmetry <= 1e-6) is
// symmetrized with a warning; a nearly-unit mu (norm within 1e-6 of 1) is
// renormalized.
inline directional_model parse_model_spec(
    std::string_view text, std::vector<std::string>* warnings = nullptr) {
  const std::string s = detail::strip_spaces(text);
  const std::size_t colon = s.find(':');
  if (colon == std::string::npos)
    throw parse_error("expected '<kind>:<fields>'", 1, 1);
  const std::string kind = s.substr(0, colon);

  // name -> (value, column of the value)
  std::vector<std::pair<std::string, std::pair<std::string, std::size_t>>> fields;
  std::size_t cursor = colon + 1;
  for (const std::string& field : detail::split(s.substr(colon + 1), ';')) {
    const std::size_t eq = field.find('=');
    if (eq == std::string::npos || eq == 0)
      throw parse_error("expected 'name=value'", 1, cursor + 1);
    fields.emplace_back(field.substr(0, eq),
                        std::make_pair(field.substr(eq + 1), cursor + eq + 2));
    cursor += field.size() + 1;
  }
  auto find_field = [&](const std::string& name)
      -> std::optional<std::pair<std::string, std::size_t>> {
    for (const auto& [n, v] : fields)
      if (n == name) return v;
    return std::nullopt;
  };
  auto require_field = [&](const std::string& name) {
    auto f = find_field(name);
    if (!f)
      throw parse_error("missing field '" + name + "' for kind '" + kind + "'",
                        1, 1);
    return *f;
  };
  for (const auto& [n, v] : fields) {
    const bool known = (kind == "uniform" && n == "d") ||
                       (kind == "vmf" && (n == "mu" || n == "kappa")) ||
                       (kind == "fb" && (n == "A" || n == "b"));
    if (!known)
      throw parse_error("unknown field '" + n + "' for kind '" + kind + "'", 1,
                        v.second);
  }

  if (kind == "uniform") {
    const auto [val, col] = require_field("d");
    const double dv = detail::parse_real(val, col);
    if (dv < 2.0 || dv != std::floor(dv))
      throw validation_error("uniform: d must be an integer >= 2");
    return uniform_model(static_cast<std::size_t>(dv));
  }

  if (kind == "vmf") {
    const auto [mu_s, mu_col] = require_field("mu");
    const auto [k_s, k_col] = require_field("kappa");
    std::vector<double> mu = detail::parse_reals(mu_s, mu_col);
    const double kappa = detail::parse_real(k_s, k_col);
    if (mu.size() < 2) throw validation_error("vmf: mu needs d >= 2 entries");
    const double n = norm2(mu);
    if (std::abs(n - 1.0) > 1e-6)
      throw validation_error("vmf: mu norm deviates from 1 by " +
                             std::to_string(std::abs(n - 1.0)));
    for (double& x : mu) x /= n;
    if (!(kappa > 0.0)) throw validation_error("vmf: kappa must be > 0");
    return vmf_model(unit_vector{std::move(mu)}, kappa);
  }

  if (kind == "fb") {
    const auto [a_s, a_col] = require_field("A");
    const std::vector<std::string> rows = detail::split(a_s, '|');
    const std::size_t d = rows.size();
    if (d < 2) throw validation_error("fb: A needs at least 2 rows");
    matd a(d, d);
    std::size_t col = a_col;
    for (std::size_t i = 0; i < d; ++i) {
      const std::vector<double> row = detail::parse_reals(rows[i], col);
      if (row.size() != d)
        throw validation_error("fb: A row " + std::to_string(i + 1) + " has " +
                               std::to_string(row.size()) + " entries, want " +
                               std::to_string(d));
      for (std::size_t j = 0; j < d; ++j) a(i, j) = row[j];
      col += rows[i].size() + 1;
    }
    const double asym = a.max_abs_asymmetry();
    if (asym > 1e-6)
      throw validation_error("fb: A asymmetric by " + std::to_string(asym));
    if (asym > 0.0 && warnings)
      warnings->push_back("fb: A symmetrized (asymmetry " +
                          std::to_string(asym) + ")");
    a.symmetrize();
    std::vector<double> b;
    if (auto bf = find_field("b")) {
      b = detail::parse_reals(bf->first, bf->second);
      if (b.size() != d) throw validation_error("fb: b has wrong length");
    }
    return fb_model(std::move(a), std::move(b));
  }

  throw parse_error("unknown model kind '" + kind + "'", 1, 1);
}

namespace detail {

inline std::string render_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string render_reals(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    out += render_real(v[i]);
  }
  return out;
}

}  // namespace detail

// Canonical single-line rendering; parse_model_spec(render_model_spec(m))
// reproduces m.
inline std::string render_model_spec(const directional_model& m) {
  switch (m.kind) {
    case model_kind::uniform:
      return "uniform:d=" + std::to_string(m.d);
    case model_kind::von_mises_fisher:
      return "vmf:mu=" + detail::render_reals(m.mu.coords) +
             ";kappa=" + detail::render_real(m.kappa);
    case model_kind::fisher_bingham: {
      std::string out = "fb:A=";
      for (std::size_t i = 0; i < m.d; ++i) {
        if (i) out.push_back('|');
        for (std::size_t j = 0; j < m.d; ++j) {
          if (j) out.push_back(',');
          out += detail::render_real(m.a(i, j));
        }
      }
      bool b_nonzero = false;
      for (double x : m.b) b_nonzero |= (x != 0.0);
      if (b_nonzero) out += ";b=" + detail::render_reals(m.b);
      return out;
    }
  }
  return {};
}

}  // namespace dksd
