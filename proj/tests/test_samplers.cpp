#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dksd/models.hpp"
#include "dksd/rng.hpp"
#include "dksd/samplers.hpp"
#include "dksd/sphere.hpp"

namespace {

using dksd::matd;
using dksd::pi;
using dksd::two_pi;
using dksd::unit_vector;

// Wilson-Hilferty approximation to the chi-square upper quantile; accurate
// to well under 0.1% for the dof used in these tests.
double chi2_upper_quantile(int dof, double alpha) {
  const double z = alpha == 0.01 ? 2.3263478740408408 : 1.6448536269514722;
  const double k = static_cast<double>(dof);
  const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * t * t * t;
}

double chi2_histogram_statistic(const std::vector<int>& counts,
                                const std::vector<double>& expected) {
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double diff = counts[i] - expected[i];
    stat += diff * diff / expected[i];
  }
  return stat;
}

TEST(UniformSphere, UnitNormsAndDeterminism) {
  dksd::splitmix64 a(1), b(1);
  const auto xs = dksd::sample_uniform_sphere(5, 500, a);
  const auto ys = dksd::sample_uniform_sphere(5, 500, b);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_NEAR(dksd::norm2(xs[i].coords), 1.0, 1e-12);
    for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(xs[i][k], ys[i][k]);
  }
}

TEST(UniformSphere, MeanVectorSmall) {
  dksd::splitmix64 rng(2);
  const auto xs = dksd::sample_uniform_sphere(3, 100000, rng);
  std::vector<double> mean(3, 0.0);
  for (const auto& x : xs)
    for (int k = 0; k < 3; ++k) mean[k] += x[k];
  for (double& m : mean) m /= 1e5;
  EXPECT_LT(dksd::norm2(mean), 0.02);
}

TEST(UniformSphere, CircleAngleHistogramUniform) {
  dksd::splitmix64 rng(3);
  const auto xs = dksd::sample_uniform_sphere(2, 100000, rng);
  const int bins = 36;
  std::vector<int> counts(bins, 0);
  for (const auto& x : xs) {
    double t = std::atan2(x[1], x[0]);
    if (t < 0) t += two_pi;
    ++counts[std::min<int>(bins - 1, static_cast<int>(t / two_pi * bins))];
  }
  const std::vector<double> expected(bins, 1e5 / bins);
  EXPECT_LT(chi2_histogram_statistic(counts, expected),
            chi2_upper_quantile(bins - 1, 0.01));
}

TEST(Vmf, MeanDirectionAndResultantLength) {
  dksd::splitmix64 rng(4);
  const unit_vector mu = dksd::normalized({1.0, 2.0, -0.5});
  const double kappa = 2.0;
  const auto res = dksd::sample_vmf(mu, kappa, 100000, rng);
  ASSERT_EQ(res.samples.size(), 100000u);
  EXPECT_EQ(res.report.n_accepted, 100000);
  EXPECT_GT(res.report.acceptance_rate, 0.0);
  EXPECT_LE(res.report.acceptance_rate, 1.0);

  std::vector<double> mean(3, 0.0);
  double resultant = 0.0;
  for (const auto& x : res.samples) {
    for (int k = 0; k < 3; ++k) mean[k] += x[k];
    resultant += dksd::dot(mu, x);
  }
  for (double& m : mean) m /= 1e5;
  resultant /= 1e5;

  // d=3 closed form: E[mu' x] = coth(kappa) - 1/kappa.
  const double want = 1.0 / std::tanh(kappa) - 1.0 / kappa;
  EXPECT_NEAR(resultant, want, 0.01);

  const double cosang = dksd::dot(dksd::normalized(mean), mu);
  EXPECT_LT(std::acos(std::min(1.0, cosang)), 0.02);
}

TEST(Vmf, CircleHistogramMatchesDensity) {
  dksd::splitmix64 rng(5);
  const unit_vector mu{{1.0, 0.0}};
  const double kappa = 1.5;
  const auto res = dksd::sample_vmf(mu, kappa, 100000, rng);

  const int bins = 36;
  // Bin masses by fine quadrature of exp(kappa cos t).
  std::vector<double> mass(bins, 0.0);
  const int sub = 200;
  double total = 0.0;
  for (int b = 0; b < bins; ++b) {
    for (int s = 0; s < sub; ++s) {
      const double t = (b + (s + 0.5) / sub) * two_pi / bins;
      mass[b] += std::exp(kappa * std::cos(t));
    }
    total += mass[b];
  }
  std::vector<double> expected(bins);
  for (int b = 0; b < bins; ++b) expected[b] = 1e5 * mass[b] / total;

  std::vector<int> counts(bins, 0);
  for (const auto& x : res.samples) {
    double t = std::atan2(x[1], x[0]);
    if (t < 0) t += two_pi;
    ++counts[std::min<int>(bins - 1, static_cast<int>(t / two_pi * bins))];
  }
  EXPECT_LT(chi2_histogram_statistic(counts, expected),
            chi2_upper_quantile(bins - 1, 0.01));
}

TEST(Vmf, RotationalEquivariance) {
  // Sampling with mu' = Q mu matches rotating a mu-stream by Q, in first
  // and second moments.
  dksd::splitmix64 r1(6), r2(7);
  const unit_vector mu{{1.0, 0.0, 0.0}};
  // Q: rotation by 90 degrees in the (x,y) plane.
  const auto rotate = [](const unit_vector& x) {
    return unit_vector{{-x[1], x[0], x[2]}};
  };
  const unit_vector qmu = rotate(mu);
  const std::size_t n = 100000;
  const auto direct = dksd::sample_vmf(qmu, 2.0, n, r1);
  const auto via_rotation = dksd::sample_vmf(mu, 2.0, n, r2);

  std::vector<double> m1(3, 0.0), m2(3, 0.0);
  matd s1(3, 3), s2(3, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const unit_vector a = direct.samples[i];
    const unit_vector b = rotate(via_rotation.samples[i]);
    for (int p = 0; p < 3; ++p) {
      m1[p] += a[p] / n;
      m2[p] += b[p] / n;
      for (int q = 0; q < 3; ++q) {
        s1(p, q) += a[p] * a[q] / n;
        s2(p, q) += b[p] * b[q] / n;
      }
    }
  }
  // Componentwise MC standard errors are at most 1/sqrt(n).
  const double tol = 4.0 * std::sqrt(2.0) / std::sqrt(static_cast<double>(n));
  for (int p = 0; p < 3; ++p) {
    EXPECT_NEAR(m1[p], m2[p], tol);
    for (int q = 0; q < 3; ++q) EXPECT_NEAR(s1(p, q), s2(p, q), tol);
  }
}

TEST(FisherBingham, ZeroAndConstantDiagonalAreUniform) {
  for (double c : {0.0, 2.5}) {
    dksd::splitmix64 rng(8 + static_cast<int>(c));
    matd a(2, 2);
    a(0, 0) = c;
    a(1, 1) = c;
    const auto res = dksd::sample_fisher_bingham_quadratic(a, 100000, rng);
    EXPECT_EQ(res.report.n_proposed, res.report.n_accepted);  // accept all

    const int bins = 36;
    std::vector<int> counts(bins, 0);
    for (const auto& x : res.samples) {
      double t = std::atan2(x[1], x[0]);
      if (t < 0) t += two_pi;
      ++counts[std::min<int>(bins - 1, static_cast<int>(t / two_pi * bins))];
    }
    const std::vector<double> expected(bins, 1e5 / bins);
    EXPECT_LT(chi2_histogram_statistic(counts, expected),
              chi2_upper_quantile(bins - 1, 0.01));
  }
}

TEST(FisherBingham, CircleHistogramMatchesDensity) {
  dksd::splitmix64 rng(9);
  matd a(2, 2);
  a(0, 0) = 2.0;  // density proportional to exp(2 cos^2 t)
  const auto res = dksd::sample_fisher_bingham_quadratic(a, 100000, rng);

  const int bins = 36;
  std::vector<double> mass(bins, 0.0);
  const int sub = 200;
  double total = 0.0;
  for (int b = 0; b < bins; ++b) {
    for (int s = 0; s < sub; ++s) {
      const double t = (b + (s + 0.5) / sub) * two_pi / bins;
      const double ct = std::cos(t);
      mass[b] += std::exp(2.0 * ct * ct);
    }
    total += mass[b];
  }
  std::vector<double> expected(bins);
  for (int b = 0; b < bins; ++b) expected[b] = 1e5 * mass[b] / total;

  std::vector<int> counts(bins, 0);
  for (const auto& x : res.samples) {
    double t = std::atan2(x[1], x[0]);
    if (t < 0) t += two_pi;
    ++counts[std::min<int>(bins - 1, static_cast<int>(t / two_pi * bins))];
  }
  EXPECT_LT(chi2_histogram_statistic(counts, expected),
            chi2_upper_quantile(bins - 1, 0.01));
}

TEST(FisherBingham, PaperNullAcceptanceRate) {
  dksd::splitmix64 rng(10);
  matd a(3, 3, 1.0);
  for (int i = 0; i < 3; ++i) a(i, i) = 2.0;
  const auto res = dksd::sample_fisher_bingham_quadratic(a, 20000, rng);
  EXPECT_GT(res.report.acceptance_rate, 0.3);
  EXPECT_EQ(res.report.acceptance_rate,
            static_cast<double>(res.report.n_accepted) /
                static_cast<double>(res.report.n_proposed));
}

TEST(FisherBingham, RejectsBadInputs) {
  dksd::splitmix64 rng(11);
  matd asym(2, 2);
  asym(0, 1) = 1.0;
  EXPECT_THROW(dksd::sample_fisher_bingham_quadratic(asym, 10, rng),
               dksd::validation_error);
}

TEST(Samplers, SeedDeterminism) {
  const unit_vector mu{{0.0, 0.0, 1.0}};
  dksd::splitmix64 a(12), b(12);
  const auto xs = dksd::sample_vmf(mu, 3.0, 100, a);
  const auto ys = dksd::sample_vmf(mu, 3.0, 100, b);
  for (std::size_t i = 0; i < 100; ++i)
    for (int k = 0; k < 3; ++k) EXPECT_EQ(xs.samples[i][k], ys.samples[i][k]);

  matd m(3, 3, 0.5);
  for (int i = 0; i < 3; ++i) m(i, i) = 1.5;
  dksd::splitmix64 c(13), d(13);
  const auto fs = dksd::sample_fisher_bingham_quadratic(m, 100, c);
  const auto gs = dksd::sample_fisher_bingham_quadratic(m, 100, d);
  for (std::size_t i = 0; i < 100; ++i)
    for (int k = 0; k < 3; ++k) EXPECT_EQ(fs.samples[i][k], gs.samples[i][k]);
}

// Empirical E[x] and E[x x'] against quadrature for d in {2, 3}, three
// parameter settings per model family.
TEST(Samplers, MomentChecksAgainstQuadrature) {
  struct setting {
    dksd::directional_model model;
    int which;  // 0 vmf, 1 fb
  };
  std::vector<setting> settings;
  settings.push_back({dksd::vmf_model(unit_vector{{1.0, 0.0}}, 0.5), 0});
  settings.push_back({dksd::vmf_model(dksd::normalized({1.0, 1.0}), 2.0), 0});
  settings.push_back({dksd::vmf_model(unit_vector{{0.0, 1.0}}, 8.0), 0});
  settings.push_back({dksd::vmf_model(unit_vector{{0.0, 0.0, 1.0}}, 0.5), 0});
  settings.push_back({dksd::vmf_model(dksd::normalized({1.0, 1.0, 1.0}), 2.0), 0});
  settings.push_back({dksd::vmf_model(unit_vector{{1.0, 0.0, 0.0}}, 8.0), 0});
  {
    matd a2(2, 2);
    a2(0, 0) = 2.0;
    settings.push_back({dksd::fb_model(a2), 1});
    matd b2(2, 2);
    b2(0, 0) = 1.0;
    b2(0, 1) = b2(1, 0) = 0.5;
    b2(1, 1) = -1.0;
    settings.push_back({dksd::fb_model(b2), 1});
    matd a3(3, 3, 1.0);
    for (int i = 0; i < 3; ++i) a3(i, i) = 2.0;
    settings.push_back({dksd::fb_model(a3), 1});
    matd b3(3, 3);
    b3(0, 0) = 3.0;
    b3(1, 1) = 1.0;
    settings.push_back({dksd::fb_model(b3), 1});
  }

  int idx = 0;
  for (const setting& s : settings) {
    const std::size_t d = s.model.d;
    // Quadrature moments over the chart with the volume element.
    std::vector<double> m1(d, 0.0);
    matd m2(d, d);
    double z = 0.0;
    if (d == 2) {
      const int g = 4096;
      for (int i = 0; i < g; ++i) {
        const dksd::spherical_coord t{{i * two_pi / g}};
        const unit_vector x = dksd::to_cartesian(t);
        const double w = std::exp(dksd::log_density_unnormalized(s.model, x));
        z += w;
        for (std::size_t p = 0; p < d; ++p) {
          m1[p] += w * x[p];
          for (std::size_t q = 0; q < d; ++q) m2(p, q) += w * x[p] * x[q];
        }
      }
    } else {
      const int g1 = 512, g2 = 512;
      for (int i = 0; i <= g1; ++i) {
        const double w1 = (i == 0 || i == g1) ? 0.5 : 1.0;
        for (int j = 0; j < g2; ++j) {
          const dksd::spherical_coord t{{i * pi / g1, j * two_pi / g2}};
          const unit_vector x = dksd::to_cartesian(t);
          const double w =
              w1 * std::exp(dksd::log_density_unnormalized(s.model, x)) *
              dksd::jacobian(t);
          z += w;
          for (std::size_t p = 0; p < d; ++p) {
            m1[p] += w * x[p];
            for (std::size_t q = 0; q < d; ++q) m2(p, q) += w * x[p] * x[q];
          }
        }
      }
    }
    for (double& v : m1) v /= z;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = 0; q < d; ++q) m2(p, q) /= z;

    dksd::splitmix64 rng(100 + idx);
    const std::size_t n = 40000;
    std::vector<unit_vector> xs;
    if (s.which == 0)
      xs = dksd::sample_vmf(s.model.mu, s.model.kappa, n, rng).samples;
    else
      xs = dksd::sample_fisher_bingham_quadratic(s.model.a, n, rng).samples;

    std::vector<double> e1(d, 0.0);
    matd e2(d, d);
    for (const auto& x : xs)
      for (std::size_t p = 0; p < d; ++p) {
        e1[p] += x[p] / n;
        for (std::size_t q = 0; q < d; ++q) e2(p, q) += x[p] * x[q] / n;
      }

    // 4 standard errors, with per-moment variances bounded by 1.
    const double tol = 4.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t p = 0; p < d; ++p) {
      EXPECT_NEAR(e1[p], m1[p], tol) << "setting " << idx;
      for (std::size_t q = 0; q < d; ++q)
        EXPECT_NEAR(e2(p, q), m2(p, q), tol) << "setting " << idx;
    }
    ++idx;
  }
}

}  // namespace
