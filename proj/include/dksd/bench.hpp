#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dksd/baselines.hpp"
#include "dksd/errors.hpp"
#include "dksd/gof.hpp"
#include "dksd/models.hpp"
#include "dksd/samplers.hpp"
#include "dksd/stein.hpp"

namespace dksd {

enum class bench_method { dksd_u, dksd_v, mmd, rayleigh, kuiper };

inline std::string method_name(bench_method m) {
  switch (m) {
    case bench_method::dksd_u: return "dKSDu";
    case bench_method::dksd_v: return "dKSDv";
    case bench_method::mmd: return "MMD";
    case bench_method::rayleigh: return "Rayleigh";
    case bench_method::kuiper: return "Kuiper";
  }
  return {};
}

enum class scenario_kind { uniform_circle, vmf, fisher_bingham };

inline std::string scenario_name(scenario_kind s) {
  switch (s) {
    case scenario_kind::uniform_circle: return "uniform-circle";
    case scenario_kind::vmf: return "vmf";
    case scenario_kind::fisher_bingham: return "fisher-bingham";
  }
  return {};
}

// One simulation campaign: a scenario swept over (d, param, n) grids, each
// grid point tested by every requested method over `trials` repetitions.
// For the uniform-circle scenario `param` is the alternative's vMF
// concentration; for the other scenarios it is the perturbation sigma.
struct experiment_plan {
  scenario_kind scenario = scenario_kind::uniform_circle;
  std::vector<int> n_grid;
  std::vector<double> param_grid{0.0};
  std::vector<int> d_grid;
  int trials = 200;
  std::vector<bench_method> methods;
  test_config config;
  std::optional<directional_model> null_override;
  std::optional<directional_model> alternative_override;
  enum class mu_kind { e1, ones } mu = mu_kind::e1;
  bool timing = true;

  void validate() const {
    config.validate();
    if (trials < 1) throw validation_error("plan: trials must be >= 1");
    if (n_grid.empty()) throw validation_error("plan: n grid is empty");
    for (int n : n_grid)
      if (n < 10) throw validation_error("plan: n must be >= 10");
    if (param_grid.empty()) throw validation_error("plan: param grid is empty");
    if (d_grid.empty()) throw validation_error("plan: d grid is empty");
    for (int d : d_grid)
      if (d < 2) throw validation_error("plan: d must be >= 2");
    if (methods.empty()) throw validation_error("plan: no methods requested");
    for (bench_method m : methods)
      if (m == bench_method::rayleigh || m == bench_method::kuiper) {
        if (scenario != scenario_kind::uniform_circle)
          throw validation_error(
              "plan: Rayleigh/Kuiper need d=2 and a uniform null");
      }
  }
};

struct result_row {
  std::string scenario;
  std::string method;
  int n = 0;
  int d = 0;
  double param = 0.0;
  double rejection_rate = 0.0;
  int trials = 0;
  double mean_runtime_s = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline unit_vector scenario_mu(std::size_t d, experiment_plan::mu_kind kind) {
  std::vector<double> mu(d, 0.0);
  if (kind == experiment_plan::mu_kind::e1) {
    mu[0] = 1.0;
  } else {
    const double v = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& c : mu) c = v;
  }
  return unit_vector{std::move(mu)};
}

// A_ij = 2 on the diagonal and 1 elsewhere, perturbed by sigma times the
// all-ones matrix for the alternative.
inline matd fb_null_matrix(std::size_t d, double sigma) {
  matd a(d, d, 1.0 + sigma);
  for (std::size_t i = 0; i < d; ++i) a(i, i) += 1.0;
  return a;
}

inline directional_model scenario_null(const experiment_plan& plan, int d) {
  if (plan.null_override) return *plan.null_override;
  switch (plan.scenario) {
    case scenario_kind::uniform_circle:
      return uniform_model(2);
    case scenario_kind::vmf:
      return vmf_model(scenario_mu(d, plan.mu), 1.0);
    case scenario_kind::fisher_bingham:
      return fb_model(fb_null_matrix(d, 0.0));
  }
  throw validation_error("plan: unknown scenario");
}

inline directional_model scenario_alternative(const experiment_plan& plan,
                                              int d, double param) {
  if (plan.alternative_override) return *plan.alternative_override;
  switch (plan.scenario) {
    case scenario_kind::uniform_circle:
      if (param == 0.0) return uniform_model(2);
      return vmf_model(scenario_mu(2, plan.mu), param);
    case scenario_kind::vmf:
      return vmf_model(scenario_mu(d, plan.mu), 1.0 + param);
    case scenario_kind::fisher_bingham:
      return fb_model(fb_null_matrix(d, param));
  }
  throw validation_error("plan: unknown scenario");
}

inline std::vector<unit_vector> draw_from(const directional_model& m,
                                          std::size_t n, splitmix64& rng) {
  switch (m.kind) {
    case model_kind::uniform:
      return sample_uniform_sphere(m.d, n, rng);
    case model_kind::von_mises_fisher:
      return sample_vmf(m.mu, m.kappa, n, rng).samples;
    case model_kind::fisher_bingham: {
      for (double bi : m.b)
        if (bi != 0.0)
          throw validation_error(
              "sampling: Fisher-Bingham with a linear term is unsupported");
      return sample_fisher_bingham_quadratic(m.a, n, rng).samples;
    }
  }
  throw validation_error("sampling: unknown model kind");
}

inline double angle_of(const unit_vector& x) {
  double t = std::atan2(x[1], x[0]);
  if (t < 0.0) t += two_pi;
  if (t >= two_pi) t = 0.0;
  return t;
}

// One trial of one method at one grid point. Deterministic in trial_seed.
inline bool run_trial(bench_method method, const directional_model& null_model,
                      const directional_model& alt_model, int n,
                      const test_config& base_config,
                      std::uint64_t trial_seed) {
  splitmix64 data_rng(mix_seed(trial_seed, 1));
  const std::vector<unit_vector> data =
      draw_from(alt_model, static_cast<std::size_t>(n), data_rng);

  switch (method) {
    case bench_method::dksd_u: {
      test_config cfg = base_config;
      cfg.seed = mix_seed(trial_seed, 2);
      return test_dksd_u(data, null_model, cfg).reject;
    }
    case bench_method::dksd_v: {
      test_config cfg = base_config;
      cfg.seed = mix_seed(trial_seed, 2);
      return test_dksd_v(data, null_model, cfg).reject;
    }
    case bench_method::rayleigh: {
      std::vector<double> angles(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) angles[i] = angle_of(data[i]);
      return rayleigh_test(angles, base_config.alpha).reject;
    }
    case bench_method::kuiper: {
      std::vector<double> angles(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) angles[i] = angle_of(data[i]);
      return kuiper_test(angles, base_config.alpha).reject;
    }
    case bench_method::mmd: {
      // MMD needs draws from the null itself; that cost is part of the
      // per-trial time on purpose.
      splitmix64 null_rng(mix_seed(trial_seed, 3));
      const std::vector<unit_vector> ref =
          draw_from(null_model, static_cast<std::size_t>(n), null_rng);
      double kappa;
      std::vector<const unit_vector*> xs, ys;
      std::vector<unit_vector> x_rest, y_rest;
      if (const auto* fixed = std::get_if<double>(&base_config.kappa_policy)) {
        kappa = *fixed;
        x_rest = data;
        y_rest = ref;
      } else {
        const auto& pol = std::get<kappa_auto>(base_config.kappa_policy);
        splitmix64 sel_rng(mix_seed(trial_seed, 4));
        std::size_t c = static_cast<std::size_t>(std::floor(
            pol.split_fraction * static_cast<double>(data.size())));
        c = std::max<std::size_t>(c, 10);
        // Re-derive the same shuffles the selector will use, to keep the
        // test split disjoint from the selection split.
        splitmix64 probe = sel_rng;
        kappa = select_kappa_mmd(data, ref, pol.grid, pol.split_fraction,
                                 pol.lambda, sel_rng);
        const std::vector<std::size_t> ix =
            shuffled_indices(data.size(), probe);
        const std::vector<std::size_t> iy =
            shuffled_indices(ref.size(), probe);
        for (std::size_t i = c; i < ix.size(); ++i) x_rest.push_back(data[ix[i]]);
        for (std::size_t i = c; i < iy.size(); ++i) y_rest.push_back(ref[iy[i]]);
      }
      splitmix64 perm_rng(mix_seed(trial_seed, 5));
      return mmd_two_sample_test(x_rest, y_rest, kappa, base_config.alpha,
                                 base_config.bootstrap_size, perm_rng)
          .reject;
    }
  }
  throw validation_error("run_experiment: unknown method");
}

}  // namespace detail

// Runs every (grid point, method) cell of the plan. Rows come back in grid
// order (d, then param, then n) with methods in plan order. Rejection
// counts are deterministic in the plan seed regardless of worker count;
// per-trial wall-clock means are measurements and vary run to run unless
// the plan disables timing.
inline std::vector<result_row> run_experiment(const experiment_plan& plan,
                                              int workers = 1) {
  plan.validate();
  if (workers < 1) throw validation_error("run_experiment: workers must be >= 1");

  std::vector<result_row> rows;
  std::size_t grid_index = 0;
  for (int d : plan.d_grid) {
    for (double param : plan.param_grid) {
      const directional_model null_model = detail::scenario_null(plan, d);
      const directional_model alt_model =
          detail::scenario_alternative(plan, d, param);
      for (int n : plan.n_grid) {
        std::size_t method_index = 0;
        for (bench_method method : plan.methods) {
          const std::uint64_t cell_seed = mix_seed(
              mix_seed(plan.config.seed, grid_index), 0x100 + method_index);

          std::vector<char> rejected(plan.trials, 0);
          std::vector<double> seconds(plan.trials, 0.0);
          std::atomic<int> next{0};
          auto work = [&]() {
            while (true) {
              const int t = next.fetch_add(1);
              if (t >= plan.trials) break;
              const std::uint64_t trial_seed =
                  cell_seed ^ static_cast<std::uint64_t>(t);
              const auto t0 = std::chrono::steady_clock::now();
              rejected[t] = detail::run_trial(method, null_model, alt_model, n,
                                              plan.config, trial_seed)
                                ? 1
                                : 0;
              const auto t1 = std::chrono::steady_clock::now();
              seconds[t] = std::chrono::duration<double>(t1 - t0).count();
            }
          };
          if (workers == 1) {
            work();
          } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back(work);
            for (std::thread& th : pool) th.join();
          }

          int rejections = 0;
          double total_s = 0.0;
          for (int t = 0; t < plan.trials; ++t) {
            rejections += rejected[t];
            total_s += seconds[t];
          }
          result_row row;
          row.scenario = scenario_name(plan.scenario);
          row.method = method_name(method);
          row.n = n;
          row.d = d;
          row.param = param;
          row.rejection_rate =
              static_cast<double>(rejections) / static_cast<double>(plan.trials);
          row.trials = plan.trials;
          row.mean_runtime_s =
              plan.timing ? total_s / static_cast<double>(plan.trials) : 0.0;
          row.seed = plan.config.seed;
          rows.push_back(std::move(row));
          ++method_index;
        }
        ++grid_index;
      }
    }
  }
  return rows;
}

// Population dKSD^2(p, q) on the circle by tensorized trapezoid quadrature
// over the (periodic) chart, with the p-normalizer computed on the same
// grid so any constant rescaling of p cancels.
inline double dksd_quadrature_oracle(const directional_model& p,
                                     const directional_model& q, double kappa,
                                     int grid_points) {
  if (p.d != 2 || q.d != 2)
    throw dimension_error("dksd_quadrature_oracle: d=2 only");
  if (grid_points < 128)
    throw validation_error("dksd_quadrature_oracle: need >= 128 grid points");

  const std::size_t g = static_cast<std::size_t>(grid_points);
  const double dt = two_pi / static_cast<double>(g);
  std::vector<stein_point> pts;
  pts.reserve(g);
  std::vector<double> w(g);
  double z = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const spherical_coord t{{dt * static_cast<double>(i)}};
    pts.push_back(make_stein_point(q, t));
    w[i] = std::exp(log_density_unnormalized(p, pts.back().x));
    z += w[i] * dt;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = i; j < g; ++j) {
      const double h = h_q_pair(kappa, pts[i], pts[j]);
      s += (i == j ? 1.0 : 2.0) * h * w[i] * w[j] * dt * dt;
    }
  }
  return s / (z * z);
}

// One unit vector per line, comma-separated Cartesian components; lines
// starting with '#' are comments. Vectors more than 1e-6 away from unit
// norm are rejected with their row number; closer ones are renormalized.
inline std::vector<unit_vector> ingest_csv_stream(std::istream& in) {
  std::vector<unit_vector> out;
  std::string line;
  std::size_t row = 0;
  std::size_t d = 0;
  while (std::getline(in, line)) {
    ++row;
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        std::size_t used = 0;
        const double x = std::stod(tok, &used);
        while (used < tok.size() &&
               std::isspace(static_cast<unsigned char>(tok[used])))
          ++used;
        if (used != tok.size())
          throw format_error("bad number '" + tok + "'", row);
        v.push_back(x);
      } catch (const format_error&) {
        throw;
      } catch (const std::exception&) {
        throw format_error("bad number '" + tok + "'", row);
      }
    }
    if (v.size() < 2) throw format_error("need at least 2 components", row);
    if (d == 0) d = v.size();
    if (v.size() != d)
      throw format_error("expected " + std::to_string(d) + " components, got " +
                             std::to_string(v.size()),
                         row);
    const double norm = norm2(v);
    if (std::abs(norm - 1.0) > 1e-6) throw norm_error(row, std::abs(norm - 1.0));
    for (double& x : v) x /= norm;
    out.push_back(unit_vector{std::move(v)});
  }
  return out;
}

inline std::vector<unit_vector> ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  return ingest_csv_stream(in);
}

namespace detail {

inline std::string render_sig6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

inline std::string render_results_csv(const std::vector<result_row>& rows) {
  std::string out =
      "scenario,method,n,d,param,rejection_rate,trials,mean_runtime_s,seed\n";
  for (const result_row& r : rows) {
    out += r.scenario + ',' + r.method + ',' + std::to_string(r.n) + ',' +
           std::to_string(r.d) + ',' + detail::render_sig6(r.param) + ',' +
           detail::render_sig6(r.rejection_rate) + ',' +
           std::to_string(r.trials) + ',' +
           detail::render_sig6(r.mean_runtime_s) + ',' + std::to_string(r.seed) +
           '\n';
  }
  return out;
}

inline void emit_results(const std::vector<result_row>& rows,
                         const std::string& path) {
  if (rows.empty()) throw validation_error("emit_results: no rows");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << render_results_csv(rows);
  if (!out) throw io_error("write failed for '" + path + "'");
}

namespace detail {

inline std::vector<double> plan_reals(const std::string& value,
                                      std::size_t lineno) {
  std::vector<double> out;
  for (const std::string& tok : split(value, ',')) {
    try {
      out.push_back(parse_real(tok, 1));
    } catch (const parse_error& e) {
      throw parse_error(e.what(), lineno, 1);
    }
  }
  return out;
}

}  // namespace detail

// Plan files: one `key = value` directive per line, '#' comments.
inline experiment_plan parse_plan_stream(std::istream& in) {
  experiment_plan plan;
  plan.config.kappa_policy = kappa_auto{};
  kappa_auto auto_policy;
  bool kappa_fixed = false;
  double kappa_value = 0.0;

  std::string line;
  std::size_t lineno = 0;
  bool saw_d = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string s = detail::strip_spaces(line);
    if (s.empty()) continue;
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw parse_error("expected 'key = value'", lineno, 1);
    const std::string key = s.substr(0, eq);
    const std::string value = s.substr(eq + 1);
    const auto reals = [&]() { return detail::plan_reals(value, lineno); };
    const auto ints = [&]() {
      std::vector<int> out;
      for (double v : detail::plan_reals(value, lineno)) {
        if (v != std::floor(v))
          throw parse_error("expected integers for '" + key + "'", lineno, 1);
        out.push_back(static_cast<int>(v));
      }
      return out;
    };

    if (key == "scenario") {
      if (value == "uniform-circle")
        plan.scenario = scenario_kind::uniform_circle;
      else if (value == "vmf")
        plan.scenario = scenario_kind::vmf;
      else if (value == "fisher-bingham")
        plan.scenario = scenario_kind::fisher_bingham;
      else
        throw parse_error("unknown scenario '" + value + "'", lineno, 1);
    } else if (key == "n") {
      plan.n_grid = ints();
    } else if (key == "sigma" || key == "param") {
      plan.param_grid = reals();
    } else if (key == "d") {
      plan.d_grid = ints();
      saw_d = true;
    } else if (key == "trials") {
      plan.trials = ints().at(0);
    } else if (key == "methods") {
      plan.methods.clear();
      for (const std::string& tok : detail::split(value, ',')) {
        if (tok == "dKSDu") plan.methods.push_back(bench_method::dksd_u);
        else if (tok == "dKSDv") plan.methods.push_back(bench_method::dksd_v);
        else if (tok == "MMD") plan.methods.push_back(bench_method::mmd);
        else if (tok == "Rayleigh") plan.methods.push_back(bench_method::rayleigh);
        else if (tok == "Kuiper") plan.methods.push_back(bench_method::kuiper);
        else throw parse_error("unknown method '" + tok + "'", lineno, 1);
      }
    } else if (key == "alpha") {
      plan.config.alpha = reals().at(0);
    } else if (key == "bootstrap") {
      plan.config.bootstrap_size = ints().at(0);
    } else if (key == "kappa") {
      if (value == "auto") {
        kappa_fixed = false;
      } else {
        kappa_fixed = true;
        kappa_value = reals().at(0);
      }
    } else if (key == "grid") {
      auto_policy.grid = reals();
    } else if (key == "split") {
      auto_policy.split_fraction = reals().at(0);
    } else if (key == "lambda") {
      auto_policy.lambda = reals().at(0);
    } else if (key == "a") {
      plan.config.sign_change_prob = reals().at(0);
    } else if (key == "seed") {
      plan.config.seed = static_cast<std::uint64_t>(reals().at(0));
    } else if (key == "null") {
      plan.null_override = parse_model_spec(value);
    } else if (key == "alternative") {
      plan.alternative_override = parse_model_spec(value);
    } else if (key == "mu") {
      if (value == "e1") plan.mu = experiment_plan::mu_kind::e1;
      else if (value == "ones") plan.mu = experiment_plan::mu_kind::ones;
      else throw parse_error("mu must be 'e1' or 'ones'", lineno, 1);
    } else if (key == "timing") {
      if (value == "on") plan.timing = true;
      else if (value == "off") plan.timing = false;
      else throw parse_error("timing must be 'on' or 'off'", lineno, 1);
    } else {
      throw parse_error("unknown plan key '" + key + "'", lineno, 1);
    }
  }

  plan.config.kappa_policy =
      kappa_fixed ? std::variant<double, kappa_auto>(kappa_value)
                  : std::variant<double, kappa_auto>(auto_policy);
  if (!saw_d)
    plan.d_grid = {plan.scenario == scenario_kind::uniform_circle ? 2 : 3};
  plan.validate();
  return plan;
}

inline experiment_plan parse_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  return parse_plan_stream(in);
}

}  // namespace dksd
