// Command-line front end: goodness-of-fit tests, samplers, the d=2
// quadrature oracle, kernel selection, and the benchmark runner.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dksd/dksd.hpp"

namespace {

struct test_args {
  std::string model;
  std::string data;
  std::string method = "u";
  double alpha = 0.01;
  int bootstrap = 1000;
  std::string kappa = "auto";
  std::uint64_t seed = 0;
};

int run_test(const test_args& args) {
  const dksd::directional_model model = dksd::parse_model_spec(args.model);
  const std::vector<dksd::unit_vector> data = dksd::ingest_csv(args.data);

  dksd::test_config cfg;
  cfg.alpha = args.alpha;
  cfg.bootstrap_size = args.bootstrap;
  cfg.seed = args.seed;
  if (args.kappa == "auto") {
    cfg.kappa_policy = dksd::kappa_auto{};
  } else {
    cfg.kappa_policy = std::stod(args.kappa);
  }

  dksd::test_outcome out;
  if (args.method == "u") {
    out = dksd::test_dksd_u(data, model, cfg);
  } else if (args.method == "v") {
    out = dksd::test_dksd_v(data, model, cfg);
  } else {
    throw dksd::validation_error("--method must be 'u' or 'v'");
  }

  std::printf("statistic %.12g\n", out.statistic);
  std::printf("threshold %.12g\n", out.threshold);
  std::printf("kappa     %.12g\n", out.selected_kappa);
  std::printf("n_used    %zu\n", out.n_used);
  std::printf("decision  %s\n", out.reject ? "reject" : "no-reject");
  return out.reject ? 2 : 0;
}

struct bench_args {
  std::string plan;
  std::string out;
  int workers = 1;
};

int run_bench(const bench_args& args) {
  const dksd::experiment_plan plan = dksd::parse_plan_file(args.plan);
  const std::vector<dksd::result_row> rows =
      dksd::run_experiment(plan, args.workers);
  dksd::emit_results(rows, args.out);
  std::printf("wrote %zu rows to %s\n", rows.size(), args.out.c_str());
  return 0;
}

struct sample_args {
  std::string model;
  int n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_sample(const sample_args& args) {
  const dksd::directional_model model = dksd::parse_model_spec(args.model);
  dksd::splitmix64 rng(args.seed);
  std::vector<dksd::unit_vector> samples;
  double acceptance = 1.0;
  switch (model.kind) {
    case dksd::model_kind::uniform:
      samples = dksd::sample_uniform_sphere(model.d, args.n, rng);
      break;
    case dksd::model_kind::von_mises_fisher: {
      auto res = dksd::sample_vmf(model.mu, model.kappa, args.n, rng);
      samples = std::move(res.samples);
      acceptance = res.report.acceptance_rate;
      break;
    }
    case dksd::model_kind::fisher_bingham: {
      for (double b : model.b)
        if (b != 0.0)
          throw dksd::validation_error(
              "sample: Fisher-Bingham with a linear term is unsupported");
      auto res = dksd::sample_fisher_bingham_quadratic(model.a, args.n, rng);
      samples = std::move(res.samples);
      acceptance = res.report.acceptance_rate;
      break;
    }
  }

  std::ofstream out(args.out, std::ios::binary);
  if (!out) throw dksd::io_error("cannot write '" + args.out + "'");
  out << "# model=" << dksd::render_model_spec(model) << " n=" << args.n
      << " seed=" << args.seed << "\n";
  char buf[32];
  for (const dksd::unit_vector& x : samples) {
    for (std::size_t k = 0; k < x.dim(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", x[k]);
      out << (k ? "," : "") << buf;
    }
    out << "\n";
  }
  std::printf("wrote %d samples to %s (acceptance rate %.4g)\n", args.n,
              args.out.c_str(), acceptance);
  return 0;
}

struct select_args {
  std::string model;
  std::string data;
  std::string grid;
  double lambda = 0.01;
  double split = 0.2;
  std::uint64_t seed = 0;
};

int run_select_kappa(const select_args& args) {
  const dksd::directional_model model = dksd::parse_model_spec(args.model);
  const std::vector<dksd::unit_vector> data = dksd::ingest_csv(args.data);
  std::vector<double> grid;
  if (args.grid.empty()) {
    grid = dksd::default_kappa_grid();
  } else {
    for (const std::string& tok : dksd::detail::split(args.grid, ','))
      grid.push_back(std::stod(tok));
  }
  dksd::splitmix64 rng(args.seed);
  const double kappa =
      dksd::select_kappa(data, model, grid, args.split, args.lambda, rng);
  std::printf("%.12g\n", kappa);
  return 0;
}

struct oracle_args {
  std::string p;
  std::string q;
  double kappa = 1.0;
  int grid_points = 512;
};

int run_oracle(const oracle_args& args) {
  const dksd::directional_model p = dksd::parse_model_spec(args.p);
  const dksd::directional_model q = dksd::parse_model_spec(args.q);
  const double v =
      dksd::dksd_quadrature_oracle(p, q, args.kappa, args.grid_points);
  std::printf("%.12g\n", v);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel Stein goodness-of-fit tests for directional data"};
  app.require_subcommand(1);

  test_args targs;
  CLI::App* test = app.add_subcommand(
      "test", "Run a dKSD goodness-of-fit test against a null model");
  test->add_option("--model", targs.model, "null model spec")->required();
  test->add_option("--data", targs.data, "CSV of unit vectors")->required();
  test->add_option("--method", targs.method, "u (spectral) or v (wild bootstrap)");
  test->add_option("--alpha", targs.alpha, "significance level");
  test->add_option("--bootstrap", targs.bootstrap, "bootstrap sample size");
  test->add_option("--kappa", targs.kappa, "kernel concentration or 'auto'");
  test->add_option("--seed", targs.seed, "RNG seed");

  bench_args bargs;
  CLI::App* bench =
      app.add_subcommand("bench", "Run a benchmark plan and write a CSV");
  bench->add_option("--plan", bargs.plan, "plan file")->required();
  bench->add_option("--out", bargs.out, "output CSV path")->required();
  bench->add_option("--workers", bargs.workers, "worker threads");

  sample_args sargs;
  CLI::App* sample =
      app.add_subcommand("sample", "Draw from a directional model");
  sample->add_option("--model", sargs.model, "model spec")->required();
  sample->add_option("--n", sargs.n, "number of draws")->required();
  sample->add_option("--seed", sargs.seed, "RNG seed");
  sample->add_option("--out", sargs.out, "output CSV path")->required();

  select_args kargs;
  CLI::App* select = app.add_subcommand(
      "select-kappa", "Grid-search the kernel concentration on a data split");
  select->add_option("--model", kargs.model, "null model spec")->required();
  select->add_option("--data", kargs.data, "CSV of unit vectors")->required();
  select->add_option("--grid", kargs.grid, "comma-separated kappa grid");
  select->add_option("--lambda", kargs.lambda, "regularizer");
  select->add_option("--split", kargs.split, "selection split fraction");
  select->add_option("--seed", kargs.seed, "RNG seed");

  oracle_args oargs;
  CLI::App* oracle = app.add_subcommand(
      "oracle", "Quadrature value of dKSD^2(p, q) on the circle");
  oracle->add_option("--p", oargs.p, "data model spec (d=2)")->required();
  oracle->add_option("--q", oargs.q, "null model spec (d=2)")->required();
  oracle->add_option("--kappa", oargs.kappa, "kernel concentration");
  oracle->add_option("--grid-points", oargs.grid_points, "quadrature grid size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help exits clean, parse errors do not
  }

  try {
    if (*test) return run_test(targs);
    if (*bench) return run_bench(bargs);
    if (*sample) return run_sample(sargs);
    if (*select) return run_select_kappa(kargs);
    if (*oracle) return run_oracle(oargs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
