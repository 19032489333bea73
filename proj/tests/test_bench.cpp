#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dksd/bench.hpp"

namespace {

using dksd::experiment_plan;
using dksd::result_row;
using dksd::unit_vector;

TEST(PlanParsing, FullPlanRoundTrip) {
  std::istringstream in(R"(# table-1 style calibration run
scenario = uniform-circle
n = 30, 50, 100
sigma = 0
trials = 25
methods = dKSDu, dKSDv, Rayleigh, Kuiper, MMD
alpha = 0.01
bootstrap = 1000
kappa = auto
grid = 0.5, 1, 2
split = 0.2
lambda = 0.01
seed = 42
timing = off
)");
  const experiment_plan plan = dksd::parse_plan_stream(in);
  EXPECT_EQ(plan.scenario, dksd::scenario_kind::uniform_circle);
  EXPECT_EQ(plan.n_grid, (std::vector<int>{30, 50, 100}));
  EXPECT_EQ(plan.param_grid, std::vector<double>{0.0});
  EXPECT_EQ(plan.d_grid, std::vector<int>{2});  // default for the scenario
  EXPECT_EQ(plan.trials, 25);
  EXPECT_EQ(plan.methods.size(), 5u);
  EXPECT_EQ(plan.config.seed, 42u);
  EXPECT_FALSE(plan.timing);
  const auto& pol = std::get<dksd::kappa_auto>(plan.config.kappa_policy);
  EXPECT_EQ(pol.grid, (std::vector<double>{0.5, 1.0, 2.0}));
}

TEST(PlanParsing, FixedKappaAndOverrides) {
  std::istringstream in(R"(scenario = vmf
n = 50
sigma = 0.5, 1
d = 3
trials = 5
methods = dKSDu
kappa = 2.0
seed = 1
null = vmf:mu=1,0,0;kappa=1
alternative = vmf:mu=1,0,0;kappa=2
)");
  const experiment_plan plan = dksd::parse_plan_stream(in);
  EXPECT_EQ(std::get<double>(plan.config.kappa_policy), 2.0);
  ASSERT_TRUE(plan.null_override.has_value());
  EXPECT_EQ(plan.null_override->kappa, 1.0);
  ASSERT_TRUE(plan.alternative_override.has_value());
  EXPECT_EQ(plan.alternative_override->kappa, 2.0);
}

TEST(PlanParsing, Errors) {
  {
    std::istringstream in("scenario = banana\n");
    EXPECT_THROW(dksd::parse_plan_stream(in), dksd::parse_error);
  }
  {
    std::istringstream in("n = 100\nmethods = dKSDx\ntrials = 5\n");
    EXPECT_THROW(dksd::parse_plan_stream(in), dksd::parse_error);
  }
  {
    // Rayleigh outside the uniform-circle scenario
    std::istringstream in(
        "scenario = vmf\nn = 50\ntrials = 5\nmethods = Rayleigh\n");
    EXPECT_THROW(dksd::parse_plan_stream(in), dksd::validation_error);
  }
  {
    std::istringstream in("scenario = vmf\ntrials = 5\nmethods = dKSDu\n");
    EXPECT_THROW(dksd::parse_plan_stream(in), dksd::validation_error);  // no n
  }
}

TEST(Scenarios, FisherBinghamNullMatrixMatchesPaperShape) {
  experiment_plan plan;
  plan.scenario = dksd::scenario_kind::fisher_bingham;
  const dksd::directional_model null3 = dksd::detail::scenario_null(plan, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_EQ(null3.a(i, j), i == j ? 2.0 : 1.0);
  const dksd::directional_model alt =
      dksd::detail::scenario_alternative(plan, 3, 0.75);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_EQ(alt.a(i, j), (i == j ? 2.0 : 1.0) + 0.75);
}

TEST(QuadratureOracle, NullCaseVanishes) {
  const auto q = dksd::vmf_model(unit_vector{{1.0, 0.0}}, 1.0);
  EXPECT_LT(std::abs(dksd::dksd_quadrature_oracle(q, q, 1.0, 512)), 1e-6);
}

TEST(QuadratureOracle, SeparatedPairsArePositive) {
  const auto uni = dksd::uniform_model(2);
  const auto vmf_half = dksd::vmf_model(unit_vector{{1.0, 0.0}}, 0.5);
  const auto vmf1 = dksd::vmf_model(unit_vector{{1.0, 0.0}}, 1.0);
  const auto vmf2 = dksd::vmf_model(unit_vector{{1.0, 0.0}}, 2.0);
  EXPECT_GT(dksd::dksd_quadrature_oracle(uni, vmf_half, 1.0, 512), 1e-3);
  EXPECT_GT(dksd::dksd_quadrature_oracle(vmf1, vmf2, 1.0, 512), 1e-3);
}

TEST(QuadratureOracle, RichardsonRefinementAgrees) {
  const auto p = dksd::vmf_model(unit_vector{{1.0, 0.0}}, 1.0);
  const auto q = dksd::uniform_model(2);
  const double coarse = dksd::dksd_quadrature_oracle(p, q, 1.0, 256);
  const double fine = dksd::dksd_quadrature_oracle(p, q, 1.0, 512);
  EXPECT_LT(std::abs(coarse - fine), 1e-6);
}

TEST(QuadratureOracle, InvariantToRescalingP) {
  auto p = dksd::vmf_model(unit_vector{{0.0, 1.0}}, 1.5);
  const auto q = dksd::uniform_model(2);
  const double base = dksd::dksd_quadrature_oracle(p, q, 0.7, 256);
  p.log_scale = 4.0;  // p~ -> c p~ cancels through the normalizer
  const double scaled = dksd::dksd_quadrature_oracle(p, q, 0.7, 256);
  EXPECT_NEAR(scaled / base, 1.0, 1e-10);
}

TEST(QuadratureOracle, RejectsBadInput) {
  const auto q3 = dksd::uniform_model(3);
  EXPECT_THROW(dksd::dksd_quadrature_oracle(q3, q3, 1.0, 512),
               dksd::dimension_error);
  const auto q2 = dksd::uniform_model(2);
  EXPECT_THROW(dksd::dksd_quadrature_oracle(q2, q2, 1.0, 64),
               dksd::validation_error);
}

TEST(IngestCsv, ParsesVectorsAndComments) {
  std::istringstream in("# comment header\n1,0,0\n0,1,0\n");
  const std::vector<unit_vector> v = dksd::ingest_csv_stream(in);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0][0], 1.0);
  EXPECT_EQ(v[1][1], 1.0);

  std::istringstream in2("0.6,0.8\n");
  const std::vector<unit_vector> w = dksd::ingest_csv_stream(in2);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NEAR(w[0][0], 0.6, 1e-15);
}

TEST(IngestCsv, NormAndFormatErrors) {
  {
    std::istringstream in("1,1\n");
    try {
      dksd::ingest_csv_stream(in);
      FAIL() << "expected norm_error";
    } catch (const dksd::norm_error& e) {
      EXPECT_EQ(e.row, 1u);
      EXPECT_NEAR(e.deviation, std::sqrt(2.0) - 1.0, 1e-12);
    }
  }
  {
    std::istringstream in("1,0\nx,1\n");
    try {
      dksd::ingest_csv_stream(in);
      FAIL() << "expected format_error";
    } catch (const dksd::format_error& e) {
      EXPECT_EQ(e.row, 2u);
    }
  }
  {
    std::istringstream in("1,0\n1,0,0\n");
    EXPECT_THROW(dksd::ingest_csv_stream(in), dksd::format_error);
  }
  EXPECT_THROW(dksd::ingest_csv("/no/such/file.csv"), dksd::io_error);
}

TEST(IngestCsv, RenormalizesNearUnit) {
  std::istringstream in("1.0000001,0\n");
  const std::vector<unit_vector> v = dksd::ingest_csv_stream(in);
  EXPECT_EQ(dksd::norm2(v[0].coords), 1.0);
}

experiment_plan tiny_plan() {
  experiment_plan plan;
  plan.scenario = dksd::scenario_kind::uniform_circle;
  plan.n_grid = {30};
  plan.param_grid = {0.0, 1.0};
  plan.d_grid = {2};
  plan.trials = 8;
  plan.methods = {dksd::bench_method::rayleigh, dksd::bench_method::dksd_v};
  plan.config.alpha = 0.05;
  plan.config.bootstrap_size = 100;
  plan.config.kappa_policy = 1.0;
  plan.config.seed = 31;
  plan.timing = false;
  return plan;
}

TEST(RunExperiment, DeterministicAcrossWorkerCounts) {
  const experiment_plan plan = tiny_plan();
  const std::vector<result_row> serial = dksd::run_experiment(plan, 1);
  const std::vector<result_row> parallel = dksd::run_experiment(plan, 4);
  ASSERT_EQ(serial.size(), parallel.size());
  ASSERT_EQ(serial.size(), 4u);  // 2 grid points x 2 methods
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].rejection_rate, parallel[i].rejection_rate);
    EXPECT_EQ(serial[i].method, parallel[i].method);
    EXPECT_EQ(serial[i].n, parallel[i].n);
    EXPECT_EQ(serial[i].param, parallel[i].param);
  }
  EXPECT_EQ(dksd::render_results_csv(serial), dksd::render_results_csv(parallel));
}

TEST(RunExperiment, RowOrderAndPowerSanity) {
  const experiment_plan plan = tiny_plan();
  const std::vector<result_row> rows = dksd::run_experiment(plan, 2);
  // Grid order: param 0 then param 1; methods in plan order inside.
  EXPECT_EQ(rows[0].param, 0.0);
  EXPECT_EQ(rows[0].method, "Rayleigh");
  EXPECT_EQ(rows[1].method, "dKSDv");
  EXPECT_EQ(rows[2].param, 1.0);
  // Strong alternative: Rayleigh power at kappa=1, n=30 should be visible.
  EXPECT_GT(rows[2].rejection_rate, rows[0].rejection_rate - 0.2);
}

TEST(RunExperiment, RuntimeAccountingCloseToWallClock) {
  experiment_plan plan = tiny_plan();
  plan.param_grid = {0.0};
  plan.methods = {dksd::bench_method::dksd_v};
  plan.n_grid = {80};
  plan.trials = 12;
  plan.config.bootstrap_size = 500;
  plan.timing = true;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<result_row> rows = dksd::run_experiment(plan, 1);
  const auto t1 = std::chrono::steady_clock::now();
  const double wall = std::chrono::duration<double>(t1 - t0).count();
  const double accounted = rows[0].mean_runtime_s * plan.trials;
  EXPECT_NEAR(accounted, wall, 0.10 * wall);
}

TEST(EmitResults, StableBytesAndParseBack) {
  const experiment_plan plan = tiny_plan();
  const std::vector<result_row> rows = dksd::run_experiment(plan, 1);
  const std::string csv = dksd::render_results_csv(rows);
  EXPECT_EQ(csv, dksd::render_results_csv(dksd::run_experiment(plan, 3)));

  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "scenario,method,n,d,param,rejection_rate,trials,mean_runtime_s,seed");
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> cells;
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    ASSERT_EQ(cells.size(), 9u);
    const double rate = std::stod(cells[5]);
    EXPECT_NEAR(rate, rows[i].rejection_rate, 5e-7);
    ++i;
  }
  EXPECT_EQ(i, rows.size());

  const std::string path = "/tmp/dksd_test_results.csv";
  dksd::emit_results(rows, path);
  std::ifstream back(path, std::ios::binary);
  std::stringstream contents;
  contents << back.rdbuf();
  EXPECT_EQ(contents.str(), csv);
  std::remove(path.c_str());
  EXPECT_THROW(dksd::emit_results({}, path), dksd::validation_error);
}

}  // namespace
