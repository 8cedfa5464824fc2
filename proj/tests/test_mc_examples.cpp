// Seeded Monte Carlo checks at documented design points.  Bands are wide
// (+-3 binomial standard errors) and seeds are pinned, so these are
// deterministic.

#include <catch2/catch_amalgamated.hpp>

#include "hdfa/simulate.hpp"

using namespace hdfa;

TEST_CASE("T0 rejection rate at N=1000, p=20 stays near the nominal level", "[mc]") {
  const int reps = 5000;
  std::vector<std::uint8_t> rej(reps, 0);
  detail::parallel_for(reps, 2, [&](int r) {
    const DataMatrix d =
        sample(GeneratorSpec::iid_normal(12001, stream_for(0, r)), 1000, 20);
    rej[r] = test_no_factor(d, Correction::None).rejected(0.05) ? 1 : 0;
  });
  const double rate =
      static_cast<double>(std::count(rej.begin(), rej.end(), 1)) / reps;
  CHECK(rate >= 0.041);
  CHECK(rate <= 0.059);
}

TEST_CASE("Tk rejection rate for one-factor data at a safe design point", "[mc]") {
  const int reps = 1000;
  const int p = 10;  // eps = 1/3 at N=1000
  const auto model = build_example_model(1, p);
  std::vector<std::uint8_t> rej(reps, 0);
  detail::parallel_for(reps, 2, [&](int r) {
    const DataMatrix d =
        sample(GeneratorSpec::factor_normal(model, 12002, stream_for(1, r)), 1000, p);
    rej[r] = test_k_factor(d, 1, Correction::None).rejected(0.05) ? 1 : 0;
  });
  const double rate =
      static_cast<double>(std::count(rej.begin(), rej.end(), 1)) / reps;
  CHECK(rate >= 0.035);
  CHECK(rate <= 0.065);
}

TEST_CASE("T' rejection rate with the true covariance at N=2000, p=12", "[mc]") {
  const int reps = 1000;
  const auto model = build_example_model(1, 12);
  const Matrix sigma = model.implied_sigma();
  std::vector<std::uint8_t> rej(reps, 0);
  detail::parallel_for(reps, 2, [&](int r) {
    const DataMatrix d =
        sample(GeneratorSpec::factor_normal(model, 12003, stream_for(2, r)), 2000, 12);
    rej[r] = test_given_sigma(d, sigma, Correction::None).rejected(0.05) ? 1 : 0;
  });
  const double rate =
      static_cast<double>(std::count(rej.begin(), rej.end(), 1)) / reps;
  CHECK(rate >= 0.035);
  CHECK(rate <= 0.065);
}

TEST_CASE("histogram mean of rho0*T0 matches f0 at N=1000, p=20", "[mc]") {
  SimConfig cfg;
  cfg.experiment = Experiment::Histogram;
  cfg.n_list = {1000};
  cfg.p_list = {20};
  cfg.generator.kind = GeneratorKind::IidNormal;
  cfg.replications = 5000;
  cfg.corrections = {Correction::Bartlett};
  cfg.seed = 12004;
  const SimGridResult res = run_histogram_summary(cfg, 2);
  double mean = 0;
  for (const auto& row : res.rows)
    if (row.metric == "mean") mean = row.value;
  const double f0 = 190.0;
  const double tol = 3.0 * std::sqrt(2.0 * f0 / 5000.0) * 1.1;
  CHECK(mean == Catch::Approx(f0).margin(tol));
}

TEST_CASE("histogram at p=500: mean T0 > mean rho0*T0 > f0", "[mc]") {
  SimConfig cfg;
  cfg.experiment = Experiment::Histogram;
  cfg.n_list = {1000};
  cfg.p_list = {500};
  cfg.generator.kind = GeneratorKind::IidNormal;
  cfg.replications = 120;
  cfg.seed = 12005;
  const SimGridResult res = run_histogram_summary(cfg, 2);
  double mean_none = 0, mean_bart = 0, f0 = 0;
  for (const auto& row : res.rows) {
    if (row.metric == "mean" && row.correction == "none") mean_none = row.value;
    if (row.metric == "mean" && row.correction == "bartlett") mean_bart = row.value;
    if (row.metric == "ref_mean") f0 = row.value;
  }
  CHECK(f0 == 500.0 * 499.0 / 2.0);
  CHECK(mean_none > mean_bart);
  CHECK(mean_bart > f0);
}

TEST_CASE("selection on identity data picks zero factors about 1-alpha of the time", "[mc]") {
  const int reps = 200;
  std::vector<std::uint8_t> zero(reps, 0);
  detail::parallel_for(reps, 2, [&](int r) {
    const DataMatrix d =
        sample(GeneratorSpec::iid_normal(12006, stream_for(3, r)), 2000, 4);
    zero[r] = select_num_factors(d, 0.05, Correction::None).k_hat == 0 ? 1 : 0;
  });
  const double rate =
      static_cast<double>(std::count(zero.begin(), zero.end(), 1)) / reps;
  CHECK(rate >= 0.90);
}

TEST_CASE("rejection rate is non-decreasing in epsilon (uncorrected, N=1000)", "[mc]") {
  SimConfig cfg;
  cfg.experiment = Experiment::TypeIH00;
  cfg.n_list = {1000};
  cfg.epsilon_list = {{8, 24}, {12, 24}, {16, 24}, {20, 24}};
  cfg.generator.kind = GeneratorKind::IidNormal;
  cfg.replications = 150;
  cfg.corrections = {Correction::None};
  cfg.seed = 12007;
  const SimGridResult res = run_type1_grid(cfg, 2);
  REQUIRE(res.rows.size() == 4);
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    const double slack = 2.0 * (res.rows[i - 1].mc_se + res.rows[i].mc_se);
    CHECK(res.rows[i].value >= res.rows[i - 1].value - slack);
  }
}
