#include <catch2/catch_amalgamated.hpp>

#include "hdfa/simulate.hpp"

using namespace hdfa;

namespace {

SimConfig tiny_t0_config() {
  SimConfig cfg;
  cfg.experiment = Experiment::TypeIH00;
  cfg.n_list = {120};
  cfg.epsilon_list = {{8, 24}, {12, 24}};
  cfg.generator.kind = GeneratorKind::IidNormal;
  cfg.replications = 60;
  cfg.seed = 4242;
  return cfg;
}

}  // namespace

TEST_CASE("dimension_for snaps exact rational powers") {
  CHECK(dimension_for(1000, {8, 24}) == 10);
  CHECK(dimension_for(1000, {16, 24}) == 100);
  CHECK(dimension_for(100, {12, 24}) == 10);
  CHECK(dimension_for(2000, {8, 24}) == 12);   // 2000^(1/3) = 12.599
  CHECK(dimension_for(1000, {20, 24}) == 316);
  CHECK(dimension_for(1000, {23, 24}) == 749);
  CHECK(dimension_for(500, {20, 24}) == 177);
}

TEST_CASE("reproducibility: identical config gives identical CSV at any worker count") {
  const SimConfig cfg = tiny_t0_config();
  const std::string serial = run_type1_grid(cfg, 1).to_csv();
  const std::string threaded = run_type1_grid(cfg, 4).to_csv();
  const std::string again = run_type1_grid(cfg, 2).to_csv();
  CHECK(serial == threaded);
  CHECK(serial == again);
}

TEST_CASE("CSV header and shape") {
  const SimGridResult res = run_type1_grid(tiny_t0_config(), 2);
  const std::string csv = res.to_csv();
  CHECK(csv.rfind("N,epsilon,p,mode,correction,metric,value,mc_se,replications,failed\n", 0) ==
        0);
  // two cells x (none, bartlett) x chisq
  CHECK(res.rows.size() == 4);
  for (const auto& row : res.rows) {
    CHECK_FALSE(row.skipped);
    CHECK(row.metric == "rejection_rate");
    CHECK(row.value >= 0.0);
    CHECK(row.value <= 1.0);
    CHECK(row.mc_se == Catch::Approx(std::sqrt(row.value * (1 - row.value) / row.replications))
                           .margin(1e-12));
  }
  const std::string txt = res.to_text();
  CHECK(txt.find("[row]") == 0);
  CHECK(txt.find("skipped = false") != std::string::npos);
}

TEST_CASE("grid points below the existence condition are skipped, not run") {
  SimConfig cfg = tiny_t0_config();
  cfg.n_list = {20};
  cfg.epsilon_list = {{3, 24}, {23, 24}};  // p=1 (too small) and p=17 (N < p+5)
  const SimGridResult res = run_type1_grid(cfg, 1);
  REQUIRE(res.rows.size() == 4);
  for (const auto& row : res.rows) {
    CHECK(row.skipped);
    CHECK(row.replications == 0);
    CHECK(std::isnan(row.value));
  }
}

TEST_CASE("empty grid: zero replications produce skipped rows, no error") {
  SimConfig cfg = tiny_t0_config();
  cfg.replications = 0;
  const SimGridResult res = run_type1_grid(cfg, 1);
  for (const auto& row : res.rows) CHECK(row.skipped);
  // and an empty config row set stays empty
  SimConfig none = cfg;
  none.n_list = {120};
  none.epsilon_list.clear();
  none.p_list = {4};
  const SimGridResult res2 = run_type1_grid(none, 1);
  CHECK(res2.rows.size() == 2);
}

TEST_CASE("type-I harness agrees with the library test path") {
  SimConfig cfg = tiny_t0_config();
  cfg.n_list = {150};
  cfg.epsilon_list = {{10, 24}};
  cfg.replications = 25;
  const SimGridResult res = run_type1_grid(cfg, 1);
  const int p = dimension_for(150, {10, 24});
  int rejects_none = 0, rejects_bart = 0;
  for (int r = 0; r < 25; ++r) {
    const GeneratorSpec spec =
        GeneratorSpec::iid_normal(cfg.seed, stream_for(0, static_cast<std::uint64_t>(r)));
    const DataMatrix d = sample(spec, 150, p);
    if (test_no_factor(d, Correction::None).rejected(cfg.alpha)) ++rejects_none;
    if (test_no_factor(d, Correction::Bartlett).rejected(cfg.alpha)) ++rejects_bart;
  }
  REQUIRE(res.rows.size() == 2);
  for (const auto& row : res.rows) {
    if (row.correction == "none") CHECK(row.value == Catch::Approx(rejects_none / 25.0));
    if (row.correction == "bartlett") CHECK(row.value == Catch::Approx(rejects_bart / 25.0));
  }
}

TEST_CASE("selection harness matches select_num_factors per correction") {
  SimConfig cfg;
  cfg.experiment = Experiment::Selection;
  cfg.n_list = {220};
  cfg.epsilon_list = {{8, 24}};
  cfg.generator.kind = GeneratorKind::FactorNormal;
  cfg.generator.k0 = 1;
  cfg.replications = 20;
  cfg.seed = 31337;
  const SimGridResult res = run_selection_grid(cfg, 2);
  const int p = dimension_for(220, {8, 24});
  int correct_bart = 0, over_bart = 0, under_bart = 0;
  for (int r = 0; r < 20; ++r) {
    const auto model = build_example_model(1, p);
    const GeneratorSpec spec = GeneratorSpec::factor_normal(
        model, cfg.seed, stream_for(0, static_cast<std::uint64_t>(r)));
    const SelectionResult sel =
        select_num_factors(sample(spec, 220, p), cfg.alpha, Correction::Bartlett);
    const int kh = sel.stopped_reason == StopReason::DfExhausted ? sel.k_hat + 1 : sel.k_hat;
    if (kh == 1) ++correct_bart;
    else if (kh > 1) ++over_bart;
    else ++under_bart;
  }
  bool found = false;
  for (const auto& row : res.rows) {
    if (row.correction != "bartlett") continue;
    found = true;
    if (row.metric == "correct_rate") CHECK(row.value == Catch::Approx(correct_bart / 20.0));
    if (row.metric == "over_rate") CHECK(row.value == Catch::Approx(over_bart / 20.0));
    if (row.metric == "under_rate") CHECK(row.value == Catch::Approx(under_bart / 20.0));
  }
  CHECK(found);
}

TEST_CASE("histogram summary carries the chi-square reference moments") {
  SimConfig cfg;
  cfg.experiment = Experiment::Histogram;
  cfg.n_list = {200};
  cfg.p_list = {6};
  cfg.generator.kind = GeneratorKind::IidNormal;
  cfg.replications = 400;
  cfg.seed = 99;
  const SimGridResult res = run_histogram_summary(cfg, 2);
  double mean_none = 0, ref_mean = -1, ref_var = -1;
  for (const auto& row : res.rows) {
    if (row.correction == "none" && row.metric == "mean") mean_none = row.value;
    if (row.correction == "none" && row.metric == "ref_mean") ref_mean = row.value;
    if (row.correction == "none" && row.metric == "ref_var") ref_var = row.value;
  }
  CHECK(ref_mean == 15.0);  // f0 = 6*5/2
  CHECK(ref_var == 30.0);
  // at N=200, p=6 the chi-square approximation is decent: mean within 8%
  CHECK(mean_none == Catch::Approx(15.0).epsilon(0.08));
  // quantile ordering
  double q05 = 0, q95 = 0;
  for (const auto& row : res.rows)
    if (row.correction == "none") {
      if (row.metric == "q05") q05 = row.value;
      if (row.metric == "q95") q95 = row.value;
    }
  CHECK(q05 < q95);
}

TEST_CASE("config validation is exhaustive") {
  SimConfig cfg;
  cfg.n_list = {};
  cfg.replications = -1;
  cfg.alpha = 2.0;
  cfg.corrections.clear();
  const auto errs = cfg.validate();
  CHECK(errs.size() >= 4);
}

TEST_CASE("tprime experiment validates its generator") {
  SimConfig cfg;
  cfg.experiment = Experiment::TypeITPrime;
  cfg.n_list = {100};
  cfg.epsilon_list = {{8, 24}};
  cfg.generator.kind = GeneratorKind::IidT;
  CHECK_FALSE(cfg.validate().empty());
  cfg.generator.kind = GeneratorKind::IidNormal;
  CHECK(cfg.validate().empty());
}
