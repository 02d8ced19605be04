#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "coordsim/estimator.hpp"

using namespace coordsim;

namespace {

// Synthetic population: random configurations labeled by a known linear model
// over the standardized terms, plus Gaussian noise.
std::vector<RunRecord> synthetic_records(int n, double noise_sd,
                                         std::uint64_t seed,
                                         const std::array<double, kNumScalingTerms>*
                                             truth = nullptr) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> arch_pick(0, 4);
  std::normal_distribution<double> noise(0.0, noise_sd);
  const Topology topos[] = {Topology::SAS, Topology::Independent,
                            Topology::Decentralized, Topology::Centralized,
                            Topology::Hybrid};

  std::vector<RunRecord> out;
  for (int i = 0; i < n; ++i) {
    RunRecord r;
    r.architecture = topos[arch_pick(rng)];
    r.features.intelligence = 40.0 + 35.0 * u(rng);
    r.features.tool_count = 1 + int(u(rng) * 19);
    r.features.agent_count = r.architecture == Topology::SAS ? 1 : 2 + int(u(rng) * 4);
    r.features.overhead_pct =
        r.architecture == Topology::SAS ? 0.0 : 600.0 * u(rng);
    r.features.message_density = r.architecture == Topology::SAS ? 0.0 : u(rng);
    r.features.redundancy = u(rng);
    r.features.efficiency = 0.05 + 0.45 * u(rng);
    r.features.error_amplification =
        r.architecture == Topology::SAS ? 1.0 : 0.5 + 19.5 * u(rng);
    r.features.single_agent_baseline = u(rng);
    r.experiment_id = "exp" + std::to_string(i % 25);
    r.performance = noise(rng);
    out.push_back(r);
  }
  // Label with the standardized truth so recovery is well-posed.
  if (truth) {
    Eigen::MatrixXd raw = raw_matrix(out, ModelSpec::full);
    auto stats = compute_stats(raw, ModelSpec::full, spec_column_names(ModelSpec::full));
    Eigen::MatrixXd Z = apply_stats(raw, stats);
    for (int i = 0; i < int(out.size()); ++i) {
      double y = 0;
      for (int j = 0; j < kNumScalingTerms; ++j) y += (*truth)[j] * Z(i, j);
      out[i].performance += y;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("nested specs carry the published parameter counts") {
  CHECK(spec_column_names(ModelSpec::capability_task).size() == 4);
  CHECK(spec_column_names(ModelSpec::plus_architecture).size() == 10);
  CHECK(spec_column_names(ModelSpec::plus_baseline).size() == 11);
  CHECK(spec_column_names(ModelSpec::full).size() == 20);
}

TEST_CASE("nested specs grow monotonically") {
  auto s1 = spec_column_names(ModelSpec::capability_task);
  auto s2 = spec_column_names(ModelSpec::plus_architecture);
  auto s3 = spec_column_names(ModelSpec::plus_baseline);
  for (const auto& c : s1)
    CHECK(std::find(s2.begin(), s2.end(), c) != s2.end());
  for (const auto& c : s2)
    CHECK(std::find(s3.begin(), s3.end(), c) != s3.end());
}

TEST_CASE("dummies and intercept stay un-standardized") {
  auto mask = spec_standardize_mask(ModelSpec::plus_architecture);
  auto names = spec_column_names(ModelSpec::plus_architecture);
  for (std::size_t i = 0; i < names.size(); ++i) {
    bool should = names[i] != "intercept" && names[i].rfind("arch_", 0) != 0;
    CHECK(mask[i] == should);
  }
}

TEST_CASE("ols recovers a known linear relation exactly without noise") {
  std::array<double, kNumScalingTerms> truth{};
  truth[0] = 0.4;
  truth[1] = 0.2;
  truth[3] = -0.3;
  truth[10] = 0.25;
  auto records = synthetic_records(300, 0.0, 11, &truth);
  DesignMatrix dm = build_design_matrix(records, ModelSpec::full);
  OlsFit fit = fit_ols(dm.X, dm.y, &dm.column_names);
  for (int j = 0; j < kNumScalingTerms; ++j)
    CHECK(fit.beta(j) == Catch::Approx(truth[j]).margin(1e-8));
}

TEST_CASE("rank deficiency names the collinear column") {
  auto records = synthetic_records(100, 0.1, 3);
  // duplicate redundancy into message density so two columns coincide
  for (auto& r : records) r.features.message_density = r.features.redundancy;
  DesignMatrix dm = [&] {
    // bypass build_design_matrix's zero-variance check path: columns vary but
    // are linearly dependent after standardization
    return build_design_matrix(records, ModelSpec::full);
  }();
  try {
    fit_ols(dm.X, dm.y, &dm.column_names);
    FAIL("expected rank deficiency");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find("collinear") != std::string::npos);
  }
}

TEST_CASE("zero-variance columns are reported by name") {
  auto records = synthetic_records(50, 0.1, 5);
  for (auto& r : records) r.features.redundancy = 0.37;
  try {
    build_design_matrix(records, ModelSpec::full);
    FAIL("expected zero-variance error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("redundancy") != std::string::npos);
  }
}

TEST_CASE("r squared and aic formulas") {
  Eigen::VectorXd y(4), pred(4);
  y << 1, 2, 3, 4;
  pred << 1, 2, 3, 4;
  CHECK(r_squared(y, pred) == Catch::Approx(1.0));
  pred << 2.5, 2.5, 2.5, 2.5;
  CHECK(r_squared(y, pred) == Catch::Approx(0.0));
  CHECK(aic(2.0, 100, 5) == Catch::Approx(100.0 * std::log(0.02) + 10.0));
}

TEST_CASE("cross validation partitions experiments, not rows") {
  std::array<double, kNumScalingTerms> truth{};
  truth[0] = 0.5;
  truth[3] = 0.2;
  auto records = synthetic_records(400, 0.05, 17, &truth);
  auto cv = kfold_cv(records, 5, ModelSpec::capability_task);
  CHECK(cv.rmse > 0);
  CHECK(cv.r2_cv <= 1.0);

  // leakage probe: an experiment-keyed shift that CV must not exploit.
  // With experiment-level folds the held-out experiments' shifts are
  // unlearnable, so CV error is bounded below by the shift scale.
  std::mt19937_64 rng(4);
  std::map<std::string, double> shift;
  for (auto& r : records) {
    if (!shift.count(r.experiment_id))
      shift[r.experiment_id] = (rng() % 2 ? 1.0 : -1.0) * 0.5;
    r.performance += shift[r.experiment_id];
  }
  auto cv_shifted = kfold_cv(records, 5, ModelSpec::capability_task);
  CHECK(cv_shifted.rmse >= 0.3);
}

TEST_CASE("cross validation rejects degenerate fold setups") {
  auto records = synthetic_records(40, 0.1, 9);
  for (auto& r : records) r.experiment_id = "only_one";
  CHECK_THROWS_AS(kfold_cv(records, 5, ModelSpec::capability_task), DataError);
  auto no_id = synthetic_records(40, 0.1, 9);
  no_id[0].experiment_id.clear();
  CHECK_THROWS_AS(kfold_cv(no_id, 5, ModelSpec::capability_task), DataError);
}

TEST_CASE("bootstrap standard errors are seeded and positive") {
  std::array<double, kNumScalingTerms> truth{};
  truth[0] = 0.4;
  truth[1] = 0.15;
  auto records = synthetic_records(200, 0.05, 21, &truth);
  auto se1 = bootstrap_se(records, 200, ModelSpec::capability_task, 77);
  auto se2 = bootstrap_se(records, 200, ModelSpec::capability_task, 77);
  CHECK(se1 == se2);
  for (double s : se1) CHECK(s > 0);
  auto se3 = bootstrap_se(records, 200, ModelSpec::capability_task, 78);
  CHECK(se1 != se3);
}

TEST_CASE("model comparison reports all four specs") {
  std::array<double, kNumScalingTerms> truth{};
  truth[0] = 0.45;
  truth[3] = 0.3;
  truth[10] = 0.2;
  truth[17] = -0.25;
  auto records = synthetic_records(400, 0.05, 31, &truth);
  auto rows = compare_models(records, 5);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].k_params == 4);
  CHECK(rows[1].k_params == 10);
  CHECK(rows[2].k_params == 11);
  CHECK(rows[3].k_params == 20);
  // the generating model is the full one, so it should fit best in-sample
  CHECK(rows[3].r2_train >= rows[0].r2_train);
}

TEST_CASE("fit_model produces vif diagnostics and an exportable artifact") {
  std::array<double, kNumScalingTerms> truth{};
  truth[0] = 0.5;
  truth[5] = 0.1;
  auto records = synthetic_records(400, 0.05, 41, &truth);
  FitResult fit = fit_model(records, ModelSpec::full, 5, 0, 1);
  CHECK(fit.vif.size() == 19);
  CHECK(fit.r2_train > 0.5);

  CoefficientSet c = to_coefficient_set(fit, "unit-test");
  c.validate();
  CHECK(c.provenance == "unit-test");
  // artifact predictions reproduce the fitted in-sample predictions
  Eigen::MatrixXd Z = apply_stats(raw_matrix(records, ModelSpec::full), fit.stats);
  ScalingFeatures f0 = records[0].features;
  double via_artifact = predict_performance(f0, c);
  double via_fit = 0;
  for (int j = 0; j < kNumScalingTerms; ++j) via_fit += fit.coefficients[j] * Z(0, j);
  CHECK(via_artifact == Catch::Approx(via_fit).margin(1e-9));

  FitResult partial = fit_model(records, ModelSpec::plus_baseline, 5, 0, 1);
  CHECK_THROWS_AS(to_coefficient_set(partial, "x"), DataError);
}
