#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "coordsim/scaling.hpp"

namespace coordsim {

struct RunRecord {
  ScalingFeatures features;
  Topology architecture = Topology::SAS;
  double performance = 0;
  std::string experiment_id;
  std::string family_label;
  std::string benchmark_label;
};

enum class ModelSpec {
  capability_task,     // intelligence + tools + agents
  plus_architecture,   // + quadratic capability, architecture dummies, I x tools
  plus_baseline,       // + single-agent baseline
  full                 // the complete 20-term model
};

inline const char* to_string(ModelSpec s) {
  switch (s) {
    case ModelSpec::capability_task: return "intelligence+tools+agents";
    case ModelSpec::plus_architecture: return "+architecture_labels";
    case ModelSpec::plus_baseline: return "+single_agent_baseline";
    case ModelSpec::full: return "+coordination_metrics";
  }
  return "?";
}

namespace estimator_detail {

inline std::vector<std::string> arch_dummy_names() {
  // SAS is the reference level.
  return {"arch_Independent", "arch_Decentralized", "arch_Centralized",
          "arch_Hybrid"};
}

inline std::vector<double> arch_dummies(Topology t) {
  return {t == Topology::Independent ? 1.0 : 0.0,
          t == Topology::Decentralized ? 1.0 : 0.0,
          t == Topology::Centralized ? 1.0 : 0.0,
          t == Topology::Hybrid ? 1.0 : 0.0};
}

}  // namespace estimator_detail

inline std::vector<std::string> spec_column_names(ModelSpec spec) {
  const auto& full = scaling_term_names();
  std::vector<std::string> cols = {full[0], full[1], full[3], full[4]};
  if (spec == ModelSpec::capability_task) return cols;
  cols.push_back(full[2]);  // quadratic capability
  for (const auto& d : estimator_detail::arch_dummy_names()) cols.push_back(d);
  cols.push_back(full[18]);  // capability-tools interaction
  if (spec == ModelSpec::plus_architecture) return cols;
  cols.push_back(full[10]);  // single-agent baseline
  if (spec == ModelSpec::plus_baseline) return cols;
  return {full.begin(), full.end()};
}

// Dummy columns and the intercept stay un-standardized.
inline std::vector<bool> spec_standardize_mask(ModelSpec spec) {
  auto cols = spec_column_names(spec);
  std::vector<bool> mask(cols.size(), true);
  for (std::size_t i = 0; i < cols.size(); ++i)
    if (cols[i] == "intercept" || cols[i].rfind("arch_", 0) == 0) mask[i] = false;
  return mask;
}

inline std::vector<double> raw_spec_terms(const RunRecord& r, ModelSpec spec,
                                          double i_mean = kIntelligenceMeanDefault) {
  auto full = build_feature_vector(r.features, i_mean);
  std::vector<double> row = {full[0], full[1], full[3], full[4]};
  if (spec == ModelSpec::capability_task) return row;
  row.push_back(full[2]);
  for (double d : estimator_detail::arch_dummies(r.architecture)) row.push_back(d);
  row.push_back(full[18]);
  if (spec == ModelSpec::plus_architecture) return row;
  row.push_back(full[10]);
  if (spec == ModelSpec::plus_baseline) return row;
  return {full.begin(), full.end()};
}

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  std::vector<bool> mask;
};

struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> column_names;
  Standardization stats;
};

inline Eigen::MatrixXd raw_matrix(const std::vector<RunRecord>& records,
                                  ModelSpec spec) {
  if (records.size() < 2) throw DataError("need at least 2 records");
  auto first = raw_spec_terms(records[0], spec);
  Eigen::MatrixXd X(records.size(), first.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto row = raw_spec_terms(records[i], spec);
    for (std::size_t j = 0; j < row.size(); ++j) X(i, j) = row[j];
  }
  return X;
}

inline Standardization compute_stats(const Eigen::MatrixXd& X, ModelSpec spec,
                                     const std::vector<std::string>& names) {
  Standardization s;
  s.mask = spec_standardize_mask(spec);
  s.mean = X.colwise().mean();
  s.sd = Eigen::VectorXd::Ones(X.cols());
  for (int j = 0; j < X.cols(); ++j) {
    if (!s.mask[j]) {
      s.mean(j) = 0;
      continue;
    }
    double var = (X.col(j).array() - s.mean(j)).square().mean();
    double sd = std::sqrt(var);
    if (sd <= 1e-12)
      throw DataError("zero-variance column: " + names[j]);
    s.sd(j) = sd;
  }
  return s;
}

inline Eigen::MatrixXd apply_stats(const Eigen::MatrixXd& X,
                                   const Standardization& s) {
  Eigen::MatrixXd Z = X;
  for (int j = 0; j < X.cols(); ++j)
    if (s.mask[j]) Z.col(j) = (X.col(j).array() - s.mean(j)) / s.sd(j);
  return Z;
}

// Standardization statistics come from the provided records and are returned
// for reuse on held-out folds (never re-estimated on test data).
inline DesignMatrix build_design_matrix(const std::vector<RunRecord>& records,
                                        ModelSpec spec) {
  DesignMatrix d;
  d.column_names = spec_column_names(spec);
  Eigen::MatrixXd raw = raw_matrix(records, spec);
  d.stats = compute_stats(raw, spec, d.column_names);
  d.X = apply_stats(raw, d.stats);
  d.y.resize(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) d.y(i) = records[i].performance;
  return d;
}

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
};

// SVD-based least squares; interaction columns are correlated so normal
// equations are avoided. Rank deficiency reports the dependent columns.
inline OlsFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const std::vector<std::string>* names = nullptr) {
  if (X.rows() <= X.cols())
    throw DataError("fit_ols: need more rows than columns");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) < 1e-10 * sv(0)) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    std::string cols;
    auto perm = qr.colsPermutation().indices();
    for (int j = qr.rank(); j < X.cols(); ++j) {
      int orig = perm(j);
      if (!cols.empty()) cols += ", ";
      cols += names ? (*names)[orig] : "col" + std::to_string(orig);
    }
    throw DataError("fit_ols: rank-deficient design, collinear columns: " + cols);
  }
  OlsFit fit;
  fit.beta = svd.solve(y);
  fit.residuals = y - X * fit.beta;
  return fit;
}

inline double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& pred) {
  double mean = y.mean();
  double ss_tot = (y.array() - mean).square().sum();
  double ss_res = (y - pred).squaredNorm();
  if (ss_tot == 0) return ss_res == 0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

inline double aic(double rss, int n, int k) {
  return n * std::log(rss / n) + 2.0 * k;
}

struct CvResult {
  double r2_cv = 0;
  double mae = 0;
  double rmse = 0;
};

// Folds partition experiment ids, not rows; per-fold standardization is
// estimated on the training fold only.
inline CvResult kfold_cv(const std::vector<RunRecord>& records, int k,
                         ModelSpec spec) {
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (r.experiment_id.empty()) throw DataError("record with empty experiment_id");
    ids.insert(r.experiment_id);
  }
  if (static_cast<int>(ids.size()) < k)
    throw DataError("fewer distinct experiments than folds");
  std::map<std::string, int> fold_of;
  int f = 0;
  for (const auto& id : ids) fold_of[id] = f++ % k;

  auto names = spec_column_names(spec);
  CvResult out;
  for (int fold = 0; fold < k; ++fold) {
    std::vector<RunRecord> train, test;
    for (const auto& r : records)
      (fold_of[r.experiment_id] == fold ? test : train).push_back(r);
    if (test.empty() || train.size() <= names.size())
      throw DataError("fold too small for the requested spec");
    DesignMatrix dm = build_design_matrix(train, spec);
    OlsFit fit = fit_ols(dm.X, dm.y, &dm.column_names);
    Eigen::MatrixXd Xt = apply_stats(raw_matrix(test, spec), dm.stats);
    Eigen::VectorXd yt(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) yt(i) = test[i].performance;
    Eigen::VectorXd pred = Xt * fit.beta;
    out.r2_cv += r_squared(yt, pred);
    out.mae += (yt - pred).array().abs().mean();
    out.rmse += std::sqrt((yt - pred).squaredNorm() / test.size());
  }
  out.r2_cv /= k;
  out.mae /= k;
  out.rmse /= k;
  return out;
}

inline std::vector<double> bootstrap_se(const std::vector<RunRecord>& records,
                                        int n_boot, ModelSpec spec,
                                        std::uint64_t seed) {
  if (records.size() < 30) throw DataError("bootstrap_se: need at least 30 records");
  auto names = spec_column_names(spec);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, records.size() - 1);
  std::vector<Eigen::VectorXd> betas;
  int failures = 0;
  for (int b = 0; b < n_boot; ++b) {
    std::vector<RunRecord> sample;
    sample.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) sample.push_back(records[pick(rng)]);
    try {
      DesignMatrix dm = build_design_matrix(sample, spec);
      betas.push_back(fit_ols(dm.X, dm.y, &dm.column_names).beta);
    } catch (const DataError&) {
      ++failures;
    }
  }
  if (failures > n_boot / 10)
    throw DataError("bootstrap_se: persistent rank deficiency across resamples");
  std::vector<double> se(names.size(), 0.0);
  if (betas.size() < 2) return se;
  for (std::size_t j = 0; j < names.size(); ++j) {
    double mean = 0;
    for (const auto& b : betas) mean += b(j);
    mean /= betas.size();
    double var = 0;
    for (const auto& b : betas) var += (b(j) - mean) * (b(j) - mean);
    se[j] = std::sqrt(var / (betas.size() - 1));
  }
  return se;
}

struct FitResult {
  ModelSpec spec;
  std::vector<std::string> column_names;
  std::vector<double> coefficients;
  Standardization stats;
  double r2_train = 0;
  double r2_cv = 0;
  double mae_cv = 0;
  double rmse_cv = 0;
  double aic_value = 0;
  std::vector<double> bootstrap_se_values;
  std::vector<double> residuals;
  std::vector<double> vif;  // per non-intercept column
};

inline std::vector<double> compute_vif(const Eigen::MatrixXd& X) {
  std::vector<double> out;
  for (int j = 1; j < X.cols(); ++j) {
    Eigen::MatrixXd others(X.rows(), X.cols() - 1);
    int c = 0;
    for (int m = 0; m < X.cols(); ++m)
      if (m != j) others.col(c++) = X.col(m);
    Eigen::VectorXd beta =
        others.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(X.col(j));
    double r2 = r_squared(X.col(j), others * beta);
    out.push_back(r2 >= 1.0 ? std::numeric_limits<double>::infinity()
                            : 1.0 / (1.0 - r2));
  }
  return out;
}

inline FitResult fit_model(const std::vector<RunRecord>& records, ModelSpec spec,
                           int k_folds = 5, int n_boot = 0,
                           std::uint64_t seed = 42) {
  FitResult res;
  res.spec = spec;
  DesignMatrix dm = build_design_matrix(records, spec);
  res.column_names = dm.column_names;
  OlsFit fit = fit_ols(dm.X, dm.y, &dm.column_names);
  res.coefficients.assign(fit.beta.data(), fit.beta.data() + fit.beta.size());
  res.stats = dm.stats;
  res.residuals.assign(fit.residuals.data(),
                       fit.residuals.data() + fit.residuals.size());
  res.r2_train = r_squared(dm.y, dm.X * fit.beta);
  res.aic_value = aic(fit.residuals.squaredNorm(), static_cast<int>(dm.X.rows()),
                      static_cast<int>(dm.X.cols()));
  CvResult cv = kfold_cv(records, k_folds, spec);
  res.r2_cv = cv.r2_cv;
  res.mae_cv = cv.mae;
  res.rmse_cv = cv.rmse;
  if (n_boot > 0) res.bootstrap_se_values = bootstrap_se(records, n_boot, spec, seed);
  res.vif = compute_vif(dm.X);
  return res;
}

struct ModelComparisonRow {
  ModelSpec spec;
  double r2_train;
  double r2_cv;
  double aic_value;
  int k_params;
};

inline std::vector<ModelComparisonRow> compare_models(
    const std::vector<RunRecord>& records, int k_folds = 5) {
  std::vector<ModelComparisonRow> rows;
  for (ModelSpec spec : {ModelSpec::capability_task, ModelSpec::plus_architecture,
                         ModelSpec::plus_baseline, ModelSpec::full}) {
    FitResult r = fit_model(records, spec, k_folds);
    rows.push_back({spec, r.r2_train, r.r2_cv, r.aic_value,
                    static_cast<int>(r.column_names.size())});
  }
  return rows;
}

// Export a fitted full-spec model as a prediction artifact.
inline CoefficientSet to_coefficient_set(const FitResult& fit,
                                         const std::string& provenance) {
  if (fit.spec != ModelSpec::full)
    throw DataError("only the full spec exports to a coefficient artifact");
  CoefficientSet c;
  for (int i = 0; i < kNumScalingTerms; ++i) {
    c.beta[i] = fit.coefficients[i];
    c.feature_mean[i] = fit.stats.mean(i);
    c.feature_sd[i] = fit.stats.sd(i);
  }
  c.provenance = provenance;
  return c;
}

}  // namespace coordsim
