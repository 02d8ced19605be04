#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "coordsim/harness.hpp"

// httplib drags in resolver headers whose _res macro breaks Eigen if it comes
// first; keep this include last.
#include <httplib.h>

namespace {

using namespace coordsim;

void print_error(const char* type, const std::string& message) {
  json err;
  err["error"] = {{"type", type}, {"message", message}};
  std::cerr << err.dump() << "\n";
}

CoefficientSet coefficients_from(const std::string& path) {
  if (path.empty()) return default_coefficients();
  return load_coefficients(path);
}

// --similarity offline uses the built-in term-frequency cosine; a URL posts
// both texts to a scoring service and expects {"similarity": <real>}.
SimilarityFn similarity_from(const std::string& mode) {
  if (mode.empty() || mode == "offline") return default_similarity();
  return [mode](const std::string& a, const std::string& b) {
    auto scheme_end = mode.find("://");
    std::string rest = scheme_end == std::string::npos
                           ? mode
                           : mode.substr(scheme_end + 3);
    auto slash = rest.find('/');
    std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : rest.substr(slash);
    httplib::Client client(host);
    json body = {{"a", a}, {"b", b}};
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res || res->status != 200)
      throw BackendError("similarity service unreachable: " + mode);
    return json::parse(res->body).at("similarity").get<double>();
  };
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            int parallelism) {
  CampaignConfig cfg = load_campaign_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (parallelism > 0) cfg.parallelism = parallelism;
  auto paths = run_campaign(cfg);
  std::size_t failures = 0;
  for (const auto& t : load_traces_from_dir(cfg.output_dir))
    if (t.outcome != Outcome::success) ++failures;
  std::cout << "runs: " << paths.size() << "\n";
  std::cout << "failed: " << failures << "\n";
  std::cout << "index: " << cfg.output_dir << "/index.jsonl\n";
  if (failures == paths.size() && !paths.empty())
    std::cerr << "warning: every run failed\n";
  return 0;
}

int cmd_aggregate(const std::string& traces_dir, const std::string& out_path,
                  const std::string& similarity) {
  auto traces = load_traces_from_dir(traces_dir);
  auto rep = aggregate(traces, sas_reference_from_traces(traces),
                       similarity_from(similarity));
  std::string body = to_json(rep).dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << body;
  } else {
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write: " + out_path);
    out << body;
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_predict(const std::string& coeff_path, bool have_features,
                const ScalingFeatures& f) {
  CoefficientSet coeffs = coefficients_from(coeff_path);
  coeffs.validate();
  double p;
  if (have_features) {
    p = predict_performance(f, coeffs);
  } else {
    // No features supplied: evaluate at the standardization means, where
    // every standardized term vanishes and the prediction is the intercept.
    p = coeffs.beta[0];
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", p);
  std::cout << buf << "\n";
  std::cout << "provenance: " << coeffs.provenance << "\n";
  return 0;
}

int cmd_select(const std::string& coeff_path, int tools, double p_sa,
               double intelligence) {
  TaskProfile task;
  task.tool_count = tools;
  task.single_agent_baseline = p_sa;
  task.intelligence = intelligence;
  CoefficientSet coeffs = coefficients_from(coeff_path);
  for (const auto& row : select_architecture(task, coeffs)) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-14s %.4f", to_string(row.topology),
                  row.predicted_performance);
    std::cout << buf << "\n";
  }
  std::cout << "provenance: " << coeffs.provenance << "\n";
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& out_path,
            int folds, int boot, std::uint64_t seed, bool compare) {
  auto records = load_run_dataset(data_path);
  if (compare) {
    std::cout << "spec                          k    R2_train  R2_cv    AIC\n";
    for (const auto& row : compare_models(records, folds)) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%-28s  %-3d  %-8.4f  %-7.4f  %.1f",
                    to_string(row.spec), row.k_params, row.r2_train, row.r2_cv,
                    row.aic_value);
      std::cout << buf << "\n";
    }
  }
  FitResult fit = fit_model(records, ModelSpec::full, folds, boot, seed);
  std::cout << "term                        beta";
  if (boot > 0) std::cout << "       se";
  std::cout << "\n";
  for (std::size_t j = 0; j < fit.column_names.size(); ++j) {
    char buf[160];
    if (boot > 0)
      std::snprintf(buf, sizeof(buf), "%-26s  %8.4f  %8.4f",
                    fit.column_names[j].c_str(), fit.coefficients[j],
                    fit.bootstrap_se_values[j]);
    else
      std::snprintf(buf, sizeof(buf), "%-26s  %8.4f",
                    fit.column_names[j].c_str(), fit.coefficients[j]);
    std::cout << buf << "\n";
  }
  std::cout << "r2_train: " << fit.r2_train << "\n";
  std::cout << "r2_cv: " << fit.r2_cv << "\n";
  std::cout << "aic: " << fit.aic_value << "\n";
  double vif_max = 0;
  for (double v : fit.vif) vif_max = std::max(vif_max, v);
  std::cout << "vif_max: " << vif_max << (vif_max >= 5 ? "  (>=5 flagged)" : "")
            << "\n";
  if (!out_path.empty()) {
    save_coefficients(to_coefficient_set(fit, "fit:" + data_path), out_path);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_report(const std::string& traces_dir, const std::string& out_path,
               const std::string& similarity) {
  auto traces = load_traces_from_dir(traces_dir);
  auto rep = aggregate(traces, sas_reference_from_traces(traces),
                       similarity_from(similarity));
  std::string body = render_report_text(rep);
  if (out_path.empty()) {
    std::cout << body;
  } else {
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write: " + out_path);
    out << body;
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coordination topology simulator and scaling-model toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_path, coeff_path, similarity = "offline";
  std::string traces_dir, data_path;
  int parallelism = 0, folds = 5, boot = 0;
  std::uint64_t seed = 42;
  bool compare = false;

  auto* run = app.add_subcommand("run", "execute a campaign grid");
  run->add_option("--config", config_path, "campaign config file")->required();
  run->add_option("--out", out_path, "override output directory");
  run->add_option("--parallelism", parallelism, "worker pool size");
  run->add_option("--seed", seed, "unused for run; seeds come from the config");

  auto* agg = app.add_subcommand("aggregate", "aggregate traces into metrics");
  agg->add_option("--traces", traces_dir, "campaign output directory")->required();
  agg->add_option("--out", out_path, "output file (stdout if omitted)");
  agg->add_option("--similarity", similarity, "offline or service URL");

  coordsim::ScalingFeatures feat;
  bool have_features = false;
  auto* pre = app.add_subcommand("predict", "predict success for a configuration");
  pre->add_option("--coefficients", coeff_path, "model artifact path");
  auto mark = [&have_features](const std::string&) { have_features = true; };
  pre->add_option("--intelligence", feat.intelligence)->each(mark);
  pre->add_option("--tools", feat.tool_count)->each(mark);
  pre->add_option("--agents", feat.agent_count)->each(mark);
  pre->add_option("--overhead", feat.overhead_pct)->each(mark);
  pre->add_option("--density", feat.message_density)->each(mark);
  pre->add_option("--redundancy", feat.redundancy)->each(mark);
  pre->add_option("--efficiency", feat.efficiency)->each(mark);
  pre->add_option("--error-amp", feat.error_amplification)->each(mark);
  pre->add_option("--baseline", feat.single_agent_baseline)->each(mark);

  int sel_tools = 1;
  double sel_psa = 0.5, sel_intel = coordsim::kIntelligenceMeanDefault;
  auto* sel = app.add_subcommand("select", "rank architectures for a task profile");
  sel->add_option("--tools", sel_tools, "task tool count")->required();
  sel->add_option("--p-sa", sel_psa, "single-agent baseline")->required();
  sel->add_option("--intelligence", sel_intel, "composite capability score");
  sel->add_option("--coefficients", coeff_path, "model artifact path");

  auto* fit = app.add_subcommand("fit", "fit the scaling model to a dataset");
  fit->add_option("--data", data_path, "run dataset (one record per line)")
      ->required();
  fit->add_option("--out", out_path, "write fitted model artifact here");
  fit->add_option("--folds", folds, "cross-validation folds");
  fit->add_option("--boot", boot, "bootstrap resamples for standard errors");
  fit->add_option("--seed", seed, "bootstrap seed");
  fit->add_flag("--compare", compare, "also print the nested-model comparison");

  auto* rep = app.add_subcommand("report", "render a text report from traces");
  rep->add_option("--traces", traces_dir, "campaign output directory")->required();
  rep->add_option("--out", out_path, "output file (stdout if omitted)");
  rep->add_option("--similarity", similarity, "offline or service URL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("config", e.what());
    return 2;
  }

  try {
    if (app.got_subcommand(run)) return cmd_run(config_path, out_path, parallelism);
    if (app.got_subcommand(agg)) return cmd_aggregate(traces_dir, out_path, similarity);
    if (app.got_subcommand(pre)) return cmd_predict(coeff_path, have_features, feat);
    if (app.got_subcommand(sel)) return cmd_select(coeff_path, sel_tools, sel_psa, sel_intel);
    if (app.got_subcommand(fit))
      return cmd_fit(data_path, out_path, folds, boot, seed, compare);
    if (app.got_subcommand(rep)) return cmd_report(traces_dir, out_path, similarity);
  } catch (const coordsim::ConfigError& e) {
    print_error("config", e.what());
    return 2;
  } catch (const coordsim::BackendError& e) {
    print_error("backend", e.what());
    return 3;
  } catch (const coordsim::DataError& e) {
    print_error("data", e.what());
    return 4;
  } catch (const std::exception& e) {
    print_error("data", e.what());
    return 4;
  }
  return 0;
}
