#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "orbit/config.hpp"
#include "orbit/csv.hpp"
#include "orbit/predictive.hpp"

namespace orbit {

namespace detail {

inline Json level_report_json(const std::vector<FlagLevelReport>& reports) {
  Json arr = Json::array();
  for (const auto& rep : reports) {
    Json item;
    item["level"] = rep.level;
    item["cosets"] = rep.coset_labels;
    item["projector_defect"] = rep.projector_defect;
    item["ad_defect_declared"] = rep.ad_defect_declared;
    item["ad_defect_subalgebra"] = rep.ad_defect_subalgebra;
    arr.push_back(std::move(item));
  }
  return arr;
}

inline Observation stack_input(const ScenarioConfig& cfg) {
  const StackSpec& spec = *cfg.stack;
  Observation input =
      act(exp_map(AlgebraVector(cfg.basis, spec.scene_theta)),
          cfg.stream->template_obs);
  if (spec.scene_noise != 0.0) {
    Rng rng(derive_seed(cfg.seed, 0xA11CEu));
    for (Eigen::Index i = 0; i < input.points.rows(); ++i)
      for (Eigen::Index j = 0; j < input.points.cols(); ++j)
        input.points(i, j) += spec.scene_noise * rng.normal();
  }
  return input;
}

}  // namespace detail

// Runs the configured episode and/or stack; writes timeseries.csv,
// cycles.csv and summary.json into out_dir and returns the summary.
inline Json run_scenario(const ScenarioConfig& cfg,
                         const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const int r = cfg.basis->dim();

  Json summary;
  summary["final_V"] = nullptr;
  summary["noether_drift"] = nullptr;
  summary["iss_alpha"] = nullptr;
  summary["iss_beta"] = nullptr;
  summary["leaf_bound"] = nullptr;
  summary["hierarchy_report"] = nullptr;
  summary["mismatch_flag"] = nullptr;
  summary["reset_count"] = nullptr;

  std::vector<std::string> ts_header = {"t", "V", "E_norm", "p_drift"};
  for (int a = 1; a <= r; ++a)
    ts_header.push_back("theta_fit_" + std::to_string(a));
  CsvWriter timeseries(out_dir + "/timeseries.csv", ts_header);

  if (cfg.tracker) {
    const AgentState x0 = AgentState::zeros(
        cfg.tracker->populations(), cfg.stream->template_obs.flat_dim());
    const EpisodeDiagnostics diag =
        run_episode(*cfg.tracker, *cfg.stream, cfg.episode_T, x0);
    for (Eigen::Index n = 0; n < diag.t.size(); ++n) {
      std::vector<std::string> cells = {
          format_double(diag.t[n]), format_double(diag.V[n]),
          format_double(diag.E_norm[n]), format_double(diag.p_drift[n])};
      for (int a = 0; a < r; ++a)
        cells.push_back(format_double(diag.theta_fit(n, a)));
      timeseries.row(cells);
    }
    summary["final_V"] = diag.final_V;
    summary["noether_drift"] = diag.noether_drift;
    summary["leaf_bound"] = diag.leaf_bound;

    if (cfg.iss_enabled) {
      const IssEstimate est =
          estimate_iss(*cfg.tracker, *cfg.stream, cfg.episode_T, x0);
      summary["iss_alpha"] = est.alpha_hat;
      summary["iss_beta"] = est.beta_hat;
    }
  }
  timeseries.close();

  CsvWriter cycles(out_dir + "/cycles.csv",
                   {"cycle", "k", "eta_norm", "r_norm", "realized_norm",
                    "forwarded_norm", "top_flag"});
  if (cfg.stack) {
    PredictiveStack stack = build_stack(
        *cfg.flag, cfg.semantics, cfg.stream->template_obs,
        cfg.stack->pooling, cfg.stack->lambdas,
        {cfg.stack->mismatch_threshold, cfg.stack->patience,
         cfg.stack->algebra_messages});
    const Observation input = detail::stack_input(cfg);
    for (int c = 0; c < cfg.stack->cycles; ++c) {
      const CycleDiagnostics diag = run_cycle(stack, input);
      for (int k = 1; k <= stack.depth(); ++k)
        cycles.row({std::to_string(diag.cycle), std::to_string(k),
                    format_double(diag.eta_norm[k - 1]),
                    format_double(diag.r_norm[k - 1]),
                    format_double(diag.realized_norm[k - 1]),
                    format_double(diag.forwarded_norm[k - 1]),
                    diag.mismatch ? "1" : "0"});
    }
    summary["mismatch_flag"] = stack.mismatch;
    summary["reset_count"] = stack.reset_count;
  }
  cycles.close();

  if (cfg.flag)
    summary["hierarchy_report"] = detail::level_report_json(
        hierarchy_report(*cfg.flag, cfg.semantics));

  std::ofstream out(out_dir + "/summary.json", std::ios::binary);
  if (!out)
    throw ConfigError("cannot open for writing: " + out_dir + "/summary.json");
  out << summary.dump(2) << '\n';
  return summary;
}

}  // namespace orbit
