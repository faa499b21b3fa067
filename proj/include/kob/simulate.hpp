#ifndef KOB_SIMULATE_HPP
#define KOB_SIMULATE_HPP

#include "kob/crossfit.hpp"
#include "kob/inference.hpp"

namespace kob {

/// Monte Carlo study design: n_reps fresh draws from `dgp`, each estimator in
/// the grid run on every draw, optionally through cross-fitting.
struct ExperimentSpec {
  DgpConfig dgp;
  int n_reps = 200;
  std::vector<EstimatorSpec> estimator_grid;
  Misspecification misspecification = Misspecification::none;
  std::optional<FoldPlan> crossfit;
  GbmParams ml_params;
  std::uint64_t master_seed = 1;
};

/// Per-estimator Monte Carlo summary against the quadrature oracle.
struct EstimatorSummary {
  EstimatorSpec spec;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double mc_se_of_bias = 0.0;  // sd(theta_hat)/sqrt(reps)
  double rmse = 0.0;
  double coverage = -1.0;  // of nominal-95% CIs; -1 when no se is reported
  double mean_se = -1.0;
  double mean_trimmed = 0.0;
  Eigen::Index reps_used = 0;
  Eigen::Index reps_failed = 0;
};

struct ExperimentReport {
  std::vector<EstimatorSummary> estimators;
  DgpTruth truth;
};

/// Deterministic in master_seed; replication j draws with the (master_seed, j)
/// stream. Degenerate-draw or estimation failures are counted per estimator;
/// more than 10% failed replications is an error.
ExperimentReport run_experiment(const ExperimentSpec& spec,
                                unsigned n_threads = 1);

/// One row per (logit_b, reference, threshold) of the overlap sweep.
struct OverlapRow {
  double logit_b = 0.0;
  int reference = 0;
  double trim_threshold = 0.0;
  double trimmed_fraction = 0.0;
  double delta_hat = 0.0;
};

/// Sweep propensity steepness: per steepness value, AIPWu estimates and
/// trimmed fractions for r in {0,1} at thresholds {0.01, 0.05}, plus the
/// never-trimming r=2 estimate at both threshold settings (identical by
/// construction).
std::vector<OverlapRow> support_overlap_study(const DgpConfig& base,
                                              const std::vector<double>& logit_b_grid,
                                              Eigen::Index n = 5000,
                                              std::uint64_t seed = 1);

/// Reference-outcome curves on a covariate grid:
/// g2(x) = p(x) g1(x) + (1 - p(x)) g0(x).
struct CurvePoint {
  double x = 0.0;
  double g0 = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;
  double p = 0.0;
};
std::vector<CurvePoint> figure1_curves(const DgpConfig& cfg,
                                       const std::vector<double>& x_grid);

}  // namespace kob

#endif  // KOB_SIMULATE_HPP
