#include "kob/simulate.hpp"

#include <cmath>
#include <limits>

#include "kob/parallel.hpp"

namespace kob {

namespace {

double truth_for(Reference r, const DgpTruth& t) {
  switch (r) {
    case Reference::Disadvantaged: return t.delta0;
    case Reference::Advantaged: return t.delta1;
    default: return t.delta2;  // Pooled shares the pi-weighted target only
  }
}

struct RepCell {
  double theta = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double trimmed = 0.0;
};

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec, unsigned n_threads) {
  if (spec.n_reps < 2) throw validation_error("run_experiment: n_reps must be >= 2");
  if (spec.estimator_grid.empty())
    throw validation_error("run_experiment: empty estimator grid");
  spec.dgp.validate();

  const DgpTruth truth = oracle_truth(spec.dgp);
  const std::size_t n_est = spec.estimator_grid.size();
  const std::size_t reps = static_cast<std::size_t>(spec.n_reps);
  std::vector<RepCell> cells(reps * n_est);

  parallel_for(reps, n_threads, [&](std::size_t j) {
    DgpConfig cfg = spec.dgp;
    cfg.seed = mix_seed(spec.master_seed, j);
    Sample s;
    try {
      s = generate_dgp(cfg).first;
    } catch (const estimation_error&) {
      return;  // degenerate draw: every estimator cell stays NaN
    }
    for (std::size_t e = 0; e < n_est; ++e) {
      RepCell& cell = cells[j * n_est + e];
      const EstimatorSpec& est = spec.estimator_grid[e];
      GbmParams gp = spec.ml_params;
      gp.seed = mix_seed(spec.master_seed, 0x9e55u + j);
      try {
        DecompResult r;
        if (spec.crossfit.has_value()) {
          FoldPlan plan = *spec.crossfit;
          plan.seed = mix_seed(spec.master_seed, 0xf01du + j);
          r = crossfit_estimate(s, est, plan, gp);
        } else {
          r = estimate_once(s, est, gp, spec.misspecification);
        }
        cell.theta = r.delta_hat;
        cell.se = r.se.value_or(std::numeric_limits<double>::quiet_NaN());
        cell.trimmed = static_cast<double>(r.trimmed_count);
      } catch (const estimation_error&) {
        // counted as a failed replication for this estimator
      }
    }
  });

  ExperimentReport report;
  report.truth = truth;
  for (std::size_t e = 0; e < n_est; ++e) {
    EstimatorSummary sum;
    sum.spec = spec.estimator_grid[e];
    sum.truth = truth_for(sum.spec.reference, truth);

    std::vector<double> thetas, ses;
    double trimmed = 0.0;
    for (std::size_t j = 0; j < reps; ++j) {
      const RepCell& cell = cells[j * n_est + e];
      if (std::isnan(cell.theta)) {
        ++sum.reps_failed;
        continue;
      }
      thetas.push_back(cell.theta);
      ses.push_back(cell.se);
      trimmed += cell.trimmed;
    }
    sum.reps_used = static_cast<Eigen::Index>(thetas.size());
    if (sum.reps_failed * 10 > static_cast<Eigen::Index>(reps))
      throw estimation_error("run_experiment: more than 10% of replications failed for " +
                             to_string(sum.spec.strategy) + " r=" +
                             std::to_string(static_cast<int>(sum.spec.reference)));

    const double m = static_cast<double>(thetas.size());
    double mean = 0.0, mse = 0.0;
    for (double t : thetas) mean += t;
    mean /= m;
    double ss = 0.0;
    for (double t : thetas) {
      ss += (t - mean) * (t - mean);
      mse += (t - sum.truth) * (t - sum.truth);
    }
    sum.mean_estimate = mean;
    sum.bias = mean - sum.truth;
    sum.mc_se_of_bias = std::sqrt(ss / (m - 1.0) / m);
    sum.rmse = std::sqrt(mse / m);
    sum.mean_trimmed = trimmed / m;

    Eigen::Index with_se = 0, covered = 0;
    double se_sum = 0.0;
    for (std::size_t j = 0; j < thetas.size(); ++j) {
      if (std::isnan(ses[j])) continue;
      ++with_se;
      se_sum += ses[j];
      if (std::abs(thetas[j] - sum.truth) <= 1.96 * ses[j]) ++covered;
    }
    if (with_se > 0) {
      sum.mean_se = se_sum / static_cast<double>(with_se);
      sum.coverage = static_cast<double>(covered) / static_cast<double>(with_se);
    }
    report.estimators.push_back(std::move(sum));
  }
  return report;
}

std::vector<OverlapRow> support_overlap_study(const DgpConfig& base,
                                              const std::vector<double>& logit_b_grid,
                                              Eigen::Index n, std::uint64_t seed) {
  if (logit_b_grid.empty())
    throw validation_error("support_overlap_study: empty steepness grid");
  std::vector<OverlapRow> rows;
  const std::vector<double> thresholds{0.01, 0.05};
  for (double b : logit_b_grid) {
    DgpConfig cfg = base;
    cfg.logit_b = b;
    // recenter so the propensity stays 1/2 at the midpoint of the support
    cfg.logit_a = -b * 0.5 * (cfg.x_low + cfg.x_high);
    cfg.n = n;
    cfg.seed = seed;
    const Sample s = generate_dgp(cfg).first;
    for (int ri : {0, 1, 2}) {
      for (double thr : thresholds) {
        EstimatorSpec spec;
        spec.reference = reference_from_int(ri);
        spec.strategy = Strategy::AIPWu;
        spec.trim_threshold = thr;
        const DecompResult res = estimate_once(s, spec);
        OverlapRow row;
        row.logit_b = b;
        row.reference = ri;
        row.trim_threshold = thr;
        row.trimmed_fraction =
            static_cast<double>(res.trimmed_count) / static_cast<double>(s.n());
        row.delta_hat = res.delta_hat;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::vector<CurvePoint> figure1_curves(const DgpConfig& cfg,
                                       const std::vector<double>& x_grid) {
  cfg.validate();
  std::vector<CurvePoint> out;
  out.reserve(x_grid.size());
  for (double x : x_grid) {
    if (x < cfg.x_low || x > cfg.x_high)
      throw validation_error("figure1_curves: grid point outside covariate support");
    CurvePoint pt;
    pt.x = x;
    pt.g0 = cfg.g(0, x);
    pt.g1 = cfg.g(1, x);
    pt.p = cfg.propensity(x);
    pt.g2 = pt.p * pt.g1 + (1.0 - pt.p) * pt.g0;
    out.push_back(pt);
  }
  return out;
}

}  // namespace kob
