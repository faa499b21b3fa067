#ifndef KOB_CROSSFIT_HPP
#define KOB_CROSSFIT_HPP

#include "kob/pipeline.hpp"

namespace kob {

/// Repeated-split plan: each repetition k draws a random main subsample I_k of
/// size floor(split_fraction * n); the complement is the auxiliary sample.
struct FoldPlan {
  int K = 100;
  double split_fraction = 0.5;
  std::uint64_t seed = 0;
  // 2-fold averaging within a repetition; default off (estimate on I_k only).
  bool swap_folds = false;
  // Evaluate fold scores at the aggregated theta instead of theta_k.
  bool variance_at_aggregate = false;
};

/// Deterministic uniform without-replacement split of [0,n) for repetition k.
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split(
    Eigen::Index n, double fraction, std::uint64_t seed, int k);

/// Repeated sample splitting: nuisances fit on the auxiliary fold, trimming
/// and estimation on the main fold, theta_k averaged over repetitions.
/// AIPW strategies carry the pooled score-based se (sigma_hat / sqrt(n));
/// Reg/IPW estimates are returned without se. Repetitions where a fold loses
/// a group are skipped and counted; more than 10% skipped is an error.
DecompResult crossfit_estimate(const Sample& s, const EstimatorSpec& spec,
                               const FoldPlan& plan, const GbmParams& ml_params = {},
                               unsigned n_threads = 1,
                               Eigen::Index* skipped_out = nullptr);

}  // namespace kob

#endif  // KOB_CROSSFIT_HPP
