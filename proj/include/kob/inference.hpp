#ifndef KOB_INFERENCE_HPP
#define KOB_INFERENCE_HPP

#include "kob/pipeline.hpp"

namespace kob {

/// Per-observation moment contributions; mean zero at the matching delta_hat.
struct ScoreVector {
  Eigen::VectorXd psi;
  Reference reference = Reference::Equilibrium;
  bool normalized = false;
};

/// Empirical AIPW scores psi_r evaluated at delta_hat; r in {0,1,2}.
ScoreVector scores(const Sample& s, const Eigen::Ref<const Eigen::VectorXd>& g_hat,
                   const Eigen::Ref<const Eigen::VectorXd>& p_hat, Reference r,
                   double delta_hat, bool normalized);

/// var = (1/n^2) sum psi_i^2 ; se = sqrt(var).
std::pair<double, double> variance_from_scores(const ScoreVector& sv);

struct BootstrapResult {
  double se = 0.0;
  std::vector<double> replicates;
  Eigen::Index skipped = 0;
};

/// Pairs bootstrap of the full pipeline (nuisance refit, trim, estimate per
/// resample). Degenerate resamples are skipped and counted; more than 10%
/// skipped is an error. Replicate b uses the RNG stream (seed, b), so results
/// do not depend on the parallel schedule.
BootstrapResult bootstrap_pairs(const Sample& s, const EstimatorSpec& spec, int B,
                                std::uint64_t seed, unsigned n_threads = 1,
                                const GbmParams& gbm = {},
                                bool refit_nuisances = true);

/// Mean score along the nuisance path eta0 + c (eta - eta0), theta held at its
/// eta0 value. Pointwise convex combination of predictions.
std::vector<std::pair<double, double>> orthogonality_check(
    const Sample& s, const NuisancePair& eta0, const NuisancePair& eta_perturbed,
    Reference r, const std::vector<double>& c_grid, bool normalized = false,
    bool perturb_outcome = true, bool perturb_propensity = true);

/// Symmetric finite-difference slope of the mean score at c=0, with the se of
/// the slope estimate from per-row differences.
struct SlopeEstimate {
  double slope = 0.0;
  double se = 0.0;
};
SlopeEstimate orthogonality_slope(const Sample& s, const NuisancePair& eta0,
                                  const NuisancePair& eta_perturbed, Reference r,
                                  double c = 0.05, bool normalized = false,
                                  bool perturb_outcome = true,
                                  bool perturb_propensity = true);

/// The non-orthogonal contrast moment: the Reg residual-mean score
/// (no weighting correction). Used to demonstrate an order-1 slope.
SlopeEstimate reg_moment_slope(const Sample& s, const NuisancePair& eta0,
                               const NuisancePair& eta_perturbed, Reference r,
                               double c = 0.05);

}  // namespace kob

#endif  // KOB_INFERENCE_HPP
