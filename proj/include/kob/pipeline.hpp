#ifndef KOB_PIPELINE_HPP
#define KOB_PIPELINE_HPP

#include "kob/estimators.hpp"

namespace kob {

/// Deliberate nuisance misspecification, for robustness experiments.
enum class Misspecification {
  none,
  outcome_constant_only,     // intercept-only outcome regression
  propensity_constant_only,  // intercept-only logit
  outcome_drop_slope,        // outcome regression without the first covariate
};

/// Fit g(r,.) and p(1,.) on `s` for one reference outcome.
/// r in {0,1}: outcome model on the D=r subsample; r=2: on the full sample;
/// r=3: pooled OLS with a group dummy, the dummy coefficient dropped from
/// predictions (parametric engine only).
NuisancePair fit_nuisances(const Sample& s, Reference r, Engine engine,
                           const GbmParams& gbm = {},
                           Misspecification misspec = Misspecification::none);

/// Full-sample estimate: fit-free evaluation of `spec` given fitted nuisances.
/// Trims for r in {0,1} when spec.trim_threshold > 0 (weighting strategies,
/// plus Reg when spec.trim_applies_to_reg). AIPW results carry a score-based
/// se; Reg/IPW carry none (bootstrap fills those in).
DecompResult estimate_with_nuisances(const Sample& s, const EstimatorSpec& spec,
                                     const NuisancePair& nu);

/// fit_nuisances + estimate_with_nuisances in one call.
DecompResult estimate_once(const Sample& s, const EstimatorSpec& spec,
                           const GbmParams& gbm = {},
                           Misspecification misspec = Misspecification::none);

}  // namespace kob

#endif  // KOB_PIPELINE_HPP
