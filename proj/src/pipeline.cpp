#include "kob/pipeline.hpp"

#include <numeric>

#include "kob/inference.hpp"

namespace kob {

namespace {

std::vector<Eigen::Index> group_rows(const Sample& s, int group) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < s.n(); ++i)
    if (s.d(i) == group) rows.push_back(i);
  return rows;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x,
                            const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = x.row(rows[i]);
  return out;
}

Eigen::VectorXd select(const Eigen::VectorXd& v,
                       const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = v(rows[i]);
  return out;
}

// Intercept-only (or reduced-design) fits are embedded back into a
// full-length coefficient vector so prediction dimensions stay uniform.
LinearModel embed_linear(const LinearModel& reduced, Eigen::Index k,
                         const std::vector<Eigen::Index>& kept_cols) {
  LinearModel full;
  full.coef = Eigen::VectorXd::Zero(k + 1);
  full.coef(0) = reduced.coef(0);
  for (std::size_t j = 0; j < kept_cols.size(); ++j)
    full.coef(kept_cols[j] + 1) = reduced.coef(static_cast<Eigen::Index>(j) + 1);
  return full;
}

OutcomeModel fit_outcome_model(const Sample& s, Reference r, Engine engine,
                               const GbmParams& gbm, Misspecification misspec) {
  // r in {0,1}: train on the D=r subsample; r=2: full sample.
  std::vector<Eigen::Index> rows;
  if (r == Reference::Disadvantaged)
    rows = group_rows(s, 0);
  else if (r == Reference::Advantaged)
    rows = group_rows(s, 1);
  else {
    rows.resize(s.n());
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  }
  Eigen::MatrixXd x = select_rows(s.x, rows);
  Eigen::VectorXd y = select(s.y, rows);

  if (r == Reference::Pooled) {
    if (engine != Engine::parametric)
      throw unsupported_combination_error(
          "reference r=3 (Pooled) requires the parametric engine");
    // pooled regression with group dummy; the dummy coefficient is dropped
    // from the reference outcome
    Eigen::MatrixXd xd(s.n(), s.k() + 1);
    xd.leftCols(s.k()) = s.x;
    xd.col(s.k()) = s.d.cast<double>();
    const LinearModel pooled = fit_ols(xd, s.y);
    LinearModel m;
    m.coef = pooled.coef.head(s.k() + 1);
    m.feature_names = s.feature_names;
    return m;
  }

  std::vector<Eigen::Index> kept_cols;
  if (misspec == Misspecification::outcome_constant_only) {
    x = Eigen::MatrixXd(x.rows(), 0);
  } else if (misspec == Misspecification::outcome_drop_slope) {
    for (Eigen::Index j = 1; j < s.k(); ++j) kept_cols.push_back(j);
    x = select_rows(s.x, rows).rightCols(s.k() - 1).eval();
  } else {
    for (Eigen::Index j = 0; j < s.k(); ++j) kept_cols.push_back(j);
  }

  const bool reduced = misspec == Misspecification::outcome_constant_only ||
                       misspec == Misspecification::outcome_drop_slope;
  if (engine == Engine::parametric || reduced) {
    LinearModel m = fit_ols(x, y, reduced ? std::vector<std::string>{} : s.feature_names);
    if (reduced) m = embed_linear(m, s.k(), kept_cols);
    m.feature_names = s.feature_names;
    return m;
  }
  GbmParams params = gbm;
  params.loss = GbmLoss::squared_error;
  return fit_gbm(x, y, params);
}

PropensityModel fit_propensity_model(const Sample& s, Engine engine,
                                     const GbmParams& gbm,
                                     Misspecification misspec) {
  if (misspec == Misspecification::propensity_constant_only) {
    const Eigen::MatrixXd empty(s.n(), 0);
    LogitModel reduced = fit_logit(empty, s.d);
    LogitModel m;
    m.coef = Eigen::VectorXd::Zero(s.k() + 1);
    m.coef(0) = reduced.coef(0);
    m.converged = reduced.converged;
    return m;
  }
  if (engine == Engine::parametric) return fit_logit(s.x, s.d);
  GbmParams params = gbm;
  params.loss = GbmLoss::log_loss;
  params.seed = mix_seed(gbm.seed, 0x70726f70);  // separate stream from outcome
  return fit_gbm(s.x, s.d.cast<double>(), params);
}

}  // namespace

NuisancePair fit_nuisances(const Sample& s, Reference r, Engine engine,
                           const GbmParams& gbm, Misspecification misspec) {
  NuisancePair nu;
  nu.outcome.emplace(static_cast<int>(r),
                     fit_outcome_model(s, r, engine, gbm, misspec));
  nu.propensity = fit_propensity_model(s, engine, gbm, misspec);
  return nu;
}

DecompResult estimate_with_nuisances(const Sample& s, const EstimatorSpec& spec,
                                     const NuisancePair& nu) {
  const Reference r = spec.reference;
  const Strategy st = spec.strategy;
  if (r == Reference::Pooled && st != Strategy::Reg)
    throw unsupported_combination_error(
        "reference r=3 (Pooled) supports the Reg strategy only");

  DecompResult res;
  res.reference = r;
  res.strategy = st;
  res.engine = spec.engine;
  res.delta_obs = delta_obs(s);
  res.n = s.n();
  res.n0 = s.n0();
  res.n1 = s.n1();

  const bool needs_g = st != Strategy::IPWu && st != Strategy::IPWn;
  const bool trimmable = (r == Reference::Disadvantaged || r == Reference::Advantaged) &&
                         spec.trim_threshold > 0.0;
  const bool trims = trimmable && (st != Strategy::Reg || spec.trim_applies_to_reg);
  const bool needs_p = st != Strategy::Reg || trims;

  Sample est = s;
  Eigen::VectorXd g_hat, p_hat;
  if (needs_p) p_hat = nu.predict_propensity(s.x);
  if (trims) {
    const auto keep = trim_indices(p_hat, r, spec.trim_threshold);
    res.trimmed_count = s.n() - static_cast<Eigen::Index>(keep.size());
    if (keep.empty()) throw estimation_error("trimming removed every observation");
    est = s.subset(keep);
    if (est.n1() == 0 || est.n0() == 0)
      throw estimation_error("trimming emptied one group");
    p_hat = select(p_hat, keep);
    res.n = est.n();
    res.n0 = est.n0();
    res.n1 = est.n1();
  }
  if (needs_g) g_hat = nu.predict_outcome(static_cast<int>(r), est.x);

  switch (st) {
    case Strategy::Reg:
      res.delta_hat = delta_reg(est, g_hat, r);
      res.explained_hat = explained_reg(est, g_hat);
      break;
    case Strategy::IPWu:
    case Strategy::IPWn:
      res.delta_hat = delta_ipw(est, p_hat, r, st == Strategy::IPWn);
      res.explained_hat = res.delta_obs - res.delta_hat;
      break;
    case Strategy::AIPWu:
    case Strategy::AIPWn: {
      const bool normalized = st == Strategy::AIPWn;
      res.delta_hat = delta_aipw(est, g_hat, p_hat, r, normalized);
      if (r == Reference::Equilibrium)
        res.explained_hat = explained_aipw_r2(est, g_hat, p_hat);
      else
        res.explained_hat = res.delta_obs - res.delta_hat;
      const ScoreVector sv = scores(est, g_hat, p_hat, r, res.delta_hat, normalized);
      res.se = variance_from_scores(sv).second;
      break;
    }
  }
  return res;
}

DecompResult estimate_once(const Sample& s, const EstimatorSpec& spec,
                           const GbmParams& gbm, Misspecification misspec) {
  const NuisancePair nu = fit_nuisances(s, spec.reference, spec.engine, gbm, misspec);
  return estimate_with_nuisances(s, spec, nu);
}

}  // namespace kob
