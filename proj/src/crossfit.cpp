#include "kob/crossfit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kob/inference.hpp"
#include "kob/parallel.hpp"

namespace kob {

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split(
    Eigen::Index n, double fraction, std::uint64_t seed, int k) {
  if (fraction <= 0.0 || fraction >= 1.0)
    throw validation_error("split: fraction must lie in (0,1)");
  const Eigen::Index m = static_cast<Eigen::Index>(
      std::floor(fraction * static_cast<double>(n)));
  if (m == 0 || m == n) throw validation_error("split: a fold would be empty");

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  auto rng = make_rng(seed, static_cast<std::uint64_t>(k));
  std::shuffle(idx.begin(), idx.end(), rng);

  std::vector<Eigen::Index> main(idx.begin(), idx.begin() + m);
  std::vector<Eigen::Index> aux(idx.begin() + m, idx.end());
  std::sort(main.begin(), main.end());
  std::sort(aux.begin(), aux.end());
  return {std::move(main), std::move(aux)};
}

namespace {

struct FoldOutcome {
  bool ok = false;
  double theta = 0.0;
  Eigen::Index trimmed = 0;
  // sum psi_i^2 / n_k, evaluated at theta_k (the fold variance term), plus the
  // ingredients to re-center at the aggregated theta when requested:
  // psi(theta) = psi(theta_k) - a_i (theta - theta_k), a_i linear in delta.
  double sum_psi2_over_nk = 0.0;
  Eigen::VectorXd psi;  // stored only when variance_at_aggregate
  Eigen::VectorXd a;    // d(psi_i)/d(delta) coefficients, ditto
};

// Coefficient of -delta_hat inside psi_i (see the empirical score forms).
Eigen::VectorXd delta_coefficients(const Sample& s, Reference r) {
  const double n = static_cast<double>(s.n());
  const double n1 = static_cast<double>(s.n1());
  const double n0 = static_cast<double>(s.n0());
  Eigen::VectorXd a(s.n());
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    const double di = static_cast<double>(s.d(i));
    switch (r) {
      case Reference::Disadvantaged: a(i) = n * di / n1; break;
      case Reference::Advantaged: a(i) = -n * (1.0 - di) / n0; break;
      default: a(i) = 1.0; break;
    }
  }
  return a;
}

FoldOutcome run_fold(const Sample& s, const EstimatorSpec& spec,
                     const FoldPlan& plan, const GbmParams& ml_params, int k,
                     bool estimate_on_aux) {
  FoldOutcome out;
  auto [main_idx, aux_idx] = split(s.n(), plan.split_fraction, plan.seed, k);
  if (estimate_on_aux) std::swap(main_idx, aux_idx);
  Sample aux = s.subset(aux_idx);
  Sample main = s.subset(main_idx);
  if (aux.n0() == 0 || aux.n1() == 0 || main.n0() == 0 || main.n1() == 0)
    return out;  // skipped

  GbmParams gp = ml_params;
  gp.seed = mix_seed(ml_params.seed, static_cast<std::uint64_t>(k) * 2 +
                                         (estimate_on_aux ? 1 : 0));
  NuisancePair nu;
  try {
    nu = fit_nuisances(aux, spec.reference, spec.engine, gp);
  } catch (const estimation_error&) {
    return out;  // e.g. non-converged logit in an unlucky fold
  }

  const Reference r = spec.reference;
  Eigen::VectorXd p_hat = nu.predict_propensity(main.x);
  if ((r == Reference::Disadvantaged || r == Reference::Advantaged) &&
      spec.trim_threshold > 0.0) {
    const auto keep = trim_indices(p_hat, r, spec.trim_threshold);
    out.trimmed = main.n() - static_cast<Eigen::Index>(keep.size());
    if (keep.empty()) return out;
    Eigen::VectorXd kept(static_cast<Eigen::Index>(keep.size()));
    for (Eigen::Index i = 0; i < kept.size(); ++i) kept(i) = p_hat(keep[i]);
    main = main.subset(keep);
    p_hat = std::move(kept);
    if (main.n0() == 0 || main.n1() == 0) return out;
  }

  const bool needs_g =
      spec.strategy != Strategy::IPWu && spec.strategy != Strategy::IPWn;
  Eigen::VectorXd g_hat;
  if (needs_g) g_hat = nu.predict_outcome(static_cast<int>(r), main.x);

  switch (spec.strategy) {
    case Strategy::Reg:
      out.theta = delta_reg(main, g_hat, r);
      break;
    case Strategy::IPWu:
    case Strategy::IPWn:
      out.theta = delta_ipw(main, p_hat, r, spec.strategy == Strategy::IPWn);
      break;
    case Strategy::AIPWu:
    case Strategy::AIPWn: {
      const bool normalized = spec.strategy == Strategy::AIPWn;
      out.theta = delta_aipw(main, g_hat, p_hat, r, normalized);
      const ScoreVector sv = scores(main, g_hat, p_hat, r, out.theta, normalized);
      out.sum_psi2_over_nk =
          sv.psi.squaredNorm() / static_cast<double>(main.n());
      if (plan.variance_at_aggregate) {
        out.psi = sv.psi;
        out.a = delta_coefficients(main, r);
      }
      break;
    }
  }
  out.ok = true;
  return out;
}

}  // namespace

DecompResult crossfit_estimate(const Sample& s, const EstimatorSpec& spec,
                               const FoldPlan& plan, const GbmParams& ml_params,
                               unsigned n_threads, Eigen::Index* skipped_out) {
  if (plan.K < 1) throw validation_error("crossfit_estimate: K must be >= 1");
  if (spec.reference == Reference::Pooled &&
      spec.strategy != Strategy::Reg)
    throw unsupported_combination_error(
        "reference r=3 (Pooled) supports the Reg strategy only");

  const int halves = plan.swap_folds ? 2 : 1;
  std::vector<FoldOutcome> folds(static_cast<std::size_t>(plan.K * halves));
  parallel_for(folds.size(), n_threads, [&](std::size_t t) {
    const int k = static_cast<int>(t) / halves;
    const bool on_aux = plan.swap_folds && (t % 2 == 1);
    folds[t] = run_fold(s, spec, plan, ml_params, k, on_aux);
  });

  DecompResult res;
  res.reference = spec.reference;
  res.strategy = spec.strategy;
  res.engine = spec.engine;
  res.delta_obs = delta_obs(s);
  res.n = s.n();
  res.n0 = s.n0();
  res.n1 = s.n1();

  Eigen::Index skipped = 0;
  double theta_sum = 0.0;
  for (const FoldOutcome& f : folds) {
    if (!f.ok) {
      ++skipped;
      continue;
    }
    theta_sum += f.theta;
    res.trimmed_count += f.trimmed;
    res.per_rep.push_back(f.theta);
  }
  const Eigen::Index effective = static_cast<Eigen::Index>(folds.size()) - skipped;
  if (skipped_out != nullptr) *skipped_out = skipped;
  if (effective == 0 ||
      skipped * 10 > static_cast<Eigen::Index>(folds.size()))
    throw estimation_error("crossfit_estimate: more than 10% of repetitions skipped (" +
                           std::to_string(skipped) + "/" +
                           std::to_string(folds.size()) + ")");
  res.delta_hat = theta_sum / static_cast<double>(effective);

  const bool aipw =
      spec.strategy == Strategy::AIPWu || spec.strategy == Strategy::AIPWn;
  if (aipw) {
    // sigma^2 = (1/K) sum_k (1/n_k) sum_i psi_i^2 ; se = sigma / sqrt(n)
    double sigma2 = 0.0;
    for (const FoldOutcome& f : folds) {
      if (!f.ok) continue;
      if (plan.variance_at_aggregate) {
        const Eigen::VectorXd shifted =
            f.psi - f.a * (res.delta_hat - f.theta);
        sigma2 += shifted.squaredNorm() / static_cast<double>(shifted.size());
      } else {
        sigma2 += f.sum_psi2_over_nk;
      }
    }
    sigma2 /= static_cast<double>(effective);
    res.se = std::sqrt(sigma2 / static_cast<double>(s.n()));
  }
  return res;
}

}  // namespace kob
