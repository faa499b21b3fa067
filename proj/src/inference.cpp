#include "kob/inference.hpp"

#include <cmath>

#include "kob/parallel.hpp"

namespace kob {

ScoreVector scores(const Sample& s, const Eigen::Ref<const Eigen::VectorXd>& g_hat,
                   const Eigen::Ref<const Eigen::VectorXd>& p_hat, Reference r,
                   double delta_hat, bool normalized) {
  if (r == Reference::Pooled)
    throw unsupported_combination_error("scores: r=3 (Pooled) unsupported");
  if (g_hat.size() != s.n() || p_hat.size() != s.n())
    throw validation_error("scores: length mismatch");
  const double n = static_cast<double>(s.n());
  const double n1 = static_cast<double>(s.n1());
  const double n0 = static_cast<double>(s.n0());

  ScoreVector sv;
  sv.reference = r;
  sv.normalized = normalized;
  sv.psi.resize(s.n());

  Eigen::VectorXd w1, w0, v1, v0;
  if (normalized) {
    if (r == Reference::Advantaged) w1 = weights_w1(s, p_hat);
    if (r == Reference::Disadvantaged) w0 = weights_w0(s, p_hat);
    if (r == Reference::Equilibrium) {
      v1 = weights_v1(p_hat);
      v0 = weights_v0(p_hat);
    }
  }

  for (Eigen::Index i = 0; i < s.n(); ++i) {
    const double resid = s.y(i) - g_hat(i);
    const double di = static_cast<double>(s.d(i));
    const double pi = p_hat(i);
    double psi = 0.0;
    switch (r) {
      case Reference::Disadvantaged: {
        const double weight = normalized
                                  ? n * di / n1 - n * w0(i)
                                  : n * di / n1 - n * (1.0 - di) * pi / (n1 * (1.0 - pi));
        psi = resid * weight - (n * di / n1) * delta_hat;
        break;
      }
      case Reference::Advantaged: {
        const double weight =
            normalized ? n * (1.0 - di) / n0 - n * w1(i)
                       : n * (1.0 - di) / n0 - n * di * (1.0 - pi) / (n0 * pi);
        psi = resid * weight + (n * (1.0 - di) / n0) * delta_hat;
        break;
      }
      case Reference::Equilibrium: {
        const double weight =
            normalized ? n * di / n1 - n * (1.0 - di) / n0 + n * v0(i) - n * v1(i)
                       : (n / n1 + n / n0) * (di - pi);
        psi = resid * weight - delta_hat;
        break;
      }
      default: break;
    }
    sv.psi(i) = psi;
  }
  return sv;
}

std::pair<double, double> variance_from_scores(const ScoreVector& sv) {
  if (sv.psi.size() == 0) throw validation_error("variance_from_scores: empty scores");
  const double n = static_cast<double>(sv.psi.size());
  const double var = sv.psi.squaredNorm() / (n * n);
  return {var, std::sqrt(var)};
}

BootstrapResult bootstrap_pairs(const Sample& s, const EstimatorSpec& spec, int B,
                                std::uint64_t seed, unsigned n_threads,
                                const GbmParams& gbm, bool refit_nuisances) {
  if (B < 2) throw validation_error("bootstrap_pairs: B must be >= 2");
  const Eigen::Index n = s.n();

  // fast mode: nuisances held fixed at the full-sample fit (approximate)
  NuisancePair fixed;
  if (!refit_nuisances)
    fixed = fit_nuisances(s, spec.reference, spec.engine, gbm, Misspecification::none);

  std::vector<double> reps(B, std::numeric_limits<double>::quiet_NaN());
  parallel_for(static_cast<std::size_t>(B), n_threads, [&](std::size_t b) {
    auto rng = make_rng(seed, b);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<Eigen::Index> rows(n);
    for (Eigen::Index i = 0; i < n; ++i) rows[i] = pick(rng);
    Sample boot = s.subset(rows);
    if (boot.n1() == 0 || boot.n0() == 0) return;  // degenerate, skipped
    try {
      GbmParams gp = gbm;
      gp.seed = mix_seed(gbm.seed, b + 1);
      const DecompResult r = refit_nuisances
                                 ? estimate_once(boot, spec, gp)
                                 : estimate_with_nuisances(boot, spec, fixed);
      reps[b] = r.delta_hat;
    } catch (const estimation_error&) {
      // singular design / trimming exhausted: skipped and counted
    }
  });

  BootstrapResult out;
  for (double v : reps) {
    if (std::isnan(v))
      ++out.skipped;
    else
      out.replicates.push_back(v);
  }
  if (out.skipped * 10 > static_cast<Eigen::Index>(B))
    throw estimation_error("bootstrap_pairs: more than 10% of resamples degenerate (" +
                           std::to_string(out.skipped) + "/" + std::to_string(B) + ")");
  const double m = static_cast<double>(out.replicates.size());
  double mean = 0.0;
  for (double v : out.replicates) mean += v;
  mean /= m;
  double ss = 0.0;
  for (double v : out.replicates) ss += (v - mean) * (v - mean);
  out.se = std::sqrt(ss / (m - 1.0));
  return out;
}

namespace {

struct BlendedNuisance {
  Eigen::VectorXd g;
  Eigen::VectorXd p;
};

BlendedNuisance blend(const Sample& s, const NuisancePair& eta0,
                      const NuisancePair& eta, Reference r, double c,
                      bool perturb_outcome, bool perturb_propensity) {
  const int ri = static_cast<int>(r);
  BlendedNuisance out;
  out.g = eta0.predict_outcome(ri, s.x);
  out.p = eta0.predict_propensity(s.x);
  if (perturb_outcome && c != 0.0)
    out.g += c * (eta.predict_outcome(ri, s.x) - out.g).eval();
  if (perturb_propensity && c != 0.0) {
    Eigen::VectorXd p1 = eta.predict_propensity(s.x);
    out.p += c * (p1 - out.p).eval();
    out.p = out.p.cwiseMax(kPropensityClip).cwiseMin(1.0 - kPropensityClip);
  }
  return out;
}

}  // namespace

std::vector<std::pair<double, double>> orthogonality_check(
    const Sample& s, const NuisancePair& eta0, const NuisancePair& eta_perturbed,
    Reference r, const std::vector<double>& c_grid, bool normalized,
    bool perturb_outcome, bool perturb_propensity) {
  // theta held at its eta0 value
  const BlendedNuisance base = blend(s, eta0, eta_perturbed, r, 0.0, false, false);
  const double theta0 = delta_aipw(s, base.g, base.p, r, normalized);

  std::vector<std::pair<double, double>> curve;
  curve.reserve(c_grid.size());
  for (double c : c_grid) {
    const BlendedNuisance nb =
        blend(s, eta0, eta_perturbed, r, c, perturb_outcome, perturb_propensity);
    const ScoreVector sv = scores(s, nb.g, nb.p, r, theta0, normalized);
    curve.emplace_back(c, sv.psi.mean());
  }
  return curve;
}

SlopeEstimate orthogonality_slope(const Sample& s, const NuisancePair& eta0,
                                  const NuisancePair& eta_perturbed, Reference r,
                                  double c, bool normalized, bool perturb_outcome,
                                  bool perturb_propensity) {
  if (c <= 0.0) throw validation_error("orthogonality_slope: c must be > 0");
  const BlendedNuisance base = blend(s, eta0, eta_perturbed, r, 0.0, false, false);
  const double theta0 = delta_aipw(s, base.g, base.p, r, normalized);
  const BlendedNuisance hi =
      blend(s, eta0, eta_perturbed, r, c, perturb_outcome, perturb_propensity);
  const BlendedNuisance lo =
      blend(s, eta0, eta_perturbed, r, -c, perturb_outcome, perturb_propensity);
  const Eigen::VectorXd psi_hi = scores(s, hi.g, hi.p, r, theta0, normalized).psi;
  const Eigen::VectorXd psi_lo = scores(s, lo.g, lo.p, r, theta0, normalized).psi;
  const Eigen::VectorXd diff = (psi_hi - psi_lo) / (2.0 * c);

  SlopeEstimate est;
  est.slope = diff.mean();
  const double n = static_cast<double>(diff.size());
  const double sd = std::sqrt((diff.array() - est.slope).square().sum() / (n - 1.0));
  est.se = sd / std::sqrt(n);
  return est;
}

SlopeEstimate reg_moment_slope(const Sample& s, const NuisancePair& eta0,
                               const NuisancePair& eta_perturbed, Reference r,
                               double c) {
  if (c <= 0.0) throw validation_error("reg_moment_slope: c must be > 0");
  const int ri = static_cast<int>(r);
  const Eigen::VectorXd g0 = eta0.predict_outcome(ri, s.x);
  const Eigen::VectorXd g1 = eta_perturbed.predict_outcome(ri, s.x);
  const double theta0 = delta_reg(s, g0, r);
  const double n = static_cast<double>(s.n());
  const double n1 = static_cast<double>(s.n1());
  const double n0 = static_cast<double>(s.n0());

  // Reg residual-mean moment (no weighting correction): mean zero at the Reg
  // estimator but not orthogonal to outcome-model perturbations.
  auto psi_at = [&](double cc) {
    Eigen::VectorXd g = g0 + cc * (g1 - g0);
    Eigen::VectorXd psi(s.n());
    for (Eigen::Index i = 0; i < s.n(); ++i) {
      const double resid = s.y(i) - g(i);
      const double di = static_cast<double>(s.d(i));
      switch (r) {
        case Reference::Disadvantaged:
          psi(i) = (n / n1) * di * resid - theta0;
          break;
        case Reference::Advantaged:
          psi(i) = -(n / n0) * (1.0 - di) * resid - theta0;
          break;
        default:
          psi(i) = (n / n1) * di * resid - (n / n0) * (1.0 - di) * resid - theta0;
          break;
      }
    }
    return psi;
  };
  const Eigen::VectorXd diff = (psi_at(c) - psi_at(-c)) / (2.0 * c);
  SlopeEstimate est;
  est.slope = diff.mean();
  const double sd = std::sqrt((diff.array() - est.slope).square().sum() / (n - 1.0));
  est.se = sd / std::sqrt(n);
  return est;
}

}  // namespace kob
