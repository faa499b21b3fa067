#include "kob/estimators.hpp"

#include <cmath>

namespace kob {

std::string to_string(Reference r) {
  switch (r) {
    case Reference::Disadvantaged: return "r0";
    case Reference::Advantaged: return "r1";
    case Reference::Equilibrium: return "r2";
    case Reference::Pooled: return "r3";
  }
  return "?";
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Reg: return "Reg";
    case Strategy::IPWu: return "IPWu";
    case Strategy::IPWn: return "IPWn";
    case Strategy::AIPWu: return "AIPWu";
    case Strategy::AIPWn: return "AIPWn";
  }
  return "?";
}

std::string to_string(Engine e) {
  return e == Engine::parametric ? "parametric" : "ml";
}

Reference reference_from_int(int r) {
  if (r < 0 || r > 3)
    throw validation_error("reference must be in {0,1,2,3}, got " + std::to_string(r));
  return static_cast<Reference>(r);
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "Reg") return Strategy::Reg;
  if (s == "IPWu") return Strategy::IPWu;
  if (s == "IPWn") return Strategy::IPWn;
  if (s == "AIPWu") return Strategy::AIPWu;
  if (s == "AIPWn") return Strategy::AIPWn;
  throw validation_error("unknown strategy '" + s +
                         "' (expected Reg|IPWu|IPWn|AIPWu|AIPWn)");
}

namespace {

void require_both_groups(const Sample& s) {
  if (s.n1() == 0 || s.n0() == 0)
    throw estimation_error("estimator requires both groups to be nonempty");
}

}  // namespace

double delta_obs(const Sample& s) {
  require_both_groups(s);
  double s1 = 0.0, s0 = 0.0;
  for (Eigen::Index i = 0; i < s.n(); ++i) (s.d(i) == 1 ? s1 : s0) += s.y(i);
  return s1 / static_cast<double>(s.n1()) - s0 / static_cast<double>(s.n0());
}

std::vector<Eigen::Index> trim_indices(const Eigen::Ref<const Eigen::VectorXd>& p_hat,
                                       Reference r, double threshold) {
  if (r != Reference::Disadvantaged && r != Reference::Advantaged)
    throw validation_error("trim applies to r in {0,1} only");
  if (threshold < 0.0 || threshold >= 0.5)
    throw validation_error("trim threshold must be in [0, 0.5)");
  std::vector<Eigen::Index> keep;
  keep.reserve(p_hat.size());
  for (Eigen::Index i = 0; i < p_hat.size(); ++i) {
    const bool drop = r == Reference::Disadvantaged ? p_hat(i) > 1.0 - threshold
                                                    : p_hat(i) < threshold;
    if (!drop) keep.push_back(i);
  }
  return keep;
}

std::pair<Sample, Eigen::Index> trim(const Sample& s,
                                     const Eigen::Ref<const Eigen::VectorXd>& p_hat,
                                     Reference r, double threshold) {
  if (p_hat.size() != s.n()) throw validation_error("trim: p_hat length mismatch");
  const auto keep = trim_indices(p_hat, r, threshold);
  const auto trimmed = s.n() - static_cast<Eigen::Index>(keep.size());
  if (keep.empty()) throw estimation_error("trimming removed every observation");
  Sample out = s.subset(keep);
  if (out.n1() == 0 || out.n0() == 0)
    throw estimation_error("trimming emptied one group");
  return {std::move(out), trimmed};
}

double delta_reg(const Sample& s, const Eigen::Ref<const Eigen::VectorXd>& g_hat,
                 Reference r) {
  require_both_groups(s);
  if (g_hat.size() != s.n()) throw validation_error("delta_reg: g_hat length mismatch");
  const double n1 = static_cast<double>(s.n1());
  const double n0 = static_cast<double>(s.n0());
  double r1 = 0.0, r0 = 0.0;  // residual sums by group
  for (Eigen::Index i = 0; i < s.n(); ++i)
    (s.d(i) == 1 ? r1 : r0) += s.y(i) - g_hat(i);
  switch (r) {
    case Reference::Disadvantaged: return r1 / n1;
    case Reference::Advantaged: return -r0 / n0;
    case Reference::Equilibrium:
    case Reference::Pooled: return r1 / n1 - r0 / n0;
  }
  throw validation_error("delta_reg: bad reference");
}

Eigen::VectorXd weights_w1(const Sample& s,
                           const Eigen::Ref<const Eigen::VectorXd>& p_hat) {
  Eigen::VectorXd w(s.n());
  for (Eigen::Index i = 0; i < s.n(); ++i)
    w(i) = s.d(i) == 1 ? (1.0 - p_hat(i)) / p_hat(i) : 0.0;
  const double total = w.sum();
  if (total <= 0.0) throw estimation_error("w1 weights sum to zero");
  return w / total;
}

Eigen::VectorXd weights_w0(const Sample& s,
                           const Eigen::Ref<const Eigen::VectorXd>& p_hat) {
  Eigen::VectorXd w(s.n());
  for (Eigen::Index i = 0; i < s.n(); ++i)
    w(i) = s.d(i) == 0 ? p_hat(i) / (1.0 - p_hat(i)) : 0.0;
  const double total = w.sum();
  if (total <= 0.0) throw estimation_error("w0 weights sum to zero");
  return w / total;
}

Eigen::VectorXd weights_v1(const Eigen::Ref<const Eigen::VectorXd>& p_hat) {
  return p_hat / p_hat.sum();
}

Eigen::VectorXd weights_v0(const Eigen::Ref<const Eigen::VectorXd>& p_hat) {
  Eigen::VectorXd q = (1.0 - p_hat.array()).matrix();
  return q / q.sum();
}

namespace {

// Shared core of the IPW and AIPW families: the AIPW estimators replace the
// raw outcome with the residual against g_hat(r,.).
double weighting_estimator(const Sample& s, const Eigen::VectorXd& value,
                           const Eigen::Ref<const Eigen::VectorXd>& p_hat,
                           Reference r, bool normalized) {
  require_both_groups(s);
  if (p_hat.size() != s.n()) throw validation_error("p_hat length mismatch");
  if (r == Reference::Pooled)
    throw unsupported_combination_error(
        "reference r=3 (Pooled) supports the Reg strategy with the parametric "
        "engine only");
  const double n1 = static_cast<double>(s.n1());
  const double n0 = static_cast<double>(s.n0());
  double acc = 0.0;

  if (!normalized) {
    for (Eigen::Index i = 0; i < s.n(); ++i) {
      const double dp = static_cast<double>(s.d(i)) - p_hat(i);
      switch (r) {
        case Reference::Advantaged: acc += value(i) * dp / p_hat(i) / n0; break;
        case Reference::Disadvantaged:
          acc += value(i) * dp / (1.0 - p_hat(i)) / n1;
          break;
        case Reference::Equilibrium: acc += value(i) * dp * (1.0 / n1 + 1.0 / n0); break;
        default: break;
      }
    }
    return acc;
  }

  switch (r) {
    case Reference::Advantaged: {
      const Eigen::VectorXd w1 = weights_w1(s, p_hat);
      for (Eigen::Index i = 0; i < s.n(); ++i)
        acc += value(i) * (w1(i) - (1.0 - s.d(i)) / n0);
      return acc;
    }
    case Reference::Disadvantaged: {
      const Eigen::VectorXd w0 = weights_w0(s, p_hat);
      for (Eigen::Index i = 0; i < s.n(); ++i)
        acc += value(i) * (s.d(i) / n1 - w0(i));
      return acc;
    }
    case Reference::Equilibrium: {
      const Eigen::VectorXd v1 = weights_v1(p_hat);
      const Eigen::VectorXd v0 = weights_v0(p_hat);
      for (Eigen::Index i = 0; i < s.n(); ++i)
        acc += value(i) *
               (s.d(i) / n1 - (1.0 - s.d(i)) / n0 + v0(i) - v1(i));
      return acc;
    }
    default: break;
  }
  throw validation_error("bad reference");
}

}  // namespace

double delta_ipw(const Sample& s, const Eigen::Ref<const Eigen::VectorXd>& p_hat,
                 Reference r, bool normalized) {
  return weighting_estimator(s, s.y, p_hat, r, normalized);
}

double delta_aipw(const Sample& s, const Eigen::Ref<const Eigen::VectorXd>& g_hat,
                  const Eigen::Ref<const Eigen::VectorXd>& p_hat, Reference r,
                  bool normalized) {
  if (g_hat.size() != s.n()) throw validation_error("delta_aipw: g_hat length mismatch");
  return weighting_estimator(s, s.y - g_hat, p_hat, r, normalized);
}

double explained_reg(const Sample& s, const Eigen::Ref<const Eigen::VectorXd>& g_hat) {
  require_both_groups(s);
  if (g_hat.size() != s.n()) throw validation_error("explained_reg: length mismatch");
  double s1 = 0.0, s0 = 0.0;
  for (Eigen::Index i = 0; i < s.n(); ++i) (s.d(i) == 1 ? s1 : s0) += g_hat(i);
  return s1 / static_cast<double>(s.n1()) - s0 / static_cast<double>(s.n0());
}

double explained_aipw_r2(const Sample& s,
                         const Eigen::Ref<const Eigen::VectorXd>& g_hat,
                         const Eigen::Ref<const Eigen::VectorXd>& p_hat) {
  require_both_groups(s);
  if (g_hat.size() != s.n() || p_hat.size() != s.n())
    throw validation_error("explained_aipw_r2: length mismatch");
  const double pi = s.pi_hat();
  const double scale = 1.0 / (pi * (1.0 - pi));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.n(); ++i)
    acc += scale * ((s.y(i) - g_hat(i)) * (p_hat(i) - pi) +
                    g_hat(i) * (static_cast<double>(s.d(i)) - pi));
  return acc / static_cast<double>(s.n());
}

LinearExplainedParts linear_explained_parts(const Sample& s) {
  require_both_groups(s);
  const Eigen::Index n = s.n();
  const Eigen::Index k = s.k();

  // interacted design: [x, d, x*d], intercept added by fit_ols
  Eigen::MatrixXd z(n, 2 * k + 1);
  z.leftCols(k) = s.x;
  z.col(k) = s.d.cast<double>();
  for (Eigen::Index j = 0; j < k; ++j)
    z.col(k + 1 + j) = s.x.col(j).array() * s.d.cast<double>().array();
  const LinearModel ols = fit_ols(z, s.y);
  const Eigen::VectorXd beta = ols.coef.segment(1, k);
  const double gamma = ols.coef(k + 1);
  const Eigen::VectorXd delta = ols.coef.segment(k + 2, k);

  const LogitModel logit = fit_logit(s.x, s.d);
  const Eigen::VectorXd p = logit.predict_probability(Eigen::Ref<const Eigen::MatrixXd>(s.x));

  const double n1 = static_cast<double>(s.n1());
  const double n0 = static_cast<double>(s.n0());
  Eigen::VectorXd x1 = Eigen::VectorXd::Zero(k), x0 = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd xp1 = Eigen::VectorXd::Zero(k), xp0 = Eigen::VectorXd::Zero(k);
  double p1 = 0.0, p0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (s.d(i) == 1) {
      x1 += s.x.row(i).transpose();
      xp1 += p(i) * s.x.row(i).transpose();
      p1 += p(i);
    } else {
      x0 += s.x.row(i).transpose();
      xp0 += p(i) * s.x.row(i).transpose();
      p0 += p(i);
    }
  }
  const Eigen::VectorXd dx = x1 / n1 - x0 / n0;
  const Eigen::VectorXd dxp = xp1 / n1 - xp0 / n0;
  const double dp = p1 / n1 - p0 / n0;
  const double pi = s.pi_hat();

  LinearExplainedParts out;
  out.dx0 = dx.dot(beta);
  out.dx1 = dx.dot(beta + delta);
  out.dx3 = dx.dot(beta + pi * delta);
  out.dx2 = dx.dot(beta) + dp * gamma + dxp.dot(delta);
  return out;
}

}  // namespace kob
