#include "kob/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kob {

namespace {

Eigen::MatrixXd with_intercept(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Eigen::MatrixXd z(x.rows(), x.cols() + 1);
  z.col(0).setOnes();
  z.rightCols(x.cols()) = x;
  return z;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clip_probability(double p) {
  return std::clamp(p, kPropensityClip, 1.0 - kPropensityClip);
}

}  // namespace

double LinearModel::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (x.size() + 1 != coef.size())
    throw validation_error("LinearModel: expected " + std::to_string(coef.size() - 1) +
                           " features, got " + std::to_string(x.size()));
  return coef(0) + x.dot(coef.tail(coef.size() - 1));
}

Eigen::VectorXd LinearModel::predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  if (x.cols() + 1 != coef.size())
    throw validation_error("LinearModel: feature dimension mismatch");
  return (x * coef.tail(coef.size() - 1)).array() + coef(0);
}

double LogitModel::predict_probability_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (x.size() + 1 != coef.size())
    throw validation_error("LogitModel: feature dimension mismatch");
  return sigmoid(coef(0) + x.dot(coef.tail(coef.size() - 1)));
}

Eigen::VectorXd LogitModel::predict_probability(
    const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  if (x.cols() + 1 != coef.size())
    throw validation_error("LogitModel: feature dimension mismatch");
  Eigen::VectorXd z = (x * coef.tail(coef.size() - 1)).array() + coef(0);
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int node = 0;
  while (nodes[node].feature >= 0) {
    const auto& nd = nodes[node];
    node = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[node].value;
}

double BoostedModel::predict_raw(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  double s = base_score;
  for (const auto& t : trees) s += learning_rate * t.predict(x);
  return s;
}

double BoostedModel::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  const double raw = predict_raw(x);
  return loss == GbmLoss::log_loss ? sigmoid(raw) : raw;
}

Eigen::VectorXd BoostedModel::predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_row(x.row(i));
  return out;
}

double NuisancePair::predict_outcome_row(
    int r, const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  const auto it = outcome.find(r);
  if (it == outcome.end())
    throw estimation_error("no outcome model fitted for reference r=" + std::to_string(r));
  return std::visit([&](const auto& m) { return m.predict_row(x); }, it->second);
}

Eigen::VectorXd NuisancePair::predict_outcome(
    int r, const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  const auto it = outcome.find(r);
  if (it == outcome.end())
    throw estimation_error("no outcome model fitted for reference r=" + std::to_string(r));
  return std::visit([&](const auto& m) -> Eigen::VectorXd { return m.predict(x); },
                    it->second);
}

double NuisancePair::predict_propensity_row(
    const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  const double p = std::visit(
      [&](const auto& m) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LogitModel>)
          return m.predict_probability_row(x);
        else
          return m.predict_row(x);
      },
      propensity);
  return clip_probability(p);
}

Eigen::VectorXd NuisancePair::predict_propensity(
    const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::Index* clip_count) const {
  Eigen::VectorXd p = std::visit(
      [&](const auto& m) -> Eigen::VectorXd {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LogitModel>)
          return m.predict_probability(x);
        else
          return m.predict(x);
      },
      propensity);
  Eigen::Index clipped = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double c = clip_probability(p(i));
    if (c != p(i)) ++clipped;
    p(i) = c;
  }
  if (clip_count) *clip_count += clipped;
  return p;
}

LinearModel fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y,
                    const std::vector<std::string>& feature_names) {
  const Eigen::Index k = x.cols();
  if (x.rows() != y.size()) throw validation_error("fit_ols: row count mismatch");
  if (x.rows() < k + 1)
    throw validation_error("fit_ols: need at least k+1 rows");
  const Eigen::MatrixXd z = with_intercept(x);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);

  // Condition check on the pivoted R diagonal.
  const Eigen::VectorXd rdiag = qr.matrixR().diagonal().cwiseAbs();
  const double rmax = rdiag.maxCoeff();
  const double rmin = rdiag.minCoeff();
  if (rmin <= 0.0 || rmax / rmin > 1e12) {
    std::string msg = "fit_ols: singular or near-singular design";
    // the most-dependent column sits last in the pivot order
    const Eigen::Index bad = qr.colsPermutation().indices()(k);
    if (bad == 0) {
      msg += " (intercept column)";
    } else if (static_cast<std::size_t>(bad - 1) < feature_names.size()) {
      msg += " (column '" + feature_names[bad - 1] + "')";
    } else {
      msg += " (covariate index " + std::to_string(bad - 1) + ")";
    }
    throw singular_design_error(msg);
  }

  LinearModel m;
  m.coef = qr.solve(y);
  m.feature_names = feature_names;
  for (Eigen::Index j = 0; j < m.coef.size(); ++j)
    if (!std::isfinite(m.coef(j)))
      throw singular_design_error("fit_ols: non-finite coefficients");
  return m;
}

LogitModel fit_logit(const Eigen::Ref<const Eigen::MatrixXd>& x,
                     const Eigen::Ref<const Eigen::VectorXi>& d,
                     int max_iter, double tol) {
  if (x.rows() != d.size()) throw validation_error("fit_logit: row count mismatch");
  const int n1 = d.sum();
  if (n1 == 0 || n1 == d.size())
    throw validation_error("fit_logit: both classes must be present");
  const Eigen::MatrixXd z = with_intercept(x);
  const Eigen::Index p = z.cols();
  const Eigen::VectorXd dv = d.cast<double>();

  LogitModel m;
  m.coef = Eigen::VectorXd::Zero(p);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd eta = z * m.coef;
    Eigen::VectorXd prob = eta.unaryExpr([](double v) { return sigmoid(v); });
    Eigen::VectorXd score = z.transpose() * (dv - prob);
    m.iterations = it;
    if (score.cwiseAbs().maxCoeff() < tol) {
      m.converged = true;
      return m;
    }
    Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd hess = z.transpose() * w.asDiagonal() * z;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = ldlt.solve(score);
    } else {
      step.setZero(p);
    }
    if (!step.allFinite() || step.isZero(0.0)) {
      // ridge fallback to survive near-separation
      hess.diagonal().array() += 1e-8;
      step = hess.ldlt().solve(score);
      m.ridge_fallback = true;
    }
    m.coef += step;
    if (!m.coef.allFinite())
      throw estimation_error("fit_logit: IRLS diverged to non-finite coefficients");
    if (m.coef.cwiseAbs().maxCoeff() > 30.0) m.separation_warning = true;
  }
  m.iterations = max_iter;
  if (!m.separation_warning)
    throw estimation_error("fit_logit: IRLS failed to converge in " +
                           std::to_string(max_iter) + " iterations");
  return m;  // separation: fit returned at iteration cap, flagged
}

namespace {

struct SplitResult {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Exact greedy split: maximize sum_l^2/n_l + sum_r^2/n_r over sorted values.
SplitResult best_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& grad,
                       const std::vector<Eigen::Index>& rows, int min_leaf,
                       std::vector<std::pair<double, double>>& scratch) {
  SplitResult best;
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n < 2 * min_leaf) return best;
  double total = 0.0;
  for (auto i : rows) total += grad(i);
  const double base = total * total / static_cast<double>(n);

  for (int j = 0; j < x.cols(); ++j) {
    scratch.clear();
    for (auto i : rows) scratch.emplace_back(x(i, j), grad(i));
    std::sort(scratch.begin(), scratch.end());
    double left_sum = 0.0;
    for (Eigen::Index s = 0; s + 1 < n; ++s) {
      left_sum += scratch[s].second;
      if (s + 1 < min_leaf || n - s - 1 < min_leaf) continue;
      if (scratch[s].first == scratch[s + 1].first) continue;
      const double nl = static_cast<double>(s + 1);
      const double nr = static_cast<double>(n - s - 1);
      const double right_sum = total - left_sum;
      const double gain =
          left_sum * left_sum / nl + right_sum * right_sum / nr - base;
      if (gain > best.gain + 1e-12 * (1.0 + std::abs(best.gain))) {
        best.found = true;
        best.feature = j;
        best.threshold = 0.5 * (scratch[s].first + scratch[s + 1].first);
        best.gain = gain;
      }
    }
  }
  return best;
}

void build_node(RegressionTree& tree, int node_idx, const Eigen::MatrixXd& x,
                const Eigen::VectorXd& grad, std::vector<Eigen::Index>&& rows,
                int depth, const GbmParams& params,
                std::vector<std::pair<double, double>>& scratch) {
  double sum = 0.0;
  for (auto i : rows) sum += grad(i);
  tree.nodes[node_idx].value = sum / static_cast<double>(rows.size());

  if (depth >= params.max_depth) return;
  const SplitResult s = best_split(x, grad, rows, params.min_leaf, scratch);
  if (!s.found) return;

  std::vector<Eigen::Index> left, right;
  for (auto i : rows) (x(i, s.feature) <= s.threshold ? left : right).push_back(i);
  rows.clear();

  tree.nodes[node_idx].feature = s.feature;
  tree.nodes[node_idx].threshold = s.threshold;
  tree.nodes[node_idx].left = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  tree.nodes[node_idx].right = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  build_node(tree, tree.nodes[node_idx].left, x, grad, std::move(left), depth + 1,
             params, scratch);
  build_node(tree, tree.nodes[node_idx].right, x, grad, std::move(right), depth + 1,
             params, scratch);
}

}  // namespace

BoostedModel fit_gbm(const Eigen::Ref<const Eigen::MatrixXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& target,
                     const GbmParams& params) {
  const Eigen::Index n = x.rows();
  if (target.size() != n) throw validation_error("fit_gbm: row count mismatch");
  if (n < 2 * params.min_leaf)
    throw validation_error("fit_gbm: need at least 2*min_leaf rows");
  if (params.learning_rate <= 0.0 || params.learning_rate > 1.0)
    throw validation_error("fit_gbm: learning_rate must be in (0,1]");

  BoostedModel m;
  m.learning_rate = params.learning_rate;
  m.max_depth = params.max_depth;
  m.loss = params.loss;

  const double mean = target.mean();
  if (params.loss == GbmLoss::log_loss) {
    if (mean <= 0.0 || mean >= 1.0) {
      // single-class target: base-only model
      m.base_score = mean <= 0.0 ? -30.0 : 30.0;
      m.base_only = true;
      return m;
    }
    m.base_score = std::log(mean / (1.0 - mean));
  } else {
    m.base_score = mean;
  }

  Eigen::VectorXd raw = Eigen::VectorXd::Constant(n, m.base_score);
  auto loss_value = [&]() {
    if (params.loss == GbmLoss::log_loss) {
      double l = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = clip_probability(sigmoid(raw(i)));
        l -= target(i) * std::log(p) + (1.0 - target(i)) * std::log(1.0 - p);
      }
      return l / static_cast<double>(n);
    }
    return (target - raw).squaredNorm() / static_cast<double>(n);
  };
  m.train_loss.push_back(loss_value());

  auto rng = make_rng(params.seed);
  std::vector<Eigen::Index> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::pair<double, double>> scratch;
  scratch.reserve(n);

  for (int t = 0; t < params.n_trees; ++t) {
    Eigen::VectorXd grad(n);
    if (params.loss == GbmLoss::log_loss)
      for (Eigen::Index i = 0; i < n; ++i) grad(i) = target(i) - sigmoid(raw(i));
    else
      grad = target - raw;

    std::vector<Eigen::Index> rows = all;
    if (params.subsample < 1.0) {
      std::shuffle(rows.begin(), rows.end(), rng);
      const auto keep = std::max<Eigen::Index>(
          2 * params.min_leaf,
          static_cast<Eigen::Index>(params.subsample * static_cast<double>(n)));
      rows.resize(std::min<Eigen::Index>(keep, n));
    }

    RegressionTree tree;
    tree.nodes.emplace_back();
    build_node(tree, 0, x, grad, std::move(rows), 0, params, scratch);
    for (Eigen::Index i = 0; i < n; ++i)
      raw(i) += params.learning_rate * tree.predict(x.row(i));
    m.trees.push_back(std::move(tree));
    m.train_loss.push_back(loss_value());
  }
  return m;
}

std::vector<CalibrationBin> calibration_table(
    const Eigen::Ref<const Eigen::VectorXd>& p_hat,
    const Eigen::Ref<const Eigen::VectorXi>& d, int n_bins) {
  if (n_bins < 2) throw validation_error("calibration_table: n_bins must be >= 2");
  if (p_hat.size() != d.size())
    throw validation_error("calibration_table: length mismatch");
  for (Eigen::Index i = 0; i < p_hat.size(); ++i)
    if (p_hat(i) < 0.0 || p_hat(i) > 1.0)
      throw validation_error("calibration_table: p_hat outside [0,1]");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<CalibrationBin> bins(n_bins);
  std::vector<double> psum(n_bins, 0.0), dsum(n_bins, 0.0);
  for (int b = 0; b < n_bins; ++b) {
    bins[b].bin_low = static_cast<double>(b) / n_bins;
    bins[b].bin_high = static_cast<double>(b + 1) / n_bins;
  }
  for (Eigen::Index i = 0; i < p_hat.size(); ++i) {
    int b = std::min(static_cast<int>(p_hat(i) * n_bins), n_bins - 1);
    bins[b].count += 1;
    psum[b] += p_hat(i);
    dsum[b] += d(i);
  }
  for (int b = 0; b < n_bins; ++b) {
    if (bins[b].count == 0) {
      bins[b].mean_predicted = nan;
      bins[b].empirical_rate = nan;
    } else {
      bins[b].mean_predicted = psum[b] / static_cast<double>(bins[b].count);
      bins[b].empirical_rate = dsum[b] / static_cast<double>(bins[b].count);
    }
  }
  return bins;
}

nlohmann::json to_json(const LinearModel& m) {
  return {{"type", "linear"},
          {"coef", std::vector<double>(m.coef.data(), m.coef.data() + m.coef.size())},
          {"feature_names", m.feature_names}};
}

nlohmann::json to_json(const LogitModel& m) {
  return {{"type", "logit"},
          {"coef", std::vector<double>(m.coef.data(), m.coef.data() + m.coef.size())},
          {"converged", m.converged},
          {"separation_warning", m.separation_warning},
          {"iterations", m.iterations}};
}

nlohmann::json to_json(const BoostedModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes)
      nodes.push_back({{"feature", nd.feature},
                       {"threshold", nd.threshold},
                       {"value", nd.value},
                       {"left", nd.left},
                       {"right", nd.right}});
    trees.push_back(std::move(nodes));
  }
  return {{"type", "boosted"},
          {"loss", m.loss == GbmLoss::log_loss ? "log_loss" : "squared_error"},
          {"learning_rate", m.learning_rate},
          {"max_depth", m.max_depth},
          {"base_score", m.base_score},
          {"base_only", m.base_only},
          {"trees", std::move(trees)}};
}

nlohmann::json to_json(const NuisancePair& pair) {
  nlohmann::json out;
  nlohmann::json om;
  for (const auto& [r, model] : pair.outcome)
    om[std::to_string(r)] = std::visit([](const auto& m) { return to_json(m); }, model);
  out["outcome"] = std::move(om);
  out["propensity"] =
      std::visit([](const auto& m) { return to_json(m); }, pair.propensity);
  return out;
}

}  // namespace kob
