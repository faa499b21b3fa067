#ifndef KOB_NUISANCE_HPP
#define KOB_NUISANCE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "kob/common.hpp"

#include "json.hpp"

namespace kob {

/// Affine regression model, intercept first.
struct LinearModel {
  Eigen::VectorXd coef;  // length k+1
  std::vector<std::string> feature_names;

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
};

/// Logistic regression model, intercept first.
struct LogitModel {
  Eigen::VectorXd coef;  // length k+1
  bool converged = false;
  bool separation_warning = false;
  bool ridge_fallback = false;
  int iterations = 0;

  double predict_probability_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Eigen::VectorXd predict_probability(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
};

enum class GbmLoss { squared_error, log_loss };

struct GbmParams {
  int n_trees = 200;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_leaf = 10;
  double subsample = 1.0;
  std::uint64_t seed = 0;
  GbmLoss loss = GbmLoss::squared_error;
};

/// Flat binary tree; leaves have feature == -1 and carry `value`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  double value = 0.0;
  int left = -1;
  int right = -1;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

/// Gradient-boosted trees; raw prediction = base_score + lr * sum of trees,
/// with the logistic transform applied on top for log_loss models.
struct BoostedModel {
  std::vector<RegressionTree> trees;
  double learning_rate = 0.1;
  int max_depth = 3;
  GbmLoss loss = GbmLoss::squared_error;
  double base_score = 0.0;
  bool base_only = false;  // constant target under log_loss with one class
  std::vector<double> train_loss;  // per-iteration training loss, base first

  double predict_raw(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
};

using OutcomeModel = std::variant<LinearModel, BoostedModel>;
using PropensityModel = std::variant<LogitModel, BoostedModel>;

/// Numerical-hygiene floor for predicted propensities; distinct from trimming,
/// which removes observations.
inline constexpr double kPropensityClip = 1e-6;

/// Fitted nuisance functions g(r,.) and p(1,.) behind one interface.
struct NuisancePair {
  std::map<int, OutcomeModel> outcome;  // keyed by reference r in {0,1,2,3}
  PropensityModel propensity;

  double predict_outcome_row(int r, const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Eigen::VectorXd predict_outcome(int r, const Eigen::Ref<const Eigen::MatrixXd>& x) const;

  /// Clipped to [kPropensityClip, 1 - kPropensityClip]; clip events are
  /// counted into *clip_count when provided.
  double predict_propensity_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Eigen::VectorXd predict_propensity(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     Eigen::Index* clip_count = nullptr) const;
};

/// Least squares fit of y on [1, x] via column-pivoted QR.
/// Throws singular_design_error on rank deficiency, naming the offending
/// column when the pivoting identifies one.
LinearModel fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y,
                    const std::vector<std::string>& feature_names = {});

/// Maximum likelihood logit via iteratively reweighted least squares.
/// Converged when max_j |sum_i (d_i - p_i) x_ij| < tol. Near-singular weighted
/// normal equations fall back to a 1e-8 ridge. Perfect separation is flagged
/// on the model and the fit returned at the iteration cap.
LogitModel fit_logit(const Eigen::Ref<const Eigen::MatrixXd>& x,
                     const Eigen::Ref<const Eigen::VectorXi>& d,
                     int max_iter = 100, double tol = 1e-8);

/// Standard gradient boosting with exact greedy splits on sorted feature
/// values; deterministic given params.seed.
BoostedModel fit_gbm(const Eigen::Ref<const Eigen::MatrixXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& target,
                     const GbmParams& params);

struct CalibrationBin {
  double bin_low = 0.0;
  double bin_high = 0.0;
  double mean_predicted = 0.0;  // NaN when count == 0
  double empirical_rate = 0.0;  // NaN when count == 0
  Eigen::Index count = 0;
};

/// Equal-width reliability table on [0,1].
std::vector<CalibrationBin> calibration_table(
    const Eigen::Ref<const Eigen::VectorXd>& p_hat,
    const Eigen::Ref<const Eigen::VectorXi>& d, int n_bins);

// JSON shapes for reproducibility audits.
nlohmann::json to_json(const LinearModel& m);
nlohmann::json to_json(const LogitModel& m);
nlohmann::json to_json(const BoostedModel& m);
nlohmann::json to_json(const NuisancePair& pair);

}  // namespace kob

#endif  // KOB_NUISANCE_HPP
