#ifndef KOB_DATASET_HPP
#define KOB_DATASET_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "kob/common.hpp"

namespace kob {

/// Observed data (Y^obs, D, X) for n individuals.
///
/// Immutable after construction; validate() is called by every factory in
/// this module, direct aggregate construction should call it too.
struct Sample {
  Eigen::VectorXd y;                       // observed outcome
  Eigen::VectorXi d;                       // group indicator, 0/1
  Eigen::MatrixXd x;                       // n x k covariates
  std::vector<std::string> feature_names;  // length k

  Eigen::Index n() const { return y.size(); }
  Eigen::Index k() const { return x.cols(); }
  Eigen::Index n1() const { return d.sum(); }
  Eigen::Index n0() const { return n() - n1(); }
  double pi_hat() const { return static_cast<double>(n1()) / static_cast<double>(n()); }

  /// Throws validation_error on any invariant violation.
  void validate() const;

  /// Row subset (with repetition allowed, for bootstrap resampling).
  Sample subset(const std::vector<Eigen::Index>& rows) const;

  /// Label swap d -> 1-d, used by symmetry tests.
  Sample relabeled() const;
};

/// True unexplained parts implied by a DgpConfig.
struct DgpTruth {
  double delta0 = 0.0;  // E[g1-g0 | D=1]  (ATT analogue)
  double delta1 = 0.0;  // E[g1-g0 | D=0]  (ATU analogue)
  double delta2 = 0.0;  // equilibrium-reference unexplained part
};

/// Synthetic data generating process:
///   X ~ Uniform(x_low, x_high)
///   P(D=1|X) = 1/(1+exp(-(logit_a + logit_b X)))
///   Y = g(D,X) + Normal(0, sd_D),  g(d,X) quadratic in X (curvature 0 by
///   default, giving the linear family).
struct DgpConfig {
  double intercept1 = 0.3;
  double slope1 = 0.42;
  double intercept0 = 0.2;
  double slope0 = 0.2;
  double curvature1 = 0.0;  // coefficient on X^2, default 0 (linear)
  double curvature0 = 0.0;
  double sd1 = 0.1;
  double sd0 = 0.12247448713915890;  // sqrt(0.015)
  double logit_a = -4.0;
  double logit_b = 8.0;
  double x_low = 0.0;
  double x_high = 1.0;
  Eigen::Index n = 1000;
  std::uint64_t seed = 1;

  double g(int group, double x) const {
    return group == 1 ? intercept1 + slope1 * x + curvature1 * x * x
                      : intercept0 + slope0 * x + curvature0 * x * x;
  }
  double propensity(double x) const {
    return 1.0 / (1.0 + std::exp(-(logit_a + logit_b * x)));
  }

  void validate() const;
};

/// Parse a decomposition dataset from a CSV file (UTF-8, header row, comma
/// delimiter, '.' decimal separator). The group column must parse to 0/1.
Sample load_csv(const std::string& path, const std::string& outcome_col,
                const std::string& group_col,
                const std::vector<std::string>& covariate_cols);

/// load_csv with one-hot expansion of the listed categorical covariates.
/// Each expanded column contributes one dummy per category except the
/// lexicographically first (dropped to avoid a singular design); dummies are
/// named "col=category" and replace the original column in order.
Sample load_csv_one_hot(const std::string& path, const std::string& outcome_col,
                        const std::string& group_col,
                        const std::vector<std::string>& covariate_cols,
                        const std::vector<std::string>& one_hot_cols);

/// Deterministic draw from cfg. Errors out (rather than resampling) when the
/// draw leaves one group empty. The returned truth comes from oracle_truth.
std::pair<Sample, DgpTruth> generate_dgp(const DgpConfig& cfg);

/// True delta_r for r in {0,1,2} by 1-D trapezoid quadrature over the known
/// uniform covariate density. Default grid: 200001 points.
DgpTruth oracle_truth(const DgpConfig& cfg, Eigen::Index grid_points = 200001);

}  // namespace kob

#endif  // KOB_DATASET_HPP
