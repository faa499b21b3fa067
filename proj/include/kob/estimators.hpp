#ifndef KOB_ESTIMATORS_HPP
#define KOB_ESTIMATORS_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "kob/dataset.hpp"
#include "kob/nuisance.hpp"

namespace kob {

/// Reference outcome Y(r) both groups are compared against.
enum class Reference : int {
  Disadvantaged = 0,  // Y(0)
  Advantaged = 1,     // Y(1)
  Equilibrium = 2,    // Y(2) = p(1,X) Y(1) + (1-p(1,X)) Y(0)
  Pooled = 3,         // Y(3) = pi Y(1) + (1-pi) Y(0)
};

enum class Strategy { Reg, IPWu, IPWn, AIPWu, AIPWn };

enum class Engine { parametric, ml };

std::string to_string(Reference r);
std::string to_string(Strategy s);
std::string to_string(Engine e);
Reference reference_from_int(int r);
Strategy strategy_from_string(const std::string& s);

struct EstimatorSpec {
  Reference reference = Reference::Equilibrium;
  Strategy strategy = Strategy::AIPWu;
  double trim_threshold = 0.0;  // in [0, 0.5); ignored for r in {2,3}
  Engine engine = Engine::parametric;
  // By default trimming touches the weighting estimators only; flip to also trim Reg.
  bool trim_applies_to_reg = false;
};

struct DecompResult {
  double delta_hat = 0.0;
  std::optional<double> se;
  Eigen::Index n = 0;
  Eigen::Index n0 = 0;
  Eigen::Index n1 = 0;
  Eigen::Index trimmed_count = 0;
  Reference reference = Reference::Equilibrium;
  Strategy strategy = Strategy::AIPWu;
  Engine engine = Engine::parametric;
  std::vector<double> per_rep;  // cross-fit or bootstrap replicates
  std::optional<double> explained_hat;
  double delta_obs = 0.0;
};

/// mean(y | d=1) - mean(y | d=0).
double delta_obs(const Sample& s);

/// Drop rows outside the common-support band: for r=0 rows with
/// p_hat > 1 - threshold, for r=1 rows with p_hat < threshold.
/// Returns the kept row indices.
std::vector<Eigen::Index> trim_indices(const Eigen::Ref<const Eigen::VectorXd>& p_hat,
                                       Reference r, double threshold);
std::pair<Sample, Eigen::Index> trim(const Sample& s,
                                     const Eigen::Ref<const Eigen::VectorXd>& p_hat,
                                     Reference r, double threshold);

// Point estimators of the unexplained part. g_hat and p_hat are per-row
// nuisance predictions aligned with s.
double delta_reg(const Sample& s, const Eigen::Ref<const Eigen::VectorXd>& g_hat,
                 Reference r);
double delta_ipw(const Sample& s, const Eigen::Ref<const Eigen::VectorXd>& p_hat,
                 Reference r, bool normalized);
double delta_aipw(const Sample& s, const Eigen::Ref<const Eigen::VectorXd>& g_hat,
                  const Eigen::Ref<const Eigen::VectorXd>& p_hat, Reference r,
                  bool normalized);

/// Explained part under the outcome-regression strategy:
/// mean(g_hat | d=1) - mean(g_hat | d=0).
double explained_reg(const Sample& s, const Eigen::Ref<const Eigen::VectorXd>& g_hat);

/// Doubly robust explained part for the equilibrium reference:
/// mean of [(y - g)(p - pi) + g (d - pi)] / (pi (1 - pi)), pi = n1/n.
double explained_aipw_r2(const Sample& s,
                         const Eigen::Ref<const Eigen::VectorXd>& g_hat,
                         const Eigen::Ref<const Eigen::VectorXd>& p_hat);

/// Closed-form explained parts under the interacted linear model
/// y = a + x b + d c + (x d) e + eps with a plug-in logit propensity.
struct LinearExplainedParts {
  double dx0 = 0.0;
  double dx1 = 0.0;
  double dx2 = 0.0;
  double dx3 = 0.0;
};
LinearExplainedParts linear_explained_parts(const Sample& s);

// Normalized weight vectors; each sums to one.
Eigen::VectorXd weights_w1(const Sample& s, const Eigen::Ref<const Eigen::VectorXd>& p_hat);
Eigen::VectorXd weights_w0(const Sample& s, const Eigen::Ref<const Eigen::VectorXd>& p_hat);
Eigen::VectorXd weights_v1(const Eigen::Ref<const Eigen::VectorXd>& p_hat);
Eigen::VectorXd weights_v0(const Eigen::Ref<const Eigen::VectorXd>& p_hat);

}  // namespace kob

#endif  // KOB_ESTIMATORS_HPP
