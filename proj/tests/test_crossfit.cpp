#include <cmath>

#include "doctest.h"
#include "kob/crossfit.hpp"

using namespace kob;

TEST_CASE("split: n=4 at fraction 1/2 gives two disjoint covering pairs") {
  const auto [main_idx, aux_idx] = split(4, 0.5, 1, 0);
  CHECK(main_idx.size() == 2);
  CHECK(aux_idx.size() == 2);
  std::vector<bool> seen(4, false);
  for (auto i : main_idx) seen[i] = true;
  for (auto i : aux_idx) {
    CHECK(!seen[i]);  // disjoint
    seen[i] = true;
  }
  for (bool b : seen) CHECK(b);  // covering
}

TEST_CASE("split is deterministic in (seed, k) and varies across k") {
  const auto a = split(100, 0.5, 42, 3);
  const auto b = split(100, 0.5, 42, 3);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  const auto c = split(100, 0.5, 42, 4);
  CHECK(a.first != c.first);
}

TEST_CASE("split membership is uniform over repetitions") {
  const Eigen::Index n = 50;
  std::vector<int> hits(n, 0);
  const int reps = 10000;
  for (int k = 0; k < reps; ++k) {
    const auto [main_idx, aux_idx] = split(n, 0.5, 7, k);
    for (auto i : main_idx) ++hits[i];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double freq = static_cast<double>(hits[i]) / reps;
    CHECK(freq > 0.48);
    CHECK(freq < 0.52);
  }
}

TEST_CASE("split rejects degenerate fractions") {
  CHECK_THROWS_AS(split(10, 0.0, 1, 0), validation_error);
  CHECK_THROWS_AS(split(10, 1.0, 1, 0), validation_error);
  CHECK_THROWS_AS(split(3, 0.1, 1, 0), validation_error);  // empty main fold
}

TEST_CASE("crossfit on a constant outcome estimates exactly zero") {
  DgpConfig cfg;
  cfg.n = 400;
  cfg.seed = 61;
  Sample s = generate_dgp(cfg).first;
  s.y.setConstant(1.0);
  EstimatorSpec spec;
  spec.reference = Reference::Equilibrium;
  spec.strategy = Strategy::AIPWu;
  FoldPlan plan;
  plan.K = 1;
  plan.seed = 5;
  const DecompResult res = crossfit_estimate(s, spec, plan);
  CHECK(std::abs(res.delta_hat) < 1e-10);
  REQUIRE(res.se.has_value());
  CHECK(*res.se >= 0.0);
  CHECK(res.per_rep.size() == 1);
}

TEST_CASE("crossfit matches the full-sample parametric estimator at large n") {
  DgpConfig cfg;
  cfg.n = 10000;
  cfg.seed = 62;
  const Sample s = generate_dgp(cfg).first;
  EstimatorSpec spec;
  spec.reference = Reference::Equilibrium;
  spec.strategy = Strategy::AIPWu;
  const DecompResult full = estimate_once(s, spec);
  FoldPlan plan;
  plan.K = 20;
  plan.seed = 8;
  const DecompResult cf = crossfit_estimate(s, spec, plan);
  REQUIRE(full.se.has_value());
  REQUIRE(cf.se.has_value());
  const double joint = std::sqrt(*full.se * *full.se + *cf.se * *cf.se);
  CHECK(std::abs(cf.delta_hat - full.delta_hat) < 3.0 * joint);
}

TEST_CASE("crossfit is invariant to the worker count") {
  DgpConfig cfg;
  cfg.n = 1200;
  cfg.seed = 63;
  const Sample s = generate_dgp(cfg).first;
  EstimatorSpec spec;
  spec.reference = Reference::Disadvantaged;
  spec.strategy = Strategy::AIPWn;
  spec.trim_threshold = 0.01;
  FoldPlan plan;
  plan.K = 12;
  plan.seed = 10;
  const DecompResult a = crossfit_estimate(s, spec, plan, {}, 1);
  const DecompResult b = crossfit_estimate(s, spec, plan, {}, 4);
  CHECK(a.delta_hat == b.delta_hat);
  CHECK(*a.se == *b.se);
  CHECK(a.per_rep == b.per_rep);
}

TEST_CASE("crossfit skips single-group folds and errors past 10 percent") {
  // 11 group-1 rows in 40: folds will frequently lose group 1 entirely
  Sample s;
  const Eigen::Index n = 40;
  s.y.resize(n);
  s.d.resize(n);
  s.x.resize(n, 1);
  s.feature_names = {"x"};
  auto rng = make_rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.x(i, 0) = u(rng);
    s.d(i) = i < 3 ? 1 : 0;
    s.y(i) = u(rng);
  }
  EstimatorSpec spec;
  spec.reference = Reference::Equilibrium;
  spec.strategy = Strategy::AIPWu;
  FoldPlan plan;
  plan.K = 60;
  plan.seed = 12;
  Eigen::Index skipped = 0;
  try {
    const DecompResult res = crossfit_estimate(s, spec, plan, {}, 1, &skipped);
    CHECK(static_cast<Eigen::Index>(res.per_rep.size()) + skipped == plan.K);
  } catch (const estimation_error&) {
    CHECK(skipped * 10 > Eigen::Index{60});
  }
}

TEST_CASE("Reg and IPW crossfit estimates carry no standard error") {
  DgpConfig cfg;
  cfg.n = 800;
  cfg.seed = 64;
  const Sample s = generate_dgp(cfg).first;
  FoldPlan plan;
  plan.K = 4;
  plan.seed = 2;
  for (Strategy st : {Strategy::Reg, Strategy::IPWu, Strategy::IPWn}) {
    EstimatorSpec spec;
    spec.reference = Reference::Equilibrium;
    spec.strategy = st;
    const DecompResult res = crossfit_estimate(s, spec, plan);
    CHECK_FALSE(res.se.has_value());
    CHECK(res.per_rep.size() == 4);
  }
}

TEST_CASE("swap_folds averages both orientations of each split") {
  DgpConfig cfg;
  cfg.n = 1000;
  cfg.seed = 65;
  const Sample s = generate_dgp(cfg).first;
  EstimatorSpec spec;
  spec.reference = Reference::Equilibrium;
  spec.strategy = Strategy::AIPWu;
  FoldPlan plan;
  plan.K = 5;
  plan.seed = 4;
  plan.swap_folds = true;
  const DecompResult res = crossfit_estimate(s, spec, plan);
  CHECK(res.per_rep.size() == 10);  // two estimates per repetition
}

TEST_CASE("variance_at_aggregate recenters the fold scores") {
  DgpConfig cfg;
  cfg.n = 2000;
  cfg.seed = 66;
  const Sample s = generate_dgp(cfg).first;
  EstimatorSpec spec;
  spec.reference = Reference::Equilibrium;
  spec.strategy = Strategy::AIPWu;
  FoldPlan plan;
  plan.K = 8;
  plan.seed = 6;
  const DecompResult at_fold = crossfit_estimate(s, spec, plan);
  plan.variance_at_aggregate = true;
  const DecompResult at_agg = crossfit_estimate(s, spec, plan);
  CHECK(at_fold.delta_hat == at_agg.delta_hat);
  // both conventions must land in the same ballpark
  CHECK(std::abs(*at_fold.se - *at_agg.se) / *at_fold.se < 0.2);
}
