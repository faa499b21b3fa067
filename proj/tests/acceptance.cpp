// Fast acceptance checks, one printed pass/fail line per criterion.
// Criteria 4 and 6 (long Monte Carlo runs) live in the slow binary.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "kob/crossfit.hpp"
#include "kob/inference.hpp"
#include "kob/simulate.hpp"

using namespace kob;

namespace {

struct Criterion {
  int number;
  std::string name;
  bool ok = true;
  std::vector<std::string> failures;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      failures.push_back(what);
    }
  }
  void skip_note(const std::string& why) {
    std::printf("[ACCEPTANCE] criterion %d (%s): SKIP — %s\n", number,
                name.c_str(), why.c_str());
  }
  void finish() {
    std::printf("[ACCEPTANCE] criterion %d (%s): %s\n", number, name.c_str(),
                ok ? "PASS" : "FAIL");
    for (const auto& f : failures) std::printf("  - %s\n", f.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(ok, "criterion ", number, " (", name, ")");
  }
};

Sample hand_sample() {
  Sample s;
  s.y.resize(4);
  s.y << 1, 2, 0, 1;
  s.d.resize(4);
  s.d << 1, 1, 0, 0;
  s.x.resize(4, 1);
  s.x << 0, 1, 0, 1;
  s.feature_names = {"x"};
  s.validate();
  return s;
}

NuisancePair linear_truth(int r, double intercept, double slope, double logit_a,
                          double logit_b) {
  NuisancePair nu;
  LinearModel g;
  g.coef = Eigen::VectorXd(2);
  g.coef << intercept, slope;
  nu.outcome.emplace(r, g);
  LogitModel p;
  p.coef = Eigen::VectorXd(2);
  p.coef << logit_a, logit_b;
  p.converged = true;
  nu.propensity = p;
  return nu;
}

NuisancePair perturb(const NuisancePair& base, int r) {
  NuisancePair out = base;
  auto& g = std::get<LinearModel>(out.outcome.at(r));
  g.coef(0) += 0.05;
  g.coef(1) += 0.10;
  auto& p = std::get<LogitModel>(out.propensity);
  p.coef(0) += 0.30;
  p.coef(1) -= 0.50;
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool file_exists(const std::string& path) {
  return std::ifstream(path).good();
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(KOB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

}  // namespace

TEST_CASE("criterion 1: hand-oracle exactness") {
  Criterion c{1, "hand-oracle exactness"};
  const Sample s = hand_sample();
  const Eigen::VectorXd g_hat = s.x.col(0);  // ghat(0,x) = x
  const Eigen::VectorXd p_hat = Eigen::VectorXd::Constant(4, 0.5);
  c.expect(std::abs(delta_obs(s) - 1.0) < 1e-12, "delta_obs != 1");
  c.expect(std::abs(delta_reg(s, g_hat, Reference::Disadvantaged) - 1.0) < 1e-12,
           "delta_reg(r=0) != 1");
  c.expect(std::abs(delta_ipw(s, p_hat, Reference::Equilibrium, false) - 1.0) <
               1e-12,
           "delta_ipw(r=2, p=0.5) != 1");
  c.expect(std::abs(delta_aipw(s, g_hat, p_hat, Reference::Disadvantaged, false) -
                    1.0) < 1e-12,
           "delta_aipw(r=0) != 1");
  c.expect(std::abs(explained_reg(s, g_hat)) < 1e-12, "explained_reg(r=0) != 0");
  c.finish();
}

TEST_CASE("criterion 2: algebraic identities") {
  Criterion c{2, "algebraic identities"};
  DgpConfig cfg;
  cfg.n = 10000;
  cfg.seed = 2024;
  const Sample s = generate_dgp(cfg).first;

  const NuisancePair nu2 = fit_nuisances(s, Reference::Equilibrium, Engine::parametric);
  const Eigen::VectorXd p_hat = nu2.predict_propensity(s.x);
  c.expect(std::abs(weights_w1(s, p_hat).sum() - 1.0) < 1e-12, "sum w1 != 1");
  c.expect(std::abs(weights_w0(s, p_hat).sum() - 1.0) < 1e-12, "sum w0 != 1");
  c.expect(std::abs(weights_v1(p_hat).sum() - 1.0) < 1e-12, "sum v1 != 1");
  c.expect(std::abs(weights_v0(p_hat).sum() - 1.0) < 1e-12, "sum v0 != 1");

  const double dobs = delta_obs(s);
  for (int r : {0, 1, 2, 3}) {
    const Reference ref = reference_from_int(r);
    const NuisancePair nu = fit_nuisances(s, ref, Engine::parametric);
    const Eigen::VectorXd g_hat = nu.predict_outcome(r, s.x);
    if (r != 3)
      for (bool norm : {false, true}) {
        const double delta = delta_aipw(s, g_hat, p_hat, ref, norm);
        const ScoreVector sv = scores(s, g_hat, p_hat, ref, delta, norm);
        c.expect(std::abs(sv.psi.mean()) < 1e-10,
                 "score mean != 0 at r=" + std::to_string(r));
      }
    const double sum = explained_reg(s, g_hat) + delta_reg(s, g_hat, ref);
    c.expect(std::abs(dobs - sum) / std::abs(dobs) < 1e-10,
             "adding-up fails at r=" + std::to_string(r));
  }

  const NuisancePair nu = fit_nuisances(s, Reference::Equilibrium, Engine::parametric);
  const Eigen::VectorXd g2 = nu.predict_outcome(2, s.x);
  const double ipwu = delta_ipw(s, p_hat, Reference::Equilibrium, false);
  const double ipwn = delta_ipw(s, p_hat, Reference::Equilibrium, true);
  const double aipwu = delta_aipw(s, g2, p_hat, Reference::Equilibrium, false);
  const double aipwn = delta_aipw(s, g2, p_hat, Reference::Equilibrium, true);
  for (double v : {ipwn, aipwu, aipwn})
    c.expect(std::abs(v - ipwu) < 1e-8, "parametric r=2 collapse fails");
  c.finish();
}

TEST_CASE("criterion 3: oracle consistency over 20 seeds") {
  Criterion c{3, "oracle consistency"};
  int hits[3][2] = {{0, 0}, {0, 0}, {0, 0}};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    DgpConfig cfg;
    cfg.n = 10000;
    cfg.seed = seed;
    const auto [s, truth] = generate_dgp(cfg);
    const double truths[3] = {truth.delta0, truth.delta1, truth.delta2};
    for (int r : {0, 1, 2})
      for (int norm : {0, 1}) {
        EstimatorSpec spec;
        spec.reference = reference_from_int(r);
        spec.strategy = norm ? Strategy::AIPWn : Strategy::AIPWu;
        spec.trim_threshold = 0.0;
        const DecompResult res = estimate_once(s, spec);
        if (res.se && std::abs(res.delta_hat - truths[r]) <= 3.0 * *res.se)
          ++hits[r][norm];
      }
  }
  for (int r : {0, 1, 2})
    for (int norm : {0, 1})
      c.expect(hits[r][norm] >= 18,
               "r=" + std::to_string(r) + (norm ? " AIPWn: " : " AIPWu: ") +
                   std::to_string(hits[r][norm]) + "/20 within 3 se");
  c.finish();
}

TEST_CASE("criterion 5: Neyman orthogonality") {
  Criterion c{5, "Neyman orthogonality"};
  const DgpConfig fig1;

  // r in {0,1}: the potential-outcome regressions themselves are linear.
  {
    DgpConfig cfg = fig1;
    cfg.n = 8000;
    cfg.seed = 501;
    const Sample s = generate_dgp(cfg).first;
    for (int r : {0, 1}) {
      const NuisancePair eta0 =
          r == 1 ? linear_truth(1, cfg.intercept1, cfg.slope1, cfg.logit_a, cfg.logit_b)
                 : linear_truth(0, cfg.intercept0, cfg.slope0, cfg.logit_a, cfg.logit_b);
      const NuisancePair eta1 = perturb(eta0, r);
      const Reference ref = reference_from_int(r);
      for (int mode = 0; mode < 3; ++mode) {
        const SlopeEstimate sl = orthogonality_slope(
            s, eta0, eta1, ref, 0.05, false, mode != 1, mode != 0);
        c.expect(std::abs(sl.slope) < 5.0 * sl.se,
                 "AIPW slope not zero, r=" + std::to_string(r) + " mode=" +
                     std::to_string(mode));
      }
      const SlopeEstimate bad = reg_moment_slope(s, eta0, eta1, ref, 0.05);
      c.expect(std::abs(bad.slope) > 5.0 * bad.se,
               "Reg moment slope not order-1, r=" + std::to_string(r));
    }
  }

  // r=2: identical potential outcomes make g(2,.) = g(.) exactly linear while
  // the steep logit keeps X correlated with D (so the Reg contrast still has
  // an order-1 slope).
  {
    DgpConfig cfg;
    cfg.intercept1 = cfg.intercept0 = 0.25;
    cfg.slope1 = cfg.slope0 = 0.31;
    cfg.sd1 = cfg.sd0 = 0.1;
    cfg.n = 8000;
    cfg.seed = 502;
    const Sample s = generate_dgp(cfg).first;
    const NuisancePair eta0 =
        linear_truth(2, cfg.intercept0, cfg.slope0, cfg.logit_a, cfg.logit_b);
    const NuisancePair eta1 = perturb(eta0, 2);
    for (int mode = 0; mode < 3; ++mode) {
      const SlopeEstimate sl = orthogonality_slope(
          s, eta0, eta1, Reference::Equilibrium, 0.05, false, mode != 1, mode != 0);
      c.expect(std::abs(sl.slope) < 5.0 * sl.se,
               "AIPW slope not zero, r=2 mode=" + std::to_string(mode));
    }
    const SlopeEstimate bad =
        reg_moment_slope(s, eta0, eta1, Reference::Equilibrium, 0.05);
    c.expect(std::abs(bad.slope) > 5.0 * bad.se, "Reg moment slope not order-1, r=2");
  }
  c.finish();
}

TEST_CASE("criterion 7: irrelevant-variable pathology") {
  Criterion c{7, "irrelevant-variable pathology"};
  // Flat outcome in X (beta = delta = 0) with a pure group shift gamma != 0;
  // the steep logit keeps X strongly correlated with D.
  DgpConfig cfg;
  cfg.intercept0 = 0.2;
  cfg.intercept1 = 0.5;
  cfg.slope0 = cfg.slope1 = 0.0;
  cfg.sd1 = cfg.sd0 = 0.1;
  cfg.n = 2000;
  const int reps = 40;
  double sum[4] = {0, 0, 0, 0}, sumsq[4] = {0, 0, 0, 0};
  for (int m = 0; m < reps; ++m) {
    cfg.seed = 700 + static_cast<std::uint64_t>(m);
    const LinearExplainedParts parts = linear_explained_parts(generate_dgp(cfg).first);
    const double v[4] = {parts.dx0, parts.dx1, parts.dx2, parts.dx3};
    for (int i = 0; i < 4; ++i) {
      sum[i] += v[i];
      sumsq[i] += v[i] * v[i];
    }
  }
  const char* labels[4] = {"dx0", "dx1", "dx2", "dx3"};
  for (int i = 0; i < 4; ++i) {
    const double mean = sum[i] / reps;
    const double var = (sumsq[i] - reps * mean * mean) / (reps - 1);
    const double mc_se = std::sqrt(var / reps);
    if (i == 2)
      c.expect(std::abs(mean) > 5.0 * mc_se, "dx2 not bounded away from 0");
    else
      c.expect(std::abs(mean) < 3.0 * mc_se,
               std::string(labels[i]) + " not statistically zero");
  }
  c.finish();
}

TEST_CASE("criterion 8: table reproduction (conditional)") {
  Criterion c{8, "table reproduction"};
  const std::string data_dir = KOB_DATA_DIR;
  const std::string chicago = data_dir + "/chicago.csv";
  const std::string cps = data_dir + "/cps2012.csv";
  if (!file_exists(chicago) && !file_exists(cps)) {
    c.skip_note("no reference datasets under " + data_dir);
    return;
  }

  struct Cell {
    int r;
    Strategy st;
    double expected;
  };

  if (file_exists(chicago)) {
    // Group column flags foreign-born workers; natives are the advantaged
    // group, so labels are flipped after loading.
    const Sample s = load_csv(chicago, "lwage", "foreign.born",
                              {"age", "female", "LTHS", "some.college",
                               "college", "advanced.degree"})
                         .relabeled();
    c.expect(s.n() == 712, "chicago row count != 712");
    c.expect(std::abs(delta_obs(s) - 0.1434) < 1e-4, "chicago delta_obs != 0.1434");
    const std::vector<Cell> grid = {
        {0, Strategy::Reg, 0.0664},   {0, Strategy::IPWu, 0.1274},
        {0, Strategy::IPWn, 0.0824},  {0, Strategy::AIPWu, 0.0869},
        {0, Strategy::AIPWn, 0.0873}, {1, Strategy::Reg, 0.1222},
        {1, Strategy::IPWu, 0.1567},  {1, Strategy::IPWn, 0.0816},
        {1, Strategy::AIPWu, 0.0708}, {1, Strategy::AIPWn, 0.0723},
        {2, Strategy::Reg, 0.0751},   {2, Strategy::IPWu, 0.0793},
        {2, Strategy::IPWn, 0.0793},  {2, Strategy::AIPWu, 0.0793},
        {2, Strategy::AIPWn, 0.0793}};
    for (const auto& cell : grid) {
      EstimatorSpec spec;
      spec.reference = reference_from_int(cell.r);
      spec.strategy = cell.st;
      spec.trim_threshold = 0.0;
      const DecompResult res = estimate_once(s, spec);
      c.expect(std::abs(res.delta_hat - cell.expected) < 1e-4,
               "chicago parametric r=" + std::to_string(cell.r) + " " +
                   to_string(cell.st) + " != " + std::to_string(cell.expected));
    }
    EstimatorSpec reg0;
    reg0.reference = Reference::Disadvantaged;
    reg0.strategy = Strategy::Reg;
    const BootstrapResult bs = bootstrap_pairs(s, reg0, 999, 8);
    c.expect(std::abs(bs.se - 0.0449) / 0.0449 < 0.2,
             "chicago Reg r=0 bootstrap se outside 0.0449 +/- 20%");

    EstimatorSpec ml2;
    ml2.reference = Reference::Equilibrium;
    ml2.strategy = Strategy::AIPWu;
    ml2.engine = Engine::ml;
    FoldPlan plan;
    plan.K = 100;
    plan.seed = 8;
    const DecompResult ml = crossfit_estimate(s, ml2, plan);
    c.expect(std::abs(ml.delta_hat - 0.1090) < 0.03,
             "chicago ML AIPWu r=2 outside 0.1090 +/- 0.03");
  } else {
    c.skip_note("chicago.csv absent, cps2012 checks only");
  }

  if (file_exists(cps)) {
    // Group column flags women; men are the advantaged group.
    const Sample s =
        load_csv(cps, "lnw", "female",
                 {"widowed", "divorced", "separated", "nevermarried", "hsd08",
                  "hsd911", "hsg", "cg", "ad", "mw", "so", "we", "exp1", "exp2",
                  "exp3"})
            .relabeled();
    c.expect(std::abs(delta_obs(s) - 0.2608) < 1e-4, "cps2012 delta_obs != 0.2608");
    const std::vector<Cell> grid = {
        {0, Strategy::Reg, 0.2884},   {0, Strategy::IPWu, 0.2878},
        {0, Strategy::IPWn, 0.2897},  {0, Strategy::AIPWu, 0.2883},
        {0, Strategy::AIPWn, 0.2883}, {1, Strategy::Reg, 0.2707},
        {1, Strategy::IPWu, 0.2670},  {1, Strategy::IPWn, 0.2691},
        {1, Strategy::AIPWu, 0.2701}, {1, Strategy::AIPWn, 0.2701},
        {2, Strategy::Reg, 0.2716},   {2, Strategy::IPWu, 0.2716},
        {2, Strategy::IPWn, 0.2716},  {2, Strategy::AIPWu, 0.2716},
        {2, Strategy::AIPWn, 0.2716}};
    DecompResult aipw2;
    for (const auto& cell : grid) {
      EstimatorSpec spec;
      spec.reference = reference_from_int(cell.r);
      spec.strategy = cell.st;
      spec.trim_threshold = 0.0;
      const DecompResult res = estimate_once(s, spec);
      c.expect(std::abs(res.delta_hat - cell.expected) < 1e-4,
               "cps2012 parametric r=" + std::to_string(cell.r) + " " +
                   to_string(cell.st) + " != " + std::to_string(cell.expected));
      if (cell.r == 2 && cell.st == Strategy::AIPWu) aipw2 = res;
    }
    c.expect(aipw2.se && std::abs(*aipw2.se - 0.0069) / 0.0069 < 0.25,
             "cps2012 AIPWu r=2 se outside 0.0069 +/- 25%");
  } else {
    c.skip_note("cps2012.csv absent, chicago checks only");
  }
  c.finish();
}

TEST_CASE("criterion 9: byte-identical determinism") {
  Criterion c{9, "byte-identical determinism"};
  {
    DgpConfig cfg;
    cfg.n = 400;
    cfg.seed = 99;
    const Sample s = generate_dgp(cfg).first;
    std::ofstream out("/tmp/acc9.csv");
    out << "y,d,x\n";
    char buf[64];
    for (Eigen::Index i = 0; i < s.n(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g\n", s.y(i), s.d(i), s.x(i, 0));
      out << buf;
    }
  }
  const std::string dec =
      "decompose --input /tmp/acc9.csv --outcome y --group d --covariates x "
      "--reference 0,2 --strategy Reg,AIPWu --bootstrap 25 --seed 9 ";
  c.expect(run_cli(dec + "--threads 1 --output /tmp/acc9_a.json") == 0, "run A failed");
  c.expect(run_cli(dec + "--threads 1 --output /tmp/acc9_b.json") == 0, "run B failed");
  c.expect(run_cli(dec + "--threads 8 --output /tmp/acc9_c.json") == 0, "run C failed");
  const std::string a = slurp("/tmp/acc9_a.json");
  c.expect(!a.empty(), "empty decompose output");
  c.expect(a == slurp("/tmp/acc9_b.json"), "decompose differs across reruns");
  c.expect(a == slurp("/tmp/acc9_c.json"), "decompose differs across thread counts");

  const std::string sim =
      "simulate --dgp figure1 --n 300 --reps 8 --reference 2 --strategy AIPWu "
      "--seed 9 ";
  c.expect(run_cli(sim + "--threads 1 --output /tmp/acc9_s1.json") == 0,
           "simulate run failed");
  c.expect(run_cli(sim + "--threads 8 --output /tmp/acc9_s8.json") == 0,
           "simulate run failed");
  const std::string s1 = slurp("/tmp/acc9_s1.json");
  c.expect(!s1.empty(), "empty simulate output");
  c.expect(s1 == slurp("/tmp/acc9_s8.json"), "simulate differs across thread counts");
  c.finish();
}
