// Command-line surface: decompose real data, run Monte Carlo simulations,
// emit propensity-calibration diagnostics and reference-outcome curve data.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kob/simulate.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitEstimation = 3;

// Fixed numeric formatting so identical configs give byte-identical files.
std::string j(double v) {
  if (std::isnan(v)) return "null";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string c(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
std::string j(const std::optional<double>& v) { return v ? j(*v) : "null"; }
std::string c(const std::optional<double>& v) { return v ? c(*v) : ""; }

void write_out(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-") {
    std::cout << body;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw kob::validation_error("cannot open output file: " + path);
  out << body;
}

struct CommonOpts {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string format = "json";
  std::string output = "-";
};

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--seed", o.seed, "RNG master seed");
  sub->add_option("--threads", o.threads, "Worker-thread cap (results identical for any N)")
      ->check(CLI::Range(1u, 256u));
  sub->add_option("--format", o.format, "Report format")
      ->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--output", o.output, "Output path ('-' = stdout)");
}

struct DecomposeOpts {
  CommonOpts common;
  std::string input;
  std::string outcome, group;
  std::vector<std::string> covariates;
  std::vector<std::string> one_hot;
  std::vector<int> references{0, 1, 2, 3};
  std::vector<std::string> strategies{"Reg", "IPWu", "IPWn", "AIPWu", "AIPWn"};
  std::string engine = "parametric";
  double trim = 0.01;
  int crossfit_k = 0;
  double crossfit_frac = 0.5;
  int bootstrap = 0;
  kob::GbmParams gbm;
};

struct CellResult {
  kob::DecompResult res;
  std::string se_method;  // "", "score", "bootstrap", "crossfit"
};

int run_decompose(const DecomposeOpts& o) {
  const kob::Sample s = kob::load_csv_one_hot(o.input, o.outcome, o.group,
                                              o.covariates, o.one_hot);
  const kob::Engine engine =
      o.engine == "ml" ? kob::Engine::ml : kob::Engine::parametric;
  kob::GbmParams gbm = o.gbm;
  gbm.seed = o.common.seed;

  std::vector<CellResult> cells;
  for (int ri : o.references) {
    const kob::Reference r = kob::reference_from_int(ri);
    for (const std::string& sname : o.strategies) {
      kob::EstimatorSpec spec;
      spec.reference = r;
      spec.strategy = kob::strategy_from_string(sname);
      spec.engine = engine;
      spec.trim_threshold = o.trim;
      if (r == kob::Reference::Pooled && spec.strategy != kob::Strategy::Reg)
        continue;  // weighting undefined for the pooled reference
      if (r == kob::Reference::Pooled && engine == kob::Engine::ml)
        continue;  // pooled reference is parametric-only

      CellResult cell;
      if (o.crossfit_k > 0) {
        kob::FoldPlan plan;
        plan.K = o.crossfit_k;
        plan.split_fraction = o.crossfit_frac;
        plan.seed = o.common.seed;
        cell.res = kob::crossfit_estimate(s, spec, plan, gbm, o.common.threads);
        if (cell.res.se) cell.se_method = "crossfit";
      } else {
        cell.res = kob::estimate_once(s, spec, gbm);
        if (cell.res.se) cell.se_method = "score";
        if (o.bootstrap > 0) {
          const kob::BootstrapResult bs = kob::bootstrap_pairs(
              s, spec, o.bootstrap, o.common.seed, o.common.threads, gbm);
          cell.res.se = bs.se;
          cell.se_method = "bootstrap";
        }
      }
      cells.push_back(std::move(cell));
    }
  }
  if (cells.empty())
    throw kob::validation_error(
        "no valid (reference, strategy) combination requested");

  const double dobs = kob::delta_obs(s);
  std::ostringstream body;
  if (o.common.format == "json") {
    body << "{\n"
         << "  \"delta_obs\": " << j(dobs) << ",\n"
         << "  \"n\": " << s.n() << ",\n"
         << "  \"n0\": " << s.n0() << ",\n"
         << "  \"n1\": " << s.n1() << ",\n"
         << "  \"engine\": \"" << o.engine << "\",\n"
         << "  \"trim\": " << j(o.trim) << ",\n"
         << "  \"seed\": " << o.common.seed << ",\n"
         << "  \"results\": [\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& cr = cells[i];
      body << "    {\"reference\": " << static_cast<int>(cr.res.reference)
           << ", \"strategy\": \"" << kob::to_string(cr.res.strategy) << "\""
           << ", \"delta_hat\": " << j(cr.res.delta_hat)
           << ", \"se\": " << j(cr.res.se)
           << ", \"se_method\": "
           << (cr.se_method.empty() ? "null" : "\"" + cr.se_method + "\"")
           << ", \"explained_hat\": " << j(cr.res.explained_hat)
           << ", \"trimmed_count\": " << cr.res.trimmed_count
           << ", \"n_used\": " << cr.res.n << "}"
           << (i + 1 < cells.size() ? ",\n" : "\n");
    }
    body << "  ]\n}\n";
  } else {
    body << "reference,strategy,delta_hat,se,se_method,explained_hat,"
            "trimmed_count,n_used,delta_obs\n";
    for (const auto& cr : cells)
      body << static_cast<int>(cr.res.reference) << ','
           << kob::to_string(cr.res.strategy) << ',' << c(cr.res.delta_hat)
           << ',' << c(cr.res.se) << ',' << cr.se_method << ','
           << c(cr.res.explained_hat) << ',' << cr.res.trimmed_count << ','
           << cr.res.n << ',' << c(dobs) << '\n';
  }
  write_out(o.common.output, body.str());
  return 0;
}

struct DgpOpts {
  std::string name = "figure1";
  Eigen::Index n = 1000;
  double logit_a = -4.0;
  double logit_b = 8.0;
  double curvature1 = 0.0;
  double curvature0 = 0.0;
};

void add_dgp(CLI::App* sub, DgpOpts& o) {
  sub->add_option("--dgp", o.name, "DGP family")->check(CLI::IsMember({"figure1"}));
  sub->add_option("--n", o.n, "Sample size per draw");
  sub->add_option("--logit-a", o.logit_a, "Propensity logit intercept");
  sub->add_option("--logit-b", o.logit_b, "Propensity logit slope");
  sub->add_option("--curvature1", o.curvature1, "X^2 coefficient, group-1 outcome");
  sub->add_option("--curvature0", o.curvature0, "X^2 coefficient, group-0 outcome");
}

kob::DgpConfig make_dgp(const DgpOpts& o, std::uint64_t seed) {
  kob::DgpConfig cfg;  // defaults are the figure1 family
  cfg.n = o.n;
  cfg.logit_a = o.logit_a;
  cfg.logit_b = o.logit_b;
  cfg.curvature1 = o.curvature1;
  cfg.curvature0 = o.curvature0;
  cfg.seed = seed;
  return cfg;
}

struct SimulateOpts {
  CommonOpts common;
  DgpOpts dgp;
  int reps = 200;
  std::vector<int> references{0, 1, 2};
  std::vector<std::string> strategies{"AIPWu"};
  std::string engine = "parametric";
  double trim = 0.01;
  int crossfit_k = 0;
  double crossfit_frac = 0.5;
  std::string misspec = "none";
};

kob::Misspecification misspec_from(const std::string& s) {
  if (s == "none") return kob::Misspecification::none;
  if (s == "outcome-constant") return kob::Misspecification::outcome_constant_only;
  if (s == "propensity-constant")
    return kob::Misspecification::propensity_constant_only;
  if (s == "outcome-drop-slope") return kob::Misspecification::outcome_drop_slope;
  throw kob::validation_error("unknown misspecification mode: " + s);
}

int run_simulate(const SimulateOpts& o) {
  kob::ExperimentSpec spec;
  spec.dgp = make_dgp(o.dgp, o.common.seed);
  spec.n_reps = o.reps;
  spec.master_seed = o.common.seed;
  spec.misspecification = misspec_from(o.misspec);
  if (o.crossfit_k > 0) {
    kob::FoldPlan plan;
    plan.K = o.crossfit_k;
    plan.split_fraction = o.crossfit_frac;
    spec.crossfit = plan;
  }
  for (int ri : o.references)
    for (const std::string& sname : o.strategies) {
      kob::EstimatorSpec est;
      est.reference = kob::reference_from_int(ri);
      est.strategy = kob::strategy_from_string(sname);
      est.engine = o.engine == "ml" ? kob::Engine::ml : kob::Engine::parametric;
      est.trim_threshold = o.trim;
      spec.estimator_grid.push_back(est);
    }

  const kob::ExperimentReport rep = kob::run_experiment(spec, o.common.threads);
  std::ostringstream body;
  if (o.common.format == "json") {
    body << "{\n  \"truth\": {\"delta0\": " << j(rep.truth.delta0)
         << ", \"delta1\": " << j(rep.truth.delta1)
         << ", \"delta2\": " << j(rep.truth.delta2) << "},\n"
         << "  \"estimators\": [\n";
    for (std::size_t i = 0; i < rep.estimators.size(); ++i) {
      const auto& e = rep.estimators[i];
      body << "    {\"reference\": " << static_cast<int>(e.spec.reference)
           << ", \"strategy\": \"" << kob::to_string(e.spec.strategy) << "\""
           << ", \"truth\": " << j(e.truth)
           << ", \"mean_estimate\": " << j(e.mean_estimate)
           << ", \"bias\": " << j(e.bias)
           << ", \"mc_se_of_bias\": " << j(e.mc_se_of_bias)
           << ", \"rmse\": " << j(e.rmse)
           << ", \"coverage\": " << (e.coverage < 0 ? "null" : j(e.coverage))
           << ", \"mean_se\": " << (e.mean_se < 0 ? "null" : j(e.mean_se))
           << ", \"mean_trimmed\": " << j(e.mean_trimmed)
           << ", \"reps_used\": " << e.reps_used
           << ", \"reps_failed\": " << e.reps_failed << "}"
           << (i + 1 < rep.estimators.size() ? ",\n" : "\n");
    }
    body << "  ]\n}\n";
  } else {
    body << "reference,strategy,truth,mean_estimate,bias,mc_se_of_bias,rmse,"
            "coverage,mean_se,mean_trimmed,reps_used,reps_failed\n";
    for (const auto& e : rep.estimators)
      body << static_cast<int>(e.spec.reference) << ','
           << kob::to_string(e.spec.strategy) << ',' << c(e.truth) << ','
           << c(e.mean_estimate) << ',' << c(e.bias) << ','
           << c(e.mc_se_of_bias) << ',' << c(e.rmse) << ','
           << (e.coverage < 0 ? "" : c(e.coverage)) << ','
           << (e.mean_se < 0 ? "" : c(e.mean_se)) << ',' << c(e.mean_trimmed)
           << ',' << e.reps_used << ',' << e.reps_failed << '\n';
  }
  write_out(o.common.output, body.str());
  return 0;
}

struct CalibrateOpts {
  CommonOpts common;
  DgpOpts dgp;
  std::string input;  // CSV alternative to the synthetic DGP
  std::string outcome, group;
  std::vector<std::string> covariates;
  std::vector<std::string> one_hot;
  std::string engine = "parametric";
  int bins = 10;
};

int run_calibrate(const CalibrateOpts& o) {
  kob::Sample s;
  if (!o.input.empty())
    s = kob::load_csv_one_hot(o.input, o.outcome, o.group, o.covariates, o.one_hot);
  else
    s = kob::generate_dgp(make_dgp(o.dgp, o.common.seed)).first;

  kob::GbmParams gbm;
  gbm.seed = o.common.seed;
  const kob::Engine engine =
      o.engine == "ml" ? kob::Engine::ml : kob::Engine::parametric;
  const kob::NuisancePair nu =
      kob::fit_nuisances(s, kob::Reference::Equilibrium, engine, gbm);
  const Eigen::VectorXd p = nu.predict_propensity(s.x);
  const auto table = kob::calibration_table(p, s.d, o.bins);

  std::ostringstream body;
  if (o.common.format == "json") {
    body << "{\n  \"bins\": [\n";
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto& b = table[i];
      body << "    {\"bin_low\": " << j(b.bin_low) << ", \"bin_high\": "
           << j(b.bin_high) << ", \"mean_predicted\": " << j(b.mean_predicted)
           << ", \"empirical_rate\": " << j(b.empirical_rate)
           << ", \"count\": " << b.count << "}"
           << (i + 1 < table.size() ? ",\n" : "\n");
    }
    body << "  ]\n}\n";
  } else {
    body << "bin_low,bin_high,mean_predicted,empirical_rate,count\n";
    for (const auto& b : table)
      body << c(b.bin_low) << ',' << c(b.bin_high) << ',' << c(b.mean_predicted)
           << ',' << c(b.empirical_rate) << ',' << b.count << '\n';
  }
  write_out(o.common.output, body.str());
  return 0;
}

struct CurvesOpts {
  CommonOpts common;
  DgpOpts dgp;
  int grid = 101;
  double trim = 0.0;  // adds kept_r0 / kept_r1 support indicators when > 0
};

int run_curves(const CurvesOpts& o) {
  if (o.grid < 2) throw kob::validation_error("curves: --grid must be >= 2");
  const kob::DgpConfig cfg = make_dgp(o.dgp, o.common.seed);
  std::vector<double> xs(static_cast<std::size_t>(o.grid));
  for (int i = 0; i < o.grid; ++i)
    xs[i] = cfg.x_low + (cfg.x_high - cfg.x_low) * static_cast<double>(i) /
                            static_cast<double>(o.grid - 1);
  const auto pts = kob::figure1_curves(cfg, xs);

  std::ostringstream body;
  if (o.common.format == "json") {
    body << "{\n  \"points\": [\n";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& p = pts[i];
      body << "    {\"x\": " << j(p.x) << ", \"g0\": " << j(p.g0)
           << ", \"g1\": " << j(p.g1) << ", \"g2\": " << j(p.g2)
           << ", \"p\": " << j(p.p);
      if (o.trim > 0.0)
        body << ", \"kept_r0\": " << (p.p <= 1.0 - o.trim ? "true" : "false")
             << ", \"kept_r1\": " << (p.p >= o.trim ? "true" : "false");
      body << "}" << (i + 1 < pts.size() ? ",\n" : "\n");
    }
    body << "  ]\n}\n";
  } else {
    body << "x,g0,g1,g2,p";
    if (o.trim > 0.0) body << ",kept_r0,kept_r1";
    body << '\n';
    for (const auto& p : pts) {
      body << c(p.x) << ',' << c(p.g0) << ',' << c(p.g1) << ',' << c(p.g2)
           << ',' << c(p.p);
      if (o.trim > 0.0)
        body << ',' << (p.p <= 1.0 - o.trim ? 1 : 0) << ','
             << (p.p >= o.trim ? 1 : 0);
      body << '\n';
    }
  }
  write_out(o.common.output, body.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-group mean-difference decomposition toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "INI config file with one section per subcommand; explicit "
                 "flags override it");

  DecomposeOpts dec;
  CLI::App* sub_dec = app.add_subcommand(
      "decompose", "Decompose a CSV dataset into explained/unexplained parts");
  sub_dec->add_option("--input", dec.input, "Input CSV path")->required();
  sub_dec->add_option("--outcome", dec.outcome, "Outcome column")->required();
  sub_dec->add_option("--group", dec.group, "Binary group column (0/1)")->required();
  sub_dec->add_option("--covariates", dec.covariates, "Covariate columns")
      ->required()
      ->delimiter(',');
  sub_dec->add_option("--one-hot", dec.one_hot,
                      "Categorical covariates to expand (first category dropped)")
      ->delimiter(',');
  sub_dec->add_option("--reference", dec.references,
                      "Reference outcomes, subset of {0,1,2,3}")
      ->delimiter(',')
      ->check(CLI::Range(0, 3));
  sub_dec->add_option("--strategy", dec.strategies,
                      "Strategies, subset of {Reg,IPWu,IPWn,AIPWu,AIPWn}")
      ->delimiter(',');
  sub_dec->add_option("--engine", dec.engine, "Nuisance engine")
      ->check(CLI::IsMember({"parametric", "ml"}));
  sub_dec->add_option("--trim", dec.trim, "Propensity trimming threshold for r in {0,1}")
      ->check(CLI::Range(0.0, 0.499));
  sub_dec->add_option("--crossfit-k", dec.crossfit_k,
                      "Cross-fitting repetitions (0 = full-sample fit)");
  sub_dec->add_option("--crossfit-frac", dec.crossfit_frac,
                      "Main-fold fraction for cross-fitting");
  sub_dec->add_option("--bootstrap", dec.bootstrap,
                      "Pairs-bootstrap replications for standard errors (0 = off)");
  sub_dec->add_option("--gbm-trees", dec.gbm.n_trees, "Boosting rounds (ml engine)");
  sub_dec->add_option("--gbm-depth", dec.gbm.max_depth, "Tree depth (ml engine)");
  sub_dec->add_option("--gbm-learning-rate", dec.gbm.learning_rate,
                      "Boosting learning rate (ml engine)");
  sub_dec->add_option("--gbm-min-leaf", dec.gbm.min_leaf, "Minimum leaf size");
  sub_dec->add_option("--gbm-subsample", dec.gbm.subsample, "Row subsample rate");
  add_common(sub_dec, dec.common);

  SimulateOpts sim;
  CLI::App* sub_sim =
      app.add_subcommand("simulate", "Monte Carlo bias/RMSE/coverage study");
  add_dgp(sub_sim, sim.dgp);
  sub_sim->add_option("--reps", sim.reps, "Monte Carlo replications");
  sub_sim->add_option("--reference", sim.references, "Reference outcomes")
      ->delimiter(',')
      ->check(CLI::Range(0, 3));
  sub_sim->add_option("--strategy", sim.strategies, "Strategies")->delimiter(',');
  sub_sim->add_option("--engine", sim.engine, "Nuisance engine")
      ->check(CLI::IsMember({"parametric", "ml"}));
  sub_sim->add_option("--trim", sim.trim, "Trimming threshold");
  sub_sim->add_option("--crossfit-k", sim.crossfit_k, "Cross-fitting repetitions");
  sub_sim->add_option("--crossfit-frac", sim.crossfit_frac, "Main-fold fraction");
  sub_sim->add_option("--misspec", sim.misspec,
                      "Deliberate nuisance misspecification")
      ->check(CLI::IsMember({"none", "outcome-constant", "propensity-constant",
                             "outcome-drop-slope"}));
  add_common(sub_sim, sim.common);

  CalibrateOpts cal;
  CLI::App* sub_cal =
      app.add_subcommand("calibrate", "Propensity-model reliability table");
  sub_cal->add_option("--input", cal.input, "Input CSV (omit to use the synthetic DGP)");
  sub_cal->add_option("--outcome", cal.outcome, "Outcome column");
  sub_cal->add_option("--group", cal.group, "Group column");
  sub_cal->add_option("--covariates", cal.covariates, "Covariate columns")
      ->delimiter(',');
  sub_cal->add_option("--one-hot", cal.one_hot, "Categorical covariates")
      ->delimiter(',');
  sub_cal->add_option("--engine", cal.engine, "Propensity engine")
      ->check(CLI::IsMember({"parametric", "ml"}));
  sub_cal->add_option("--bins", cal.bins, "Reliability bins")->check(CLI::Range(2, 100));
  add_dgp(sub_cal, cal.dgp);
  add_common(sub_cal, cal.common);

  CurvesOpts cur;
  CLI::App* sub_cur =
      app.add_subcommand("curves", "Reference-outcome curve data on a grid");
  add_dgp(sub_cur, cur.dgp);
  sub_cur->add_option("--grid", cur.grid, "Grid points");
  sub_cur->add_option("--trim", cur.trim,
                      "Threshold for support-indicator columns (0 = omit)");
  add_common(sub_cur, cur.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help etc.
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (sub_dec->parsed()) return run_decompose(dec);
    if (sub_sim->parsed()) return run_simulate(sim);
    if (sub_cal->parsed()) return run_calibrate(cal);
    return run_curves(cur);
  } catch (const kob::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const kob::estimation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEstimation;
  }
}
