#include "kob/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace kob {

void Sample::validate() const {
  const Eigen::Index nn = y.size();
  if (nn < 1) throw validation_error("Sample: n must be >= 1");
  if (d.size() != nn || x.rows() != nn)
    throw validation_error("Sample: y, d, x row counts differ");
  if (static_cast<Eigen::Index>(feature_names.size()) != x.cols())
    throw validation_error("Sample: feature_names length != number of covariates");
  for (Eigen::Index i = 0; i < nn; ++i) {
    if (d(i) != 0 && d(i) != 1)
      throw validation_error("Sample: d value not in {0,1} at row " + std::to_string(i));
    if (!std::isfinite(y(i)))
      throw validation_error("Sample: non-finite y at row " + std::to_string(i));
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (!std::isfinite(x(i, j)))
        throw validation_error("Sample: non-finite x at row " + std::to_string(i) +
                               ", col " + std::to_string(j));
  }
}

Sample Sample::subset(const std::vector<Eigen::Index>& rows) const {
  Sample out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.y.resize(m);
  out.d.resize(m);
  out.x.resize(m, x.cols());
  out.feature_names = feature_names;
  for (Eigen::Index i = 0; i < m; ++i) {
    out.y(i) = y(rows[i]);
    out.d(i) = d(rows[i]);
    out.x.row(i) = x.row(rows[i]);
  }
  return out;
}

Sample Sample::relabeled() const {
  Sample out = *this;
  for (Eigen::Index i = 0; i < out.d.size(); ++i) out.d(i) = 1 - out.d(i);
  return out;
}

void DgpConfig::validate() const {
  if (!(sd1 > 0.0) || !(sd0 > 0.0))
    throw validation_error("DgpConfig: sd1 and sd0 must be > 0");
  if (!(x_low < x_high)) throw validation_error("DgpConfig: x_low must be < x_high");
  if (n < 2) throw validation_error("DgpConfig: n must be >= 2");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // strip surrounding whitespace and optional quotes
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    cell = (b == std::string::npos) ? "" : cell.substr(b, e - b + 1);
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"')
      cell = cell.substr(1, cell.size() - 2);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_number(const std::string& cell, Eigen::Index row, const std::string& col) {
  try {
    std::size_t pos = 0;
    double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw validation_error("non-numeric cell '" + cell + "' at data row " +
                           std::to_string(row) + ", column '" + col + "'");
  }
}

}  // namespace

Sample load_csv(const std::string& path, const std::string& outcome_col,
                const std::string& group_col,
                const std::vector<std::string>& covariate_cols) {
  return load_csv_one_hot(path, outcome_col, group_col, covariate_cols, {});
}

Sample load_csv_one_hot(const std::string& path, const std::string& outcome_col,
                        const std::string& group_col,
                        const std::vector<std::string>& covariate_cols,
                        const std::vector<std::string>& one_hot_cols) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw validation_error("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);

  auto col_index = [&](const std::string& name) -> Eigen::Index {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<Eigen::Index>(j);
    throw validation_error("missing column '" + name + "' in " + path);
  };

  const Eigen::Index y_idx = col_index(outcome_col);
  const Eigen::Index d_idx = col_index(group_col);
  std::vector<Eigen::Index> x_idx;
  for (const auto& c : covariate_cols) x_idx.push_back(col_index(c));

  std::vector<double> ys;
  std::vector<int> ds;
  std::vector<std::vector<std::string>> xs;  // raw cells; expanded below
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw validation_error("row " + std::to_string(row) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(header.size()));
    ys.push_back(parse_number(cells[y_idx], row, outcome_col));
    const double dv = parse_number(cells[d_idx], row, group_col);
    if (dv != 0.0 && dv != 1.0)
      throw validation_error("group value '" + cells[d_idx] +
                             "' is not 0/1 at data row " + std::to_string(row));
    ds.push_back(static_cast<int>(dv));
    std::vector<std::string> xr;
    for (Eigen::Index idx : x_idx) xr.push_back(cells[idx]);
    xs.push_back(std::move(xr));
  }
  if (ys.empty()) throw validation_error("no data rows in " + path);
  const auto nn = static_cast<Eigen::Index>(ys.size());

  // Column layout: numeric covariates pass through, one-hot covariates expand
  // in place to dummies for every category but the lexicographically first.
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < covariate_cols.size(); ++j) {
    const std::string& cname = covariate_cols[j];
    const bool categorical = std::find(one_hot_cols.begin(), one_hot_cols.end(),
                                       cname) != one_hot_cols.end();
    if (!categorical) {
      std::vector<double> col(static_cast<std::size_t>(nn));
      for (Eigen::Index i = 0; i < nn; ++i)
        col[i] = parse_number(xs[i][j], i + 1, cname);
      names.push_back(cname);
      cols.push_back(std::move(col));
      continue;
    }
    std::set<std::string> categories;
    for (Eigen::Index i = 0; i < nn; ++i) categories.insert(xs[i][j]);
    auto it = categories.begin();
    for (++it; it != categories.end(); ++it) {  // first category dropped
      std::vector<double> col(static_cast<std::size_t>(nn));
      for (Eigen::Index i = 0; i < nn; ++i) col[i] = xs[i][j] == *it ? 1.0 : 0.0;
      names.push_back(cname + "=" + *it);
      cols.push_back(std::move(col));
    }
  }

  Sample s;
  const auto kk = static_cast<Eigen::Index>(cols.size());
  s.y = Eigen::Map<Eigen::VectorXd>(ys.data(), nn);
  s.d.resize(nn);
  for (Eigen::Index i = 0; i < nn; ++i) s.d(i) = ds[i];
  s.x.resize(nn, kk);
  for (Eigen::Index j = 0; j < kk; ++j)
    for (Eigen::Index i = 0; i < nn; ++i) s.x(i, j) = cols[j][i];
  s.feature_names = std::move(names);
  s.validate();
  return s;
}

std::pair<Sample, DgpTruth> generate_dgp(const DgpConfig& cfg) {
  cfg.validate();
  auto rng = make_rng(cfg.seed);
  std::uniform_real_distribution<double> unif(cfg.x_low, cfg.x_high);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Sample s;
  s.y.resize(cfg.n);
  s.d.resize(cfg.n);
  s.x.resize(cfg.n, 1);
  s.feature_names = {"x"};
  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    const double xi = unif(rng);
    const int di = u01(rng) < cfg.propensity(xi) ? 1 : 0;
    const double sd = di == 1 ? cfg.sd1 : cfg.sd0;
    s.x(i, 0) = xi;
    s.d(i) = di;
    s.y(i) = cfg.g(di, xi) + sd * gauss(rng);
  }
  if (s.n1() == 0 || s.n0() == 0)
    throw estimation_error("degenerate draw: one group is empty (reseed the DGP)");
  return {std::move(s), oracle_truth(cfg)};
}

DgpTruth oracle_truth(const DgpConfig& cfg, Eigen::Index grid_points) {
  cfg.validate();
  if (grid_points < 3) throw validation_error("oracle_truth: grid too small");
  const double h = (cfg.x_high - cfg.x_low) / static_cast<double>(grid_points - 1);

  // trapezoid integrals against the uniform density (the 1/(hi-lo) factor
  // cancels in every ratio below, so it is omitted)
  double ip = 0, iq = 0, idp = 0, idq = 0, idpq = 0;
  for (Eigen::Index i = 0; i < grid_points; ++i) {
    const double x = cfg.x_low + h * static_cast<double>(i);
    const double w = (i == 0 || i == grid_points - 1) ? 0.5 : 1.0;
    const double p = cfg.propensity(x);
    const double diff = cfg.g(1, x) - cfg.g(0, x);
    ip += w * p;
    iq += w * (1.0 - p);
    idp += w * diff * p;
    idq += w * diff * (1.0 - p);
    idpq += w * diff * p * (1.0 - p);
  }
  DgpTruth t;
  t.delta0 = idp / ip;                    // E[g1-g0 | D=1]
  t.delta1 = idq / iq;                    // E[g1-g0 | D=0]
  t.delta2 = idpq / ip + idpq / iq;       // E[(g1-g0)(1-p)|D=1] + E[(g1-g0)p|D=0]
  return t;
}

}  // namespace kob
