#include "pseudopanel/econometrics.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "pseudopanel/error.hpp"
#include "pseudopanel/linalg.hpp"
#include "pseudopanel/textio.hpp"

namespace pseudopanel::econometrics {

std::string to_string(Form f) { return f == Form::aids ? "AIDS" : "QUAIDS"; }

std::string to_string(Effects e) {
  switch (e) {
    case Effects::pooled: return "pooled";
    case Effects::fixed: return "FE";
    case Effects::random: return "RE";
  }
  return "?";
}

Index DesignMatrix::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<Index>(it - names.begin());
}

DesignMatrix make_design(MatrixXd x, VectorXd y, std::vector<Index> unit, std::vector<Index> period,
                         std::vector<std::string> names, VectorXd scale) {
  const Index n = x.rows();
  require(y.size() == n, "design: y length differs from the row count");
  require(static_cast<Index>(unit.size()) == n && static_cast<Index>(period.size()) == n,
          "design: unit/period ids must cover every row");
  require(static_cast<Index>(names.size()) == x.cols(), "design: one name per column required");
  require(x.allFinite() && y.allFinite(), "design: non-finite value");
  if (scale.size() == 0) scale = VectorXd::Ones(n);
  require(scale.size() == n && (scale.array() > 0.0).all(), "design: scale must be positive, one per row");

  DesignMatrix d;
  Index units = 0, periods = 0;
  for (Index i = 0; i < n; ++i) {
    const auto u = unit[static_cast<std::size_t>(i)];
    require(u >= 0 && period[static_cast<std::size_t>(i)] >= 0, "design: negative unit or period id");
    if (i > 0) require(u >= unit[static_cast<std::size_t>(i - 1)], "design: rows must be grouped by unit");
    units = std::max(units, u + 1);
    periods = std::max(periods, period[static_cast<std::size_t>(i)] + 1);
  }
  d.x = std::move(x);
  d.y = std::move(y);
  d.unit = std::move(unit);
  d.period = std::move(period);
  d.scale = std::move(scale);
  d.names = std::move(names);
  d.n_units = units;
  d.n_periods = periods;
  return d;
}

DesignMatrix build_design(const cohort::PanelDataset& panel, const ModelSpec& spec) {
  require(spec.function < kFunctions, "build_design: function index out of range");
  const Index N = panel.n_units(), T = panel.n_periods();
  require(N >= 1 && T >= 2, "build_design: need at least one cohort and two periods");
  require(static_cast<Index>(panel.cells.size()) == N * T, "build_design: panel is not balanced");

  std::vector<std::string> names{"const", "log_y"};
  if (spec.form == Form::quaids) names.emplace_back("log_y_sq");
  for (const char* v : {"log_age", "log_age_sq", "log_size", "log_size_sq"}) names.emplace_back(v);
  if (spec.year_dummies)
    for (Index t = 1; t < T; ++t) names.push_back("year_" + std::to_string(panel.periods[static_cast<std::size_t>(t)]));

  const Index rows = N * T;
  MatrixXd x(rows, static_cast<Index>(names.size()));
  VectorXd y(rows), scale(rows);
  std::vector<Index> unit(static_cast<std::size_t>(rows)), period(static_cast<std::size_t>(rows));
  for (Index i = 0; i < N; ++i)
    for (Index t = 0; t < T; ++t) {
      const Index r = i * T + t;
      const auto c = cohort::transform(panel.cell(i, t));
      Index col = 0;
      x(r, col++) = c.constant;
      x(r, col++) = c.log_y;
      if (spec.form == Form::quaids) x(r, col++) = c.log_y_sq;
      x(r, col++) = c.log_age;
      x(r, col++) = c.log_age_sq;
      x(r, col++) = c.log_size;
      x(r, col++) = c.log_size_sq;
      if (spec.year_dummies)
        for (Index s = 1; s < T; ++s) x(r, col++) = s == t ? c.factor : 0.0;
      y(r) = c.w[spec.function];
      scale(r) = c.factor;
      unit[static_cast<std::size_t>(r)] = i;
      period[static_cast<std::size_t>(r)] = t;
    }

  const auto bad = linalg::collinear_columns(x);
  if (!bad.empty()) {
    std::string list;
    for (const auto j : bad) list += (list.empty() ? "" : ", ") + names[static_cast<std::size_t>(j)];
    fail(ErrorKind::singular, "build_design: rank-deficient design, collinear columns: " + list);
  }
  return make_design(std::move(x), std::move(y), std::move(unit), std::move(period), std::move(names), std::move(scale));
}

Index EstimationResult::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<Index>(it - names.begin());
}

double EstimationResult::coef_of(const std::string& name) const {
  const Index k = index_of(name);
  require(k >= 0, "estimation result has no coefficient '" + name + "'");
  return coef(k);
}

double EstimationResult::se_of(const std::string& name) const {
  const Index k = index_of(name);
  require(k >= 0, "estimation result has no coefficient '" + name + "'");
  return std::sqrt(cov(k, k));
}

namespace {

// Row ranges [begin, end) of each unit.
std::vector<std::pair<Index, Index>> unit_blocks(const DesignMatrix& d) {
  std::vector<std::pair<Index, Index>> blocks;
  Index start = 0;
  for (Index r = 1; r <= d.rows(); ++r)
    if (r == d.rows() || d.unit[static_cast<std::size_t>(r)] != d.unit[static_cast<std::size_t>(start)]) {
      blocks.emplace_back(start, r);
      start = r;
    }
  return blocks;
}

// z - weight_i * s_i (s_i'z)/(s_i's_i) within each unit block.
void project_units(const DesignMatrix& d, const std::vector<std::pair<Index, Index>>& blocks,
                   const std::vector<double>& weight, Eigen::Ref<MatrixXd> z) {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto [lo, hi] = blocks[b];
    const auto s = d.scale.segment(lo, hi - lo);
    const double ss = s.squaredNorm();
    for (Index c = 0; c < z.cols(); ++c) {
      auto col = z.col(c).segment(lo, hi - lo);
      const double coef = s.dot(col) / ss;
      col -= weight[b] * coef * s;
    }
  }
}

EstimationResult fill(const std::string& estimator, const DesignMatrix& d, std::vector<std::string> names,
                      const linalg::LeastSquares& ls, Index dof, std::optional<double> sigma2) {
  EstimationResult r;
  r.estimator = estimator;
  r.names = std::move(names);
  r.coef = ls.coef;
  r.rss = ls.rss;
  r.n_obs = d.rows();
  r.n_units = d.n_units;
  r.n_periods = d.n_periods;
  r.dof = dof;
  r.sigma2 = sigma2.value_or(ls.rss / static_cast<double>(dof));
  r.cov = r.sigma2 * ls.xtx_inv;
  return r;
}

}  // namespace

EstimationResult pooled_ols(const DesignMatrix& d) {
  const Index dof = d.rows() - d.x.cols();
  require(dof > 0, "pooled_ols: no residual degrees of freedom");
  const auto ls = linalg::least_squares(d.x, d.y);
  return fill("pooled", d, d.names, ls, dof, std::nullopt);
}

EstimationResult fixed_effects(const DesignMatrix& d) {
  const auto blocks = unit_blocks(d);
  for (const auto& [lo, hi] : blocks)
    require(hi - lo >= 2, "fixed_effects: every unit must be observed in at least 2 periods");
  const std::vector<double> ones(blocks.size(), 1.0);

  MatrixXd x = d.x;
  MatrixXd y = d.y;
  project_units(d, blocks, ones, x);
  project_units(d, blocks, ones, y);

  std::vector<std::string> kept_names, absorbed;
  std::vector<Index> kept;
  for (Index j = 0; j < x.cols(); ++j) {
    const double before = d.x.col(j).norm();
    const double after = x.col(j).norm();
    if (after <= 1e-9 * std::max(before, 1e-300)) {
      const auto& name = d.names[static_cast<std::size_t>(j)];
      if (name != "const")
        fail(ErrorKind::degenerate, "fixed_effects: regressor '" + name + "' has no within-unit variation");
      absorbed.push_back(name);
      continue;
    }
    kept.push_back(j);
    kept_names.push_back(d.names[static_cast<std::size_t>(j)]);
  }
  MatrixXd xw(x.rows(), static_cast<Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c) xw.col(static_cast<Index>(c)) = x.col(kept[c]);

  const Index dof = d.rows() - d.n_units - xw.cols();
  require(dof > 0, "fixed_effects: no residual degrees of freedom");
  const auto ls = linalg::least_squares(xw, y.col(0));
  auto r = fill("fixed", d, std::move(kept_names), ls, dof, std::nullopt);
  r.absorbed = std::move(absorbed);
  r.sigma2_nu = r.sigma2;
  return r;
}

EstimationResult random_effects_gls(const DesignMatrix& d, double sigma2_mu, double sigma2_nu) {
  require(sigma2_nu > 0.0 && sigma2_mu >= 0.0, "random_effects: need sigma2_nu > 0 and sigma2_mu >= 0");
  const auto blocks = unit_blocks(d);
  std::vector<double> theta;
  theta.reserve(blocks.size());
  for (const auto& [lo, hi] : blocks) {
    const double ss = d.scale.segment(lo, hi - lo).squaredNorm();
    theta.push_back(1.0 - std::sqrt(sigma2_nu / (sigma2_nu + sigma2_mu * ss)));
  }
  MatrixXd x = d.x;
  MatrixXd y = d.y;
  project_units(d, blocks, theta, x);
  project_units(d, blocks, theta, y);

  const Index dof = d.rows() - d.x.cols();
  require(dof > 0, "random_effects: no residual degrees of freedom");
  const auto ls = linalg::least_squares(x, y.col(0));
  auto r = fill("random", d, d.names, ls, dof, sigma2_nu);
  r.sigma2_mu = sigma2_mu;
  r.sigma2_nu = sigma2_nu;
  r.theta = std::move(theta);
  return r;
}

EstimationResult random_effects(const DesignMatrix& d) {
  const auto fe = fixed_effects(d);
  const double s2_nu = fe.sigma2;
  require(s2_nu > 0.0, "random_effects: within residual variance is zero");

  // Between regression on q_i = s_i / |s_i|: var(q_i'u_i) = s2_nu + s2_mu |s_i|^2.
  const auto blocks = unit_blocks(d);
  const auto N = static_cast<Index>(blocks.size());
  MatrixXd xb(N, d.x.cols());
  VectorXd yb(N);
  double mean_ss = 0.0;
  for (Index i = 0; i < N; ++i) {
    const auto [lo, hi] = blocks[static_cast<std::size_t>(i)];
    const auto s = d.scale.segment(lo, hi - lo);
    const double norm = s.norm();
    mean_ss += norm * norm;
    xb.row(i) = (s.transpose() * d.x.middleRows(lo, hi - lo)) / norm;
    yb(i) = s.dot(d.y.segment(lo, hi - lo)) / norm;
  }
  mean_ss /= static_cast<double>(N);

  const auto drop = linalg::collinear_columns(xb, 1e-8);
  MatrixXd xbk(N, xb.cols() - static_cast<Index>(drop.size()));
  for (Index j = 0, c = 0; j < xb.cols(); ++j)
    if (std::find(drop.begin(), drop.end(), j) == drop.end()) xbk.col(c++) = xb.col(j);
  require(N > xbk.cols(), "random_effects: between regression needs more units than regressors");
  const auto between = linalg::least_squares(xbk, yb);
  const double s2_between = between.rss / static_cast<double>(N - xbk.cols());

  double s2_mu = (s2_between - s2_nu) / mean_ss;
  std::vector<std::string> warnings;
  if (s2_mu < 0.0) {
    warnings.push_back("negative between-unit variance component floored at 0 (random effects equal pooled OLS)");
    s2_mu = 0.0;
  }
  auto r = random_effects_gls(d, s2_mu, s2_nu);
  r.warnings = std::move(warnings);
  return r;
}

TestResult f_test_effects(const EstimationResult& pooled, const EstimationResult& fe) {
  require(pooled.n_obs == fe.n_obs && pooled.n_units == fe.n_units, "f_test_effects: fits come from different designs");
  if (!(fe.rss > 0.0)) fail(ErrorKind::degenerate, "f_test_effects: fixed-effects fit is saturated (zero RSS)");
  TestResult t;
  t.df1 = static_cast<double>(fe.n_units - 1);
  t.df2 = static_cast<double>(fe.dof);
  require(t.df1 >= 1.0 && t.df2 >= 1.0, "f_test_effects: need at least 2 units and positive residual dof");
  t.statistic = std::max(0.0, (pooled.rss - fe.rss) / t.df1) / (fe.rss / t.df2);
  boost::math::fisher_f dist(t.df1, t.df2);
  t.p_value = boost::math::cdf(boost::math::complement(dist, t.statistic));
  return t;
}

TestResult hausman(const EstimationResult& fe, const EstimationResult& re) {
  std::vector<std::pair<Index, Index>> common;
  for (std::size_t j = 0; j < fe.names.size(); ++j) {
    const auto& name = fe.names[j];
    if (name == "const" || name.rfind("year_", 0) == 0) continue;
    const Index k = re.index_of(name);
    if (k >= 0) common.emplace_back(static_cast<Index>(j), k);
  }
  require(!common.empty(), "hausman: no common slope coefficients");
  const auto m = static_cast<Index>(common.size());
  VectorXd diff(m);
  MatrixXd v(m, m);
  for (Index a = 0; a < m; ++a) {
    diff(a) = fe.coef(common[static_cast<std::size_t>(a)].first) - re.coef(common[static_cast<std::size_t>(a)].second);
    for (Index b = 0; b < m; ++b)
      v(a, b) = fe.cov(common[static_cast<std::size_t>(a)].first, common[static_cast<std::size_t>(b)].first) -
                re.cov(common[static_cast<std::size_t>(a)].second, common[static_cast<std::size_t>(b)].second);
  }
  v = 0.5 * (v + v.transpose());

  TestResult t;
  Eigen::LLT<MatrixXd> llt(v);
  if (llt.info() == Eigen::Success && linalg::spd_condition(v) > 1e-12) {
    t.statistic = diff.dot(llt.solve(diff));
    t.df1 = static_cast<double>(m);
  } else {
    const auto pinv = linalg::psd_pseudo_inverse(v);
    t.statistic = diff.dot(pinv.inverse * diff);
    t.df1 = static_cast<double>(pinv.rank);
    t.warnings.push_back("V_FE - V_RE is not positive definite; pseudo-inverse used, df reduced to " +
                         std::to_string(pinv.rank));
  }
  t.statistic = std::max(0.0, t.statistic);
  if (t.df1 >= 1.0) {
    boost::math::chi_squared dist(t.df1);
    t.p_value = boost::math::cdf(boost::math::complement(dist, t.statistic));
  }
  return t;
}

double elasticity_value(double b1, double b2, double w_mean, double log_y_mean) {
  if (!(w_mean > 0.0)) fail(ErrorKind::validation, "elasticity: mean budget share must be > 0");
  return 1.0 + (b1 + 2.0 * b2 * log_y_mean) / w_mean;
}

Eigen::Vector2d elasticity_gradient(double w_mean, double log_y_mean) {
  return {1.0 / w_mean, 2.0 * log_y_mean / w_mean};
}

ElasticityEstimate elasticity(const EstimationResult& result, Form form, double w_mean, double log_y_mean) {
  if (!(w_mean > 0.0)) fail(ErrorKind::validation, "elasticity: mean budget share must be > 0");
  const Index i1 = result.index_of("log_y");
  require(i1 >= 0, "elasticity: result has no log_y coefficient");
  const Index i2 = form == Form::quaids ? result.index_of("log_y_sq") : -1;
  require(form == Form::aids || i2 >= 0, "elasticity: QUAIDS result has no log_y_sq coefficient");

  const double b1 = result.coef(i1);
  const double b2 = i2 >= 0 ? result.coef(i2) : 0.0;
  const Eigen::Vector2d grad = elasticity_gradient(w_mean, log_y_mean);
  double var = grad(0) * grad(0) * result.cov(i1, i1);
  if (i2 >= 0) var += 2.0 * grad(0) * grad(1) * result.cov(i1, i2) + grad(1) * grad(1) * result.cov(i2, i2);

  ElasticityEstimate e;
  e.elasticity = elasticity_value(b1, b2, w_mean, log_y_mean);
  e.std_error = std::sqrt(std::max(var, 0.0));
  e.t_stat = e.std_error > 0.0 ? e.elasticity / e.std_error : 0.0;
  e.w_mean = w_mean;
  e.log_y_mean = log_y_mean;
  return e;
}

EvaluationPoint evaluation_point(const cohort::PanelDataset& panel, std::size_t function) {
  require(function < kFunctions, "evaluation_point: function index out of range");
  require(!panel.cells.empty(), "evaluation_point: empty panel");
  EvaluationPoint p;
  for (const auto& c : panel.cells) {
    p.w_mean += c.w[function];
    p.log_y_mean += c.log_y;
  }
  p.w_mean /= static_cast<double>(panel.cells.size());
  p.log_y_mean /= static_cast<double>(panel.cells.size());
  return p;
}

const EstimationResult& SpecificationChoice::chosen_fit() const {
  const auto& f = chosen_form();
  return chosen.effects == Effects::fixed ? f.fixed : chosen.effects == Effects::random ? f.random : f.pooled;
}

const FormFits& SpecificationChoice::chosen_form() const { return chosen.form == Form::aids ? aids : quaids; }

namespace {

FormFits fit_form(const cohort::PanelDataset& panel, std::size_t function, Form form, const SelectionOptions& opt) {
  ModelSpec spec;
  spec.form = form;
  spec.function = function;
  spec.year_dummies = opt.year_dummies;
  const auto d = build_design(panel, spec);
  FormFits f;
  f.pooled = pooled_ols(d);
  f.fixed = fixed_effects(d);
  f.random = random_effects(d);
  f.fisher = f_test_effects(f.pooled, f.fixed);
  f.hausman = hausman(f.fixed, f.random);
  f.preferred = f.hausman.p_value < opt.alpha ? Effects::fixed : Effects::random;
  return f;
}

}  // namespace

SpecificationChoice select_specification(const cohort::PanelDataset& panel, std::size_t function,
                                         const SelectionOptions& options) {
  require(options.alpha > 0.0 && options.alpha < 1.0, "select_specification: alpha must lie in (0, 1)");
  SpecificationChoice c;
  c.aids = fit_form(panel, function, Form::aids, options);
  c.quaids = fit_form(panel, function, Form::quaids, options);

  const auto& q = c.quaids.preferred == Effects::fixed ? c.quaids.fixed : c.quaids.random;
  c.b2_t = q.coef_of("log_y_sq") / q.se_of("log_y_sq");
  const double crit = boost::math::quantile(boost::math::normal(), 1.0 - options.alpha / 2.0);

  c.chosen.function = function;
  c.chosen.year_dummies = options.year_dummies;
  if (std::abs(c.b2_t) > crit) {
    c.chosen.form = Form::quaids;
    c.chosen.effects = c.quaids.preferred;
  } else {
    c.chosen.form = Form::aids;
    c.chosen.effects = c.aids.preferred;
  }
  return c;
}

std::vector<FunctionEstimate> estimate_all(const cohort::PanelDataset& panel, const SelectionOptions& options) {
  std::vector<FunctionEstimate> out;
  for (std::size_t j = 0; j < kFunctions; ++j) {
    FunctionEstimate fe;
    fe.function = j;
    fe.choice = select_specification(panel, j, options);
    const auto point = evaluation_point(panel, j);
    fe.elasticity = elasticity(fe.choice.chosen_fit(), fe.choice.chosen.form, point.w_mean, point.log_y_mean);
    out.push_back(std::move(fe));
  }
  return out;
}

std::string elasticity_table_text(const std::vector<FunctionEstimate>& rows) {
  std::ostringstream out;
  out << "Total expenditure elasticities\n";
  out << std::left << std::setw(22) << "Function" << std::right << std::setw(11) << "Elasticity" << std::setw(10)
      << "Student" << std::setw(9) << "Form" << std::setw(9) << "Effects" << std::setw(11) << "Hausman p"
      << std::setw(11) << "Fisher p" << '\n';
  for (const auto& r : rows) {
    const auto& form = r.choice.chosen_form();
    out << std::left << std::setw(22) << kFunctionLabels[r.function] << std::right << std::setw(11)
        << textio::fixed(r.elasticity.elasticity, 3) << std::setw(10) << textio::fixed(r.elasticity.t_stat, 3)
        << std::setw(9) << to_string(r.choice.chosen.form) << std::setw(9) << to_string(r.choice.chosen.effects)
        << std::setw(11) << textio::fixed(form.hausman.p_value, 4) << std::setw(11)
        << textio::fixed(form.fisher.p_value, 4) << '\n';
  }
  return out.str();
}

std::string elasticity_table_csv(const std::vector<FunctionEstimate>& rows) {
  std::ostringstream out;
  out << "function,elasticity,student,std_error,form,effects,hausman_p,fisher_p,w_mean,log_y_mean\n";
  for (const auto& r : rows) {
    const auto& form = r.choice.chosen_form();
    out << kFunctionCodes[r.function] << ',' << textio::format_double(r.elasticity.elasticity) << ','
        << textio::format_double(r.elasticity.t_stat) << ',' << textio::format_double(r.elasticity.std_error) << ','
        << to_string(r.choice.chosen.form) << ',' << to_string(r.choice.chosen.effects) << ','
        << textio::format_double(form.hausman.p_value) << ',' << textio::format_double(form.fisher.p_value) << ','
        << textio::format_double(r.elasticity.w_mean) << ',' << textio::format_double(r.elasticity.log_y_mean) << '\n';
  }
  return out.str();
}

std::string fit_details_csv(const std::vector<FunctionEstimate>& rows) {
  std::ostringstream out;
  out << "function,form,estimator,coefficient,estimate,std_error,sigma2,sigma2_mu,sigma2_nu,dof\n";
  for (const auto& r : rows)
    for (const auto* form : {&r.choice.aids, &r.choice.quaids})
      for (const auto* fit : {&form->pooled, &form->fixed, &form->random})
        for (std::size_t k = 0; k < fit->names.size(); ++k) {
          const auto idx = static_cast<Index>(k);
          out << kFunctionCodes[r.function] << ',' << (form == &r.choice.aids ? "AIDS" : "QUAIDS") << ','
              << fit->estimator << ',' << fit->names[k] << ',' << textio::format_double(fit->coef(idx)) << ','
              << textio::format_double(std::sqrt(fit->cov(idx, idx))) << ',' << textio::format_double(fit->sigma2)
              << ',' << (fit->sigma2_mu ? textio::format_double(*fit->sigma2_mu) : "") << ','
              << (fit->sigma2_nu ? textio::format_double(*fit->sigma2_nu) : "") << ',' << fit->dof << '\n';
        }
  return out.str();
}

}  // namespace pseudopanel::econometrics
