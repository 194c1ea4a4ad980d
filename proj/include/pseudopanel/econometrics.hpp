#pragma once

// Budget-share equations on a pseudo panel:
//   w_it = a0 + b1 log y + b2 (log y)^2 + b3 log age + b4 (log age)^2
//        + b5 log size + b6 (log size)^2 + d_t + mu_i + nu_it
// with every variable of a cell pre-multiplied by its heteroscedasticity factor f_it.
//
// Because the intercept column of the scaled design is f_it rather than 1, a cohort
// effect enters a cell as f_it * mu_i. The fixed-effects estimator therefore removes,
// unit by unit, the projection on that unit's f column (plain demeaning when f = 1),
// and the random-effects GLS uses Omega_i = s2_nu I + s2_mu f_i f_i'.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "pseudopanel/cohort.hpp"

namespace pseudopanel::econometrics {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Form { aids, quaids };
enum class Effects { pooled, fixed, random };

std::string to_string(Form f);
std::string to_string(Effects e);

struct ModelSpec {
  Form form = Form::quaids;
  Effects effects = Effects::fixed;
  std::size_t function = 0;
  bool year_dummies = true;
};

struct DesignMatrix {
  MatrixXd x;
  VectorXd y;
  std::vector<Index> unit;    // 0..N-1, rows grouped by unit
  std::vector<Index> period;  // 0..T-1
  VectorXd scale;             // per-row factor; the scaled intercept column
  std::vector<std::string> names;
  Index n_units = 0;
  Index n_periods = 0;

  Index rows() const { return x.rows(); }
  Index column(const std::string& name) const;  // -1 when absent
};

// Checks shapes and groups; unit scale defaults to ones when `scale` is empty.
DesignMatrix make_design(MatrixXd x, VectorXd y, std::vector<Index> unit, std::vector<Index> period,
                         std::vector<std::string> names, VectorXd scale = {});

// Columns: const, log_y, [log_y_sq], log_age, log_age_sq, log_size, log_size_sq, year dummies (T-1),
// all taken from the factor-scaled cells. Throws naming collinear columns.
DesignMatrix build_design(const cohort::PanelDataset& panel, const ModelSpec& spec);

struct EstimationResult {
  std::string estimator;
  std::vector<std::string> names;
  VectorXd coef;
  MatrixXd cov;
  double rss = 0.0;
  double sigma2 = 0.0;  // residual variance
  Index n_obs = 0;
  Index n_units = 0;
  Index n_periods = 0;
  Index dof = 0;
  std::optional<double> sigma2_mu;
  std::optional<double> sigma2_nu;
  std::vector<double> theta;           // random effects: per-unit quasi-demeaning weight
  std::vector<std::string> absorbed;   // fixed effects: columns swept out with the unit effects
  std::vector<std::string> warnings;

  Index index_of(const std::string& name) const;  // -1 when absent
  double coef_of(const std::string& name) const;
  double se_of(const std::string& name) const;
};

EstimationResult pooled_ols(const DesignMatrix& d);
EstimationResult fixed_effects(const DesignMatrix& d);
// Swamy-Arora variance components, then GLS.
EstimationResult random_effects(const DesignMatrix& d);
// GLS with given variance components (sigma2_nu > 0, sigma2_mu >= 0).
EstimationResult random_effects_gls(const DesignMatrix& d, double sigma2_mu, double sigma2_nu);

struct TestResult {
  double statistic = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;  // 0 for chi-square tests
  double p_value = 1.0;
  std::vector<std::string> warnings;
};

// Fisher test for the presence of unit effects (pooled nested in fixed effects).
TestResult f_test_effects(const EstimationResult& pooled, const EstimationResult& fe);
// Hausman chi-square on the common slopes (constant and year dummies excluded).
TestResult hausman(const EstimationResult& fe, const EstimationResult& re);

struct ElasticityEstimate {
  double elasticity = 0.0;
  double std_error = 0.0;
  double t_stat = 0.0;  // elasticity / std_error
  double w_mean = 0.0;
  double log_y_mean = 0.0;
};

// e = 1 + (b1 + 2 b2 log_y) / w
double elasticity_value(double b1, double b2, double w_mean, double log_y_mean);
// d e / d (b1, b2)
Eigen::Vector2d elasticity_gradient(double w_mean, double log_y_mean);
ElasticityEstimate elasticity(const EstimationResult& result, Form form, double w_mean, double log_y_mean);

struct EvaluationPoint {
  double w_mean = 0.0;
  double log_y_mean = 0.0;
};

// Unweighted mean over all cohort-period cells.
EvaluationPoint evaluation_point(const cohort::PanelDataset& panel, std::size_t function);

struct SelectionOptions {
  double alpha = 0.05;
  bool year_dummies = true;
};

struct FormFits {
  EstimationResult pooled;
  EstimationResult fixed;
  EstimationResult random;
  TestResult fisher;
  TestResult hausman;
  Effects preferred = Effects::fixed;  // by Hausman at alpha
};

struct SpecificationChoice {
  ModelSpec chosen;
  FormFits aids;
  FormFits quaids;
  double b2_t = 0.0;  // t statistic of log_y_sq in the QUAIDS fit of the Hausman-preferred effects
  const EstimationResult& chosen_fit() const;
  const FormFits& chosen_form() const;
};

// Fits AIDS and QUAIDS under pooled/FE/RE; keeps QUAIDS iff |t(b2)| exceeds the two-sided
// critical value; effects by Hausman at alpha.
SpecificationChoice select_specification(const cohort::PanelDataset& panel, std::size_t function,
                                         const SelectionOptions& options = {});

struct FunctionEstimate {
  std::size_t function = 0;
  SpecificationChoice choice;
  ElasticityEstimate elasticity;
};

std::vector<FunctionEstimate> estimate_all(const cohort::PanelDataset& panel, const SelectionOptions& options = {});

std::string elasticity_table_text(const std::vector<FunctionEstimate>& rows);
std::string elasticity_table_csv(const std::vector<FunctionEstimate>& rows);
std::string fit_details_csv(const std::vector<FunctionEstimate>& rows);

}  // namespace pseudopanel::econometrics
