#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "helpers.hpp"
#include "oracles.hpp"
#include "panel_sim.hpp"
#include "pseudopanel/econometrics.hpp"

using namespace pseudopanel;
using namespace pseudopanel::econometrics;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Balanced panel design with an f-scaled constant, `k` scaled regressors and scaled year dummies.
DesignMatrix random_design(Index n_units, Index n_periods, Index k, std::uint64_t seed, bool unit_scale = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> factor(1.0, 12.0);
  const Index rows = n_units * n_periods;
  std::vector<std::string> names{"const"};
  for (Index j = 0; j < k; ++j) names.push_back("x" + std::to_string(j));
  for (Index t = 1; t < n_periods; ++t) names.push_back("year_" + std::to_string(t));
  MatrixXd x = MatrixXd::Zero(rows, static_cast<Index>(names.size()));
  VectorXd y(rows), s(rows);
  std::vector<Index> unit, period;
  for (Index i = 0; i < n_units; ++i) {
    const double mu = normal(rng);
    for (Index t = 0; t < n_periods; ++t) {
      const Index r = i * n_periods + t;
      s(r) = unit_scale ? 1.0 : factor(rng);
      x(r, 0) = s(r);
      double signal = mu;
      for (Index j = 0; j < k; ++j) {
        const double v = normal(rng) + 0.5 * mu;
        x(r, 1 + j) = s(r) * v;
        signal += (j + 1) * 0.3 * v;
      }
      if (t > 0) x(r, k + t) = s(r);
      y(r) = s(r) * (signal + 0.1 * t) + normal(rng);
      unit.push_back(i);
      period.push_back(t);
    }
  }
  return make_design(x, y, unit, period, names, s);
}

VectorXd slopes_of(const EstimationResult& r, const std::vector<std::string>& names) {
  VectorXd out(static_cast<Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) out(static_cast<Index>(j)) = r.coef_of(names[j]);
  return out;
}

EstimationResult scalar_result(double coef, double var) {
  EstimationResult r;
  r.names = {"log_y"};
  r.coef = VectorXd::Constant(1, coef);
  r.cov = MatrixXd::Constant(1, 1, var);
  return r;
}

panel_sim::Config strong_effects() {
  panel_sim::Config c;
  c.sigma_nu = 0.01;
  c.sigma_mu = 0.05;
  return c;
}

}  // namespace

TEST_SUITE("econometrics") {
  TEST_CASE("design columns") {
    const auto panel = panel_sim::simulate({});
    ModelSpec spec;
    spec.form = Form::aids;
    CHECK(build_design(panel, spec).x.cols() == 8);
    spec.form = Form::quaids;
    const auto q = build_design(panel, spec);
    CHECK(q.x.cols() == 9);
    CHECK(q.names == std::vector<std::string>{"const", "log_y", "log_y_sq", "log_age", "log_age_sq", "log_size",
                                              "log_size_sq", "year_1986", "year_1990"});
    spec.year_dummies = false;
    CHECK(build_design(panel, spec).x.cols() == 7);
    CHECK((q.x.col(0) - q.scale).norm() == 0.0);
  }

  TEST_CASE("collinear design columns are named") {
    auto panel = panel_sim::simulate({});
    for (auto& c : panel.cells) c.log_size_sq = 2.0 * c.log_size;
    const auto msg = testing::error_message([&] { build_design(panel, {}); });
    CHECK(msg.find("log_size_sq") != std::string::npos);
  }

  TEST_CASE("pooled OLS on a three-point regression") {
    MatrixXd x(3, 2);
    x << 1, 0, 1, 1, 1, 2;
    const VectorXd y = (VectorXd(3) << 1, 2, 4).finished();
    const auto r = pooled_ols(make_design(x, y, {0, 1, 2}, {0, 0, 0}, {"const", "x"}));
    CHECK(r.coef(1) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(r.coef(0) == doctest::Approx(5.0 / 6.0).epsilon(1e-14));
    CHECK(r.dof == 1);
  }

  TEST_CASE("pooled OLS is exact on linear data and ignores row duplication") {
    const auto d = random_design(10, 3, 3, 2);
    const VectorXd b = (VectorXd(d.x.cols()) << 0.5, -1.0, 2.0, 0.25, 0.1, -0.2).finished();
    const auto exact = pooled_ols(make_design(d.x, d.x * b, d.unit, d.period, d.names, d.scale));
    CHECK((exact.coef - b).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(exact.rss < 1e-20);

    const auto once = pooled_ols(d);
    MatrixXd x2(2 * d.rows(), d.x.cols());
    x2 << d.x, d.x;
    VectorXd y2(2 * d.rows());
    y2 << d.y, d.y;
    std::vector<Index> unit(static_cast<std::size_t>(2 * d.rows())), period(unit.size(), 0);
    for (std::size_t i = 0; i < unit.size(); ++i) unit[i] = static_cast<Index>(i);
    const auto twice = pooled_ols(make_design(x2, y2, unit, period, d.names));
    CHECK((twice.coef - once.coef).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("pooled OLS matches the normal equations") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const auto d = random_design(3 + static_cast<Index>(seed % 18), 2 + static_cast<Index>(seed % 3), 3, seed);
      const auto r = pooled_ols(d);
      CHECK((r.coef - oracle::normal_equations(d.x, d.y)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("fixed effects equal LSDV") {
    for (std::uint64_t seed = 100; seed < 150; ++seed) {
      const auto d = random_design(6 + static_cast<Index>(seed % 15), 2 + static_cast<Index>(seed % 3), 3, seed);
      const auto fe = fixed_effects(d);
      CHECK(fe.absorbed == std::vector<std::string>{"const"});
      CHECK((fe.coef - oracle::lsdv(d)).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(fe.dof == d.rows() - d.n_units - static_cast<Index>(fe.names.size()));
    }
  }

  TEST_CASE("fixed effects on a unit-demeaned design equal pooled slopes") {
    auto d = random_design(15, 4, 2, 7, true);
    MatrixXd x = d.x;
    VectorXd y = d.y;
    for (Index i = 0; i < 15; ++i) {
      x.block(i * 4, 1, 4, x.cols() - 1).rowwise() -= x.block(i * 4, 1, 4, x.cols() - 1).colwise().mean();
      y.segment(i * 4, 4).array() -= y.segment(i * 4, 4).mean();
    }
    const auto demeaned = make_design(x, y, d.unit, d.period, d.names, d.scale);
    const auto fe = fixed_effects(demeaned);
    const auto ols = pooled_ols(demeaned);
    for (const auto& name : fe.names) CHECK(fe.coef_of(name) == doctest::Approx(ols.coef_of(name)).epsilon(1e-10));
  }

  TEST_CASE("fixed effects remove effects correlated with the regressor") {
    auto cfg = strong_effects();
    cfg.effect_corr = 0.15;
    cfg.drift_sd = 0.15;
    double fe_err = 0.0, pooled_err = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      cfg.seed = seed;
      const auto d = build_design(panel_sim::simulate(cfg), {Form::aids, Effects::fixed, 0, true});
      fe_err += fixed_effects(d).coef_of("log_y") - cfg.b1;
      pooled_err += pooled_ols(d).coef_of("log_y") - cfg.b1;
    }
    CHECK(std::abs(fe_err / 20) < 0.01);
    CHECK(pooled_err / 20 > 0.05);
  }

  TEST_CASE("a regressor without within variation is named") {
    auto d = random_design(6, 3, 2, 9);
    for (Index r = 0; r < d.rows(); ++r) d.x(r, 2) = d.scale(r) * static_cast<double>(d.unit[static_cast<std::size_t>(r)]);
    const auto f = [&] { fixed_effects(d); };
    CHECK(testing::error_kind(f) == ErrorKind::degenerate);
    CHECK(testing::error_message(f).find("x1") != std::string::npos);
  }

  TEST_CASE("random effects limits") {
    const auto d = random_design(20, 3, 3, 11);
    const auto fe = fixed_effects(d);
    const auto ols = pooled_ols(d);

    const auto zero = random_effects_gls(d, 0.0, fe.sigma2);
    for (const double t : zero.theta) CHECK(t == 0.0);
    CHECK((zero.coef - ols.coef).cwiseAbs().maxCoeff() < 1e-12);

    const auto big = random_effects_gls(d, 1e6 * fe.sigma2, fe.sigma2);
    for (const double t : big.theta) CHECK(t > 0.999);
    for (const auto& name : fe.names) CHECK(big.coef_of(name) == doctest::Approx(fe.coef_of(name)).epsilon(1e-3));
  }

  TEST_CASE("a negative between variance is floored with a warning") {
    auto d = random_design(12, 3, 2, 13, true);
    std::mt19937_64 rng(14);
    std::normal_distribution<double> normal;
    for (Index i = 0; i < 12; ++i) {
      VectorXd e(3);
      for (Index t = 0; t < 3; ++t) e(t) = normal(rng);
      e.array() -= e.mean();
      d.y.segment(i * 3, 3) = d.x.block(i * 3, 1, 3, 2) * Eigen::Vector2d(0.4, -0.7) + e;
    }
    const auto re = random_effects(d);
    CHECK(re.sigma2_mu == 0.0);
    REQUIRE(re.warnings.size() == 1);
    CHECK(re.warnings[0].find("floored") != std::string::npos);
    CHECK((re.coef - pooled_ols(d).coef).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("random effects are unbiased under exogenous effects") {
    auto cfg = strong_effects();
    const int reps = 200;
    std::vector<double> est;
    for (int r = 0; r < reps; ++r) {
      cfg.seed = 1000 + static_cast<std::uint64_t>(r);
      est.push_back(random_effects(build_design(panel_sim::simulate(cfg), {Form::aids, Effects::random, 0, true})).coef_of("log_y"));
    }
    const double mean = std::accumulate(est.begin(), est.end(), 0.0) / reps;
    double ss = 0.0;
    for (const double e : est) ss += (e - mean) * (e - mean);
    const double se = std::sqrt(ss / (reps - 1) / reps);
    CHECK(std::abs(mean - cfg.b1) < 3.0 * se);
  }

  TEST_CASE("Fisher test") {
    SUBCASE("null mean") {
      panel_sim::Config cfg;
      cfg.sigma_mu = 0.0;
      double sum = 0.0, df2 = 0.0;
      for (int r = 0; r < 500; ++r) {
        cfg.seed = 5000 + static_cast<std::uint64_t>(r);
        const auto d = build_design(panel_sim::simulate(cfg), {Form::aids, Effects::fixed, 0, true});
        const auto t = f_test_effects(pooled_ols(d), fixed_effects(d));
        sum += t.statistic;
        df2 = t.df2;
      }
      const double expected = df2 / (df2 - 2.0);
      CHECK(std::abs(sum / 500 - expected) < 0.1 * expected);
    }
    SUBCASE("strong effects") {
      auto cfg = strong_effects();
      cfg.sigma_mu = 5.0 * cfg.sigma_nu / 15.0;  // cell-level effect sd against cell-level noise sd
      const auto d = build_design(panel_sim::simulate(cfg), {Form::aids, Effects::fixed, 0, true});
      CHECK(f_test_effects(pooled_ols(d), fixed_effects(d)).statistic > 10.0);
    }
    SUBCASE("equal residual sums") {
      auto fe = scalar_result(0.0, 1.0), pooled = fe;
      fe.rss = pooled.rss = 2.0;
      fe.n_units = pooled.n_units = 5;
      fe.dof = 10;
      const auto t = f_test_effects(pooled, fe);
      CHECK(t.statistic == 0.0);
      CHECK(t.p_value == 1.0);
      fe.rss = 0.0;
      CHECK(testing::error_kind([&] { f_test_effects(pooled, fe); }) == ErrorKind::degenerate);
    }
  }

  TEST_CASE("Hausman statistic") {
    CHECK(hausman(scalar_result(0.3, 0.05), scalar_result(0.3, 0.01)).statistic == 0.0);
    const auto h = hausman(scalar_result(0.2, 0.05), scalar_result(0.0, 0.01));
    CHECK(h.statistic == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h.df1 == 1.0);
    CHECK(h.p_value == doctest::Approx(boost::math::cdf(boost::math::complement(boost::math::chi_squared(1.0), 1.0))));
    CHECK(h.warnings.empty());
  }

  TEST_CASE("Hausman falls back to a pseudo-inverse") {
    EstimationResult fe, re;
    fe.names = re.names = {"const", "log_y", "log_age", "year_1986"};
    fe.coef = (VectorXd(4) << 1, 0.2, 0.5, 9).finished();
    re.coef = (VectorXd(4) << 0, 0.1, 0.5, 0).finished();
    fe.cov = re.cov = MatrixXd::Identity(4, 4) * 0.01;
    fe.cov(1, 1) = 0.02;
    const auto h = hausman(fe, re);
    CHECK(h.df1 == 1.0);
    CHECK(h.statistic == doctest::Approx(1.0));
    REQUIRE(h.warnings.size() == 1);
    CHECK(h.warnings[0].find("pseudo-inverse") != std::string::npos);
  }

  TEST_CASE("Hausman is non-negative on estimated fits") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      auto cfg = strong_effects();
      cfg.seed = seed;
      const auto d = build_design(panel_sim::simulate(cfg), {});
      CHECK(hausman(fixed_effects(d), random_effects(d)).statistic >= 0.0);
    }
  }

  TEST_CASE("Hausman detects effects correlated with log expenditure") {
    auto cfg = strong_effects();
    cfg.effect_corr = 0.1;
    int rejections = 0;
    for (int r = 0; r < 200; ++r) {
      cfg.seed = 7000 + static_cast<std::uint64_t>(r);
      const auto d = build_design(panel_sim::simulate(cfg), {Form::aids, Effects::fixed, 0, true});
      const auto h = hausman(fixed_effects(d), random_effects(d));
      const double crit = boost::math::quantile(boost::math::chi_squared(h.df1), 0.95);
      rejections += h.statistic > crit;
    }
    CHECK(rejections >= 160);
  }

  TEST_CASE("specification selection") {
    auto share_of = [](panel_sim::Config cfg, int reps, auto pick) {
      int hits = 0;
      for (int r = 0; r < reps; ++r) {
        cfg.seed = 9000 + static_cast<std::uint64_t>(r);
        hits += pick(select_specification(panel_sim::simulate(cfg), 0));
      }
      return hits;
    };
    auto linear = strong_effects();
    CHECK(share_of(linear, 100, [](const SpecificationChoice& c) { return c.chosen.form == Form::aids; }) >= 90);
    auto curved = strong_effects();
    curved.b2 = 0.02;
    curved.b1 = -0.04 - 2.0 * 0.02 * 10.0;
    CHECK(share_of(curved, 100, [](const SpecificationChoice& c) { return c.chosen.form == Form::quaids; }) >= 90);
    CHECK(share_of(linear, 100, [](const SpecificationChoice& c) { return c.chosen.effects == Effects::random; }) > 50);
  }

  TEST_CASE("chosen estimator recovers every coefficient") {
    auto cfg = strong_effects();
    cfg.b2 = 0.02;
    cfg.b1 = -0.04 - 2.0 * 0.02 * 10.0;
    cfg.b_age_sq = -0.01;
    cfg.b_size_sq = 0.005;
    cfg.effect_corr = 0.1;
    const std::vector<std::pair<std::string, double>> truth{{"log_y", cfg.b1},         {"log_y_sq", cfg.b2},
                                                             {"log_age", cfg.b_age},    {"log_age_sq", cfg.b_age_sq},
                                                             {"log_size", cfg.b_size}, {"log_size_sq", cfg.b_size_sq}};
    const int reps = 200;
    std::vector<std::vector<double>> est(truth.size());
    for (int r = 0; r < reps; ++r) {
      cfg.seed = 11000 + static_cast<std::uint64_t>(r);
      const auto choice = select_specification(panel_sim::simulate(cfg), 0);
      REQUIRE(choice.chosen.form == Form::quaids);
      for (std::size_t k = 0; k < truth.size(); ++k) est[k].push_back(choice.chosen_fit().coef_of(truth[k].first));
    }
    for (std::size_t k = 0; k < truth.size(); ++k) {
      const double mean = std::accumulate(est[k].begin(), est[k].end(), 0.0) / reps;
      double ss = 0.0;
      for (const double e : est[k]) ss += (e - mean) * (e - mean);
      const double se = std::sqrt(ss / (reps - 1) / reps);
      INFO(truth[k].first);
      CHECK(std::abs(mean - truth[k].second) < 3.0 * se);
    }
  }

  TEST_CASE("elasticity values") {
    CHECK(elasticity_value(0.0, 0.0, 0.2, 10.0) == 1.0);
    CHECK(elasticity_value(-0.08, 0.0, 0.15, 10.0) == doctest::Approx(0.4667).epsilon(1e-4));
    // q(y) = w(y) y with w(y) = a + b1 log y; d log q / d log y at w = 0.15.
    const double b1 = -0.08, ly = std::log(25000.0), a = 0.15 - b1 * ly;
    const auto log_q = [&](double l) { return std::log((a + b1 * l) * std::exp(l)); };
    const double h = 1e-5;
    CHECK((log_q(ly + h) - log_q(ly - h)) / (2 * h) == doctest::Approx(elasticity_value(b1, 0.0, 0.15, ly)).epsilon(1e-8));
    CHECK(elasticity_value(-0.01, 0.0, 0.1, 10.0) < 1.0);
    CHECK(elasticity_value(0.01, 0.0, 0.1, 10.0) > 1.0);
    CHECK(testing::error_kind([] { elasticity(scalar_result(0.1, 0.01), Form::aids, 0.0, 10.0); }) == ErrorKind::validation);
  }

  TEST_CASE("elasticity gradient matches central differences") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
      const double b1 = u(rng) - 0.5, b2 = 0.1 * (u(rng) - 0.5), w = 0.01 + u(rng) * 0.3, ly = 8.0 + 4.0 * u(rng);
      const Eigen::Vector2d g = elasticity_gradient(w, ly);
      const double h1 = 1e-6 * std::max(1.0, std::abs(b1)), h2 = 1e-6 * std::max(1.0, std::abs(b2));
      const double d1 = (elasticity_value(b1 + h1, b2, w, ly) - elasticity_value(b1 - h1, b2, w, ly)) / (2 * h1);
      const double d2 = (elasticity_value(b1, b2 + h2, w, ly) - elasticity_value(b1, b2 - h2, w, ly)) / (2 * h2);
      CHECK(std::abs(d1 - g(0)) / std::abs(g(0)) < 1e-6);
      CHECK(std::abs(d2 - g(1)) / std::abs(g(1)) < 1e-6);
    }
  }

  TEST_CASE("delta-method standard error matches a parametric bootstrap") {
    EstimationResult r;
    r.names = {"const", "log_y", "log_y_sq"};
    r.coef = (VectorXd(3) << 0.3, 0.35, -0.02).finished();
    MatrixXd l(3, 3);
    l << 0.1, 0, 0, 0.02, 0.04, 0, -0.001, -0.0038, 0.0004;
    r.cov = l * l.transpose();
    const double w = 0.15, ly = 10.2;
    const auto e = elasticity(r, Form::quaids, w, ly);

    Eigen::LLT<MatrixXd> llt(r.cov);
    const MatrixXd lower = llt.matrixL();
    std::mt19937_64 rng(22);
    std::normal_distribution<double> normal;
    const int draws = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < draws; ++i) {
      VectorXd z(3);
      for (Index j = 0; j < 3; ++j) z(j) = normal(rng);
      const VectorXd b = r.coef + lower * z;
      const double v = elasticity_value(b(1), b(2), w, ly);
      sum += v;
      sum2 += v * v;
    }
    const double sd = std::sqrt((sum2 - sum * sum / draws) / (draws - 1));
    CHECK(std::abs(e.std_error - sd) < 0.03 * sd);
    CHECK(e.t_stat == doctest::Approx(e.elasticity / e.std_error));
  }

  TEST_CASE("evaluation point is the unweighted cell mean") {
    const auto panel = panel_sim::simulate({});
    const auto p = evaluation_point(panel, 0);
    double w = 0.0, ly = 0.0;
    for (const auto& c : panel.cells) {
      w += c.w[0];
      ly += c.log_y;
    }
    CHECK(p.w_mean == doctest::Approx(w / static_cast<double>(panel.cells.size())));
    CHECK(p.log_y_mean == doctest::Approx(ly / static_cast<double>(panel.cells.size())));
  }

  TEST_CASE("report tables list every function") {
    auto cfg = strong_effects();
    cfg.effect_corr = 0.05;
    auto panel = panel_sim::simulate(cfg);
    std::mt19937_64 rng(23);
    std::normal_distribution<double> normal;
    for (auto& c : panel.cells)
      for (std::size_t j = 1; j < kFunctions; ++j) c.w[j] = 0.05 + 0.01 * normal(rng);
    const auto rows = estimate_all(panel);
    REQUIRE(rows.size() == kFunctions);
    const auto text = elasticity_table_text(rows);
    CHECK(text.find("Elasticity") != std::string::npos);
    CHECK(text.find("Vehicles") != std::string::npos);
    const auto csv = elasticity_table_csv(rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(kFunctions) + 1);
  }
}
