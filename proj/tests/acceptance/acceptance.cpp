// One line per acceptance criterion; exit status 1 when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "oracles.hpp"
#include "panel_sim.hpp"
#include "pseudopanel/diagnostics.hpp"
#include "pseudopanel/pipeline.hpp"
#include "pseudopanel/serialization.hpp"
#include "pseudopanel/textio.hpp"

using namespace pseudopanel;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("pseudopanel_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 1 -------------------------------------------------------------------------
Outcome estimator_oracles() {
  std::mt19937_64 rng(101);
  double fe_gap = 0.0, ols_gap = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    panel_sim::Config cfg;
    cfg.units = 8 + static_cast<int>(rng() % 13);
    cfg.periods = 2 + static_cast<int>(rng() % 3);
    cfg.effect_corr = 0.05;
    cfg.b2 = rep % 2 ? 0.01 : 0.0;
    cfg.seed = rng();
    econometrics::ModelSpec spec;
    spec.form = rep % 3 ? econometrics::Form::quaids : econometrics::Form::aids;
    const auto d = econometrics::build_design(panel_sim::simulate(cfg), spec);
    fe_gap = std::max(fe_gap, (econometrics::fixed_effects(d).coef - oracle::lsdv(d)).cwiseAbs().maxCoeff());
    ols_gap = std::max(ols_gap, (econometrics::pooled_ols(d).coef - oracle::normal_equations(d.x, d.y)).cwiseAbs().maxCoeff());
  }
  return {fe_gap <= 1e-10 && ols_gap <= 1e-10,
          "max |FE - LSDV| " + fmt("%.2e", fe_gap) + ", max |OLS - normal equations| " + fmt("%.2e", ols_gap)};
}

// 2 -------------------------------------------------------------------------
Outcome weighting_identities() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double g_gap = 0.0, w_gap = 0.0;
  bool bounds = true, equality = true;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 1 + rng() % 60;
    const bool equal = rep % 4 == 0;
    std::vector<cohort::HouseholdRecord> m(n);
    for (auto& h : m) {
      h.id = "h";
      h.total_expenditure = equal ? 777.0 : 100.0 + 9000.0 * u(rng);
      h.age = 20.0 + 60.0 * u(rng);
      h.size_oxford = 1.0 + 3.0 * u(rng);
      double s = 0.0;
      for (auto& w : h.shares) s += (w = u(rng));
      for (auto& w : h.shares) w /= s;
    }
    const auto c = cohort::aggregate(m);
    g_gap = std::max(g_gap, std::abs(std::accumulate(c.g_weights.begin(), c.g_weights.end(), 0.0) - 1.0));
    for (std::size_t j = 0; j < kFunctions; ++j) {
      double direct = 0.0;
      for (std::size_t h = 0; h < n; ++h) direct += c.g_weights[h] * m[h].shares[j];
      w_gap = std::max(w_gap, std::abs(c.w[j] - direct));
    }
    const double root_n = std::sqrt(static_cast<double>(n));
    bounds = bounds && c.hetero_factor >= 1.0 - 1e-12 && c.hetero_factor <= root_n + 1e-12;
    const bool at_root = std::abs(c.hetero_factor - root_n) <= 1e-12 * root_n;
    if (n > 1) equality = equality && (at_root == equal);
  }
  return {g_gap <= 1e-10 && w_gap <= 1e-15 && bounds && equality,
          "max |sum g - 1| " + fmt("%.1e", g_gap) + ", max |w - sum g w| " + fmt("%.1e", w_gap) +
              ", factor bounds " + (bounds ? "hold" : "violated") + ", sqrt(n) iff equal y " + (equality ? "holds" : "violated")};
}

// 3 -------------------------------------------------------------------------
struct Recovery {
  std::vector<std::string> names;
  std::vector<double> deviation;
};

Recovery recovery_run(std::uint64_t seed, double* e_pop_gap = nullptr) {
  pipeline::RunConfig cfg;
  pipeline::set_seed(cfg, seed);
  const auto pop = datagen::generate(cfg.population);
  const auto& b = pop.truth.coefficients;
  const auto a = pipeline::analyze(pop.waves, cfg);
  Recovery r;
  for (const auto& f : a.estimates) {
    const auto j = f.function;
    const std::string code(kFunctionCodes[j]);
    const bool planted = b.log_y_sq[j] != 0.0;
    // Where b2 is planted the QUAIDS fit of the chosen effects carries the comparable b1.
    const auto& fit = planted ? (f.choice.chosen.effects == econometrics::Effects::random ? f.choice.quaids.random
                                                                                             : f.choice.quaids.fixed)
                              : f.choice.chosen_fit();
    r.names.push_back(code + " b1");
    r.deviation.push_back(fit.coef_of("log_y") - b.log_y[j]);
    if (planted) {
      r.names.push_back(code + " b2");
      r.deviation.push_back(fit.coef_of("log_y_sq") - b.log_y_sq[j]);
    }
    const double e_true = datagen::true_elasticities(b, [&] {
      ShareVector w{};
      w[j] = f.elasticity.w_mean;
      return w;
    }(), f.elasticity.log_y_mean)[j];
    r.names.push_back(code + " e");
    r.deviation.push_back(f.elasticity.elasticity - e_true);
    if (e_pop_gap) *e_pop_gap = std::max(*e_pop_gap, std::abs(f.elasticity.elasticity - pop.truth.elasticity[j]));
  }
  return r;
}

Outcome recovery() {
  double e_pop_gap = 0.0;
  const auto main = recovery_run(1982, &e_pop_gap);
  const int reps = 40;
  std::vector<std::vector<double>> dev;
  for (int r = 0; r < reps; ++r) dev.push_back(recovery_run(5000 + static_cast<std::uint64_t>(r)).deviation);

  double worst = 0.0;
  std::string worst_name;
  for (std::size_t q = 0; q < main.names.size(); ++q) {
    double mean = 0.0;
    for (const auto& d : dev) mean += d[q] / reps;
    double ss = 0.0;
    for (const auto& d : dev) ss += (d[q] - mean) * (d[q] - mean);
    const double sd = std::sqrt(ss / (reps - 1));
    const double z = std::abs(main.deviation[q]) / sd;
    if (z > worst) {
      worst = z;
      worst_name = main.names[q];
    }
  }
  return {worst <= 3.0, std::to_string(main.names.size()) + " estimates, worst |estimate - truth| = " + fmt("%.2f", worst) +
                            " MC sd (" + worst_name + "), " + std::to_string(reps) +
                            " replications; max |e - e_true at population moments| " + fmt("%.3f", e_pop_gap)};
}

// 4 -------------------------------------------------------------------------
Outcome table_two() {
  pipeline::RunConfig cfg;
  const auto pop = datagen::generate(cfg.population);
  const auto map = pipeline::fit_map(pop.waves, cfg.som, cfg.features, cfg.ages);
  const auto mem = cohort::assign_waves(map, pop.waves, cfg.features, cfg.ages);
  std::vector<Index> som_groups, true_groups;
  for (std::size_t t = 0; t < mem.node_of.size(); ++t) {
    som_groups.insert(som_groups.end(), mem.node_of[t].begin(), mem.node_of[t].end());
    for (const int c : pop.truth.labels[t]) true_groups.push_back(c);
  }
  const auto age_cat = pipeline::age_category_groups(pop.waves, cfg.ages);
  std::mt19937_64 rng(404);
  std::vector<Index> random(som_groups.size());
  for (auto& r : random) r = static_cast<Index>(rng() % 64);

  const MatrixXd shares = pipeline::stacked_shares(pop.waves);
  std::vector<std::string> names(kFunctionCodes.begin(), kFunctionCodes.end());
  const Index drop = static_cast<Index>(kFunctions) - 1;
  const auto som = diagnostics::grouping_report(shares, names, som_groups, drop);
  const auto rnd = diagnostics::grouping_report(shares, names, random, drop);
  const auto cat = diagnostics::grouping_report(shares, names, age_cat, drop);
  const auto truth = diagnostics::grouping_report(shares, names, true_groups, drop);

  int informative = 0, better = 0;
  double widest = 0.0;
  for (std::size_t j = 0; j < kFunctions; ++j) {
    if (truth.within_share[j] >= 95.0) continue;
    ++informative;
    if (som.within_share[j] < rnd.within_share[j] && som.within_share[j] < cat.within_share[j]) ++better;
    widest = std::max(widest, som.within_share[j]);
  }
  const bool lambda_ok = som.wilks.lambda < rnd.wilks.lambda && som.wilks.lambda < cat.wilks.lambda;
  return {informative > 0 && better == informative && lambda_ok,
          std::to_string(better) + "/" + std::to_string(informative) + " informative shares lower under SOM (max " +
              fmt("%.1f", widest) + "%); Wilks " + fmt("%.3g", som.wilks.lambda) + " vs random " + fmt("%.3g", rnd.wilks.lambda) +
              ", age x category " + fmt("%.3g", cat.wilks.lambda) + " (" + std::to_string(cat.group_count) + " groups)"};
}

// 5 -------------------------------------------------------------------------
Outcome selection_power() {
  panel_sim::Config base;
  base.sigma_nu = 0.01;
  base.sigma_mu = 0.05;
  int aids = 0, quaids = 0, hausman = 0;
  for (int r = 0; r < 100; ++r) {
    auto linear = base;
    linear.seed = 20000 + static_cast<std::uint64_t>(r);
    aids += econometrics::select_specification(panel_sim::simulate(linear), 0).chosen.form == econometrics::Form::aids;

    auto curved = base;
    curved.b2 = 0.02;
    curved.b1 = -0.04 - 2.0 * 0.02 * 10.0;
    curved.seed = 30000 + static_cast<std::uint64_t>(r);
    quaids += econometrics::select_specification(panel_sim::simulate(curved), 0).chosen.form == econometrics::Form::quaids;

    auto correlated = base;
    correlated.effect_corr = 0.1;
    correlated.seed = 40000 + static_cast<std::uint64_t>(r);
    const auto d = econometrics::build_design(panel_sim::simulate(correlated), {econometrics::Form::aids});
    const auto h = econometrics::hausman(econometrics::fixed_effects(d), econometrics::random_effects(d));
    hausman += h.statistic > boost::math::quantile(boost::math::chi_squared(h.df1), 0.95);
  }
  return {aids >= 90 && quaids >= 90 && hausman >= 80,
          "AIDS " + std::to_string(aids) + "/100 with b2 = 0, QUAIDS " + std::to_string(quaids) +
              "/100 with strong b2, Hausman rejects " + std::to_string(hausman) + "/100 with correlated effects"};
}

// 6 -------------------------------------------------------------------------
Outcome numerical_checks() {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double grad_err = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const double b1 = u(rng) - 0.5, b2 = 0.1 * (u(rng) - 0.5), w = 0.01 + 0.3 * u(rng), ly = 8.0 + 4.0 * u(rng);
    const Eigen::Vector2d g = econometrics::elasticity_gradient(w, ly);
    const double h = 1e-6;
    const double d1 = (econometrics::elasticity_value(b1 + h, b2, w, ly) - econometrics::elasticity_value(b1 - h, b2, w, ly)) / (2 * h);
    const double d2 = (econometrics::elasticity_value(b1, b2 + h, w, ly) - econometrics::elasticity_value(b1, b2 - h, w, ly)) / (2 * h);
    grad_err = std::max({grad_err, std::abs(d1 - g(0)) / std::abs(g(0)), std::abs(d2 - g(1)) / std::abs(g(1))});
  }

  double wilks_err = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const Index p = 3 + rep % 4, groups = 4 + rep;
    MatrixXd x(60 * groups, p);
    std::normal_distribution<double> normal;
    std::vector<Index> g;
    for (Index i = 0; i < x.rows(); ++i) {
      g.push_back(i % groups);
      for (Index j = 0; j < p; ++j) x(i, j) = normal(rng) + 0.8 * static_cast<double>((i % groups + j) % 3);
    }
    const double lib = diagnostics::wilks_lambda(x, g).lambda, ref = oracle::wilks_lambda(x, g);
    wilks_err = std::max(wilks_err, std::abs(lib - ref) / ref);
  }

  som::SomMap map;
  map.codes.resize(64, 5);
  std::normal_distribution<double> normal;
  for (Index i = 0; i < 64; ++i)
    for (Index j = 0; j < 5; ++j) map.codes(i, j) = normal(rng);
  map.scaler = som::Scaler::identity(5);
  const MatrixXd m = som::mahalanobis_matrix(map, MatrixXd::Identity(5, 5));
  double asym = 0.0, diag = 0.0, eucl = 0.0;
  for (Index i = 0; i < 64; ++i) {
    diag = std::max(diag, std::abs(m(i, i)));
    for (Index j = 0; j < 64; ++j) {
      asym = std::max(asym, std::abs(m(i, j) - m(j, i)));
      eucl = std::max(eucl, std::abs(m(i, j) - (map.codes.row(i) - map.codes.row(j)).norm()));
    }
  }
  const bool ok = grad_err < 1e-6 && wilks_err <= 1e-8 && asym <= 1e-10 && diag <= 1e-10 && eucl <= 1e-10;
  return {ok, "gradient rel. error " + fmt("%.1e", grad_err) + ", Wilks rel. error " + fmt("%.1e", wilks_err) +
                  ", Mahalanobis asymmetry " + fmt("%.1e", asym) + " diagonal " + fmt("%.1e", diag) + " vs Euclidean " +
                  fmt("%.1e", eucl)};
}

// 7 -------------------------------------------------------------------------
fs::path full_run(const std::string& name) {
  pipeline::RunConfig cfg;
  cfg.out_dir = scratch(name);
  pipeline::run_all(cfg);
  return cfg.out_dir;
}

Outcome determinism(const fs::path& a, const fs::path& b) {
  std::vector<std::string> differ;
  for (const char* f : {pipeline::kPanelFile, pipeline::kMapFile, pipeline::kElastText, pipeline::kElastCsv})
    if (textio::read_file(a / f) != textio::read_file(b / f)) differ.emplace_back(f);
  if (differ.empty()) return {true, "panel CSV, map JSON and elasticity reports byte-identical across two runs"};
  std::string detail = "files differ:";
  for (const auto& f : differ) detail += " " + f;
  return {false, detail};
}

// 8 -------------------------------------------------------------------------
Outcome size_guards(const fs::path& dir) {
  const pipeline::RunConfig cfg;
  std::vector<cohort::Wave> waves;
  for (const auto& w : cfg.population.waves) {
    std::ifstream in(dir / ("survey_" + std::to_string(w.year) + ".csv"));
    waves.push_back(cohort::read_survey_csv(in));
  }
  const auto stored = serialization::map_from_json(textio::read_file(dir / pipeline::kMapFile));
  const auto recount = oracle::recount_cells(stored.map, waves, stored.features, stored.ages, 100);

  std::istringstream csv(textio::read_file(dir / pipeline::kSizeCsv));
  std::string line;
  std::getline(csv, line);
  std::vector<Index> reported;
  bool counts_match = true;
  while (std::getline(csv, line)) {
    std::vector<long long> cells;
    for (const auto c : textio::split_csv(line)) cells.push_back(textio::parse_int(c, "size report"));
    const auto node = static_cast<std::size_t>(cells.front() - 1);
    for (std::size_t t = 0; t < waves.size(); ++t) counts_match = counts_match && cells[1 + t] == recount.counts[node][t];
    if (cells.back() == 1) reported.push_back(static_cast<Index>(node));
  }
  const bool ok = reported == recount.flagged && counts_match;
  return {ok, std::to_string(reported.size()) + " cohorts flagged, recount flags " + std::to_string(recount.flagged.size()) +
                  (counts_match ? ", cell counts agree" : ", cell counts differ")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no runtime limit
    std::function<Outcome()> run;
  };
  fs::path run_a, run_b;
  const std::vector<Criterion> criteria{
      {1, "estimator oracle equivalence", 10.0, estimator_oracles},
      {2, "weighting identities", 5.0, weighting_identities},
      {3, "coefficient and elasticity recovery", 300.0, recovery},
      {4, "SOM cohorts against baseline groupings", 60.0, table_two},
      {5, "specification-selection power", 300.0, selection_power},
      {6, "numerical checks", 0.0, numerical_checks},
      {7, "determinism of run-all", 0.0,
       [&] {
         run_a = full_run("run_a");
         run_b = full_run("run_b");
         return determinism(run_a, run_b);
       }},
      {8, "cohort-size guards", 0.0, [&] { return size_guards(run_a); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_s > 0.0 && secs > c.limit_s) {
      out.pass = false;
      out.detail += "; over the " + fmt("%.0f", c.limit_s) + " s limit";
    }
    failures += !out.pass;
    std::printf("[%s] %d %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
