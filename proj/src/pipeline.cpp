#include "pseudopanel/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pseudopanel/error.hpp"
#include "pseudopanel/serialization.hpp"
#include "pseudopanel/textio.hpp"

namespace pseudopanel::pipeline {

using Eigen::Index;
using nlohmann::json;

void RunConfig::validate() const {
  require(!out_dir.empty(), "config: out_dir must not be empty");
  som.validate();
  ages.validate();
  require(min_cell_size >= 1, "config: min_cell_size must be >= 1");
  require(alpha > 0.0 && alpha < 1.0, "config: alpha must lie in (0, 1)");
  for (const auto& p : wave_files)
    if (!fs::is_regular_file(p)) fail(ErrorKind::io, "config: survey file " + p.string() + " does not exist");
}

std::vector<fs::path> RunConfig::survey_paths() const {
  if (!wave_files.empty()) return wave_files;
  std::vector<fs::path> out;
  for (const auto& w : population.waves) out.push_back(out_dir / ("survey_" + std::to_string(w.year) + ".csv"));
  return out;
}

RunConfig load_config(const fs::path& path) {
  const std::string text = textio::read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::validation, "config " + path.string() + ": malformed JSON (" + e.what() + ")");
  }
  require(j.is_object(), "config " + path.string() + ": expected a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : j.items()) {
    const std::string what = "config " + path.string() + ": key '" + key + "'";
    try {
      if (key == "out_dir") cfg.out_dir = value.get<std::string>();
      else if (key == "waves") {
        cfg.wave_files.clear();
        for (const auto& p : value) cfg.wave_files.emplace_back(p.get<std::string>());
      } else if (key == "som") cfg.som = serialization::som_config_from_json(value.dump(), cfg.som);
      else if (key == "ages") cfg.ages = serialization::age_config_from_json(value.dump(), cfg.ages);
      else if (key == "features") cfg.features = serialization::feature_config_from_json(value.dump(), cfg.features);
      else if (key == "min_cell_size") cfg.min_cell_size = value.get<Index>();
      else if (key == "alpha") cfg.alpha = value.get<double>();
      else if (key == "year_dummies") cfg.year_dummies = value.get<bool>();
      else if (key == "seed") set_seed(cfg, value.get<std::uint64_t>());
      else if (key == "population") cfg.population = serialization::population_from_json(value.dump(), cfg.population);
      else fail(ErrorKind::validation, "config " + path.string() + ": unknown key '" + key + "'");
    } catch (const json::exception&) {
      fail(ErrorKind::validation, what + " has the wrong type");
    }
  }
  // An explicit seed wins over the nested ones regardless of key order.
  if (j.contains("seed")) set_seed(cfg, j["seed"].get<std::uint64_t>());
  return cfg;
}

void set_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.population.rng_seed = seed;
  cfg.som.rng_seed = seed;
}

namespace {

std::vector<cohort::Wave> read_waves(const std::vector<fs::path>& paths) {
  require(!paths.empty(), "no survey files configured");
  std::vector<cohort::Wave> waves;
  for (const auto& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open survey file " + p.string());
    waves.push_back(cohort::read_survey_csv(in, p.string()));
    require(!waves.back().empty(), p.string() + ": no records");
  }
  std::sort(waves.begin(), waves.end(), [](const auto& a, const auto& b) { return a.front().wave_year < b.front().wave_year; });
  for (std::size_t t = 1; t < waves.size(); ++t)
    require(waves[t].front().wave_year != waves[t - 1].front().wave_year,
            "two survey files hold wave " + std::to_string(waves[t].front().wave_year));
  return waves;
}

serialization::StoredMap read_map(const RunConfig& cfg) {
  const auto path = cfg.out_dir / kMapFile;
  if (!fs::exists(path)) fail(ErrorKind::io, "map not found: " + path.string() + " (run fit-som first)");
  return serialization::map_from_json(textio::read_file(path));
}

std::vector<Index> node_groups(const cohort::Membership& m) {
  std::vector<Index> out;
  for (const auto& wave : m.node_of) out.insert(out.end(), wave.begin(), wave.end());
  return out;
}

bool has_categories(std::span<const cohort::Wave> waves) {
  for (const auto& w : waves)
    for (const auto& r : w)
      if (!r.category) return false;
  return true;
}

std::string format_single(const diagnostics::GroupingReport& rep) {
  std::ostringstream out;
  out << "Share of within variance relative to total variance (%), SOM cohorts\n";
  for (std::size_t j = 0; j < rep.variables.size(); ++j)
    out << std::left << std::setw(22) << kFunctionLabels[j] << std::right << std::setw(12)
        << textio::fixed(rep.within_share[j], 2) << '\n';
  out << std::left << std::setw(22) << "Wilks Lambda" << std::right << std::setw(12) << rep.wilks.lambda << '\n';
  out << std::left << std::setw(22) << "F" << std::right << std::setw(12) << textio::fixed(rep.wilks.f.f, 2) << '\n';
  out << "groups: " << rep.group_count << "\nLambda computed without " << rep.dropped_variable << '\n';
  return out.str();
}

std::string panel_csv(const cohort::PanelDataset& panel) {
  std::ostringstream out;
  cohort::write_panel_csv(out, panel);
  return out.str();
}

}  // namespace

som::SomMap fit_map(std::span<const cohort::Wave> waves, const som::SomConfig& som, const cohort::FeatureConfig& features,
                    const cohort::AgeClassConfig& ages) {
  std::vector<cohort::HouseholdRecord> all;
  for (const auto& w : waves) all.insert(all.end(), w.begin(), w.end());
  require(!all.empty(), "fit_map: no records");
  const auto fset = cohort::build_features(all, features, ages);
  const auto z = som::standardize(fset.values, fset.dummy, fset.names);
  auto map = som::train(z.values, som);
  map.scaler = z.scaler;
  map.feature_names = fset.names;
  return map;
}

std::vector<Index> age_category_groups(std::span<const cohort::Wave> waves, const cohort::AgeClassConfig& ages) {
  int categories = 0;
  for (const auto& w : waves)
    for (const auto& r : w) {
      require(r.category.has_value(), "baseline grouping: record " + r.id + " has no category");
      require(*r.category >= 0, "baseline grouping: record " + r.id + " has a negative category");
      categories = std::max(categories, *r.category + 1);
    }
  std::vector<Index> out;
  for (const auto& w : waves)
    for (const auto& r : w) out.push_back(static_cast<Index>(cohort::age_class(r.age, r.wave_year, ages)) * categories + *r.category);
  return out;
}

Eigen::MatrixXd stacked_shares(std::span<const cohort::Wave> waves) {
  Index n = 0;
  for (const auto& w : waves) n += static_cast<Index>(w.size());
  Eigen::MatrixXd out(n, static_cast<Index>(kFunctions));
  Index i = 0;
  for (const auto& w : waves)
    for (const auto& r : w) {
      for (std::size_t j = 0; j < kFunctions; ++j) out(i, static_cast<Index>(j)) = r.shares[j];
      ++i;
    }
  return out;
}

Analysis analyze(std::span<const cohort::Wave> waves, const RunConfig& cfg) {
  cfg.validate();
  Analysis a;
  a.map = fit_map(waves, cfg.som, cfg.features, cfg.ages);
  a.membership = cohort::assign_waves(a.map, waves, cfg.features, cfg.ages);
  a.panel = cohort::build_panel(a.membership, waves, cfg.min_cell_size);
  a.estimates = econometrics::estimate_all(a.panel, {cfg.alpha, cfg.year_dummies});
  return a;
}

std::vector<fs::path> cmd_simulate(const RunConfig& cfg) {
  cfg.validate();
  const auto pop = datagen::generate(cfg.population);
  std::vector<fs::path> written;
  const auto paths = cfg.survey_paths();
  require(paths.size() == pop.waves.size(), "simulate: configured survey paths do not match the population waves");
  for (std::size_t t = 0; t < pop.waves.size(); ++t) {
    std::ostringstream out;
    cohort::write_survey_csv(out, pop.waves[t]);
    textio::atomic_write(paths[t], out.str());
    written.push_back(paths[t]);
  }
  const auto truth = cfg.out_dir / kTruthFile;
  textio::atomic_write(truth, serialization::truth_to_json(cfg.population, pop.truth));
  written.push_back(truth);
  return written;
}

void cmd_fit_som(const RunConfig& cfg) {
  cfg.validate();
  const auto waves = read_waves(cfg.survey_paths());
  serialization::StoredMap stored{fit_map(waves, cfg.som, cfg.features, cfg.ages), cfg.features, cfg.ages};
  const auto& map = stored.map;

  std::vector<cohort::HouseholdRecord> all;
  for (const auto& w : waves) all.insert(all.end(), w.begin(), w.end());
  const auto scaled = map.scaler.apply(cohort::build_features(all, cfg.features, cfg.ages).values);
  const auto cov = som::regularize_covariance(som::pooled_covariance(scaled));
  const auto dist = som::mahalanobis_matrix(map, cov.covariance);
  const auto svg = som::distance_svg(map, som::neighbor_distances(map, dist));

  const auto membership = cohort::assign_waves(map, waves, cfg.features, cfg.ages);
  const auto sizes = cohort::size_report(membership, cfg.min_cell_size);
  std::ostringstream csv;
  cohort::write_size_report_csv(csv, sizes);

  textio::atomic_write(cfg.out_dir / kMapFile, serialization::map_to_json(stored));
  textio::atomic_write(cfg.out_dir / kSvgFile, svg);
  textio::atomic_write(cfg.out_dir / kSizeText, cohort::format_size_report(sizes));
  textio::atomic_write(cfg.out_dir / kSizeCsv, csv.str());
}

void cmd_build_panel(const RunConfig& cfg) {
  cfg.validate();
  const auto waves = read_waves(cfg.survey_paths());
  const auto stored = read_map(cfg);
  const auto membership = cohort::assign_waves(stored.map, waves, stored.features, stored.ages);
  const auto panel = cohort::build_panel(membership, waves, cfg.min_cell_size);

  const auto shares = stacked_shares(waves);
  std::vector<std::string> names;
  for (const auto code : kFunctionCodes) names.emplace_back(code);
  const auto som_groups = node_groups(membership);
  const Index drop = static_cast<Index>(kFunctions) - 1;
  std::string text, csv;
  if (has_categories(waves)) {
    const auto baseline = age_category_groups(waves, stored.ages);
    const auto cmp = diagnostics::compare_groupings(shares, names, som_groups, baseline, drop);
    std::vector<std::string> labels(kFunctionLabels.begin(), kFunctionLabels.end());
    text = diagnostics::format_comparison(cmp, labels, "SOM", "age_x_cat");
    csv = diagnostics::comparison_csv(cmp, "SOM", "age_x_cat");
  } else {
    const auto rep = diagnostics::grouping_report(shares, names, som_groups, drop);
    text = format_single(rep);
    std::ostringstream out;
    out << "variable,share_SOM\n";
    for (std::size_t j = 0; j < names.size(); ++j) out << names[j] << ',' << textio::format_double(rep.within_share[j]) << '\n';
    out << "wilks_lambda," << textio::format_double(rep.wilks.lambda) << "\nrao_f," << textio::format_double(rep.wilks.f.f)
        << '\n';
    csv = out.str();
  }
  std::ostringstream summary;
  summary << "\nPanel: " << panel.n_units() << " cohorts x " << panel.n_periods() << " waves retained, "
          << panel.dropped.size() << " dropped\n";
  for (const auto& d : panel.dropped) summary << "  C" << (d.cohort + 1) << ": " << d.reason << '\n';

  textio::atomic_write(cfg.out_dir / kPanelFile, panel_csv(panel));
  textio::atomic_write(cfg.out_dir / kDiagText, text + summary.str());
  textio::atomic_write(cfg.out_dir / kDiagCsv, csv);
}

void cmd_estimate(const RunConfig& cfg) {
  cfg.validate();
  const auto path = cfg.out_dir / kPanelFile;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "panel not found: " + path.string() + " (run build-panel first)");
  const auto panel = cohort::read_panel_csv(in);
  const auto rows = econometrics::estimate_all(panel, {cfg.alpha, cfg.year_dummies});

  std::string text = econometrics::elasticity_table_text(rows);
  std::size_t aids = 0, fe = 0;
  for (const auto& r : rows) {
    aids += r.choice.chosen.form == econometrics::Form::aids;
    fe += r.choice.chosen.effects == econometrics::Effects::fixed;
  }
  text += "\n" + std::to_string(aids) + " of " + std::to_string(rows.size()) + " functions use AIDS; Hausman rejects " +
          "the error-component form for " + std::to_string(fe) + "\n";
  for (const auto& r : rows)
    for (const auto& w : r.choice.chosen_fit().warnings) text += std::string(kFunctionCodes[r.function]) + ": " + w + "\n";

  textio::atomic_write(cfg.out_dir / kElastText, text);
  textio::atomic_write(cfg.out_dir / kElastCsv, econometrics::elasticity_table_csv(rows));
  textio::atomic_write(cfg.out_dir / kFitsCsv, econometrics::fit_details_csv(rows));
}

void run_all(const RunConfig& cfg) {
  if (cfg.wave_files.empty()) cmd_simulate(cfg);
  cmd_fit_som(cfg);
  cmd_build_panel(cfg);
  cmd_estimate(cfg);
}

}  // namespace pseudopanel::pipeline
