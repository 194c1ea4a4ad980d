#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pseudopanel/cohort.hpp"
#include "pseudopanel/datagen.hpp"
#include "pseudopanel/diagnostics.hpp"
#include "pseudopanel/econometrics.hpp"
#include "pseudopanel/som.hpp"

namespace pseudopanel::pipeline {

namespace fs = std::filesystem;

struct RunConfig {
  fs::path out_dir = "out";
  std::vector<fs::path> wave_files;  // empty: the simulated surveys in out_dir
  som::SomConfig som;
  cohort::AgeClassConfig ages;
  cohort::FeatureConfig features;
  Eigen::Index min_cell_size = 100;
  double alpha = 0.05;
  bool year_dummies = true;
  datagen::PopulationConfig population = datagen::default_population();

  void validate() const;
  std::vector<fs::path> survey_paths() const;
};

// JSON file whose keys override the defaults: out_dir, waves, som, ages, features,
// min_cell_size, alpha, year_dummies, seed, population.
RunConfig load_config(const fs::path& path);
// One master seed drives both the population draw and the map training.
void set_seed(RunConfig& cfg, std::uint64_t seed);

// Output file names inside out_dir.
inline constexpr const char* kMapFile = "som_map.json";
inline constexpr const char* kSvgFile = "som_distances.svg";
inline constexpr const char* kSizeText = "cohort_sizes.txt";
inline constexpr const char* kSizeCsv = "cohort_sizes.csv";
inline constexpr const char* kPanelFile = "panel.csv";
inline constexpr const char* kDiagText = "diagnostics.txt";
inline constexpr const char* kDiagCsv = "diagnostics.csv";
inline constexpr const char* kElastText = "elasticities.txt";
inline constexpr const char* kElastCsv = "elasticities.csv";
inline constexpr const char* kFitsCsv = "fits.csv";
inline constexpr const char* kTruthFile = "truth.json";

// In-memory stages ---------------------------------------------------------

som::SomMap fit_map(std::span<const cohort::Wave> waves, const som::SomConfig& som, const cohort::FeatureConfig& features,
                    const cohort::AgeClassConfig& ages);

// Age class x category, with age classes of the shifted boundaries. Throws when a record
// carries no category.
std::vector<Eigen::Index> age_category_groups(std::span<const cohort::Wave> waves, const cohort::AgeClassConfig& ages);

// Budget shares of every record, waves stacked.
Eigen::MatrixXd stacked_shares(std::span<const cohort::Wave> waves);

struct Analysis {
  som::SomMap map;
  cohort::Membership membership;
  cohort::PanelDataset panel;
  std::vector<econometrics::FunctionEstimate> estimates;
};

// fit_map, assignment, panel and estimation for every function.
Analysis analyze(std::span<const cohort::Wave> waves, const RunConfig& cfg);

// Commands -----------------------------------------------------------------

std::vector<fs::path> cmd_simulate(const RunConfig& cfg);
void cmd_fit_som(const RunConfig& cfg);
void cmd_build_panel(const RunConfig& cfg);
void cmd_estimate(const RunConfig& cfg);
void run_all(const RunConfig& cfg);

}  // namespace pseudopanel::pipeline
