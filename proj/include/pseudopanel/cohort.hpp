#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pseudopanel/functions.hpp"
#include "pseudopanel/som.hpp"

namespace pseudopanel::cohort {

using Eigen::Index;
using Eigen::MatrixXd;

inline constexpr double kShareSumTolerance = 0.02;

struct HouseholdRecord {
  std::string id;
  int wave_year = 0;
  ShareVector shares{};
  double total_expenditure = 0.0;
  double age = 0.0;
  double size_oxford = 0.0;
  std::optional<int> category;  // coarse categorical used only for baseline groupings
};

// Throws ErrorKind::validation naming the record and the violated constraint.
void validate_record(const HouseholdRecord& r);

using Wave = std::vector<HouseholdRecord>;

struct AgeClassConfig {
  std::vector<double> base_boundaries{35.0, 50.0, 65.0};
  // Years added to every boundary in a given wave; birth cohorts keep their class.
  std::map<int, double> shifts{{1982, 0.0}, {1986, 4.0}, {1992, 10.0}};

  void validate() const;
  int class_count() const { return static_cast<int>(base_boundaries.size()) + 1; }
  std::vector<double> boundaries(int wave_year) const;
};

// Class index over left-closed, right-open intervals of the shifted boundaries.
int age_class(double age, int wave_year, const AgeClassConfig& cfg);
std::vector<double> age_class_dummies(double age, int wave_year, const AgeClassConfig& cfg);

struct FeatureConfig {
  bool age_dummies = true;
  bool log_expenditure = false;
  bool log_size = false;
};

struct FeatureSet {
  MatrixXd values;  // records x features, unscaled
  std::vector<std::string> names;
  std::vector<bool> dummy;
};

FeatureSet build_features(std::span<const HouseholdRecord> records, const FeatureConfig& features,
                          const AgeClassConfig& ages);

// Node of every record, wave by wave.
struct Membership {
  Index node_count = 0;
  std::vector<int> wave_years;
  std::vector<std::vector<Index>> node_of;

  std::vector<std::vector<Index>> counts() const;  // node x wave
};

// Standardizes each wave with the map's stored scaler and assigns records to their BMU.
Membership assign_waves(const som::SomMap& map, std::span<const Wave> waves, const FeatureConfig& features,
                        const AgeClassConfig& ages);

struct CohortObservation {
  Index cohort = 0;
  int wave_year = 0;
  Index n_members = 0;
  std::vector<double> g_weights;  // empty when read back from a panel file
  ShareVector w{};
  double log_y = 0.0;
  double log_y_sq = 0.0;
  double log_age = 0.0;
  double log_age_sq = 0.0;
  double log_size = 0.0;
  double log_size_sq = 0.0;
  double sum_g = 0.0;
  double hetero_factor = 1.0;  // 1 / sqrt(sum g^2)
};

// Expenditure-weighted means g = y / sum(y) of every model variable.
CohortObservation aggregate(std::span<const HouseholdRecord> members, Index cohort = 0, int wave_year = 0);

// Regression variables of one cell, every one pre-multiplied by the heteroscedasticity factor.
struct TransformedObservation {
  Index cohort = 0;
  int wave_year = 0;
  double factor = 1.0;
  ShareVector w{};
  double constant = 1.0;
  double log_y = 0.0;
  double log_y_sq = 0.0;
  double log_age = 0.0;
  double log_age_sq = 0.0;
  double log_size = 0.0;
  double log_size_sq = 0.0;
};

TransformedObservation transform(const CohortObservation& obs);

struct DroppedCohort {
  Index cohort = 0;
  std::string reason;
  std::vector<Index> counts;  // per wave
};

struct SizeReport {
  std::vector<int> wave_years;
  std::vector<std::vector<Index>> counts;  // node x wave
  Index min_cell_size = 0;
  std::vector<Index> flagged;  // nodes whose smallest cell is below min_cell_size
};

struct PanelDataset {
  std::vector<Index> cohorts;
  std::vector<int> periods;
  std::vector<CohortObservation> cells;  // cohort-major: cells[i * T + t]
  std::vector<DroppedCohort> dropped;
  SizeReport sizes;

  Index n_units() const { return static_cast<Index>(cohorts.size()); }
  Index n_periods() const { return static_cast<Index>(periods.size()); }
  const CohortObservation& cell(Index unit, Index period) const {
    return cells[static_cast<std::size_t>(unit * n_periods() + period)];
  }
};

SizeReport size_report(const Membership& membership, Index min_cell_size);

// Aggregates every (node, wave) cell and keeps the nodes whose cells all hold at least
// min_cell_size members. Throws ErrorKind::degenerate when nothing survives.
PanelDataset build_panel(const Membership& membership, std::span<const Wave> waves, Index min_cell_size);

// CSV I/O ------------------------------------------------------------------

std::vector<std::string> survey_header();
void write_survey_csv(std::ostream& out, std::span<const HouseholdRecord> records);
Wave read_survey_csv(std::istream& in, const std::string& source = "survey");

void write_panel_csv(std::ostream& out, const PanelDataset& panel);
PanelDataset read_panel_csv(std::istream& in);

std::string format_size_report(const SizeReport& report);
void write_size_report_csv(std::ostream& out, const SizeReport& report);

}  // namespace pseudopanel::cohort
