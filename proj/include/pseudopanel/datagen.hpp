#pragma once

// Synthetic repeated cross-sections with planted behavioural classes.
//
// Household h of class c observed in wave t:
//   w_h = softmax(log p_c + sigma_nu * eps_h) + B'(x_h - xref_c) + d_t + mu_c
// where x = (log y, log y^2, log age, log age^2, log size, log size^2), B holds the true
// share-equation coefficients (each row sums to zero across functions, so shares still sum
// to one), xref_c is a class reference point and mu_c is a zero-sum class effect. The rare
// household pushed outside the simplex is clamped and renormalized; the count is reported.

#include <cstdint>
#include <string>
#include <vector>

#include "pseudopanel/cohort.hpp"
#include "pseudopanel/functions.hpp"

namespace pseudopanel::datagen {

// Calibration targets: mean budget shares, expenditure, age and household size.
inline constexpr ShareVector kTargetShares = {0.041, 0.151, 0.040, 0.048, 0.020, 0.055, 0.041, 0.014, 0.070,
                                              0.178, 0.063, 0.041, 0.023, 0.048, 0.025, 0.074, 0.015, 0.049};
inline constexpr double kTargetExpenditure = 28291.789;
inline constexpr double kTargetAge = 47.724;
inline constexpr double kTargetSize = 2.135;
// Reference elasticities used to plant the expenditure slopes.
inline constexpr ShareVector kReferenceElasticities = {0.730, 0.474, 1.275, 0.636, 0.846, 0.974,
                                                       1.316, 1.258, 0.963, 0.905, 1.258, 1.005,
                                                       1.045, 1.322, 0.848, 0.908, 1.091, 1.898};

struct WaveSpec {
  int year = 0;
  std::size_t households = 0;
};

struct ClassSpec {
  double weight = 1.0;              // relative frequency, normalized over classes
  ShareVector profile{};            // mean budget shares
  std::vector<double> log_y_mean;   // one per wave
  double log_y_sd = 0.25;
  int birth_year_min = 1940;        // uniform integer birth year
  int birth_year_max = 1950;
  double size_log_mean = 0.7;       // Oxford scale, lognormal clamped at 1
  double size_log_sd = 0.35;
  int category = 0;                 // preferred value of the coarse categorical
};

struct Coefficients {
  ShareVector log_y{};
  ShareVector log_y_sq{};
  ShareVector log_age{};
  ShareVector log_age_sq{};
  ShareVector log_size{};
  ShareVector log_size_sq{};
};

struct PopulationConfig {
  std::vector<WaveSpec> waves;
  std::vector<ClassSpec> classes;
  Coefficients coefficients;
  std::vector<ShareVector> year_effects;  // one per wave
  double sigma_mu = 0.0;                  // sd of the class effect relative to the mean share
  double sigma_nu = 0.0;                  // logistic-normal household noise
  int categories = 16;
  double category_fidelity = 0.35;        // P(category = the class's preferred value)
  std::uint64_t rng_seed = 1982;

  std::size_t n_classes() const { return classes.size(); }
  // Throws ErrorKind::validation; profile problems name the class.
  void validate() const;
};

// 64 classes on an 8x8 latent lattice; each 4x4 quadrant is one age band of the default
// age classes. Wave sizes 10936, 9915 and 9475 for 1982, 1986 and 1992.
PopulationConfig default_population(std::uint64_t rng_seed = 1982);

struct PopulationMoments {
  ShareVector w_mean{};     // class-weighted mean profile
  double log_y_mean = 0.0;  // class- and wave-averaged log expenditure
};

struct GroundTruth {
  Coefficients coefficients;
  PopulationMoments moments;
  ShareVector elasticity{};                // at the population moments
  std::vector<ShareVector> class_effects;  // mu_c
  std::vector<int> wave_years;
  std::vector<std::vector<int>> labels;    // class of every household, wave by wave
  std::size_t clamped = 0;                 // households renormalized after clamping
};

struct Population {
  std::vector<cohort::Wave> waves;
  GroundTruth truth;
};

PopulationMoments population_moments(const PopulationConfig& cfg);
ShareVector true_elasticities(const Coefficients& b, const ShareVector& w_mean, double log_y_mean);

Population generate(const PopulationConfig& cfg);
GroundTruth ground_truth(const PopulationConfig& cfg);

}  // namespace pseudopanel::datagen
