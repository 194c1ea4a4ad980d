#pragma once

// JSON documents: fitted maps, ground truth and configuration overrides.

#include <string>
#include <string_view>

#include "pseudopanel/cohort.hpp"
#include "pseudopanel/datagen.hpp"
#include "pseudopanel/som.hpp"

namespace pseudopanel::serialization {

inline constexpr std::string_view kMapFormat = "pseudopanel.som";
inline constexpr int kMapVersion = 1;

struct StoredMap {
  som::SomMap map;
  cohort::FeatureConfig features;
  cohort::AgeClassConfig ages;
};

std::string map_to_json(const StoredMap& stored);
// Throws ErrorKind::validation on a wrong format tag, unknown version or inconsistent shapes.
StoredMap map_from_json(std::string_view text);

std::string truth_to_json(const datagen::PopulationConfig& cfg, const datagen::GroundTruth& truth);

// Applies the keys of a JSON object on top of `base`; unknown keys are rejected.
datagen::PopulationConfig population_from_json(std::string_view text, datagen::PopulationConfig base);
som::SomConfig som_config_from_json(std::string_view text, som::SomConfig base);
cohort::AgeClassConfig age_config_from_json(std::string_view text, cohort::AgeClassConfig base);
cohort::FeatureConfig feature_config_from_json(std::string_view text, cohort::FeatureConfig base);

}  // namespace pseudopanel::serialization
