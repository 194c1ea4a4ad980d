#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace pseudopanel {

inline constexpr std::size_t kFunctions = 18;

// Consumption functions in survey order. Codes are the CSV column suffixes (w_<code>).
inline constexpr std::array<std::string_view, kFunctions> kFunctionCodes = {
    "alcohol_tobacco", "food_home",     "food_away",          "housing_maint",    "communications",
    "others",          "transfers",     "education",          "clothing",         "housing",
    "leisure",         "furniture",     "health",             "security",         "personal_care",
    "personal_transport", "public_transport", "vehicles"};

inline constexpr std::array<std::string_view, kFunctions> kFunctionLabels = {
    "Alcohol-Tobacco", "Food at home",  "Food away from home", "Housing maint.", "Communication",
    "Others",          "Transfers",     "Education",           "Clothing",       "Housing",
    "Leisure",         "Furniture",     "Health",              "Security",       "Personal care",
    "Personal transport", "Public transport", "Vehicles"};

inline std::optional<std::size_t> function_index(std::string_view code) {
  for (std::size_t j = 0; j < kFunctions; ++j)
    if (kFunctionCodes[j] == code) return j;
  return std::nullopt;
}

using ShareVector = std::array<double, kFunctions>;

}  // namespace pseudopanel
