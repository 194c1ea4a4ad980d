#include "pseudopanel/serialization.hpp"

#include <nlohmann/json.hpp>
#include <set>

#include "pseudopanel/error.hpp"

namespace pseudopanel::serialization {

using nlohmann::json;

namespace {

json parse(std::string_view text, const std::string& what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(ErrorKind::validation, what + ": malformed JSON (" + e.what() + ")");
  }
}

void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& what) {
  require(j.is_object(), what + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    require(allowed.count(key) > 0, what + ": unknown key '" + key + "'");
}

template <class T>
void take(const json& j, const char* key, T& target, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::validation, what + ": key '" + key + "' has the wrong type");
  }
}

ShareVector share_vector(const json& j, const std::string& what, ShareVector base = {}) {
  if (j.is_array()) {
    require(j.size() == kFunctions, what + ": expected " + std::to_string(kFunctions) + " values");
    for (std::size_t k = 0; k < kFunctions; ++k) {
      require(j[k].is_number(), what + ": non-numeric entry");
      base[k] = j[k].get<double>();
    }
    return base;
  }
  require(j.is_object(), what + ": expected an array or an object keyed by function");
  for (const auto& [code, value] : j.items()) {
    const auto idx = function_index(code);
    require(idx.has_value(), what + ": unknown function '" + code + "'");
    require(value.is_number(), what + ": non-numeric entry for '" + code + "'");
    base[*idx] = value.get<double>();
  }
  return base;
}

json share_object(const ShareVector& v) {
  json o = json::object();
  for (std::size_t k = 0; k < kFunctions; ++k) o[std::string(kFunctionCodes[k])] = v[k];
  return o;
}

json coefficients_json(const datagen::Coefficients& b) {
  return {{"log_y", share_object(b.log_y)},         {"log_y_sq", share_object(b.log_y_sq)},
          {"log_age", share_object(b.log_age)},     {"log_age_sq", share_object(b.log_age_sq)},
          {"log_size", share_object(b.log_size)},   {"log_size_sq", share_object(b.log_size_sq)}};
}

}  // namespace

std::string map_to_json(const StoredMap& stored) {
  const auto& m = stored.map;
  json codes = json::array();
  for (Eigen::Index i = 0; i < m.codes.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.codes.cols(); ++k) row.push_back(m.codes(i, k));
    codes.push_back(std::move(row));
  }
  json features = json::array();
  for (std::size_t k = 0; k < m.feature_names.size(); ++k)
    features.push_back({{"name", m.feature_names[k]},
                        {"mean", m.scaler.mean[k]},
                        {"sd", m.scaler.sd[k]},
                        {"dummy", static_cast<bool>(m.scaler.dummy[k])}});
  json schedule = json::array();
  for (const auto& e : m.history) schedule.push_back({{"learning_rate", e.learning_rate}, {"radius", e.radius}});
  json shifts = json::object();
  for (const auto& [year, shift] : stored.ages.shifts) shifts[std::to_string(year)] = shift;

  const json doc = {
      {"format", kMapFormat},
      {"version", kMapVersion},
      {"config",
       {{"rows", m.config.rows},
        {"cols", m.config.cols},
        {"epochs", m.config.epochs},
        {"initial_radius", m.config.initial_radius},
        {"initial_learning_rate", m.config.initial_learning_rate},
        {"final_learning_rate", m.config.final_learning_rate},
        {"rng_seed", m.config.rng_seed}}},
      {"feature_builder",
       {{"age_dummies", stored.features.age_dummies},
        {"log_expenditure", stored.features.log_expenditure},
        {"log_size", stored.features.log_size},
        {"age_boundaries", stored.ages.base_boundaries},
        {"age_shifts", shifts}}},
      {"features", features},
      {"schedule", schedule},
      {"code_vectors", codes}};
  return doc.dump(1) + "\n";
}

StoredMap map_from_json(std::string_view text) {
  const json doc = parse(text, "map");
  require(doc.is_object() && doc.value("format", "") == kMapFormat, "map: not a pseudopanel.som document");
  require(doc.value("version", -1) == kMapVersion,
          "map: unsupported version " + (doc.contains("version") ? doc["version"].dump() : std::string("(missing)")));
  StoredMap s;
  try {
    const auto& c = doc.at("config");
    s.map.config.rows = c.at("rows").get<int>();
    s.map.config.cols = c.at("cols").get<int>();
    s.map.config.epochs = c.at("epochs").get<int>();
    s.map.config.initial_radius = c.at("initial_radius").get<double>();
    s.map.config.initial_learning_rate = c.at("initial_learning_rate").get<double>();
    s.map.config.final_learning_rate = c.at("final_learning_rate").get<double>();
    s.map.config.rng_seed = c.at("rng_seed").get<std::uint64_t>();

    const auto& fb = doc.at("feature_builder");
    s.features.age_dummies = fb.at("age_dummies").get<bool>();
    s.features.log_expenditure = fb.at("log_expenditure").get<bool>();
    s.features.log_size = fb.at("log_size").get<bool>();
    s.ages.base_boundaries = fb.at("age_boundaries").get<std::vector<double>>();
    s.ages.shifts.clear();
    for (const auto& [year, shift] : fb.at("age_shifts").items()) s.ages.shifts[std::stoi(year)] = shift.get<double>();

    for (const auto& f : doc.at("features")) {
      s.map.feature_names.push_back(f.at("name").get<std::string>());
      s.map.scaler.mean.push_back(f.at("mean").get<double>());
      s.map.scaler.sd.push_back(f.at("sd").get<double>());
      s.map.scaler.dummy.push_back(f.at("dummy").get<bool>());
    }
    for (const auto& e : doc.at("schedule"))
      s.map.history.push_back({e.at("learning_rate").get<double>(), e.at("radius").get<double>()});

    const auto& codes = doc.at("code_vectors");
    const auto d = static_cast<Eigen::Index>(s.map.feature_names.size());
    s.map.codes.resize(static_cast<Eigen::Index>(codes.size()), d);
    for (std::size_t i = 0; i < codes.size(); ++i) {
      require(codes[i].size() == static_cast<std::size_t>(d), "map: code vector length differs from the feature count");
      for (Eigen::Index k = 0; k < d; ++k) s.map.codes(static_cast<Eigen::Index>(i), k) = codes[i][static_cast<std::size_t>(k)].get<double>();
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::validation, std::string("map: missing or mistyped field (") + e.what() + ")");
  }
  s.map.config.validate();
  s.ages.validate();
  require(s.map.codes.rows() == s.map.config.node_count(), "map: code vector count differs from rows x cols");
  return s;
}

std::string truth_to_json(const datagen::PopulationConfig& cfg, const datagen::GroundTruth& truth) {
  json waves = json::array();
  for (const auto& w : cfg.waves) waves.push_back({{"year", w.year}, {"households", w.households}});
  json classes = json::array();
  for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
    const auto& k = cfg.classes[c];
    classes.push_back({{"class", c + 1},
                       {"weight", k.weight},
                       {"profile", share_object(k.profile)},
                       {"log_y_mean", k.log_y_mean},
                       {"log_y_sd", k.log_y_sd},
                       {"birth_year_min", k.birth_year_min},
                       {"birth_year_max", k.birth_year_max},
                       {"class_effect", share_object(truth.class_effects[c])}});
  }
  json year_effects = json::array();
  for (const auto& d : cfg.year_effects) year_effects.push_back(share_object(d));
  json labels = json::object();
  for (std::size_t t = 0; t < truth.wave_years.size(); ++t) {
    json l = json::array();
    for (const int c : truth.labels[t]) l.push_back(c + 1);
    labels[std::to_string(truth.wave_years[t])] = std::move(l);
  }
  const json doc = {{"format", "pseudopanel.truth"},
                    {"version", 1},
                    {"rng_seed", cfg.rng_seed},
                    {"waves", waves},
                    {"coefficients", coefficients_json(truth.coefficients)},
                    {"year_effects", year_effects},
                    {"sigma_mu", cfg.sigma_mu},
                    {"sigma_nu", cfg.sigma_nu},
                    {"moments", {{"w_mean", share_object(truth.moments.w_mean)}, {"log_y_mean", truth.moments.log_y_mean}}},
                    {"elasticity", share_object(truth.elasticity)},
                    {"clamped_households", truth.clamped},
                    {"classes", classes},
                    {"labels", labels}};
  return doc.dump(1) + "\n";
}

datagen::PopulationConfig population_from_json(std::string_view text, datagen::PopulationConfig cfg) {
  const std::string what = "population";
  const json j = parse(text, what);
  only_keys(j, {"seed", "waves", "sigma_mu", "sigma_nu", "categories", "category_fidelity", "classes", "coefficients", "year_effects"}, what);
  take(j, "seed", cfg.rng_seed, what);
  take(j, "sigma_mu", cfg.sigma_mu, what);
  take(j, "sigma_nu", cfg.sigma_nu, what);
  take(j, "categories", cfg.categories, what);
  take(j, "category_fidelity", cfg.category_fidelity, what);

  if (j.contains("waves")) {
    const auto& w = j["waves"];
    require(w.is_array() && !w.empty(), what + ": waves must be a non-empty array");
    cfg.waves.clear();
    for (const auto& e : w) {
      only_keys(e, {"year", "households"}, what + ".waves");
      datagen::WaveSpec s;
      take(e, "year", s.year, what + ".waves");
      take(e, "households", s.households, what + ".waves");
      cfg.waves.push_back(s);
    }
    for (auto& k : cfg.classes) {
      const double last = k.log_y_mean.empty() ? 10.0 : k.log_y_mean.back();
      k.log_y_mean.resize(cfg.waves.size(), last);
    }
    cfg.year_effects.resize(cfg.waves.size(), ShareVector{});
  }

  if (j.contains("classes")) {
    require(j["classes"].is_array(), what + ": classes must be an array of overrides");
    for (const auto& e : j["classes"]) {
      only_keys(e, {"class", "weight", "profile", "log_y_mean", "log_y_sd", "birth_year_min", "birth_year_max",
                    "size_log_mean", "size_log_sd", "category"},
                what + ".classes");
      require(e.contains("class") && e["class"].is_number_integer(), what + ": class override needs an integer 'class'");
      const auto id = e["class"].get<long long>();
      require(id >= 1 && id <= static_cast<long long>(cfg.classes.size()),
              what + ": class " + std::to_string(id) + " does not exist");
      auto& k = cfg.classes[static_cast<std::size_t>(id - 1)];
      const std::string where = what + ": class " + std::to_string(id);
      take(e, "weight", k.weight, where);
      if (e.contains("profile")) k.profile = share_vector(e["profile"], where + " profile", k.profile);
      take(e, "log_y_mean", k.log_y_mean, where);
      take(e, "log_y_sd", k.log_y_sd, where);
      take(e, "birth_year_min", k.birth_year_min, where);
      take(e, "birth_year_max", k.birth_year_max, where);
      take(e, "size_log_mean", k.size_log_mean, where);
      take(e, "size_log_sd", k.size_log_sd, where);
      take(e, "category", k.category, where);
    }
  }

  if (j.contains("coefficients")) {
    const auto& c = j["coefficients"];
    only_keys(c, {"log_y", "log_y_sq", "log_age", "log_age_sq", "log_size", "log_size_sq"}, what + ".coefficients");
    auto& b = cfg.coefficients;
    const std::pair<const char*, ShareVector*> rows[] = {{"log_y", &b.log_y},       {"log_y_sq", &b.log_y_sq},
                                                          {"log_age", &b.log_age},   {"log_age_sq", &b.log_age_sq},
                                                          {"log_size", &b.log_size}, {"log_size_sq", &b.log_size_sq}};
    for (const auto& [key, row] : rows)
      if (c.contains(key)) *row = share_vector(c[key], what + ".coefficients." + key, *row);
  }
  if (j.contains("year_effects")) {
    const auto& y = j["year_effects"];
    require(y.is_array() && y.size() == cfg.waves.size(), what + ": one year-effect vector per wave is required");
    for (std::size_t t = 0; t < y.size(); ++t) cfg.year_effects[t] = share_vector(y[t], what + ".year_effects");
  }
  return cfg;
}

som::SomConfig som_config_from_json(std::string_view text, som::SomConfig cfg) {
  const std::string what = "som";
  const json j = parse(text, what);
  only_keys(j, {"rows", "cols", "epochs", "initial_radius", "initial_learning_rate", "final_learning_rate", "seed"}, what);
  take(j, "rows", cfg.rows, what);
  take(j, "cols", cfg.cols, what);
  take(j, "epochs", cfg.epochs, what);
  take(j, "initial_radius", cfg.initial_radius, what);
  take(j, "initial_learning_rate", cfg.initial_learning_rate, what);
  take(j, "final_learning_rate", cfg.final_learning_rate, what);
  take(j, "seed", cfg.rng_seed, what);
  return cfg;
}

cohort::AgeClassConfig age_config_from_json(std::string_view text, cohort::AgeClassConfig cfg) {
  const std::string what = "ages";
  const json j = parse(text, what);
  only_keys(j, {"boundaries", "shifts"}, what);
  take(j, "boundaries", cfg.base_boundaries, what);
  if (j.contains("shifts")) {
    require(j["shifts"].is_object(), what + ": shifts must map wave years to offsets");
    cfg.shifts.clear();
    for (const auto& [year, shift] : j["shifts"].items()) {
      require(shift.is_number(), what + ": shift for " + year + " is not a number");
      int y = 0;
      try {
        y = std::stoi(year);
      } catch (const std::exception&) {
        fail(ErrorKind::validation, what + ": '" + year + "' is not a wave year");
      }
      cfg.shifts[y] = shift.get<double>();
    }
  }
  return cfg;
}

cohort::FeatureConfig feature_config_from_json(std::string_view text, cohort::FeatureConfig cfg) {
  const std::string what = "features";
  const json j = parse(text, what);
  only_keys(j, {"age_dummies", "log_expenditure", "log_size"}, what);
  take(j, "age_dummies", cfg.age_dummies, what);
  take(j, "log_expenditure", cfg.log_expenditure, what);
  take(j, "log_size", cfg.log_size, what);
  return cfg;
}

}  // namespace pseudopanel::serialization
