#include "pseudopanel/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pseudopanel/error.hpp"

namespace pseudopanel::datagen {

namespace {

constexpr std::uint64_t kStructureSeed = 0x5eed1986;
constexpr int kLattice = 8;
constexpr double kSpread = 0.7;     // share movement across the lattice, relative to target
constexpr double kIdio = 0.02;      // class-specific share noise, relative to target
constexpr double kWeightSd = 0.3;   // log class weights
constexpr double kLevelSd = 0.35;   // class log expenditure levels
constexpr double kLogYSd = 0.06;    // household log expenditure around its class
constexpr double kSizeSd = 0.15;

std::string class_name(std::size_t c) { return "class " + std::to_string(c + 1); }

double sum(const ShareVector& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Removes the total in proportion to the weights so the vector sums to zero.
void zero_sum(ShareVector& v, const ShareVector& weights) {
  const double total = sum(v), wsum = sum(weights);
  for (std::size_t j = 0; j < kFunctions; ++j) v[j] -= weights[j] * total / wsum;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), index};
  return std::mt19937_64(seq);
}

std::array<double, 6> regressors(double log_y, double age, double size) {
  const double la = std::log(age), ls = std::log(size);
  return {log_y, log_y * log_y, la, la * la, ls, ls * ls};
}

std::array<const ShareVector*, 6> rows(const Coefficients& b) {
  return {&b.log_y, &b.log_y_sq, &b.log_age, &b.log_age_sq, &b.log_size, &b.log_size_sq};
}

}  // namespace

void PopulationConfig::validate() const {
  require(!waves.empty(), "population: at least one wave is required");
  for (std::size_t t = 0; t < waves.size(); ++t) {
    require(waves[t].households > 0, "population: wave " + std::to_string(waves[t].year) + " has no households");
    if (t > 0) require(waves[t].year > waves[t - 1].year, "population: wave years must increase");
  }
  require(!classes.empty(), "population: at least one class is required");
  require(categories >= 1, "population: categories must be >= 1");
  require(category_fidelity >= 0.0 && category_fidelity <= 1.0, "population: category_fidelity must lie in [0, 1]");
  require(sigma_mu >= 0.0 && sigma_nu >= 0.0, "population: sigma_mu and sigma_nu must be >= 0");

  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& k = classes[c];
    const auto name = class_name(c);
    require(std::isfinite(k.weight) && k.weight > 0.0, name + ": weight must be > 0");
    for (std::size_t j = 0; j < kFunctions; ++j)
      require(std::isfinite(k.profile[j]) && k.profile[j] >= 0.0,
              name + ": share profile entry " + std::string(kFunctionCodes[j]) + " is negative or not finite");
    require(std::abs(sum(k.profile) - 1.0) <= 1e-9,
            name + ": share profile sums to " + std::to_string(sum(k.profile)) + " instead of 1");
    require(k.log_y_mean.size() == waves.size(), name + ": one log expenditure mean per wave is required");
    for (const double m : k.log_y_mean) require(std::isfinite(m), name + ": log expenditure mean is not finite");
    require(std::isfinite(k.log_y_sd) && k.log_y_sd >= 0.0, name + ": log expenditure sd must be >= 0");
    require(k.birth_year_min <= k.birth_year_max, name + ": empty birth-year range");
    require(k.birth_year_max < waves.front().year, name + ": households must be born before the first wave");
    require(std::isfinite(k.size_log_mean) && k.size_log_sd >= 0.0, name + ": invalid size distribution");
    require(k.category >= 0 && k.category < categories, name + ": preferred category out of range");
  }

  require(year_effects.size() == waves.size(), "population: one year-effect vector per wave is required");
  for (const auto& d : year_effects) require(std::abs(sum(d)) <= 1e-9, "population: year effects must sum to zero");
  const char* names[] = {"log_y", "log_y_sq", "log_age", "log_age_sq", "log_size", "log_size_sq"};
  const auto b = rows(coefficients);
  for (std::size_t k = 0; k < b.size(); ++k)
    require(std::abs(sum(*b[k])) <= 1e-9,
            std::string("population: ") + names[k] + " coefficients must sum to zero across functions");
}

PopulationConfig default_population(std::uint64_t rng_seed) {
  PopulationConfig cfg;
  cfg.rng_seed = rng_seed;
  cfg.waves = {{1982, 10936}, {1986, 9915}, {1992, 9475}};
  cfg.sigma_mu = 0.05;
  cfg.sigma_nu = 0.02;

  ShareVector target = kTargetShares;
  const double tsum = sum(target);
  for (auto& v : target) v /= tsum;

  std::mt19937_64 rng(kStructureSeed);
  std::normal_distribution<double> normal;
  // Lattice direction of every function, with |a_u| + |a_v| = 1 so each share moves by up to
  // kSpread of its target across the lattice.
  ShareVector load_u{}, load_v{};
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::acos(-1.0));
  for (std::size_t j = 0; j < kFunctions; ++j) {
    const double th = angle(rng);
    const double reach = std::abs(std::cos(th)) + std::abs(std::sin(th));
    load_u[j] = std::cos(th) / reach;
    load_v[j] = std::sin(th) / reach;
  }

  const double ly_ref = std::log(kTargetExpenditure);
  const double ly_base = ly_ref - 0.5 * (kLevelSd * kLevelSd + kLogYSd * kLogYSd);
  const std::array<double, 3> growth = {0.0, 0.04, 0.08};
  // Ages in the first wave, one band per lattice quadrant, clear of the class boundaries.
  const std::array<std::pair<int, int>, 4> band_ages = {{{22, 32}, {37, 47}, {52, 62}, {67, 76}}};

  for (int r = 0; r < kLattice; ++r)
    for (int c = 0; c < kLattice; ++c) {
      ClassSpec k;
      k.weight = std::exp(kWeightSd * normal(rng));
      const double u = (c - 3.5) / 3.5, v = (r - 3.5) / 3.5;
      for (std::size_t j = 0; j < kFunctions; ++j)
        k.profile[j] = target[j] * (1.0 + kSpread * (load_u[j] * u + load_v[j] * v) + kIdio * normal(rng));
      const double psum = sum(k.profile);
      for (auto& p : k.profile) p /= psum;

      const double level = ly_base + kLevelSd * normal(rng);
      for (std::size_t t = 0; t < cfg.waves.size(); ++t)
        k.log_y_mean.push_back(level + growth[std::min<std::size_t>(t, 2)] + 0.1 * normal(rng));
      k.log_y_sd = kLogYSd;

      const auto band = band_ages[static_cast<std::size_t>((r / 4) * 2 + c / 4)];
      k.birth_year_min = cfg.waves.front().year - band.second;
      k.birth_year_max = cfg.waves.front().year - band.first;
      k.size_log_mean = std::log(kTargetSize) - 0.2 + 0.2 * normal(rng);
      k.size_log_sd = kSizeSd;
      k.category = (r % 4) * 4 + c % 4;
      cfg.classes.push_back(std::move(k));
    }

  auto& b = cfg.coefficients;
  ShareVector slope{};
  for (std::size_t j = 0; j < kFunctions; ++j) slope[j] = (kReferenceElasticities[j] - 1.0) * target[j];
  zero_sum(slope, target);
  const auto at = [](const char* code) { return *function_index(code); };
  b.log_y_sq[at("food_home")] = -0.02;
  b.log_y_sq[at("housing")] = -0.02;
  b.log_y_sq[at("clothing")] = -0.01;
  b.log_y_sq[at("leisure")] = 0.02;
  b.log_y_sq[at("vehicles")] = 0.02;
  b.log_y_sq[at("security")] = 0.01;
  for (std::size_t j = 0; j < kFunctions; ++j) b.log_y[j] = slope[j] - 2.0 * b.log_y_sq[j] * ly_ref;
  b.log_age[at("food_home")] = 0.02;
  b.log_age[at("health")] = 0.015;
  b.log_age[at("alcohol_tobacco")] = -0.01;
  b.log_age[at("food_away")] = -0.015;
  b.log_age[at("leisure")] = -0.01;
  b.log_size[at("food_home")] = 0.03;
  b.log_size[at("clothing")] = 0.01;
  b.log_size[at("housing")] = -0.02;
  b.log_size[at("personal_transport")] = -0.015;
  b.log_size[at("communications")] = -0.005;

  cfg.year_effects.assign(cfg.waves.size(), ShareVector{});
  for (std::size_t t = 1; t < cfg.waves.size(); ++t) {
    for (std::size_t j = 0; j < kFunctions; ++j) cfg.year_effects[t][j] = 0.05 * target[j] * normal(rng);
    zero_sum(cfg.year_effects[t], target);
  }
  return cfg;
}

PopulationMoments population_moments(const PopulationConfig& cfg) {
  PopulationMoments m;
  double wsum = 0.0;
  for (const auto& k : cfg.classes) wsum += k.weight;
  for (const auto& k : cfg.classes) {
    const double share = k.weight / wsum;
    for (std::size_t j = 0; j < kFunctions; ++j) m.w_mean[j] += share * k.profile[j];
    m.log_y_mean += share * std::accumulate(k.log_y_mean.begin(), k.log_y_mean.end(), 0.0) /
                    static_cast<double>(k.log_y_mean.size());
  }
  return m;
}

ShareVector true_elasticities(const Coefficients& b, const ShareVector& w_mean, double log_y_mean) {
  ShareVector e{};
  for (std::size_t j = 0; j < kFunctions; ++j)
    e[j] = 1.0 + (b.log_y[j] + 2.0 * b.log_y_sq[j] * log_y_mean) / w_mean[j];
  return e;
}

Population generate(const PopulationConfig& cfg) {
  cfg.validate();
  const std::size_t C = cfg.classes.size();
  Population pop;
  auto& truth = pop.truth;
  truth.coefficients = cfg.coefficients;
  truth.moments = population_moments(cfg);
  truth.elasticity = true_elasticities(cfg.coefficients, truth.moments.w_mean, truth.moments.log_y_mean);

  auto mu_rng = stream(cfg.rng_seed, static_cast<std::uint32_t>(cfg.waves.size()));
  std::normal_distribution<double> normal;
  truth.class_effects.assign(C, ShareVector{});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t j = 0; j < kFunctions; ++j)
      truth.class_effects[c][j] = cfg.sigma_mu * truth.moments.w_mean[j] * normal(mu_rng);
    zero_sum(truth.class_effects[c], truth.moments.w_mean);
  }

  // Regressors enter as deviations from their class-weighted mean, so the class effects stay
  // independent of class expenditure, age and size.
  std::array<double, 6> xref{};
  double wtotal = 0.0;
  for (const auto& k : cfg.classes) {
    const double ly = std::accumulate(k.log_y_mean.begin(), k.log_y_mean.end(), 0.0) /
                      static_cast<double>(k.log_y_mean.size());
    const double age = cfg.waves.front().year - 0.5 * (k.birth_year_min + k.birth_year_max);
    const auto x = regressors(ly, age, std::exp(k.size_log_mean));
    for (std::size_t r = 0; r < x.size(); ++r) xref[r] += k.weight * x[r];
    wtotal += k.weight;
  }
  for (auto& v : xref) v /= wtotal;

  std::vector<double> weights;
  for (const auto& k : cfg.classes) weights.push_back(k.weight);
  const auto b = rows(cfg.coefficients);

  for (std::size_t t = 0; t < cfg.waves.size(); ++t) {
    const auto& spec = cfg.waves[t];
    auto rng = stream(cfg.rng_seed, static_cast<std::uint32_t>(t));
    std::discrete_distribution<std::size_t> pick_class(weights.begin(), weights.end());
    std::uniform_real_distribution<double> unit;
    std::uniform_int_distribution<int> any_category(0, cfg.categories - 1);

    cohort::Wave wave;
    wave.reserve(spec.households);
    std::vector<int> labels;
    labels.reserve(spec.households);
    const std::string prefix = std::to_string(spec.year) + "-";
    for (std::size_t h = 0; h < spec.households; ++h) {
      const std::size_t c = pick_class(rng);
      const auto& k = cfg.classes[c];
      cohort::HouseholdRecord rec;
      std::string num = std::to_string(h + 1);
      rec.id = prefix + std::string(num.size() < 6 ? 6 - num.size() : 0, '0') + num;
      rec.wave_year = spec.year;

      std::uniform_int_distribution<int> birth(k.birth_year_min, k.birth_year_max);
      rec.age = static_cast<double>(spec.year - birth(rng));
      const double ly = k.log_y_mean[t] + k.log_y_sd * normal(rng);
      rec.total_expenditure = std::exp(ly);
      rec.size_oxford = std::max(1.0, std::exp(k.size_log_mean + k.size_log_sd * normal(rng)));
      rec.category = unit(rng) < cfg.category_fidelity ? k.category : any_category(rng);

      ShareVector w = k.profile;
      if (cfg.sigma_nu > 0.0) {
        double top = -INFINITY;
        ShareVector z{};
        for (std::size_t j = 0; j < kFunctions; ++j) {
          z[j] = k.profile[j] > 0.0 ? std::log(k.profile[j]) + cfg.sigma_nu * normal(rng) : -INFINITY;
          top = std::max(top, z[j]);
        }
        double s = 0.0;
        for (std::size_t j = 0; j < kFunctions; ++j) s += (w[j] = std::exp(z[j] - top));
        for (auto& v : w) v /= s;
      }
      const auto x = regressors(ly, rec.age, rec.size_oxford);
      bool clamp = false;
      for (std::size_t j = 0; j < kFunctions; ++j) {
        for (std::size_t r = 0; r < b.size(); ++r) w[j] += (*b[r])[j] * (x[r] - xref[r]);
        w[j] += cfg.year_effects[t][j] + truth.class_effects[c][j];
        if (w[j] < 0.0) {
          w[j] = 0.0;
          clamp = true;
        }
      }
      if (clamp) {
        const double s = sum(w);
        for (auto& v : w) v /= s;
        ++truth.clamped;
      }
      rec.shares = w;
      wave.push_back(std::move(rec));
      labels.push_back(static_cast<int>(c));
    }
    pop.waves.push_back(std::move(wave));
    truth.wave_years.push_back(spec.year);
    truth.labels.push_back(std::move(labels));
  }
  return pop;
}

GroundTruth ground_truth(const PopulationConfig& cfg) { return generate(cfg).truth; }

}  // namespace pseudopanel::datagen
