#include "panel_sim.hpp"

#include <cmath>
#include <random>

namespace panel_sim {

pseudopanel::cohort::PanelDataset simulate(const Config& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> members(cfg.min_members, cfg.max_members);
  std::uniform_real_distribution<double> concentration(0.6, 1.0);

  const double la_ref = std::log(50.0), ls_ref = std::log(2.25);
  const double b0 = cfg.mean_share - (cfg.b1 * 10.0 + cfg.b2 * 100.0 + cfg.b_age * la_ref + cfg.b_age_sq * la_ref * la_ref +
                                      cfg.b_size * ls_ref + cfg.b_size_sq * ls_ref * ls_ref);

  pseudopanel::cohort::PanelDataset panel;
  for (int t = 0; t < cfg.periods; ++t) panel.periods.push_back(1982 + 4 * t);
  for (int i = 0; i < cfg.units; ++i) {
    panel.cohorts.push_back(i);
    const double level = 10.0 + cfg.level_sd * normal(rng);
    const double age0 = 25.0 + 50.0 * (i + 0.5) / cfg.units;
    const double size = 1.5 + 1.5 * std::uniform_real_distribution<double>()(rng);

    std::vector<double> ly(static_cast<std::size_t>(cfg.periods));
    double ly_mean = 0.0;
    for (auto& v : ly) {
      v = level + cfg.drift_sd * normal(rng);
      ly_mean += v / cfg.periods;
    }
    const double mu = cfg.sigma_mu * normal(rng) + cfg.effect_corr * (ly_mean - 10.0);

    for (int t = 0; t < cfg.periods; ++t) {
      pseudopanel::cohort::CohortObservation c;
      c.cohort = i;
      c.wave_year = panel.periods[static_cast<std::size_t>(t)];
      c.n_members = static_cast<Eigen::Index>(std::lround(members(rng)));
      // Unequal expenditures put 1/sum(g^2) below the member count.
      c.hetero_factor = cfg.unit_factor ? 1.0 : std::sqrt(static_cast<double>(c.n_members) * concentration(rng));
      c.sum_g = 1.0;

      const double y = ly[static_cast<std::size_t>(t)];
      const double la = std::log(age0 + 4.0 * t + 0.5 * normal(rng));
      const double ls = std::log(size) + 0.05 * normal(rng);
      c.log_y = y;
      c.log_y_sq = y * y + 0.01;
      c.log_age = la;
      c.log_age_sq = la * la + 0.002;
      c.log_size = ls;
      c.log_size_sq = ls * ls + 0.003;

      const double year = 0.005 * t;
      const double w = b0 + cfg.b1 * c.log_y + cfg.b2 * c.log_y_sq + cfg.b_age * c.log_age +
                       cfg.b_age_sq * c.log_age_sq + cfg.b_size * c.log_size + cfg.b_size_sq * c.log_size_sq + year +
                       mu + cfg.sigma_nu * normal(rng) / c.hetero_factor;
      c.w[0] = w;
      for (std::size_t j = 1; j < pseudopanel::kFunctions; ++j) c.w[j] = (1.0 - w) / (pseudopanel::kFunctions - 1);
      panel.cells.push_back(c);
    }
  }
  return panel;
}

}  // namespace panel_sim
