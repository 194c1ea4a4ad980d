#include "pseudopanel/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "pseudopanel/error.hpp"
#include "pseudopanel/textio.hpp"

namespace pseudopanel::cohort {

using textio::format_double;

void validate_record(const HouseholdRecord& r) {
  const auto where = [&] { return "household '" + r.id + "' (" + std::to_string(r.wave_year) + "): "; };
  require(!r.id.empty(), "household record with empty id");
  double sum = 0.0;
  for (std::size_t j = 0; j < kFunctions; ++j) {
    const double w = r.shares[j];
    require(std::isfinite(w) && w >= 0.0 && w <= 1.0,
            where() + "budget share w_" + std::string(kFunctionCodes[j]) + " outside [0,1]");
    sum += w;
  }
  require(std::abs(sum - 1.0) <= kShareSumTolerance, where() + "budget shares sum to " + format_double(sum));
  require(std::isfinite(r.total_expenditure) && r.total_expenditure > 0.0, where() + "total expenditure must be > 0");
  require(std::isfinite(r.age) && r.age > 0.0, where() + "age must be > 0");
  require(std::isfinite(r.size_oxford) && r.size_oxford > 0.0, where() + "size_oxford must be > 0");
}

void AgeClassConfig::validate() const {
  for (std::size_t k = 1; k < base_boundaries.size(); ++k)
    require(base_boundaries[k] > base_boundaries[k - 1], "age classes: boundaries must be strictly increasing");
  for (const auto& [year, shift] : shifts) require(shift >= 0.0, "age classes: negative shift for " + std::to_string(year));
}

std::vector<double> AgeClassConfig::boundaries(int wave_year) const {
  const auto it = shifts.find(wave_year);
  require(it != shifts.end(), "age classes: no boundary shift configured for wave " + std::to_string(wave_year));
  std::vector<double> out = base_boundaries;
  for (double& b : out) b += it->second;
  return out;
}

int age_class(double age, int wave_year, const AgeClassConfig& cfg) {
  require(age > 0.0, "age_class: age must be > 0");
  const auto bounds = cfg.boundaries(wave_year);
  return static_cast<int>(std::upper_bound(bounds.begin(), bounds.end(), age) - bounds.begin());
}

std::vector<double> age_class_dummies(double age, int wave_year, const AgeClassConfig& cfg) {
  std::vector<double> out(static_cast<std::size_t>(cfg.class_count()), 0.0);
  out[static_cast<std::size_t>(age_class(age, wave_year, cfg))] = 1.0;
  return out;
}

FeatureSet build_features(std::span<const HouseholdRecord> records, const FeatureConfig& features,
                          const AgeClassConfig& ages) {
  FeatureSet out;
  for (const auto code : kFunctionCodes) {
    out.names.push_back("w_" + std::string(code));
    out.dummy.push_back(false);
  }
  if (features.age_dummies) {
    ages.validate();
    for (int k = 0; k < ages.class_count(); ++k) {
      out.names.push_back("age_class_" + std::to_string(k + 1));
      out.dummy.push_back(true);
    }
  }
  if (features.log_expenditure) {
    out.names.push_back("log_y");
    out.dummy.push_back(false);
  }
  if (features.log_size) {
    out.names.push_back("log_size");
    out.dummy.push_back(false);
  }

  const auto n = static_cast<Index>(records.size());
  out.values.resize(n, static_cast<Index>(out.names.size()));
  for (Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    Index col = 0;
    for (std::size_t j = 0; j < kFunctions; ++j) out.values(i, col++) = r.shares[j];
    if (features.age_dummies)
      for (const double d : age_class_dummies(r.age, r.wave_year, ages)) out.values(i, col++) = d;
    if (features.log_expenditure) out.values(i, col++) = std::log(r.total_expenditure);
    if (features.log_size) out.values(i, col++) = std::log(r.size_oxford);
  }
  return out;
}

std::vector<std::vector<Index>> Membership::counts() const {
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(node_count), std::vector<Index>(node_of.size(), 0));
  for (std::size_t t = 0; t < node_of.size(); ++t)
    for (const Index node : node_of[t]) ++out[static_cast<std::size_t>(node)][t];
  return out;
}

Membership assign_waves(const som::SomMap& map, std::span<const Wave> waves, const FeatureConfig& features,
                        const AgeClassConfig& ages) {
  Membership out;
  out.node_count = map.node_count();
  for (const auto& wave : waves) {
    require(!wave.empty(), "assign_waves: empty wave");
    const FeatureSet fs = build_features(wave, features, ages);
    require(static_cast<Index>(fs.names.size()) == map.dimension(),
            "assign_waves: feature dimension mismatch (map has " + std::to_string(map.dimension()) +
                " features, records give " + std::to_string(fs.names.size()) + ")");
    if (!map.feature_names.empty()) require(fs.names == map.feature_names, "assign_waves: feature names differ from the map's");
    out.wave_years.push_back(wave.front().wave_year);
    out.node_of.push_back(som::assign(map, map.scaler.apply(fs.values)));
  }
  return out;
}

CohortObservation aggregate(std::span<const HouseholdRecord> members, Index cohort, int wave_year) {
  if (members.empty()) fail(ErrorKind::validation, "aggregate: empty member list");
  double total = 0.0;
  for (const auto& m : members) {
    if (!(m.total_expenditure > 0.0))
      fail(ErrorKind::validation, "aggregate: household '" + m.id + "' has non-positive total expenditure");
    total += m.total_expenditure;
  }

  CohortObservation obs;
  obs.cohort = cohort;
  obs.wave_year = wave_year;
  obs.n_members = static_cast<Index>(members.size());
  obs.g_weights.reserve(members.size());
  double sum_g2 = 0.0;
  for (const auto& m : members) {
    const double g = m.total_expenditure / total;
    obs.g_weights.push_back(g);
    obs.sum_g += g;
    sum_g2 += g * g;
    for (std::size_t j = 0; j < kFunctions; ++j) obs.w[j] += g * m.shares[j];
    const double ly = std::log(m.total_expenditure);
    const double la = std::log(m.age);
    const double ls = std::log(m.size_oxford);
    obs.log_y += g * ly;
    obs.log_y_sq += g * ly * ly;
    obs.log_age += g * la;
    obs.log_age_sq += g * la * la;
    obs.log_size += g * ls;
    obs.log_size_sq += g * ls * ls;
  }
  obs.hetero_factor = 1.0 / std::sqrt(sum_g2);
  return obs;
}

TransformedObservation transform(const CohortObservation& obs) {
  const double f = obs.hetero_factor;
  TransformedObservation t;
  t.cohort = obs.cohort;
  t.wave_year = obs.wave_year;
  t.factor = f;
  for (std::size_t j = 0; j < kFunctions; ++j) t.w[j] = f * obs.w[j];
  t.constant = f;
  t.log_y = f * obs.log_y;
  t.log_y_sq = f * obs.log_y_sq;
  t.log_age = f * obs.log_age;
  t.log_age_sq = f * obs.log_age_sq;
  t.log_size = f * obs.log_size;
  t.log_size_sq = f * obs.log_size_sq;
  return t;
}

SizeReport size_report(const Membership& membership, Index min_cell_size) {
  SizeReport rep;
  rep.wave_years = membership.wave_years;
  rep.counts = membership.counts();
  rep.min_cell_size = min_cell_size;
  for (std::size_t k = 0; k < rep.counts.size(); ++k) {
    const auto& row = rep.counts[k];
    if (*std::min_element(row.begin(), row.end()) < min_cell_size) rep.flagged.push_back(static_cast<Index>(k));
  }
  return rep;
}

PanelDataset build_panel(const Membership& membership, std::span<const Wave> waves, Index min_cell_size) {
  require(waves.size() >= 2, "build_panel: need at least 2 waves");
  require(waves.size() == membership.node_of.size(), "build_panel: membership does not match the waves");
  require(min_cell_size >= 1, "build_panel: min_cell_size must be >= 1");
  for (std::size_t t = 0; t < waves.size(); ++t)
    require(waves[t].size() == membership.node_of[t].size(), "build_panel: wave size differs from its membership");
  for (std::size_t t = 1; t < membership.wave_years.size(); ++t)
    require(membership.wave_years[t] > membership.wave_years[t - 1], "build_panel: waves must be in increasing year order");

  PanelDataset panel;
  panel.periods = membership.wave_years;
  panel.sizes = size_report(membership, min_cell_size);

  // Member lists per (node, wave).
  const auto nodes = static_cast<std::size_t>(membership.node_count);
  std::vector<std::vector<std::vector<std::size_t>>> members(nodes, std::vector<std::vector<std::size_t>>(waves.size()));
  for (std::size_t t = 0; t < waves.size(); ++t)
    for (std::size_t i = 0; i < waves[t].size(); ++i)
      members[static_cast<std::size_t>(membership.node_of[t][i])][t].push_back(i);

  for (std::size_t k = 0; k < nodes; ++k) {
    const auto& counts = panel.sizes.counts[k];
    const Index smallest = *std::min_element(counts.begin(), counts.end());
    if (smallest == 0) {
      panel.dropped.push_back({static_cast<Index>(k), "empty cell", counts});
      continue;
    }
    if (smallest < min_cell_size) {
      panel.dropped.push_back({static_cast<Index>(k),
                               "cell below min_cell_size (" + std::to_string(smallest) + " < " +
                                   std::to_string(min_cell_size) + ")",
                               counts});
      continue;
    }
    panel.cohorts.push_back(static_cast<Index>(k));
    for (std::size_t t = 0; t < waves.size(); ++t) {
      std::vector<HouseholdRecord> cell;
      cell.reserve(members[k][t].size());
      for (const auto i : members[k][t]) cell.push_back(waves[t][i]);
      panel.cells.push_back(aggregate(cell, static_cast<Index>(k), panel.periods[t]));
    }
  }
  if (panel.cohorts.empty())
    fail(ErrorKind::degenerate, "build_panel: no cohort has all cells with at least " + std::to_string(min_cell_size) +
                                    " members");
  return panel;
}

// CSV -----------------------------------------------------------------------

std::vector<std::string> survey_header() {
  std::vector<std::string> h{"id", "year", "y_total", "age", "size_oxford"};
  for (const auto code : kFunctionCodes) h.push_back("w_" + std::string(code));
  return h;
}

namespace {

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

std::vector<std::string> panel_header() {
  std::vector<std::string> h{"cohort", "year", "n", "sum_g", "hetero_factor"};
  for (const auto code : kFunctionCodes) h.push_back("w_" + std::string(code));
  for (const char* v : {"log_y", "log_y_sq", "log_age", "log_age_sq", "log_size", "log_size_sq"}) h.emplace_back(v);
  h.emplace_back("t_const");
  for (const auto code : kFunctionCodes) h.push_back("t_w_" + std::string(code));
  for (const char* v : {"t_log_y", "t_log_y_sq", "t_log_age", "t_log_age_sq", "t_log_size", "t_log_size_sq"})
    h.emplace_back(v);
  return h;
}

}  // namespace

void write_survey_csv(std::ostream& out, std::span<const HouseholdRecord> records) {
  auto header = survey_header();
  const bool has_category = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.category.has_value(); });
  if (has_category) header.emplace_back("category");
  write_row(out, header);
  std::vector<std::string> row;
  for (const auto& r : records) {
    row.clear();
    row.push_back(r.id);
    row.push_back(std::to_string(r.wave_year));
    row.push_back(format_double(r.total_expenditure));
    row.push_back(format_double(r.age));
    row.push_back(format_double(r.size_oxford));
    for (const double w : r.shares) row.push_back(format_double(w));
    if (has_category) row.push_back(r.category ? std::to_string(*r.category) : "");
    write_row(out, row);
  }
}

Wave read_survey_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::validation, source + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = textio::split_csv(line);
  const auto find = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  std::vector<std::size_t> cols;
  for (const auto& name : survey_header()) {
    const auto pos = find(name);
    if (!pos) fail(ErrorKind::validation, source + ": missing column '" + name + "'");
    cols.push_back(*pos);
  }
  const auto category_col = find("category");

  Wave wave;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (textio::trim(line).empty()) continue;
    const auto cells = textio::split_csv(line);
    const std::string ctx = source + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) fail(ErrorKind::validation, ctx + ": expected " + std::to_string(header.size()) + " fields");
    HouseholdRecord r;
    r.id = std::string(cells[cols[0]]);
    r.wave_year = static_cast<int>(textio::parse_int(cells[cols[1]], ctx + " year"));
    r.total_expenditure = textio::parse_double(cells[cols[2]], ctx + " y_total");
    r.age = textio::parse_double(cells[cols[3]], ctx + " age");
    r.size_oxford = textio::parse_double(cells[cols[4]], ctx + " size_oxford");
    for (std::size_t j = 0; j < kFunctions; ++j)
      r.shares[j] = textio::parse_double(cells[cols[5 + j]], ctx + " w_" + std::string(kFunctionCodes[j]));
    if (category_col && !cells[*category_col].empty())
      r.category = static_cast<int>(textio::parse_int(cells[*category_col], ctx + " category"));
    validate_record(r);
    if (!wave.empty() && r.wave_year != wave.front().wave_year)
      fail(ErrorKind::validation, ctx + ": a survey file must hold a single wave year");
    wave.push_back(std::move(r));
  }
  if (wave.empty()) fail(ErrorKind::validation, source + ": no records");
  return wave;
}

void write_panel_csv(std::ostream& out, const PanelDataset& panel) {
  write_row(out, panel_header());
  std::vector<std::string> row;
  for (const auto& c : panel.cells) {
    const auto t = transform(c);
    row.clear();
    row.push_back(std::to_string(c.cohort + 1));
    row.push_back(std::to_string(c.wave_year));
    row.push_back(std::to_string(c.n_members));
    row.push_back(format_double(c.sum_g));
    row.push_back(format_double(c.hetero_factor));
    for (const double w : c.w) row.push_back(format_double(w));
    for (const double v : {c.log_y, c.log_y_sq, c.log_age, c.log_age_sq, c.log_size, c.log_size_sq})
      row.push_back(format_double(v));
    row.push_back(format_double(t.constant));
    for (const double w : t.w) row.push_back(format_double(w));
    for (const double v : {t.log_y, t.log_y_sq, t.log_age, t.log_age_sq, t.log_size, t.log_size_sq})
      row.push_back(format_double(v));
    write_row(out, row);
  }
}

PanelDataset read_panel_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::validation, "panel: empty file");
  const auto header = textio::split_csv(line);
  const auto expected = panel_header();
  require(header.size() == expected.size() && std::equal(header.begin(), header.end(), expected.begin()),
          "panel: unexpected header");

  PanelDataset panel;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (textio::trim(line).empty()) continue;
    const auto cells = textio::split_csv(line);
    const std::string ctx = "panel:" + std::to_string(line_no);
    require(cells.size() == expected.size(), ctx + ": wrong field count");
    CohortObservation c;
    c.cohort = static_cast<Index>(textio::parse_int(cells[0], ctx)) - 1;
    c.wave_year = static_cast<int>(textio::parse_int(cells[1], ctx));
    c.n_members = static_cast<Index>(textio::parse_int(cells[2], ctx));
    c.sum_g = textio::parse_double(cells[3], ctx);
    c.hetero_factor = textio::parse_double(cells[4], ctx);
    std::size_t col = 5;
    for (std::size_t j = 0; j < kFunctions; ++j) c.w[j] = textio::parse_double(cells[col++], ctx);
    for (double* v : {&c.log_y, &c.log_y_sq, &c.log_age, &c.log_age_sq, &c.log_size, &c.log_size_sq})
      *v = textio::parse_double(cells[col++], ctx);
    require(c.n_members >= 1 && c.hetero_factor >= 1.0 - 1e-12, ctx + ": invalid cell size or factor");
    panel.cells.push_back(std::move(c));
  }
  require(!panel.cells.empty(), "panel: no rows");

  // Recover the balanced cohort x period layout.
  for (const auto& c : panel.cells) {
    if (std::find(panel.periods.begin(), panel.periods.end(), c.wave_year) == panel.periods.end())
      panel.periods.push_back(c.wave_year);
    if (panel.cohorts.empty() || panel.cohorts.back() != c.cohort) panel.cohorts.push_back(c.cohort);
  }
  std::sort(panel.periods.begin(), panel.periods.end());
  const auto T = panel.periods.size();
  require(panel.cells.size() == panel.cohorts.size() * T, "panel: not balanced");
  for (std::size_t i = 0; i < panel.cohorts.size(); ++i)
    for (std::size_t t = 0; t < T; ++t) {
      const auto& c = panel.cells[i * T + t];
      require(c.cohort == panel.cohorts[i] && c.wave_year == panel.periods[t],
              "panel: rows must be grouped by cohort in increasing year order");
    }
  return panel;
}

std::string format_size_report(const SizeReport& report) {
  std::ostringstream out;
  out << "Cohort sizes per survey wave (min_cell_size = " << report.min_cell_size << ")\n";
  out << "cohort";
  for (const int y : report.wave_years) out << "  " << std::setw(6) << y;
  out << "   total  flag\n";
  std::size_t below_300 = 0;
  for (std::size_t k = 0; k < report.counts.size(); ++k) {
    const auto& row = report.counts[k];
    Index total = 0;
    for (const Index v : row) total += v;
    if (total < 300) ++below_300;
    const bool flagged = std::find(report.flagged.begin(), report.flagged.end(), static_cast<Index>(k)) != report.flagged.end();
    out << 'C' << std::left << std::setw(5) << (k + 1) << std::right;
    for (const Index v : row) out << "  " << std::setw(6) << v;
    out << "  " << std::setw(6) << total << "  " << (flagged ? "<min" : "") << '\n';
  }
  out << report.flagged.size() << " cohorts with a cell below " << report.min_cell_size << ":";
  for (const Index k : report.flagged) out << " C" << (k + 1);
  out << '\n' << below_300 << " cohorts with fewer than 300 members over all waves\n";
  return out.str();
}

void write_size_report_csv(std::ostream& out, const SizeReport& report) {
  out << "cohort";
  for (const int y : report.wave_years) out << ",n_" << y;
  out << ",min,flagged\n";
  for (std::size_t k = 0; k < report.counts.size(); ++k) {
    const auto& row = report.counts[k];
    out << (k + 1);
    for (const Index v : row) out << ',' << v;
    const bool flagged = std::find(report.flagged.begin(), report.flagged.end(), static_cast<Index>(k)) != report.flagged.end();
    out << ',' << *std::min_element(row.begin(), row.end()) << ',' << (flagged ? 1 : 0) << '\n';
  }
}

}  // namespace pseudopanel::cohort
