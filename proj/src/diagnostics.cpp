#include "pseudopanel/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "pseudopanel/error.hpp"
#include "pseudopanel/linalg.hpp"
#include "pseudopanel/textio.hpp"

namespace pseudopanel::diagnostics {

namespace {

struct DenseLabels {
  std::vector<Index> label;
  Index count = 0;
  std::vector<Index> sizes;
};

DenseLabels dense_labels(std::span<const Index> groups) {
  std::map<Index, Index> ids;
  DenseLabels out;
  out.label.reserve(groups.size());
  for (const Index g : groups) {
    const auto [it, inserted] = ids.emplace(g, static_cast<Index>(ids.size()));
    if (inserted) out.sizes.push_back(0);
    ++out.sizes[static_cast<std::size_t>(it->second)];
    out.label.push_back(it->second);
  }
  out.count = static_cast<Index>(ids.size());
  return out;
}

}  // namespace

double within_total_share(std::span<const double> values, std::span<const Index> groups) {
  require(values.size() == groups.size(), "within_total_share: values and grouping differ in length");
  require(values.size() >= 2, "within_total_share: need at least 2 records");
  const auto labels = dense_labels(groups);
  const auto g = static_cast<std::size_t>(labels.count);

  std::vector<double> sum(g, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum[static_cast<std::size_t>(labels.label[i])] += values[i];
    grand += values[i];
  }
  grand /= static_cast<double>(values.size());
  for (std::size_t k = 0; k < g; ++k) sum[k] /= static_cast<double>(labels.sizes[k]);

  double ssw = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double dw = values[i] - sum[static_cast<std::size_t>(labels.label[i])];
    const double dt = values[i] - grand;
    ssw += dw * dw;
    sst += dt * dt;
  }
  double scale = 0.0;
  for (const double v : values) scale += v * v;
  if (!(sst > 1e-24 * scale) || !(sst > 0.0)) fail(ErrorKind::degenerate, "within_total_share: degenerate variable (zero total variance)");
  return std::clamp(100.0 * ssw / sst, 0.0, 100.0);
}

RaoF rao_f(double lambda, Index p, Index g, Index n) {
  require(p >= 1 && g >= 1 && n > g + p - 1, "rao_f: need n > groups + variables - 1");
  require(lambda > 0.0 && lambda <= 1.0 + 1e-12, "rao_f: lambda must lie in (0, 1]");
  RaoF out;
  const double pp = static_cast<double>(p);
  const double q = static_cast<double>(g - 1);
  if (q == 0.0) return out;
  const double denom = pp * pp + q * q - 5.0;
  const double t = denom > 0.0 ? std::sqrt((pp * pp * q * q - 4.0) / denom) : 1.0;
  const double w = static_cast<double>(n) - 1.0 - (pp + static_cast<double>(g)) / 2.0;
  out.df1 = pp * q;
  out.df2 = w * t - (pp * q - 2.0) / 2.0;
  const double root = std::pow(std::min(lambda, 1.0), 1.0 / t);
  out.f = (1.0 - root) / root * out.df2 / out.df1;
  return out;
}

WilksResult wilks_lambda(const MatrixXd& data, std::span<const Index> groups) {
  require(static_cast<std::size_t>(data.rows()) == groups.size(), "wilks_lambda: data and grouping differ in length");
  const auto labels = dense_labels(groups);
  const Index n = data.rows(), p = data.cols(), g = labels.count;
  require(p >= 1, "wilks_lambda: no variables");
  require(n > g + p, "wilks_lambda: need more observations than groups + variables");

  MatrixXd means = MatrixXd::Zero(g, p);
  for (Index i = 0; i < n; ++i) means.row(labels.label[static_cast<std::size_t>(i)]) += data.row(i);
  for (Index k = 0; k < g; ++k) means.row(k) /= static_cast<double>(labels.sizes[static_cast<std::size_t>(k)]);
  const Eigen::RowVectorXd grand = data.colwise().mean();

  MatrixXd within(n, p), total(n, p);
  for (Index i = 0; i < n; ++i) {
    within.row(i) = data.row(i) - means.row(labels.label[static_cast<std::size_t>(i)]);
    total.row(i) = data.row(i) - grand;
  }
  MatrixXd w = within.transpose() * within;
  MatrixXd t = total.transpose() * total;

  WilksResult out;
  out.variables = p;
  out.groups = g;
  out.observations = n;
  if (linalg::spd_condition(t) <= 1e-12)
    fail(ErrorKind::degenerate, "wilks_lambda: total scatter matrix is singular (degenerate data)");
  if (linalg::spd_condition(w) <= 1e-12) {
    out.ridge = 1e-8 * t.trace() / static_cast<double>(p);
    w.diagonal().array() += out.ridge;
    t.diagonal().array() += out.ridge;
  }
  out.lambda = std::min(1.0, std::exp(linalg::log_det_spd(w) - linalg::log_det_spd(t)));
  out.f = rao_f(out.lambda, p, g, n);
  return out;
}

GroupingReport grouping_report(const MatrixXd& data, const std::vector<std::string>& names,
                               std::span<const Index> groups, Index drop_column) {
  require(static_cast<Index>(names.size()) == data.cols(), "grouping_report: one name per column required");
  require(drop_column < data.cols(), "grouping_report: drop column out of range");
  GroupingReport rep;
  rep.variables = names;
  for (Index j = 0; j < data.cols(); ++j) {
    const Eigen::VectorXd col = data.col(j);
    rep.within_share.push_back(within_total_share(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), groups));
  }
  MatrixXd kept = data;
  if (drop_column >= 0) {
    rep.dropped_variable = names[static_cast<std::size_t>(drop_column)];
    kept.resize(data.rows(), data.cols() - 1);
    Index c = 0;
    for (Index j = 0; j < data.cols(); ++j)
      if (j != drop_column) kept.col(c++) = data.col(j);
  }
  const auto labels = dense_labels(groups);
  if (kept.rows() > labels.count + kept.cols()) {
    rep.wilks = wilks_lambda(kept, groups);
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.wilks.lambda = nan;
    rep.wilks.f = {nan, nan, nan};
    rep.wilks.variables = kept.cols();
    rep.wilks.groups = labels.count;
    rep.wilks.observations = kept.rows();
  }
  rep.group_count = labels.count;
  rep.group_sizes = labels.sizes;
  return rep;
}

GroupingComparison compare_groupings(const MatrixXd& data, const std::vector<std::string>& names,
                                     std::span<const Index> grouping_a, std::span<const Index> grouping_b,
                                     Index drop_column) {
  require(grouping_a.size() == grouping_b.size(), "compare_groupings: groupings cover different records");
  GroupingComparison cmp;
  cmp.a = grouping_report(data, names, grouping_a, drop_column);
  cmp.b = grouping_report(data, names, grouping_b, drop_column);
  for (std::size_t j = 0; j < names.size(); ++j) cmp.delta.push_back(cmp.a.within_share[j] - cmp.b.within_share[j]);
  cmp.group_count_mismatch = cmp.a.group_count != cmp.b.group_count;
  return cmp;
}

std::string format_comparison(const GroupingComparison& cmp, const std::vector<std::string>& labels,
                              const std::string& name_a, const std::string& name_b) {
  std::ostringstream out;
  out << "Share of within variance relative to total variance (%)\n";
  out << std::left << std::setw(22) << "" << std::right << std::setw(12) << name_a << std::setw(12) << name_b
      << std::setw(10) << "delta" << '\n';
  for (std::size_t j = 0; j < cmp.a.variables.size(); ++j) {
    const std::string& label = j < labels.size() ? labels[j] : cmp.a.variables[j];
    out << std::left << std::setw(22) << label << std::right << std::setw(12) << textio::fixed(cmp.a.within_share[j], 2)
        << std::setw(12) << textio::fixed(cmp.b.within_share[j], 2) << std::setw(10) << textio::fixed(cmp.delta[j], 2)
        << '\n';
  }
  const auto lambda_text = [](double v) {
    if (std::isnan(v)) return std::string("n/a");
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
  };
  const auto f_text = [](double v) { return std::isnan(v) ? std::string("n/a") : textio::fixed(v, 2); };
  out << std::left << std::setw(22) << "Wilks Lambda" << std::right << std::setw(12) << lambda_text(cmp.a.wilks.lambda)
      << std::setw(12) << lambda_text(cmp.b.wilks.lambda) << '\n';
  out << std::left << std::setw(22) << "F" << std::right << std::setw(12) << f_text(cmp.a.wilks.f.f) << std::setw(12)
      << f_text(cmp.b.wilks.f.f) << '\n';
  out << std::left << std::setw(22) << "groups" << std::right << std::setw(12) << cmp.a.group_count << std::setw(12)
      << cmp.b.group_count << '\n';
  out << "F degrees of freedom: " << name_a << " (" << textio::fixed(cmp.a.wilks.f.df1, 0) << ", "
      << textio::fixed(cmp.a.wilks.f.df2, 1) << "), " << name_b << " (" << textio::fixed(cmp.b.wilks.f.df1, 0) << ", "
      << textio::fixed(cmp.b.wilks.f.df2, 1) << ")\n";
  if (!cmp.a.dropped_variable.empty()) out << "Lambda computed without " << cmp.a.dropped_variable << '\n';
  if (cmp.a.wilks.ridge > 0.0 || cmp.b.wilks.ridge > 0.0)
    out << "Ridge added to the scatter matrices: " << cmp.a.wilks.ridge << " / " << cmp.b.wilks.ridge << '\n';
  if (cmp.group_count_mismatch) out << "warning: the groupings have different group counts\n";
  return out.str();
}

std::string comparison_csv(const GroupingComparison& cmp, const std::string& name_a, const std::string& name_b) {
  std::ostringstream out;
  out << "variable,share_" << name_a << ",share_" << name_b << ",delta\n";
  for (std::size_t j = 0; j < cmp.a.variables.size(); ++j)
    out << cmp.a.variables[j] << ',' << textio::format_double(cmp.a.within_share[j]) << ','
        << textio::format_double(cmp.b.within_share[j]) << ',' << textio::format_double(cmp.delta[j]) << '\n';
  out << "wilks_lambda," << textio::format_double(cmp.a.wilks.lambda) << ',' << textio::format_double(cmp.b.wilks.lambda)
      << ",\n";
  out << "rao_f," << textio::format_double(cmp.a.wilks.f.f) << ',' << textio::format_double(cmp.b.wilks.f.f) << ",\n";
  out << "df1," << textio::format_double(cmp.a.wilks.f.df1) << ',' << textio::format_double(cmp.b.wilks.f.df1) << ",\n";
  out << "df2," << textio::format_double(cmp.a.wilks.f.df2) << ',' << textio::format_double(cmp.b.wilks.f.df2) << ",\n";
  out << "groups," << cmp.a.group_count << ',' << cmp.b.group_count << ",\n";
  return out.str();
}

}  // namespace pseudopanel::diagnostics
