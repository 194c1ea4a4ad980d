#pragma once

// Homogeneity of a grouping: within/total variance shares and Wilks' lambda.

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

namespace pseudopanel::diagnostics {

using Eigen::Index;
using Eigen::MatrixXd;

// 100 * SSW / SST for one variable. Group labels are arbitrary integers.
double within_total_share(std::span<const double> values, std::span<const Index> groups);

struct RaoF {
  double f = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;
};

// Rao's F approximation for Wilks' lambda with p variables, g groups and n observations.
RaoF rao_f(double lambda, Index p, Index g, Index n);

struct WilksResult {
  double lambda = 1.0;
  RaoF f;
  Index variables = 0;
  Index groups = 0;
  Index observations = 0;
  double ridge = 0.0;  // added to both scatter matrices when the within scatter is singular
};

// Lambda = det(W) / det(T) from sum-of-squares scatter matrices.
WilksResult wilks_lambda(const MatrixXd& data, std::span<const Index> groups);

struct GroupingReport {
  std::vector<std::string> variables;
  std::vector<double> within_share;  // percent, one per variable
  WilksResult wilks;  // lambda and F are NaN when there are too few records per group
  std::string dropped_variable;  // left out of lambda (the shares sum to one)
  Index group_count = 0;
  std::vector<Index> group_sizes;
};

// drop_column < 0 keeps every column in lambda.
GroupingReport grouping_report(const MatrixXd& data, const std::vector<std::string>& names,
                               std::span<const Index> groups, Index drop_column);

struct GroupingComparison {
  GroupingReport a;
  GroupingReport b;
  std::vector<double> delta;  // a - b, per variable
  bool group_count_mismatch = false;
};

GroupingComparison compare_groupings(const MatrixXd& data, const std::vector<std::string>& names,
                                     std::span<const Index> grouping_a, std::span<const Index> grouping_b,
                                     Index drop_column);

std::string format_comparison(const GroupingComparison& cmp, const std::vector<std::string>& labels,
                              const std::string& name_a, const std::string& name_b);
std::string comparison_csv(const GroupingComparison& cmp, const std::string& name_a, const std::string& name_b);

}  // namespace pseudopanel::diagnostics
