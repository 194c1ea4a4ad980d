#pragma once

// Kohonen self-organizing map on a rectangular grid. Nodes are indexed
// row-major from the top-left corner starting at 0; reports add 1.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace pseudopanel::som {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SomConfig {
  int rows = 8;
  int cols = 8;
  int epochs = 20;
  double initial_radius = 4.0;
  double initial_learning_rate = 0.3;
  double final_learning_rate = 0.01;
  std::uint64_t rng_seed = 1982;

  Index node_count() const { return static_cast<Index>(rows) * cols; }
  void validate() const;
};

// Per-feature z-score parameters. Dummy columns carry mean 0 and sd 1.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<bool> dummy;

  Index dimension() const { return static_cast<Index>(mean.size()); }
  MatrixXd apply(const MatrixXd& raw) const;
  static Scaler identity(Index d);
};

struct Standardized {
  MatrixXd values;
  Scaler scaler;
};

// Z-scores every non-dummy column with the n-1 sample standard deviation.
Standardized standardize(const MatrixXd& raw, const std::vector<bool>& dummy,
                         const std::vector<std::string>& names = {});

struct EpochSchedule {
  double learning_rate = 0.0;  // constant within the epoch
  double radius = 0.0;
};

// Learning rate and radius decay linearly; the radius reaches 0 at the last epoch. Epochs whose
// radius is below 1 move the winning node only.
std::vector<EpochSchedule> training_schedule(const SomConfig& cfg);

struct SomMap {
  SomConfig config;
  Scaler scaler;
  std::vector<std::string> feature_names;
  MatrixXd codes;  // node_count x d, row-major node order
  std::vector<EpochSchedule> history;

  Index node_count() const { return codes.rows(); }
  Index dimension() const { return codes.cols(); }
  int row_of(Index node) const { return static_cast<int>(node / config.cols); }
  int col_of(Index node) const { return static_cast<int>(node % config.cols); }
};

int grid_distance(const SomConfig& cfg, Index a, Index b);

// Code vectors before any update; train() starts from exactly this map.
SomMap initial_map(const MatrixXd& data, const SomConfig& cfg);
SomMap train(const MatrixXd& data, const SomConfig& cfg);

// Index of the closest code vector; ties go to the lowest index.
Index bmu(const SomMap& map, const VectorXd& v);
std::vector<Index> assign(const SomMap& map, const MatrixXd& data);

double quantization_error(const SomMap& map, const MatrixXd& data);

MatrixXd pooled_covariance(const MatrixXd& data);

struct RegularizedCovariance {
  MatrixXd covariance;
  double ridge = 0.0;  // 0 when no regularization was needed
};

// Adds ridge = 1e-8 * trace / d to the diagonal when the matrix is numerically singular.
RegularizedCovariance regularize_covariance(const MatrixXd& cov);

// Pairwise Mahalanobis distances between code vectors. Throws ErrorKind::singular
// when the covariance is not positive definite (see regularize_covariance).
MatrixXd mahalanobis_matrix(const SomMap& map, const MatrixXd& covariance);

struct Neighbor {
  Index node = 0;
  double distance = 0.0;
};

// Distances to the grid-adjacent nodes (Chebyshev distance 1) of every node.
std::vector<std::vector<Neighbor>> neighbor_distances(const SomMap& map, const MatrixXd& distances);

// Fig.-style distance map: one cell per node with an inscribed octagon whose vertex
// toward each neighbor moves from the cell contour to the centre as that distance grows.
std::string distance_svg(const SomMap& map, const std::vector<std::vector<Neighbor>>& neighbors,
                         double cell_px = 64.0);

}  // namespace pseudopanel::som
