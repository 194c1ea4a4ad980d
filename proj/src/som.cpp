#include "pseudopanel/som.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <random>
#include <sstream>

#include "pseudopanel/error.hpp"
#include "pseudopanel/linalg.hpp"

namespace pseudopanel::som {

void SomConfig::validate() const {
  require(rows >= 1 && cols >= 1, "som: rows and cols must be >= 1");
  require(epochs >= 1, "som: epochs must be >= 1");
  require(initial_radius >= 0.0, "som: initial_radius must be >= 0");
  require(final_learning_rate > 0.0 && final_learning_rate <= initial_learning_rate && initial_learning_rate < 1.0,
          "som: learning rates must satisfy 0 < final <= initial < 1");
}

MatrixXd Scaler::apply(const MatrixXd& raw) const {
  require(raw.cols() == dimension(), "scaler: feature dimension mismatch (expected " +
                                         std::to_string(dimension()) + ", got " + std::to_string(raw.cols()) + ")");
  MatrixXd out(raw.rows(), raw.cols());
  for (Index j = 0; j < raw.cols(); ++j) {
    const auto u = static_cast<std::size_t>(j);
    out.col(j) = (raw.col(j).array() - mean[u]) / sd[u];
  }
  return out;
}

Scaler Scaler::identity(Index d) {
  const auto n = static_cast<std::size_t>(d);
  return Scaler{std::vector<double>(n, 0.0), std::vector<double>(n, 1.0), std::vector<bool>(n, false)};
}

Standardized standardize(const MatrixXd& raw, const std::vector<bool>& dummy, const std::vector<std::string>& names) {
  require(raw.rows() >= 2, "standardize: need at least 2 records");
  require(static_cast<Index>(dummy.size()) == raw.cols(), "standardize: dummy mask size mismatch");
  require(raw.allFinite(), "standardize: non-finite feature value");

  Standardized out;
  out.scaler = Scaler::identity(raw.cols());
  out.scaler.dummy = dummy;
  const double n = static_cast<double>(raw.rows());
  for (Index j = 0; j < raw.cols(); ++j) {
    const auto u = static_cast<std::size_t>(j);
    if (dummy[u]) continue;
    const double mean = raw.col(j).mean();
    const double var = (raw.col(j).array() - mean).square().sum() / (n - 1.0);
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      const std::string name = u < names.size() ? names[u] : "#" + std::to_string(j);
      fail(ErrorKind::degenerate, "standardize: feature '" + name + "' is constant across records");
    }
    out.scaler.mean[u] = mean;
    out.scaler.sd[u] = sd;
  }
  out.values = out.scaler.apply(raw);
  return out;
}

std::vector<EpochSchedule> training_schedule(const SomConfig& cfg) {
  cfg.validate();
  const int epochs = cfg.epochs;
  std::vector<EpochSchedule> out(static_cast<std::size_t>(epochs));
  for (int e = 0; e < epochs; ++e) {
    const double frac = epochs > 1 ? static_cast<double>(e) / (epochs - 1) : 0.0;
    auto& s = out[static_cast<std::size_t>(e)];
    s.learning_rate = cfg.initial_learning_rate + (cfg.final_learning_rate - cfg.initial_learning_rate) * frac;
    s.radius = e + 1 == epochs ? 0.0 : cfg.initial_radius * (1.0 - frac);
  }
  return out;
}

int grid_distance(const SomConfig& cfg, Index a, Index b) {
  const auto ra = a / cfg.cols, ca = a % cfg.cols;
  const auto rb = b / cfg.cols, cb = b % cfg.cols;
  return static_cast<int>(std::max(std::abs(ra - rb), std::abs(ca - cb)));
}

namespace {

Index nearest(const MatrixXd& codes, const double* x) {
  const Index nodes = codes.rows();
  const Index d = codes.cols();
  Index best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < nodes; ++k) {
    double d2 = 0.0;
    for (Index j = 0; j < d; ++j) {
      const double diff = x[j] - codes(k, j);
      d2 += diff * diff;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = k;
    }
  }
  return best;
}

}  // namespace

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_training_data(const MatrixXd& data, const SomConfig& cfg) {
  cfg.validate();
  require(data.rows() >= 1, "som::train: empty data");
  require(data.cols() >= 1, "som::train: zero-dimensional features");
  require(data.allFinite(), "som::train: non-finite feature value");
}

// Code vectors copied from distinct sampled records (cycling when there are fewer records than nodes).
RowMatrix seed_codes(const RowMatrix& x, Index nodes, std::vector<Index>& order, std::mt19937_64& rng) {
  const Index n = x.rows();
  order.resize(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  RowMatrix codes(nodes, x.cols());
  for (Index k = 0; k < nodes; ++k) codes.row(k) = x.row(order[static_cast<std::size_t>(k % n)]);
  return codes;
}

}  // namespace

SomMap initial_map(const MatrixXd& data, const SomConfig& cfg) {
  check_training_data(data, cfg);
  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<Index> order;
  SomMap map;
  map.config = cfg;
  map.scaler = Scaler::identity(data.cols());
  map.codes = seed_codes(data, cfg.node_count(), order, rng);
  return map;
}

SomMap train(const MatrixXd& data, const SomConfig& cfg) {
  check_training_data(data, cfg);
  const Index nodes = cfg.node_count();
  std::mt19937_64 rng(cfg.rng_seed);

  // Row-major copies: each update touches one record and a few nodes.
  const RowMatrix x = data;
  std::vector<Index> order;
  RowMatrix codes = seed_codes(x, nodes, order, rng);

  SomMap map;
  map.config = cfg;
  map.scaler = Scaler::identity(data.cols());
  map.history = training_schedule(cfg);

  for (const auto& epoch : map.history) {
    std::shuffle(order.begin(), order.end(), rng);
    const int radius = static_cast<int>(std::floor(epoch.radius + 1e-9));
    const double lr = epoch.learning_rate;
    for (const Index i : order) {
      Index best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (Index k = 0; k < nodes; ++k) {
        const double d2 = (codes.row(k) - x.row(i)).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = k;
        }
      }
      const int br = static_cast<int>(best / cfg.cols), bc = static_cast<int>(best % cfg.cols);
      for (int r = std::max(0, br - radius); r <= std::min(cfg.rows - 1, br + radius); ++r)
        for (int c = std::max(0, bc - radius); c <= std::min(cfg.cols - 1, bc + radius); ++c) {
          const Index k = static_cast<Index>(r) * cfg.cols + c;
          codes.row(k) += lr * (x.row(i) - codes.row(k));
        }
    }
  }
  map.codes = codes;
  return map;
}

Index bmu(const SomMap& map, const VectorXd& v) {
  require(v.size() == map.dimension(), "som::bmu: feature dimension mismatch (expected " +
                                           std::to_string(map.dimension()) + ", got " + std::to_string(v.size()) + ")");
  return nearest(map.codes, v.data());
}

std::vector<Index> assign(const SomMap& map, const MatrixXd& data) {
  require(data.cols() == map.dimension(), "som::assign: feature dimension mismatch (expected " +
                                              std::to_string(map.dimension()) + ", got " +
                                              std::to_string(data.cols()) + ")");
  std::vector<Index> out(static_cast<std::size_t>(data.rows()));
  VectorXd row(data.cols());
  for (Index i = 0; i < data.rows(); ++i) {
    row = data.row(i).transpose();
    out[static_cast<std::size_t>(i)] = nearest(map.codes, row.data());
  }
  return out;
}

double quantization_error(const SomMap& map, const MatrixXd& data) {
  require(data.rows() >= 1, "quantization_error: empty data");
  const auto nodes = assign(map, data);
  double acc = 0.0;
  for (Index i = 0; i < data.rows(); ++i)
    acc += (data.row(i) - map.codes.row(nodes[static_cast<std::size_t>(i)])).norm();
  return acc / static_cast<double>(data.rows());
}

MatrixXd pooled_covariance(const MatrixXd& data) {
  require(data.rows() >= 2, "pooled_covariance: need at least 2 rows");
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const MatrixXd centered = data.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(data.rows() - 1);
}

RegularizedCovariance regularize_covariance(const MatrixXd& cov) {
  require(cov.rows() == cov.cols() && cov.rows() >= 1, "regularize_covariance: matrix must be square");
  RegularizedCovariance out{cov, 0.0};
  if (linalg::spd_condition(cov) > 1e-12) return out;
  const double d = static_cast<double>(cov.rows());
  out.ridge = 1e-8 * cov.trace() / d;
  require(out.ridge > 0.0, "regularize_covariance: covariance has zero trace");
  out.covariance.diagonal().array() += out.ridge;
  return out;
}

MatrixXd mahalanobis_matrix(const SomMap& map, const MatrixXd& covariance) {
  const Index d = map.dimension();
  require(covariance.rows() == d && covariance.cols() == d, "mahalanobis_matrix: covariance dimension mismatch");
  require((covariance - covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, covariance.cwiseAbs().maxCoeff()),
          "mahalanobis_matrix: covariance is not symmetric");
  Eigen::LLT<MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success || linalg::spd_condition(covariance) <= 1e-12)
    fail(ErrorKind::singular,
         "mahalanobis_matrix: covariance is singular; regularize it with a diagonal ridge "
         "(regularize_covariance adds 1e-8 * trace / d)");

  // Whitened code vectors: L^-1 c, so distances become Euclidean.
  const MatrixXd white = llt.matrixL().solve(map.codes.transpose());
  const Index nodes = map.node_count();
  MatrixXd out = MatrixXd::Zero(nodes, nodes);
  for (Index i = 0; i < nodes; ++i)
    for (Index j = i + 1; j < nodes; ++j) {
      const double dist = (white.col(i) - white.col(j)).norm();
      out(i, j) = dist;
      out(j, i) = dist;
    }
  return out;
}

std::vector<std::vector<Neighbor>> neighbor_distances(const SomMap& map, const MatrixXd& distances) {
  const Index nodes = map.node_count();
  require(distances.rows() == nodes && distances.cols() == nodes, "neighbor_distances: matrix size mismatch");
  const int rows = map.config.rows, cols = map.config.cols;
  std::vector<std::vector<Neighbor>> out(static_cast<std::size_t>(nodes));
  for (Index k = 0; k < nodes; ++k) {
    const int r = map.row_of(k), c = map.col_of(k);
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const int rr = r + dr, cc = c + dc;
        if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
        const Index other = static_cast<Index>(rr) * cols + cc;
        out[static_cast<std::size_t>(k)].push_back({other, distances(k, other)});
      }
  }
  return out;
}

std::string distance_svg(const SomMap& map, const std::vector<std::vector<Neighbor>>& neighbors, double cell_px) {
  const int rows = map.config.rows, cols = map.config.cols;
  double dmax = 0.0;
  for (const auto& list : neighbors)
    for (const auto& nb : list) dmax = std::max(dmax, nb.distance);

  std::ostringstream svg;
  svg.setf(std::ios::fixed);
  svg.precision(2);
  const double w = cols * cell_px, h = rows * cell_px;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";

  // Clockwise from north; vertex i targets the cell contour point in direction (dr, dc).
  constexpr int kDirs[8][2] = {{-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}};
  const double half = 0.5 * cell_px * 0.92;
  for (Index k = 0; k < map.node_count(); ++k) {
    const int r = map.row_of(k), c = map.col_of(k);
    const double cx = (c + 0.5) * cell_px, cy = (r + 0.5) * cell_px;
    svg << "<rect x=\"" << c * cell_px << "\" y=\"" << r * cell_px << "\" width=\"" << cell_px << "\" height=\""
        << cell_px << "\" fill=\"none\" stroke=\"#999\" stroke-width=\"1\"/>\n";
    svg << "<polygon points=\"";
    for (int v = 0; v < 8; ++v) {
      const int dr = kDirs[v][0], dc = kDirs[v][1];
      const Index other = static_cast<Index>(r + dr) * cols + (c + dc);
      double frac = 1.0;  // no neighbor on this side: vertex stays on the contour
      for (const auto& nb : neighbors[static_cast<std::size_t>(k)])
        if (nb.node == other && r + dr >= 0 && r + dr < rows && c + dc >= 0 && c + dc < cols)
          frac = dmax > 0.0 ? 1.0 - nb.distance / dmax : 1.0;
      svg << cx + frac * half * dc << ',' << cy + frac * half * dr << (v < 7 ? " " : "");
    }
    svg << "\" fill=\"#4a7ab5\" fill-opacity=\"0.55\" stroke=\"#1d3f6e\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << c * cell_px + 3 << "\" y=\"" << r * cell_px + 11
        << "\" font-family=\"sans-serif\" font-size=\"9\" fill=\"#333\">" << k + 1 << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace pseudopanel::som
