#pragma once

#include <doctest.h>

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <random>

#include "pseudopanel/error.hpp"

namespace testing {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

// Kind of the pseudopanel::Error thrown by f, or nullopt when it returns normally.
inline std::optional<pseudopanel::ErrorKind> error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const pseudopanel::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline std::string error_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace testing
