#pragma once

#include <cmath>
#include <string>

#include "multicfv/autodiff.hpp"
#include "multicfv/error.hpp"
#include "multicfv/random.hpp"

namespace multicfv::detail {

inline Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  // Row-major fill order keeps the draw sequence independent of Eigen's storage order.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-limit, limit);
  return m;
}

inline void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols)
    throw Error(ErrorKind::DimensionMismatch, name + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                                  ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  if (!m.allFinite()) throw Error(ErrorKind::InvalidArgument, name + " has non-finite entries");
}

}  // namespace multicfv::detail
