#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace dfal {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Stacked network iterate: an n x N matrix whose column i is node i's block.
/// Column-major storage makes the raw data equal to the stacked vector
/// (x_1; x_2; ...; x_N).
using BlockMatrix = Eigen::MatrixXd;

/// Raised when an iterate or function value stops being finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a node touches data it was never sent (simulator bug).
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

inline double sgn(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace dfal
