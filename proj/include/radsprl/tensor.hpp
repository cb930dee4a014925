#pragma once

#include <string>
#include <utility>

#include <Eigen/Core>

namespace radsprl::nn {

// Dense double-precision arrays. Matrices are (rows x cols); sequences are
// stored one column per time step.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A trainable array with its accumulated gradient.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

}  // namespace radsprl::nn
