#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "hfl/common.hpp"

namespace hfl {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;

Index shape_product(const std::vector<Index>& shape);

// Dense n-dimensional array: row-major flat storage plus an optional gradient
// buffer of identical length.
struct Tensor {
  std::vector<Index> shape;
  Vector values;
  std::optional<Vector> grad;

  Tensor() = default;
  explicit Tensor(std::vector<Index> s)
      : shape(std::move(s)), values(Vector::Zero(shape_product(shape))) {}
  Tensor(std::vector<Index> s, Vector v);

  Index size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  Index dim(std::size_t i) const;

  Scalar* data() { return values.data(); }
  const Scalar* data() const { return values.data(); }

  // Rank-2 row-major view {rows, cols}; requires matching total size.
  MatrixMap mat();
  ConstMatrixMap mat() const;

  void ensure_grad();
  void zero_grad();

  // Enforces the type invariants; throws ValidationError / StructuralError
  // with `what` naming the offending tensor.
  void validate(const std::string& what) const;
};

Tensor zeros_like(const Tensor& t);
bool same_shape(const Tensor& a, const Tensor& b);
std::string shape_string(const std::vector<Index>& shape);

// Throws ValidationError if any element is NaN/Inf.
void require_finite(const Vector& v, const std::string& what);

}  // namespace hfl
