#include "hfl/tensor.hpp"

#include <sstream>

namespace hfl {

Index shape_product(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d <= 0) throw ValidationError("tensor dimension must be positive, got " +
                                      std::to_string(d));
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<Index> s, Vector v)
    : shape(std::move(s)), values(std::move(v)) {
  if (shape_product(shape) != values.size())
    throw StructuralError("tensor shape " + shape_string(shape) +
                          " does not match buffer length " +
                          std::to_string(values.size()));
}

Index Tensor::dim(std::size_t i) const {
  if (i >= shape.size())
    throw StructuralError("tensor rank " + std::to_string(shape.size()) +
                          " has no dimension " + std::to_string(i));
  return shape[i];
}

MatrixMap Tensor::mat() {
  if (rank() != 2) throw StructuralError("rank-2 view of rank-" +
                                         std::to_string(rank()) + " tensor");
  return MatrixMap(values.data(), shape[0], shape[1]);
}

ConstMatrixMap Tensor::mat() const {
  if (rank() != 2) throw StructuralError("rank-2 view of rank-" +
                                         std::to_string(rank()) + " tensor");
  return ConstMatrixMap(values.data(), shape[0], shape[1]);
}

void Tensor::ensure_grad() {
  if (!grad) grad = Vector::Zero(values.size());
}

void Tensor::zero_grad() {
  if (grad) grad->setZero();
}

void Tensor::validate(const std::string& what) const {
  if (shape_product(shape) != values.size())
    throw StructuralError(what + ": shape " + shape_string(shape) +
                          " does not match buffer length " +
                          std::to_string(values.size()));
  if (grad && grad->size() != values.size())
    throw StructuralError(what + ": gradient length " +
                          std::to_string(grad->size()) +
                          " does not match value length " +
                          std::to_string(values.size()));
  require_finite(values, what);
  if (grad) require_finite(*grad, what + " gradient");
}

Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

std::string shape_string(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

void require_finite(const Vector& v, const std::string& what) {
  if (!v.allFinite())
    throw ValidationError(what + " contains a non-finite value");
}

}  // namespace hfl
