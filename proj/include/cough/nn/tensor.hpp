#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cough::nn {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMat =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense n-d value with an optional same-shape gradient accumulator.
// Data is stored flat in row-major order of `shape`.
template <typename Scalar>
struct Tensor {
  std::vector<int> shape;
  Vec<Scalar> values;
  Vec<Scalar> grad;
  bool requires_grad = false;

  Tensor() = default;

  explicit Tensor(std::vector<int> dims, bool with_grad = false)
      : shape(std::move(dims)) {
    values = Vec<Scalar>::Zero(size_of(shape));
    requires_grad = with_grad;
    if (with_grad) grad = Vec<Scalar>::Zero(values.size());
  }

  static Eigen::Index size_of(const std::vector<int>& dims) {
    Eigen::Index n = 1;
    for (int d : dims) n *= d;
    return n;
  }

  Eigen::Index size() const { return values.size(); }
  int dim(std::size_t i) const { return shape.at(i); }

  void zero_grad() {
    if (requires_grad) grad.setZero();
  }

  // Row-major [rows x cols] view of the flat storage.
  auto as_matrix(Eigen::Index rows, Eigen::Index cols) {
    assert(rows * cols == values.size());
    return Eigen::Map<RowMat<Scalar>>(values.data(), rows, cols);
  }
  auto as_matrix(Eigen::Index rows, Eigen::Index cols) const {
    assert(rows * cols == values.size());
    return Eigen::Map<const RowMat<Scalar>>(values.data(), rows, cols);
  }
  auto grad_as_matrix(Eigen::Index rows, Eigen::Index cols) {
    assert(rows * cols == grad.size());
    return Eigen::Map<RowMat<Scalar>>(grad.data(), rows, cols);
  }

  bool all_finite() const {
    return values.allFinite() && (!requires_grad || grad.allFinite());
  }
};

template <typename Scalar>
struct NamedParam {
  std::string name;
  Tensor<Scalar>* tensor = nullptr;
};

// Non-learned state saved with checkpoints (batchnorm running stats).
template <typename Scalar>
struct NamedBuffer {
  std::string name;
  Vec<Scalar>* values = nullptr;
};

}  // namespace cough::nn
