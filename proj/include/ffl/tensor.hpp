#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ffl {

using Index = Eigen::Index;
using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<MatrixRM>;
using ConstMatrixMap = Eigen::Map<const MatrixRM>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

/// Dense n-dimensional array of doubles, row-major.
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(std::vector<Index> shape)
      : shape_(std::move(shape)), data_(Eigen::VectorXd::Zero(count(shape_))) {}

  Tensor(std::vector<Index> shape, Eigen::VectorXd data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_))
      throw std::invalid_argument("tensor data length does not match shape");
  }

  static Tensor zeros(std::vector<Index> shape) { return Tensor(std::move(shape)); }

  static Tensor scalar(double v) {
    Tensor t({1});
    t.data_[0] = v;
    return t;
  }

  const std::vector<Index>& shape() const { return shape_; }
  Index ndim() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index dim(std::size_t i) const { return shape_.at(i); }

  Eigen::VectorXd& data() { return data_; }
  const Eigen::VectorXd& data() const { return data_; }

  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }

  /// View as (rows x cols) row-major matrix; product must equal size().
  MatrixMap matrix(Index rows, Index cols) {
    if (rows * cols != size()) throw std::invalid_argument("matrix view shape mismatch");
    return MatrixMap(data_.data(), rows, cols);
  }
  ConstMatrixMap matrix(Index rows, Index cols) const {
    if (rows * cols != size()) throw std::invalid_argument("matrix view shape mismatch");
    return ConstMatrixMap(data_.data(), rows, cols);
  }

  /// 2-d tensors viewed with their own shape.
  MatrixMap matrix() {
    if (ndim() != 2) throw std::invalid_argument("matrix() requires a 2-d tensor");
    return matrix(shape_[0], shape_[1]);
  }
  ConstMatrixMap matrix() const {
    if (ndim() != 2) throw std::invalid_argument("matrix() requires a 2-d tensor");
    return matrix(shape_[0], shape_[1]);
  }

  bool allFinite() const { return data_.allFinite(); }

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && data_.size() == o.data_.size() &&
           std::equal(data_.data(), data_.data() + data_.size(), o.data_.data());
  }

  static Index count(const std::vector<Index>& shape) {
    Index n = 1;
    for (Index d : shape) {
      if (d <= 0) throw std::invalid_argument("tensor dims must be positive");
      n *= d;
    }
    return n;
  }

private:
  std::vector<Index> shape_;
  Eigen::VectorXd data_;
};

/// Named parameter map; ordered keys give deterministic iteration.
using Parameters = std::map<std::string, Tensor>;

inline bool sameShapes(const Parameters& a, const Parameters& b) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.shape() != ib->second.shape()) return false;
  }
  return true;
}

}  // namespace ffl
