#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace finsler {

// Dense row-major tensor with every index ranging over [0, dim).
template <class T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int dim, int rank, const T& fill = T{})
      : dim_(dim), rank_(rank), data_(power(dim, rank), fill) {}

  int dim() const { return dim_; }
  int rank() const { return rank_; }
  std::size_t size() const { return data_.size(); }

  template <class... I>
  T& operator()(I... idx) {
    return data_[offset({static_cast<int>(idx)...})];
  }
  template <class... I>
  const T& operator()(I... idx) const {
    return data_[offset({static_cast<int>(idx)...})];
  }
  T& at(std::span<const int> idx) { return data_[offset(idx)]; }
  const T& at(std::span<const int> idx) const { return data_[offset(idx)]; }

  T& operator[](std::size_t flat) { return data_[flat]; }
  const T& operator[](std::size_t flat) const { return data_[flat]; }
  std::span<T> flat() { return data_; }
  std::span<const T> flat() const { return data_; }

  // Multi-index of a flat offset.
  std::vector<int> unflatten(std::size_t flat) const {
    std::vector<int> idx(rank_);
    for (int p = rank_ - 1; p >= 0; --p) {
      idx[p] = static_cast<int>(flat % dim_);
      flat /= dim_;
    }
    return idx;
  }

  static std::size_t power(int dim, int rank) {
    std::size_t s = 1;
    for (int r = 0; r < rank; ++r) s *= static_cast<std::size_t>(dim);
    return s;
  }

 private:
  std::size_t offset(std::initializer_list<int> idx) const {
    return offset(std::span<const int>(idx.begin(), idx.size()));
  }
  std::size_t offset(std::span<const int> idx) const {
    std::size_t off = 0;
    for (int i : idx) off = off * dim_ + static_cast<std::size_t>(i);
    return off;
  }

  int dim_ = 0;
  int rank_ = 0;
  std::vector<T> data_;
};

using RealTensor = Tensor<double>;

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e));
  return m;
}

inline double max_abs(const RealTensor& t) { return max_abs(t.flat()); }

}  // namespace finsler
