/* Copyright 2026 The Crossgate Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef CROSSGATE_TENSOR_HPP_
#define CROSSGATE_TENSOR_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossgate {

// Dense row-major double tensor. Training math runs in float64 throughout so
// finite-difference gradient verification is meaningful.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape)
      : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}
  Tensor(std::vector<int64_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != checked_numel(shape_))
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }
  static Tensor row(std::vector<double> values) {
    const int64_t n = static_cast<int64_t>(values.size());
    return Tensor({1, n}, std::move(values));
  }

  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_.at(i); }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  // Rank-2 accessors; most graph ops treat tensors as matrices.
  int64_t rows() const { require_rank(2); return shape_[0]; }
  int64_t cols() const { require_rank(2); return shape_[1]; }
  double& at(int64_t r, int64_t c) { return data_[r * shape_[1] + c]; }
  double at(int64_t r, int64_t c) const { return data_[r * shape_[1] + c]; }

  double& operator[](int64_t i) { return data_[i]; }
  double operator[](int64_t i) const { return data_[i]; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  double item() const {
    if (numel() != 1) throw std::logic_error("Tensor::item on non-scalar");
    return data_[0];
  }

  Tensor reshaped(std::vector<int64_t> shape) const {
    Tensor t(std::move(shape), data_);
    return t;
  }

  std::string shape_str() const;

 private:
  static int64_t checked_numel(const std::vector<int64_t>& shape);
  void require_rank(int r) const {
    if (ndim() != r) throw std::logic_error("Tensor: rank " + std::to_string(r) +
                                            " required, have " + shape_str());
  }

  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

// Single deterministic RNG; every random draw in a run flows through one
// seeded instance owned by the caller.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  double uniform() { return uni_(eng_); }                    // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return norm_(eng_); }
  int64_t index(int64_t n) {
    return static_cast<int64_t>(eng_() % static_cast<uint64_t>(n));
  }
  std::mt19937_64& engine() { return eng_; }

  Tensor normal_tensor(std::vector<int64_t> shape, double stddev) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = normal() * stddev;
    return t;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(index(static_cast<int64_t>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 eng_;
  std::uniform_real_distribution<double> uni_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

// FNV-1a over raw bytes; used for parameter freeze checks and manifest hashes.
uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull);
uint64_t hash_tensor(const Tensor& t);

// SplitMix64; derives independent per-clip seeds from (seed, domain, label, index).
uint64_t mix64(uint64_t x);

}  // namespace crossgate

#endif  // CROSSGATE_TENSOR_HPP_
