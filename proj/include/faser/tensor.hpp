#pragma once

// Minimal 2D row-major float tensor. All model math runs in 32-bit floats;
// Eigen maps provide the GEMM paths without owning any storage.

#include <algorithm>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "faser/types.hpp"

namespace faser {

struct Tensor {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(size_t r, size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

  static Tensor zeros(size_t r, size_t c) { return Tensor(r, c, 0.0f); }
  static Tensor ones(size_t r, size_t c) { return Tensor(r, c, 1.0f); }

  static Tensor randn(size_t r, size_t c, std::mt19937& rng, float stddev) {
    Tensor t(r, c);
    std::normal_distribution<float> dist(0.0f, stddev);
    for (float& v : t.data) v = dist(rng);
    return t;
  }

  float& at(size_t r, size_t c) { return data[r * cols + c]; }
  float at(size_t r, size_t c) const { return data[r * cols + c]; }
  float* row(size_t r) { return data.data() + r * cols; }
  const float* row(size_t r) const { return data.data() + r * cols; }
  size_t size() const { return data.size(); }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  void fill(float v) { std::fill(data.begin(), data.end(), v); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

using EMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMatrix>;
using ECMap = Eigen::Map<const EMatrix>;

inline EMap emap(Tensor& t) {
  return EMap(t.data.data(), static_cast<Eigen::Index>(t.rows),
              static_cast<Eigen::Index>(t.cols));
}

inline ECMap emap(const Tensor& t) {
  return ECMap(t.data.data(), static_cast<Eigen::Index>(t.rows),
               static_cast<Eigen::Index>(t.cols));
}

inline void check_shape(const Tensor& t, size_t rows, size_t cols, const char* what) {
  if (t.rows != rows || t.cols != cols)
    throw ContractError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", got " + std::to_string(t.rows) + "x" +
                        std::to_string(t.cols));
}

}  // namespace faser
