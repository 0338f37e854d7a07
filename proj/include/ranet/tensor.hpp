#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ranet {

// N-dimensional row-major float array. Image batches use NCHW layout
// (batch x channels x height x width).
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, std::vector<float> d);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, float v);
  static Tensor scalar(float v) { return full({1}, v); }

  std::size_t numel() const { return data.size(); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }

  // NCHW element access, for tests and small utilities. Hot loops index raw
  // pointers instead.
  float& at(int n, int c, int h, int w);
  float at(int n, int c, int h, int w) const;

  bool all_finite() const;
};

std::size_t numel_of(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

}  // namespace ranet
