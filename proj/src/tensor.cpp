#include "ranet/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ranet {

std::size_t numel_of(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape " + shape_str(shape) + " has a non-positive dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0f) {}

Tensor::Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
  if (numel_of(shape) != data.size())
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
}

Tensor Tensor::full(std::vector<int> s, float v) {
  Tensor t(std::move(s));
  std::fill(t.data.begin(), t.data.end(), v);
  return t;
}

float& Tensor::at(int n, int c, int h, int w) {
  const int C = shape[1], H = shape[2], W = shape[3];
  return data[static_cast<std::size_t>(((n * C + c) * H + h)) * W + w];
}

float Tensor::at(int n, int c, int h, int w) const {
  const int C = shape[1], H = shape[2], W = shape[3];
  return data[static_cast<std::size_t>(((n * C + c) * H + h)) * W + w];
}

bool Tensor::all_finite() const {
  for (float v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace ranet
