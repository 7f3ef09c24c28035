#pragma once

#include <string>
#include <vector>

namespace smd {

// Dense row-major tensor of doubles. Rank is dynamic, but most code treats a
// tensor as a (rows x cols) matrix where cols is the product of the trailing
// dimensions.
struct Tensor {
  std::vector<long> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<long> s);

  static Tensor zeros(std::vector<long> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<long> s, double v);
  static Tensor scalar(double v);

  long numel() const { return static_cast<long>(data.size()); }
  long rank() const { return static_cast<long>(shape.size()); }
  long rows() const;
  long cols() const;

  double& at(long i, long j) { return data[i * cols() + j]; }
  double at(long i, long j) const { return data[i * cols() + j]; }
  double& at3(long i, long j, long k);
  double at3(long i, long j, long k) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  Tensor reshaped(std::vector<long> s) const;
  std::string shape_str() const;
};

bool all_finite(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
long shape_numel(const std::vector<long>& s);

}  // namespace smd
