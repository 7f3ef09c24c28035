#include "smd/tensor.hpp"

#include <cmath>
#include <sstream>

#include "smd/errors.hpp"

namespace smd {

long shape_numel(const std::vector<long>& s) {
  long n = 1;
  for (long d : s) n *= d;
  return n;
}

Tensor::Tensor(std::vector<long> s) : shape(std::move(s)) {
  for (long d : shape)
    if (d < 0) throw ShapeMismatch("negative dimension in shape");
  data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
}

Tensor Tensor::full(std::vector<long> s, double v) {
  Tensor t(std::move(s));
  for (double& x : t.data) x = v;
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t({1, 1});
  t.data[0] = v;
  return t;
}

long Tensor::rows() const { return shape.empty() ? 1 : shape[0]; }

long Tensor::cols() const {
  if (shape.empty()) return 1;
  long c = 1;
  for (size_t i = 1; i < shape.size(); ++i) c *= shape[i];
  return c;
}

double& Tensor::at3(long i, long j, long k) {
  long d1 = shape[1], d2 = shape[2];
  return data[(i * d1 + j) * d2 + k];
}

double Tensor::at3(long i, long j, long k) const {
  long d1 = shape[1], d2 = shape[2];
  return data[(i * d1 + j) * d2 + k];
}

Tensor Tensor::reshaped(std::vector<long> s) const {
  if (shape_numel(s) != numel())
    throw ShapeMismatch("reshape from " + shape_str() + " changes element count");
  Tensor t;
  t.shape = std::move(s);
  t.data = data;
  return t;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

bool all_finite(const Tensor& t) {
  for (double x : t.data)
    if (!std::isfinite(x)) return false;
  return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("max_abs_diff " + a.shape_str() + " vs " + b.shape_str());
  double m = 0;
  for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace smd
