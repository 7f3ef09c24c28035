#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "smd/tensor.hpp"

namespace smd::ad {

// Named trainable leaf with a gradient slot.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Registry of all trainable leaves, in registration order. Gradient
// accumulation and optimizer updates iterate this order, so results are
// deterministic.
class ParamStore {
 public:
  int add(const std::string& name, Tensor init);
  int find(const std::string& name) const;  // -1 when absent
  Param& at(int i) { return params_[i]; }
  const Param& at(int i) const { return params_[i]; }
  long size() const { return static_cast<long>(params_.size()); }
  long entry_count() const;
  void zero_grads();
  std::vector<Tensor> make_grad_buffer() const;
  void add_into_grads(const std::vector<Tensor>& buffer);

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, int> index_;
};

enum class Op {
  kConstant,
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,      // constant scalar multiply
  kAddScalar,  // constant scalar add
  kSmul,       // 1x1 value times tensor
  kMatmul,
  kTranspose,
  kReshape,
  kConcatCols,
  kSliceCols,
  kConcatRows,
  kGatherRows,
  kScatterRowsOverwrite,
  kExp,
  kSoftplus,
  kSum,
  kMean,
  kLayerNorm,
  kSoftmaxLastDim,
  kSquaredError,
  kAddRowvec,
  kMulRowvec,
};

struct Node {
  Op op;
  std::vector<int> in;
  Tensor out;
  double c = 0;            // Scale / AddScalar constant
  std::vector<long> idx;   // gather/scatter indices, slice bounds
  Tensor saved;            // layer_norm per-row (mean, rstd)
  int param = -1;          // Leaf
};

class Tape;

// Lightweight handle to a node on a tape.
struct Value {
  Tape* tape = nullptr;
  int id = -1;
  const Tensor& val() const;
  long rows() const { return val().rows(); }
  long cols() const { return val().cols(); }
};

// Append-only operation record. One tape per training item / forward pass;
// tapes are not shared across threads.
class Tape {
 public:
  explicit Tape(const ParamStore* store = nullptr) : store_(store) {}

  Value constant(Tensor t);
  Value leaf(int param_index);  // snapshots the current parameter value

  void clear() { nodes_.clear(); }
  long size() const { return static_cast<long>(nodes_.size()); }
  Node& node(int id) { return nodes_[id]; }
  const Node& node(int id) const { return nodes_[id]; }
  const ParamStore* store() const { return store_; }

  int push(Node n);

 private:
  const ParamStore* store_ = nullptr;
  std::vector<Node> nodes_;
};

// ---- primitives ------------------------------------------------------------
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value div(Value a, Value b);
Value scale(Value a, double c);
Value add_scalar(Value a, double c);
Value smul(Value scalar, Value x);
Value matmul(Value a, Value b);
Value transpose(Value a);
Value reshape(Value a, std::vector<long> shape);
Value concat_cols(Value a, Value b);
Value slice_cols(Value a, long begin, long end);
Value concat_rows(const std::vector<Value>& parts);
Value gather_rows(Value a, std::vector<long> indices);
Value scatter_rows_overwrite(Value base, Value rows, std::vector<long> indices);
Value exp(Value a);
Value softplus(Value a);
Value sum(Value a);
Value mean(Value a);
Value layer_norm(Value x, Value gain, Value bias);
Value softmax_lastdim(Value x);
Value squared_error(Value a, Value b);  // sum of squared differences
Value add_rowvec(Value x, Value v);
Value mul_rowvec(Value x, Value v);

// Reverse pass from a scalar loss. Gradients of leaves accumulate into the
// given buffer (aligned with the tape's ParamStore) or directly into the
// store's grad slots. Leaves with no path to the loss receive exactly 0.
void backward(Value loss, std::vector<Tensor>& grad_buffer);
void backward(Value loss);

// Central-difference gradient oracle. Runs backward once, then perturbs every
// parameter entry by +/-eps and compares. Returns the worst relative error
// with denominator max(|analytic|, |numeric|, 1e-8).
double finite_difference_check(ParamStore& store, const std::function<Value(Tape&)>& build,
                               double eps = 1e-6);

// Scalar helpers used by math code built on top of the primitives.
double softplus_scalar(double x);
double sigmoid_scalar(double x);

}  // namespace smd::ad
