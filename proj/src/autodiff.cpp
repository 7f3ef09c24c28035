#include "smd/autodiff.hpp"

#include <cmath>
#include <cstring>

#include "smd/errors.hpp"
#include "smd/kernels.hpp"
#include "smd/parallel.hpp"

namespace smd::ad {

double softplus_scalar(double x) {
  // log(1 + e^x), stable for large |x|.
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---- ParamStore -------------------------------------------------------------

int ParamStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name " + name);
  Param p;
  p.name = name;
  p.grad = Tensor(init.shape);
  p.value = std::move(init);
  params_.push_back(std::move(p));
  int id = static_cast<int>(params_.size()) - 1;
  index_[name] = id;
  return id;
}

int ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

long ParamStore::entry_count() const {
  long n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

std::vector<Tensor> ParamStore::make_grad_buffer() const {
  std::vector<Tensor> buf;
  buf.reserve(params_.size());
  for (const auto& p : params_) buf.emplace_back(p.value.shape);
  return buf;
}

void ParamStore::add_into_grads(const std::vector<Tensor>& buffer) {
  if (buffer.size() != params_.size()) throw ShapeMismatch("grad buffer size mismatch");
  for (size_t i = 0; i < params_.size(); ++i)
    for (size_t j = 0; j < buffer[i].data.size(); ++j) params_[i].grad.data[j] += buffer[i].data[j];
}

// ---- Tape -------------------------------------------------------------------

const Tensor& Value::val() const { return tape->node(id).out; }

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Value Tape::constant(Tensor t) {
  Node n;
  n.op = Op::kConstant;
  n.out = std::move(t);
  return Value{this, push(std::move(n))};
}

Value Tape::leaf(int param_index) {
  if (!store_) throw ConfigError("tape has no parameter store");
  if (param_index < 0 || param_index >= store_->size())
    throw IndexOutOfRange("leaf parameter index");
  Node n;
  n.op = Op::kLeaf;
  n.param = param_index;
  n.out = store_->at(param_index).value;
  return Value{this, push(std::move(n))};
}

namespace {

Tape* same_tape(Value a, Value b) {
  if (a.tape != b.tape) throw ShapeMismatch("values live on different tapes");
  return a.tape;
}

void require_same_shape(Value a, Value b, const char* what) {
  if (!a.val().same_shape(b.val()))
    throw ShapeMismatch(std::string(what) + " " + a.val().shape_str() + " vs " +
                        b.val().shape_str());
}

Value elementwise(Op op, Value a, Value b) {
  Tape* t = same_tape(a, b);
  require_same_shape(a, b, "elementwise op");
  Node n;
  n.op = op;
  n.in = {a.id, b.id};
  n.out = Tensor(a.val().shape);
  const auto& x = a.val().data;
  const auto& y = b.val().data;
  auto& o = n.out.data;
  switch (op) {
    case Op::kAdd:
      for (size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
      break;
    case Op::kSub:
      for (size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
      break;
    case Op::kMul:
      for (size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
      break;
    case Op::kDiv:
      for (size_t i = 0; i < o.size(); ++i) o[i] = x[i] / y[i];
      break;
    default:
      throw ConfigError("not an elementwise op");
  }
  return Value{t, t->push(std::move(n))};
}

}  // namespace

Value add(Value a, Value b) { return elementwise(Op::kAdd, a, b); }
Value sub(Value a, Value b) { return elementwise(Op::kSub, a, b); }
Value mul(Value a, Value b) { return elementwise(Op::kMul, a, b); }
Value div(Value a, Value b) { return elementwise(Op::kDiv, a, b); }

Value scale(Value a, double c) {
  Node n;
  n.op = Op::kScale;
  n.in = {a.id};
  n.c = c;
  n.out = Tensor(a.val().shape);
  for (size_t i = 0; i < n.out.data.size(); ++i) n.out.data[i] = c * a.val().data[i];
  return Value{a.tape, a.tape->push(std::move(n))};
}

Value add_scalar(Value a, double c) {
  Node n;
  n.op = Op::kAddScalar;
  n.in = {a.id};
  n.c = c;
  n.out = Tensor(a.val().shape);
  for (size_t i = 0; i < n.out.data.size(); ++i) n.out.data[i] = c + a.val().data[i];
  return Value{a.tape, a.tape->push(std::move(n))};
}

Value smul(Value scalar, Value x) {
  Tape* t = same_tape(scalar, x);
  if (scalar.val().numel() != 1) throw ShapeMismatch("smul scalar operand must have one entry");
  Node n;
  n.op = Op::kSmul;
  n.in = {scalar.id, x.id};
  n.out = Tensor(x.val().shape);
  double s = scalar.val().data[0];
  for (size_t i = 0; i < n.out.data.size(); ++i) n.out.data[i] = s * x.val().data[i];
  return Value{t, t->push(std::move(n))};
}

Value matmul(Value a, Value b) {
  Tape* t = same_tape(a, b);
  const Tensor& x = a.val();
  const Tensor& y = b.val();
  if (x.rank() != 2 || y.rank() != 2)
    throw ShapeMismatch("matmul operands must be rank 2, got " + x.shape_str() + " and " +
                        y.shape_str());
  if (x.shape[1] != y.shape[0])
    throw ShapeMismatch("matmul inner dimensions " + x.shape_str() + " x " + y.shape_str());
  Node n;
  n.op = Op::kMatmul;
  n.in = {a.id, b.id};
  n.out = Tensor({x.shape[0], y.shape[1]});
  kern::matmul(x.data.data(), y.data.data(), n.out.data.data(), x.shape[0], x.shape[1], y.shape[1],
               smd::threads());
  return Value{t, t->push(std::move(n))};
}

namespace {

Tensor transpose_tensor(const Tensor& x) {
  Tensor out({x.cols(), x.rows()});
  long r = x.rows(), c = x.cols();
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) out.data[j * r + i] = x.data[i * c + j];
  return out;
}

}  // namespace

Value transpose(Value a) {
  if (a.val().rank() != 2) throw ShapeMismatch("transpose expects rank 2");
  Node n;
  n.op = Op::kTranspose;
  n.in = {a.id};
  n.out = transpose_tensor(a.val());
  return Value{a.tape, a.tape->push(std::move(n))};
}

Value reshape(Value a, std::vector<long> shape) {
  Node n;
  n.op = Op::kReshape;
  n.in = {a.id};
  n.out = a.val().reshaped(std::move(shape));
  return Value{a.tape, a.tape->push(std::move(n))};
}

Value concat_cols(Value a, Value b) {
  Tape* t = same_tape(a, b);
  const Tensor& x = a.val();
  const Tensor& y = b.val();
  if (x.rows() != y.rows())
    throw ShapeMismatch("concat_cols rows " + x.shape_str() + " vs " + y.shape_str());
  long r = x.rows(), ca = x.cols(), cb = y.cols();
  Node n;
  n.op = Op::kConcatCols;
  n.in = {a.id, b.id};
  n.idx = {ca, cb};
  n.out = Tensor({r, ca + cb});
  for (long i = 0; i < r; ++i) {
    std::memcpy(n.out.data.data() + i * (ca + cb), x.data.data() + i * ca, ca * sizeof(double));
    std::memcpy(n.out.data.data() + i * (ca + cb) + ca, y.data.data() + i * cb,
                cb * sizeof(double));
  }
  return Value{t, t->push(std::move(n))};
}

Value slice_cols(Value a, long begin, long end) {
  const Tensor& x = a.val();
  if (begin < 0 || end > x.cols() || begin >= end)
    throw IndexOutOfRange("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) +
                          ") of " + x.shape_str());
  long r = x.rows(), c = x.cols(), w = end - begin;
  Node n;
  n.op = Op::kSliceCols;
  n.in = {a.id};
  n.idx = {begin, end};
  n.out = Tensor({r, w});
  for (long i = 0; i < r; ++i)
    std::memcpy(n.out.data.data() + i * w, x.data.data() + i * c + begin, w * sizeof(double));
  return Value{a.tape, a.tape->push(std::move(n))};
}

Value concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows of zero parts");
  Tape* t = parts[0].tape;
  long c = parts[0].val().cols();
  long r = 0;
  for (const Value& p : parts) {
    same_tape(parts[0], p);
    if (p.val().cols() != c) throw ShapeMismatch("concat_rows column mismatch");
    r += p.val().rows();
  }
  Node n;
  n.op = Op::kConcatRows;
  n.out = Tensor({r, c});
  long row = 0;
  for (const Value& p : parts) {
    n.in.push_back(p.id);
    const Tensor& x = p.val();
    std::memcpy(n.out.data.data() + row * c, x.data.data(), x.data.size() * sizeof(double));
    row += x.rows();
  }
  return Value{t, t->push(std::move(n))};
}

Value gather_rows(Value a, std::vector<long> indices) {
  const Tensor& x = a.val();
  long r = x.rows(), c = x.cols();
  for (long i : indices)
    if (i < 0 || i >= r) throw IndexOutOfRange("gather_rows index " + std::to_string(i));
  Node n;
  n.op = Op::kGatherRows;
  n.in = {a.id};
  n.out = Tensor({static_cast<long>(indices.size()), c});
  for (size_t p = 0; p < indices.size(); ++p)
    std::memcpy(n.out.data.data() + p * c, x.data.data() + indices[p] * c, c * sizeof(double));
  n.idx = std::move(indices);
  return Value{a.tape, a.tape->push(std::move(n))};
}

Value scatter_rows_overwrite(Value base, Value rows, std::vector<long> indices) {
  Tape* t = same_tape(base, rows);
  const Tensor& x = base.val();
  const Tensor& y = rows.val();
  if (x.cols() != y.cols()) throw ShapeMismatch("scatter_rows_overwrite column mismatch");
  if (y.rows() != static_cast<long>(indices.size()))
    throw ShapeMismatch("scatter_rows_overwrite needs one index per row");
  std::vector<char> hit(x.rows(), 0);
  for (long i : indices) {
    if (i < 0 || i >= x.rows()) throw IndexOutOfRange("scatter index " + std::to_string(i));
    if (hit[i]) throw IndexOutOfRange("scatter index " + std::to_string(i) + " repeated");
    hit[i] = 1;
  }
  long c = x.cols();
  Node n;
  n.op = Op::kScatterRowsOverwrite;
  n.in = {base.id, rows.id};
  n.out = x;
  for (size_t p = 0; p < indices.size(); ++p)
    std::memcpy(n.out.data.data() + indices[p] * c, y.data.data() + p * c, c * sizeof(double));
  n.idx = std::move(indices);
  return Value{t, t->push(std::move(n))};
}

Value exp(Value a) {
  Node n;
  n.op = Op::kExp;
  n.in = {a.id};
  n.out = Tensor(a.val().shape);
  for (size_t i = 0; i < n.out.data.size(); ++i) n.out.data[i] = std::exp(a.val().data[i]);
  return Value{a.tape, a.tape->push(std::move(n))};
}

Value softplus(Value a) {
  Node n;
  n.op = Op::kSoftplus;
  n.in = {a.id};
  n.out = Tensor(a.val().shape);
  for (size_t i = 0; i < n.out.data.size(); ++i) n.out.data[i] = softplus_scalar(a.val().data[i]);
  return Value{a.tape, a.tape->push(std::move(n))};
}

Value sum(Value a) {
  Node n;
  n.op = Op::kSum;
  n.in = {a.id};
  double s = 0;
  for (double x : a.val().data) s += x;
  n.out = Tensor::scalar(s);
  return Value{a.tape, a.tape->push(std::move(n))};
}

Value mean(Value a) {
  Node n;
  n.op = Op::kMean;
  n.in = {a.id};
  double s = 0;
  for (double x : a.val().data) s += x;
  n.out = Tensor::scalar(s / static_cast<double>(a.val().numel()));
  return Value{a.tape, a.tape->push(std::move(n))};
}

Value layer_norm(Value x, Value gain, Value bias) {
  Tape* t = same_tape(x, gain);
  same_tape(x, bias);
  const Tensor& v = x.val();
  long r = v.rows(), c = v.cols();
  if (gain.val().numel() != c || bias.val().numel() != c)
    throw ShapeMismatch("layer_norm gain/bias must have one entry per column");
  const double eps = 1e-5;
  Node n;
  n.op = Op::kLayerNorm;
  n.in = {x.id, gain.id, bias.id};
  n.out = Tensor({r, c});
  n.saved = Tensor({r, 2});  // per-row mean, rstd
  for (long i = 0; i < r; ++i) {
    const double* row = v.data.data() + i * c;
    double m = 0;
    for (long j = 0; j < c; ++j) m += row[j];
    m /= c;
    double var = 0;
    for (long j = 0; j < c; ++j) var += (row[j] - m) * (row[j] - m);
    var /= c;
    double rstd = 1.0 / std::sqrt(var + eps);
    n.saved.at(i, 0) = m;
    n.saved.at(i, 1) = rstd;
    for (long j = 0; j < c; ++j)
      n.out.at(i, j) = (row[j] - m) * rstd * gain.val().data[j] + bias.val().data[j];
  }
  return Value{t, t->push(std::move(n))};
}

Value softmax_lastdim(Value x) {
  const Tensor& v = x.val();
  long r = v.rows(), c = v.cols();
  Node n;
  n.op = Op::kSoftmaxLastDim;
  n.in = {x.id};
  n.out = Tensor(v.shape);
  for (long i = 0; i < r; ++i) {
    const double* row = v.data.data() + i * c;
    double mx = row[0];
    for (long j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0;
    for (long j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    for (long j = 0; j < c; ++j) n.out.data[i * c + j] = std::exp(row[j] - mx) / z;
  }
  return Value{x.tape, x.tape->push(std::move(n))};
}

Value squared_error(Value a, Value b) {
  Tape* t = same_tape(a, b);
  require_same_shape(a, b, "squared_error");
  Node n;
  n.op = Op::kSquaredError;
  n.in = {a.id, b.id};
  double s = 0;
  for (size_t i = 0; i < a.val().data.size(); ++i) {
    double d = a.val().data[i] - b.val().data[i];
    s += d * d;
  }
  n.out = Tensor::scalar(s);
  return Value{t, t->push(std::move(n))};
}

Value add_rowvec(Value x, Value v) {
  Tape* t = same_tape(x, v);
  long c = x.val().cols();
  if (v.val().numel() != c) throw ShapeMismatch("add_rowvec needs one entry per column");
  Node n;
  n.op = Op::kAddRowvec;
  n.in = {x.id, v.id};
  n.out = Tensor(x.val().shape);
  long r = x.val().rows();
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) n.out.data[i * c + j] = x.val().data[i * c + j] + v.val().data[j];
  return Value{t, t->push(std::move(n))};
}

Value mul_rowvec(Value x, Value v) {
  Tape* t = same_tape(x, v);
  long c = x.val().cols();
  if (v.val().numel() != c) throw ShapeMismatch("mul_rowvec needs one entry per column");
  Node n;
  n.op = Op::kMulRowvec;
  n.in = {x.id, v.id};
  n.out = Tensor(x.val().shape);
  long r = x.val().rows();
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) n.out.data[i * c + j] = x.val().data[i * c + j] * v.val().data[j];
  return Value{t, t->push(std::move(n))};
}

// ---- backward ---------------------------------------------------------------

namespace {

struct BackwardCtx {
  Tape* tape;
  std::vector<Tensor> grads;  // aligned with tape nodes; empty = not reached

  Tensor& grad_of(int id) {
    Tensor& g = grads[id];
    if (g.data.empty() && tape->node(id).out.numel() > 0) g = Tensor(tape->node(id).out.shape);
    return g;
  }
  bool reached(int id) const { return !grads[id].data.empty(); }
};

void backward_node(BackwardCtx& ctx, int id) {
  Tape& tape = *ctx.tape;
  Node& n = tape.node(id);
  if (!ctx.reached(id)) return;
  const Tensor& g = ctx.grads[id];

  auto in_val = [&](int slot) -> const Tensor& { return tape.node(n.in[slot]).out; };
  auto in_grad = [&](int slot) -> Tensor& { return ctx.grad_of(n.in[slot]); };

  switch (n.op) {
    case Op::kConstant:
    case Op::kLeaf:
      break;
    case Op::kAdd: {
      Tensor &ga = in_grad(0), &gb = in_grad(1);
      for (size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i];
        gb.data[i] += g.data[i];
      }
      break;
    }
    case Op::kSub: {
      Tensor &ga = in_grad(0), &gb = in_grad(1);
      for (size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i];
        gb.data[i] -= g.data[i];
      }
      break;
    }
    case Op::kMul: {
      const Tensor &a = in_val(0), &b = in_val(1);
      Tensor &ga = in_grad(0), &gb = in_grad(1);
      for (size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i] * b.data[i];
        gb.data[i] += g.data[i] * a.data[i];
      }
      break;
    }
    case Op::kDiv: {
      const Tensor &a = in_val(0), &b = in_val(1);
      Tensor &ga = in_grad(0), &gb = in_grad(1);
      for (size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i] / b.data[i];
        gb.data[i] -= g.data[i] * a.data[i] / (b.data[i] * b.data[i]);
      }
      break;
    }
    case Op::kScale: {
      Tensor& ga = in_grad(0);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += n.c * g.data[i];
      break;
    }
    case Op::kAddScalar: {
      Tensor& ga = in_grad(0);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
      break;
    }
    case Op::kSmul: {
      const Tensor& x = in_val(1);
      double s = in_val(0).data[0];
      Tensor &gs = in_grad(0), &gx = in_grad(1);
      double acc = 0;
      for (size_t i = 0; i < g.data.size(); ++i) {
        acc += g.data[i] * x.data[i];
        gx.data[i] += s * g.data[i];
      }
      gs.data[0] += acc;
      break;
    }
    case Op::kMatmul: {
      const Tensor &a = in_val(0), &b = in_val(1);
      long m = a.shape[0], k = a.shape[1], p = b.shape[1];
      // dA = g * B^T, dB = A^T * g
      Tensor bt = transpose_tensor(b);
      Tensor at = transpose_tensor(a);
      Tensor da({m, k}), db({k, p});
      kern::matmul(g.data.data(), bt.data.data(), da.data.data(), m, p, k, smd::threads());
      kern::matmul(at.data.data(), g.data.data(), db.data.data(), k, m, p, smd::threads());
      Tensor &ga = in_grad(0), &gb = in_grad(1);
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += da.data[i];
      for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += db.data[i];
      break;
    }
    case Op::kTranspose: {
      Tensor gt = transpose_tensor(g);
      Tensor& ga = in_grad(0);
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += gt.data[i];
      break;
    }
    case Op::kReshape: {
      Tensor& ga = in_grad(0);
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i];
      break;
    }
    case Op::kConcatCols: {
      long ca = n.idx[0], cb = n.idx[1];
      long r = n.out.rows();
      Tensor &ga = in_grad(0), &gb = in_grad(1);
      for (long i = 0; i < r; ++i) {
        for (long j = 0; j < ca; ++j) ga.data[i * ca + j] += g.data[i * (ca + cb) + j];
        for (long j = 0; j < cb; ++j) gb.data[i * cb + j] += g.data[i * (ca + cb) + ca + j];
      }
      break;
    }
    case Op::kSliceCols: {
      long begin = n.idx[0];
      long w = n.out.cols(), c = in_val(0).cols(), r = n.out.rows();
      Tensor& ga = in_grad(0);
      for (long i = 0; i < r; ++i)
        for (long j = 0; j < w; ++j) ga.data[i * c + begin + j] += g.data[i * w + j];
      break;
    }
    case Op::kConcatRows: {
      long c = n.out.cols();
      long row = 0;
      for (size_t s = 0; s < n.in.size(); ++s) {
        Tensor& gi = ctx.grad_of(n.in[s]);
        long ri = tape.node(n.in[s]).out.rows();
        for (long i = 0; i < ri * c; ++i) gi.data[i] += g.data[row * c + i];
        row += ri;
      }
      break;
    }
    case Op::kGatherRows: {
      long c = n.out.cols();
      Tensor& ga = in_grad(0);
      for (size_t p = 0; p < n.idx.size(); ++p) {
        double* dst = ga.data.data() + n.idx[p] * c;
        const double* src = g.data.data() + p * c;
        for (long j = 0; j < c; ++j) dst[j] += src[j];
      }
      break;
    }
    case Op::kScatterRowsOverwrite: {
      long c = n.out.cols();
      Tensor &gb = in_grad(0), &gr = in_grad(1);
      std::vector<char> replaced(n.out.rows(), 0);
      for (long i : n.idx) replaced[i] = 1;
      for (long i = 0; i < n.out.rows(); ++i)
        if (!replaced[i])
          for (long j = 0; j < c; ++j) gb.data[i * c + j] += g.data[i * c + j];
      for (size_t p = 0; p < n.idx.size(); ++p)
        for (long j = 0; j < c; ++j) gr.data[p * c + j] += g.data[n.idx[p] * c + j];
      break;
    }
    case Op::kExp: {
      Tensor& ga = in_grad(0);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * n.out.data[i];
      break;
    }
    case Op::kSoftplus: {
      const Tensor& x = in_val(0);
      Tensor& ga = in_grad(0);
      for (size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * sigmoid_scalar(x.data[i]);
      break;
    }
    case Op::kSum: {
      Tensor& ga = in_grad(0);
      double gs = g.data[0];
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += gs;
      break;
    }
    case Op::kMean: {
      Tensor& ga = in_grad(0);
      double gs = g.data[0] / static_cast<double>(ga.data.size());
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += gs;
      break;
    }
    case Op::kLayerNorm: {
      const Tensor& x = in_val(0);
      const Tensor& gain = in_val(1);
      long r = x.rows(), c = x.cols();
      Tensor &gx = in_grad(0), &gg = in_grad(1), &gb = in_grad(2);
      for (long i = 0; i < r; ++i) {
        double m = n.saved.at(i, 0), rstd = n.saved.at(i, 1);
        const double* xr = x.data.data() + i * c;
        const double* gr = g.data.data() + i * c;
        // dy through gain; xhat = (x - m) rstd
        double mean_gy = 0, mean_gyx = 0;
        for (long j = 0; j < c; ++j) {
          double xh = (xr[j] - m) * rstd;
          double gy = gr[j] * gain.data[j];
          mean_gy += gy;
          mean_gyx += gy * xh;
        }
        mean_gy /= c;
        mean_gyx /= c;
        for (long j = 0; j < c; ++j) {
          double xh = (xr[j] - m) * rstd;
          double gy = gr[j] * gain.data[j];
          gx.data[i * c + j] += (gy - mean_gy - xh * mean_gyx) * rstd;
          gg.data[j] += gr[j] * xh;
          gb.data[j] += gr[j];
        }
      }
      break;
    }
    case Op::kSoftmaxLastDim: {
      long r = n.out.rows(), c = n.out.cols();
      Tensor& ga = in_grad(0);
      for (long i = 0; i < r; ++i) {
        const double* y = n.out.data.data() + i * c;
        const double* gr = g.data.data() + i * c;
        double dot = 0;
        for (long j = 0; j < c; ++j) dot += gr[j] * y[j];
        for (long j = 0; j < c; ++j) ga.data[i * c + j] += y[j] * (gr[j] - dot);
      }
      break;
    }
    case Op::kSquaredError: {
      const Tensor &a = in_val(0), &b = in_val(1);
      Tensor &ga = in_grad(0), &gb = in_grad(1);
      double gs = g.data[0];
      for (size_t i = 0; i < a.data.size(); ++i) {
        double d = 2.0 * (a.data[i] - b.data[i]) * gs;
        ga.data[i] += d;
        gb.data[i] -= d;
      }
      break;
    }
    case Op::kAddRowvec: {
      long r = n.out.rows(), c = n.out.cols();
      Tensor &gx = in_grad(0), &gv = in_grad(1);
      for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j) {
          gx.data[i * c + j] += g.data[i * c + j];
          gv.data[j] += g.data[i * c + j];
        }
      break;
    }
    case Op::kMulRowvec: {
      const Tensor& x = in_val(0);
      const Tensor& v = in_val(1);
      long r = n.out.rows(), c = n.out.cols();
      Tensor &gx = in_grad(0), &gv = in_grad(1);
      for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j) {
          gx.data[i * c + j] += g.data[i * c + j] * v.data[j];
          gv.data[j] += g.data[i * c + j] * x.data[i * c + j];
        }
      break;
    }
  }
}

}  // namespace

void backward(Value loss, std::vector<Tensor>& grad_buffer) {
  Tape& tape = *loss.tape;
  if (loss.val().numel() != 1) throw NonScalarLoss("backward needs a scalar loss");
  BackwardCtx ctx{&tape, std::vector<Tensor>(tape.size())};
  ctx.grad_of(loss.id).data[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) backward_node(ctx, id);
  for (int id = 0; id <= loss.id; ++id) {
    const Node& n = tape.node(id);
    if (n.op == Op::kLeaf && ctx.reached(id)) {
      Tensor& dst = grad_buffer[n.param];
      const Tensor& src = ctx.grads[id];
      for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
    }
  }
}

void backward(Value loss) {
  const ParamStore* store = loss.tape->store();
  if (!store) throw ConfigError("tape has no parameter store");
  auto* mut = const_cast<ParamStore*>(store);
  std::vector<Tensor> buf = store->make_grad_buffer();
  backward(loss, buf);
  mut->add_into_grads(buf);
}

double finite_difference_check(ParamStore& store, const std::function<Value(Tape&)>& build,
                               double eps) {
  Tape tape(&store);
  Value loss = build(tape);
  std::vector<Tensor> analytic = store.make_grad_buffer();
  backward(loss, analytic);

  double worst = 0;
  for (long p = 0; p < store.size(); ++p) {
    Param& prm = store.at(p);
    for (size_t i = 0; i < prm.value.data.size(); ++i) {
      double saved = prm.value.data[i];
      prm.value.data[i] = saved + eps;
      Tape tp(&store);
      double up = build(tp).val().data[0];
      prm.value.data[i] = saved - eps;
      Tape tm(&store);
      double dn = build(tm).val().data[0];
      prm.value.data[i] = saved;
      double numeric = (up - dn) / (2.0 * eps);
      double analytic_v = analytic[p].data[i];
      double denom = std::max({std::fabs(analytic_v), std::fabs(numeric), 1e-8});
      worst = std::max(worst, std::fabs(analytic_v - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace smd::ad
