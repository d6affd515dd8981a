// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "relief/grad.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "relief/error.hpp"

namespace relief::grad {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

double NormalPdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// log(1 - Phi(x)) and d/dx of it.
void NormalLogSf(double x, double* value, double* deriv) {
  if (x < 30.0) {
    double sf = 0.5 * std::erfc(x * kInvSqrt2);
    *value = std::log(sf);
    *deriv = -NormalPdf(x) / sf;
    return;
  }
  // Asymptotic series of the Mills ratio.
  double x2 = x * x;
  double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  *value = -0.5 * x2 - std::log(x) - kHalfLog2Pi + std::log(series);
  *deriv = -x / series;
}

double Log1mExp(double a) {
  return a > -std::numbers::ln2 ? std::log(-std::expm1(a))
                                : std::log1p(-std::exp(a));
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int ParamSet::add(std::string name, Tensor init) {
  if (find(name) >= 0) throw ValidationError("duplicate parameter " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return count() - 1;
}

int ParamSet::find(std::string_view name) const {
  for (int i = 0; i < count(); ++i) {
    if (names_[i] == name) return i;
  }
  return -1;
}

int ParamSet::id(std::string_view name) const {
  int i = find(name);
  if (i < 0) throw ValidationError("unknown parameter " + std::string(name));
  return i;
}

std::size_t ParamSet::total_size() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

ParamGrads ParamGrads::zeros_like(const ParamSet& p) {
  ParamGrads g;
  for (int i = 0; i < p.count(); ++i) {
    g.g.emplace_back(p.value(i).rows(), p.value(i).cols());
  }
  return g;
}

void ParamGrads::add(const ParamGrads& o, double scale) {
  if (o.g.size() != g.size()) throw ShapeError("gradient sets differ");
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto& d = g[i].data();
    const auto& s = o.g[i].data();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] += scale * s[j];
  }
}

int Var::rows() const { return tape_->nodes_[id_].rows; }
int Var::cols() const { return tape_->nodes_[id_].cols; }
std::size_t Var::size() const { return tape_->size_of(id_); }
std::span<const double> Var::values() const {
  return {tape_->val(id_), size()};
}
double Var::value() const {
  if (size() != 1) throw ShapeError("value() on a non-scalar node");
  return *tape_->val(id_);
}
double Var::at(std::size_t i) const { return tape_->val(id_)[i]; }

Tape::Tape(ParamSet* params, Evaluation mode)
    : params_(params), mode_(mode), fresh_(mode == Evaluation::kEager) {
  if (params_) param_nodes_.assign(params_->count(), -1);
  nodes_.reserve(256);
  values_.reserve(4096);
}

Var Tape::push(Op op, int rows, int cols, int a, int b) {
  Node n;
  n.op = op;
  n.rows = rows;
  n.cols = cols;
  n.offset = values_.size();
  n.a = a;
  n.b = b;
  values_.resize(values_.size() + static_cast<std::size_t>(rows) * cols, 0.0);
  nodes_.push_back(n);
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::check_same(Var a, Var b, const char* op) const {
  if (a.tape_ != this || b.tape_ != this) {
    throw ShapeError(std::string(op) + ": operand from another tape");
  }
}

Var Tape::constant(std::span<const double> v, int rows, int cols) {
  if (static_cast<std::size_t>(rows) * cols != v.size()) {
    throw ShapeError("constant: size does not match shape");
  }
  Var out = push(Op::kConstant, rows, cols);
  std::copy(v.begin(), v.end(), val(out.id_));
  return out;
}

Var Tape::scalar(double v) { return constant(std::span<const double>(&v, 1), 1, 1); }

Var Tape::zeros(int rows, int cols) {
  return push(Op::kConstant, rows, cols);
}

Var Tape::param(int param_id) {
  if (!params_ || param_id < 0 || param_id >= params_->count()) {
    throw ShapeError("param: unknown id");
  }
  if (param_nodes_[param_id] >= 0) return Var(this, param_nodes_[param_id]);
  const Tensor& t = params_->value(param_id);
  Var out = push(Op::kParam, t.rows(), t.cols());
  nodes_[out.id_].param_id = param_id;
  std::copy(t.data().begin(), t.data().end(), val(out.id_));
  param_nodes_[param_id] = out.id_;
  return out;
}

Var Tape::param(std::string_view name) {
  if (!params_) throw ShapeError("tape has no parameter set");
  return param(params_->id(name));
}

namespace {
bool IsScalar(const Var& v) { return v.size() == 1; }
}  // namespace

Var Tape::add(Var a, Var b) {
  check_same(a, b, "add");
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    Var out = push(Op::kAdd, a.rows(), a.cols(), a.id_, b.id_);
    if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
    return out;
  }
  if (IsScalar(a)) std::swap(a, b);
  if (!IsScalar(b)) throw ShapeError("add: shape mismatch");
  Var out = push(Op::kAddBroadcast, a.rows(), a.cols(), a.id_, b.id_);
  if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
  return out;
}

Var Tape::sub(Var a, Var b) {
  check_same(a, b, "sub");
  Op op;
  int rows = a.rows(), cols = a.cols();
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    op = Op::kSub;
  } else if (IsScalar(b)) {
    op = Op::kSubBroadcastB;
  } else if (IsScalar(a)) {
    op = Op::kSubBroadcastA;
    rows = b.rows();
    cols = b.cols();
  } else {
    throw ShapeError("sub: shape mismatch");
  }
  Var out = push(op, rows, cols, a.id_, b.id_);
  if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
  return out;
}

Var Tape::mul(Var a, Var b) {
  check_same(a, b, "mul");
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    Var out = push(Op::kMul, a.rows(), a.cols(), a.id_, b.id_);
    if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
    return out;
  }
  if (IsScalar(a)) std::swap(a, b);
  if (!IsScalar(b)) throw ShapeError("mul: shape mismatch");
  Var out = push(Op::kMulBroadcast, a.rows(), a.cols(), a.id_, b.id_);
  if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
  return out;
}

Var Tape::affine(Var x, double a, double b) {
  Var out = push(Op::kAffine, x.rows(), x.cols(), x.id_);
  nodes_[out.id_].p0 = a;
  nodes_[out.id_].p1 = b;
  if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
  return out;
}

Var Tape::matvec(Var m, Var v) {
  check_same(m, v, "matvec");
  if (v.cols() != 1 || m.cols() != v.rows()) {
    throw ShapeError("matvec: (" + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ") times (" +
                     std::to_string(v.rows()) + "x" + std::to_string(v.cols()) +
                     ")");
  }
  Var out = push(Op::kMatVec, m.rows(), 1, m.id_, v.id_);
  if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
  return out;
}

Var Tape::column(Var m, int k) {
  if (k < 0 || k >= m.cols()) throw ShapeError("column: index out of range");
  Var out = push(Op::kColumn, m.rows(), 1, m.id_);
  nodes_[out.id_].p0 = k;
  if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
  return out;
}

Var Tape::element(Var v, int i) {
  if (i < 0 || static_cast<std::size_t>(i) >= v.size()) {
    throw ShapeError("element: index out of range");
  }
  Var out = push(Op::kElement, 1, 1, v.id_);
  nodes_[out.id_].p0 = i;
  if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
  return out;
}

Var Tape::dot(Var a, Var b) {
  check_same(a, b, "dot");
  if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
  Var out = push(Op::kDot, 1, 1, a.id_, b.id_);
  if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
  return out;
}

Var Tape::sum(Var a) {
  Var out = push(Op::kSum, 1, 1, a.id_);
  if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
  return out;
}

Var Tape::concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  int rows = 0;
  for (const auto& p : parts) {
    if (p.tape_ != this) throw ShapeError("concat: operand from another tape");
    rows += static_cast<int>(p.size());
  }
  int begin = static_cast<int>(extra_inputs_.size());
  for (const auto& p : parts) extra_inputs_.push_back(p.id_);
  Var out = push(Op::kConcat, rows, 1);
  nodes_[out.id_].extra_begin = begin;
  nodes_[out.id_].extra_count = static_cast<int>(parts.size());
  if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
  return out;
}

#define RELIEF_UNARY(fn, OP)                                  \
  Var Tape::fn(Var a) {                                       \
    Var out = push(Op::OP, a.rows(), a.cols(), a.id_);        \
    if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);   \
    return out;                                               \
  }
RELIEF_UNARY(relu, kRelu)
RELIEF_UNARY(exp, kExp)
RELIEF_UNARY(log, kLog)
RELIEF_UNARY(sin, kSin)
RELIEF_UNARY(square, kSquare)
RELIEF_UNARY(sigmoid, kSigmoid)
RELIEF_UNARY(normal_cdf, kNormalCdf)
RELIEF_UNARY(normal_log_sf, kNormalLogSf)
RELIEF_UNARY(log1mexp, kLog1mExp)
RELIEF_UNARY(softmax, kSoftmax)
RELIEF_UNARY(log_softmax, kLogSoftmax)
#undef RELIEF_UNARY

Var Tape::logsumexp(Var a) {
  Var out = push(Op::kLogSumExp, 1, 1, a.id_);
  if (mode_ == Evaluation::kEager) eval(nodes_[out.id_]);
  return out;
}

void Tape::eval(Node& n) {
  double* y = values_.data() + n.offset;
  const std::size_t size = static_cast<std::size_t>(n.rows) * n.cols;
  const double* x = n.a >= 0 ? val(n.a) : nullptr;
  const double* z = n.b >= 0 ? val(n.b) : nullptr;
  switch (n.op) {
    case Op::kConstant:
      break;
    case Op::kParam: {
      const auto& src = params_->value(n.param_id).data();
      std::copy(src.begin(), src.end(), y);
      break;
    }
    case Op::kAdd:
      for (std::size_t i = 0; i < size; ++i) y[i] = x[i] + z[i];
      break;
    case Op::kSub:
      for (std::size_t i = 0; i < size; ++i) y[i] = x[i] - z[i];
      break;
    case Op::kMul:
      for (std::size_t i = 0; i < size; ++i) y[i] = x[i] * z[i];
      break;
    case Op::kAddBroadcast:
      for (std::size_t i = 0; i < size; ++i) y[i] = x[i] + z[0];
      break;
    case Op::kSubBroadcastA:
      for (std::size_t i = 0; i < size; ++i) y[i] = x[0] - z[i];
      break;
    case Op::kSubBroadcastB:
      for (std::size_t i = 0; i < size; ++i) y[i] = x[i] - z[0];
      break;
    case Op::kMulBroadcast:
      for (std::size_t i = 0; i < size; ++i) y[i] = x[i] * z[0];
      break;
    case Op::kAffine:
      for (std::size_t i = 0; i < size; ++i) y[i] = n.p0 * x[i] + n.p1;
      break;
    case Op::kMatVec: {
      const Node& m = nodes_[n.a];
      for (int r = 0; r < m.rows; ++r) {
        const double* row = x + static_cast<std::size_t>(r) * m.cols;
        double acc = 0.0;
        for (int c = 0; c < m.cols; ++c) acc += row[c] * z[c];
        y[r] = acc;
      }
      break;
    }
    case Op::kColumn: {
      const Node& m = nodes_[n.a];
      const int k = static_cast<int>(n.p0);
      for (int r = 0; r < m.rows; ++r) y[r] = x[r * m.cols + k];
      break;
    }
    case Op::kElement:
      y[0] = x[static_cast<int>(n.p0)];
      break;
    case Op::kDot: {
      double acc = 0.0;
      for (std::size_t i = 0; i < size_of(n.a); ++i) acc += x[i] * z[i];
      y[0] = acc;
      break;
    }
    case Op::kSum: {
      double acc = 0.0;
      for (std::size_t i = 0; i < size_of(n.a); ++i) acc += x[i];
      y[0] = acc;
      break;
    }
    case Op::kConcat: {
      std::size_t pos = 0;
      for (int j = 0; j < n.extra_count; ++j) {
        int id = extra_inputs_[n.extra_begin + j];
        const double* src = val(id);
        std::size_t len = size_of(id);
        std::copy(src, src + len, y + pos);
        pos += len;
      }
      break;
    }
    case Op::kRelu:
      for (std::size_t i = 0; i < size; ++i) y[i] = x[i] > 0 ? x[i] : 0.0;
      break;
    case Op::kExp:
      for (std::size_t i = 0; i < size; ++i) y[i] = std::exp(x[i]);
      break;
    case Op::kLog:
      for (std::size_t i = 0; i < size; ++i) y[i] = std::log(x[i]);
      break;
    case Op::kSin:
      for (std::size_t i = 0; i < size; ++i) y[i] = std::sin(x[i]);
      break;
    case Op::kSquare:
      for (std::size_t i = 0; i < size; ++i) y[i] = x[i] * x[i];
      break;
    case Op::kSigmoid:
      for (std::size_t i = 0; i < size; ++i) y[i] = Sigmoid(x[i]);
      break;
    case Op::kNormalCdf:
      for (std::size_t i = 0; i < size; ++i) {
        y[i] = 0.5 * std::erfc(-x[i] * kInvSqrt2);
      }
      break;
    case Op::kNormalLogSf:
      for (std::size_t i = 0; i < size; ++i) {
        double d;
        NormalLogSf(x[i], &y[i], &d);
      }
      break;
    case Op::kLog1mExp:
      for (std::size_t i = 0; i < size; ++i) y[i] = Log1mExp(x[i]);
      break;
    case Op::kSoftmax:
    case Op::kLogSoftmax: {
      double mx = *std::max_element(x, x + size);
      double acc = 0.0;
      for (std::size_t i = 0; i < size; ++i) acc += std::exp(x[i] - mx);
      double lse = mx + std::log(acc);
      if (n.op == Op::kSoftmax) {
        for (std::size_t i = 0; i < size; ++i) y[i] = std::exp(x[i] - lse);
      } else {
        for (std::size_t i = 0; i < size; ++i) y[i] = x[i] - lse;
      }
      break;
    }
    case Op::kLogSumExp: {
      std::size_t len = size_of(n.a);
      double mx = *std::max_element(x, x + len);
      if (!std::isfinite(mx)) {
        y[0] = mx;
        break;
      }
      double acc = 0.0;
      for (std::size_t i = 0; i < len; ++i) acc += std::exp(x[i] - mx);
      y[0] = mx + std::log(acc);
      break;
    }
  }
}

void Tape::forward() {
  for (auto& n : nodes_) eval(n);
  fresh_ = true;
}

double Tape::forward(Var loss) {
  forward();
  return loss.value();
}

void Tape::backward(Var loss) { backward(loss, {}); }

void Tape::backward(
    Var loss, const std::vector<std::pair<Var, std::vector<double>>>& seeds) {
  if (!fresh_) throw StateError("backward called before forward");
  if (loss.tape_ != this || loss.size() != 1) {
    throw ShapeError("backward needs a scalar loss from this tape");
  }
  grads_.assign(values_.size(), 0.0);
  grads_[nodes_[loss.id_].offset] = 1.0;
  int top = loss.id_;
  for (const auto& [v, g] : seeds) {
    if (v.tape_ != this || g.size() != size_of(v.id_)) {
      throw ShapeError("backward seed does not match its node");
    }
    double* dst = grads_.data() + nodes_[v.id_].offset;
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    top = std::max(top, v.id_);
  }
  for (int id = top; id >= 0; --id) {
    const Node& n = nodes_[id];
    const std::size_t size = size_of(id);
    const double* gy = grads_.data() + n.offset;
    const double* y = val(id);
    double* gx = n.a >= 0 ? grads_.data() + nodes_[n.a].offset : nullptr;
    double* gz = n.b >= 0 ? grads_.data() + nodes_[n.b].offset : nullptr;
    const double* x = n.a >= 0 ? val(n.a) : nullptr;
    const double* z = n.b >= 0 ? val(n.b) : nullptr;
    switch (n.op) {
      case Op::kConstant:
      case Op::kParam:
        break;
      case Op::kAdd:
        for (std::size_t i = 0; i < size; ++i) {
          gx[i] += gy[i];
          gz[i] += gy[i];
        }
        break;
      case Op::kSub:
        for (std::size_t i = 0; i < size; ++i) {
          gx[i] += gy[i];
          gz[i] -= gy[i];
        }
        break;
      case Op::kMul:
        for (std::size_t i = 0; i < size; ++i) {
          gx[i] += gy[i] * z[i];
          gz[i] += gy[i] * x[i];
        }
        break;
      case Op::kAddBroadcast:
        for (std::size_t i = 0; i < size; ++i) {
          gx[i] += gy[i];
          gz[0] += gy[i];
        }
        break;
      case Op::kSubBroadcastA:
        for (std::size_t i = 0; i < size; ++i) {
          gx[0] += gy[i];
          gz[i] -= gy[i];
        }
        break;
      case Op::kSubBroadcastB:
        for (std::size_t i = 0; i < size; ++i) {
          gx[i] += gy[i];
          gz[0] -= gy[i];
        }
        break;
      case Op::kMulBroadcast:
        for (std::size_t i = 0; i < size; ++i) {
          gx[i] += gy[i] * z[0];
          gz[0] += gy[i] * x[i];
        }
        break;
      case Op::kAffine:
        for (std::size_t i = 0; i < size; ++i) gx[i] += n.p0 * gy[i];
        break;
      case Op::kMatVec: {
        const Node& m = nodes_[n.a];
        for (int r = 0; r < m.rows; ++r) {
          const double g = gy[r];
          if (g == 0.0) continue;
          const std::size_t base = static_cast<std::size_t>(r) * m.cols;
          for (int c = 0; c < m.cols; ++c) {
            gx[base + c] += g * z[c];
            gz[c] += g * x[base + c];
          }
        }
        break;
      }
      case Op::kColumn: {
        const Node& m = nodes_[n.a];
        const int k = static_cast<int>(n.p0);
        for (int r = 0; r < m.rows; ++r) gx[r * m.cols + k] += gy[r];
        break;
      }
      case Op::kElement:
        gx[static_cast<int>(n.p0)] += gy[0];
        break;
      case Op::kDot:
        for (std::size_t i = 0; i < size_of(n.a); ++i) {
          gx[i] += gy[0] * z[i];
          gz[i] += gy[0] * x[i];
        }
        break;
      case Op::kSum:
        for (std::size_t i = 0; i < size_of(n.a); ++i) gx[i] += gy[0];
        break;
      case Op::kConcat: {
        std::size_t pos = 0;
        for (int j = 0; j < n.extra_count; ++j) {
          int in = extra_inputs_[n.extra_begin + j];
          double* g = grads_.data() + nodes_[in].offset;
          std::size_t len = size_of(in);
          for (std::size_t i = 0; i < len; ++i) g[i] += gy[pos + i];
          pos += len;
        }
        break;
      }
      case Op::kRelu:
        for (std::size_t i = 0; i < size; ++i) {
          if (x[i] > 0) gx[i] += gy[i];
        }
        break;
      case Op::kExp:
        for (std::size_t i = 0; i < size; ++i) gx[i] += gy[i] * y[i];
        break;
      case Op::kLog:
        for (std::size_t i = 0; i < size; ++i) gx[i] += gy[i] / x[i];
        break;
      case Op::kSin:
        for (std::size_t i = 0; i < size; ++i) {
          gx[i] += gy[i] * std::cos(x[i]);
        }
        break;
      case Op::kSquare:
        for (std::size_t i = 0; i < size; ++i) gx[i] += 2.0 * gy[i] * x[i];
        break;
      case Op::kSigmoid:
        for (std::size_t i = 0; i < size; ++i) {
          gx[i] += gy[i] * y[i] * (1.0 - y[i]);
        }
        break;
      case Op::kNormalCdf:
        for (std::size_t i = 0; i < size; ++i) gx[i] += gy[i] * NormalPdf(x[i]);
        break;
      case Op::kNormalLogSf:
        for (std::size_t i = 0; i < size; ++i) {
          double v, d;
          NormalLogSf(x[i], &v, &d);
          gx[i] += gy[i] * d;
        }
        break;
      case Op::kLog1mExp:
        for (std::size_t i = 0; i < size; ++i) {
          gx[i] += gy[i] * (-1.0 / std::expm1(-x[i]));
        }
        break;
      case Op::kSoftmax: {
        double s = 0.0;
        for (std::size_t i = 0; i < size; ++i) s += gy[i] * y[i];
        for (std::size_t i = 0; i < size; ++i) gx[i] += y[i] * (gy[i] - s);
        break;
      }
      case Op::kLogSoftmax: {
        double s = 0.0;
        for (std::size_t i = 0; i < size; ++i) s += gy[i];
        for (std::size_t i = 0; i < size; ++i) {
          gx[i] += gy[i] - std::exp(y[i]) * s;
        }
        break;
      }
      case Op::kLogSumExp: {
        std::size_t len = size_of(n.a);
        if (!std::isfinite(y[0])) break;
        for (std::size_t i = 0; i < len; ++i) {
          gx[i] += gy[0] * std::exp(x[i] - y[0]);
        }
        break;
      }
    }
  }
}

std::span<const double> Tape::grad(Var v) const {
  if (grads_.size() != values_.size()) {
    throw StateError("no gradients; call backward first");
  }
  return {grads_.data() + nodes_[v.id_].offset, size_of(v.id_)};
}

ParamGrads Tape::param_grads() const {
  if (!params_) throw StateError("tape has no parameter set");
  ParamGrads out = ParamGrads::zeros_like(*params_);
  if (grads_.size() != values_.size()) return out;
  for (int p = 0; p < static_cast<int>(param_nodes_.size()); ++p) {
    int node = param_nodes_[p];
    if (node < 0) continue;
    const double* g = grads_.data() + nodes_[node].offset;
    std::copy(g, g + size_of(node), out.g[p].data().begin());
  }
  return out;
}

Adam::Adam(const ParamSet& params, double lr, double beta1, double beta2,
           double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (int i = 0; i < params.count(); ++i) {
    m_.emplace_back(params.value(i).rows(), params.value(i).cols());
    v_.emplace_back(params.value(i).rows(), params.value(i).cols());
  }
}

void Adam::step(ParamSet& params, const ParamGrads& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (int i = 0; i < params.count(); ++i) {
    auto& p = params.value(i).data();
    auto& m = m_[i].data();
    auto& v = v_[i].data();
    const auto& g = grads.g[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      p[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

GradCheckReport check_gradients(Tape& tape, Var loss, double step,
                                std::size_t max_entries, double abs_floor) {
  ParamSet* params = tape.params();
  if (!params) throw StateError("tape has no parameter set");
  tape.forward();
  tape.backward(loss);
  ParamGrads analytic = tape.param_grads();
  GradCheckReport report;
  for (int p = 0; p < params->count(); ++p) {
    auto& data = params->value(p).data();
    GradCheckEntry entry;
    entry.param = params->name(p);
    std::size_t n = data.size();
    std::size_t stride = 1;
    if (max_entries > 0 && n > max_entries) {
      stride = (n + max_entries - 1) / max_entries;
    }
    for (std::size_t j = 0; j < n; j += stride) {
      const double orig = data[j];
      data[j] = orig + step;
      double up = tape.forward(loss);
      data[j] = orig - step;
      double down = tape.forward(loss);
      data[j] = orig;
      double numeric = (up - down) / (2.0 * step);
      double a = analytic.g[p][j];
      double denom = std::max({std::fabs(a), std::fabs(numeric), abs_floor});
      double rel = std::fabs(a - numeric) / denom;
      ++entry.checked;
      if (rel > entry.max_rel_error || entry.checked == 1) {
        if (rel >= entry.max_rel_error) {
          entry.max_rel_error = rel;
          entry.analytic = a;
          entry.numeric = numeric;
        }
      }
    }
    if (entry.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_param = entry.param;
    }
    report.per_param.push_back(entry);
  }
  tape.forward();
  return report;
}

}  // namespace relief::grad
