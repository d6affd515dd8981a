// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Small reverse-mode differentiation tape over dense double vectors and
// matrices. Values are row-major; vectors are columns (n x 1).

#ifndef RELIEF_GRAD_HPP_
#define RELIEF_GRAD_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace relief::grad {

class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols,
                                        fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  double& operator()(int r, int c) { return data_[r * cols_ + c]; }
  double operator()(int r, int c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Tensor&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Named trainable tensors. Ids are dense indices in insertion order.
class ParamSet {
 public:
  int add(std::string name, Tensor init);
  int find(std::string_view name) const;  // -1 when absent
  int id(std::string_view name) const;    // throws when absent
  const std::string& name(int id) const { return names_[id]; }
  Tensor& value(int id) { return values_[id]; }
  const Tensor& value(int id) const { return values_[id]; }
  int count() const { return static_cast<int>(values_.size()); }
  std::size_t total_size() const;

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

// Gradients aligned with ParamSet ids.
struct ParamGrads {
  std::vector<Tensor> g;
  static ParamGrads zeros_like(const ParamSet& p);
  void add(const ParamGrads& o, double scale = 1.0);
};

enum class Evaluation { kEager, kDeferred };

class Tape;

class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  int rows() const;
  int cols() const;
  std::size_t size() const;
  // Value view; invalidated by the next node added to the tape.
  std::span<const double> values() const;
  double value() const;  // requires a 1x1 node
  double at(std::size_t i) const;
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  explicit Tape(ParamSet* params, Evaluation mode = Evaluation::kEager);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Var constant(std::span<const double> v, int rows, int cols);
  Var constant(const std::vector<double>& v) {
    return constant(v, static_cast<int>(v.size()), 1);
  }
  Var scalar(double v);
  Var zeros(int rows, int cols = 1);
  Var param(int param_id);
  Var param(std::string_view name);

  // Elementwise; one operand may be 1x1 and is broadcast.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // y = a * x + b for constants a, b.
  Var affine(Var x, double a, double b = 0.0);
  Var scale(Var x, double a) { return affine(x, a, 0.0); }

  Var matvec(Var m, Var v);  // (r x c)(c x 1)
  Var column(Var m, int k);  // k-th column as a vector
  Var element(Var v, int i);
  Var dot(Var a, Var b);
  Var sum(Var a);
  Var concat(const std::vector<Var>& parts);

  Var relu(Var a);  // subgradient 0 at the kink
  Var exp(Var a);
  Var log(Var a);
  Var sin(Var a);
  Var square(Var a);
  Var sigmoid(Var a);
  Var normal_cdf(Var a);     // standard normal CDF via erf
  Var normal_log_sf(Var a);  // log(1 - Phi(a)), stable in the upper tail
  Var log1mexp(Var a);       // log(1 - e^a) for a < 0

  Var softmax(Var a);
  Var log_softmax(Var a);
  Var logsumexp(Var a);

  // Recomputes every node from the current parameter values.
  double forward(Var loss);
  void forward();
  // Accumulates adjoints of a scalar loss. Throws StateError when values
  // are stale (deferred mode before forward()).
  void backward(Var loss);
  // As above, additionally seeding the adjoints of `seeds[i].first` with
  // `seeds[i].second` (used to join separately differentiated subgraphs).
  void backward(Var loss,
                const std::vector<std::pair<Var, std::vector<double>>>& seeds);

  std::span<const double> grad(Var v) const;
  // Adjoints of every parameter node; zero for parameters not on the tape.
  ParamGrads param_grads() const;

  std::size_t node_count() const { return nodes_.size(); }
  ParamSet* params() const { return params_; }
  Evaluation mode() const { return mode_; }

 private:
  friend class Var;
  enum class Op : uint8_t {
    kConstant,
    kParam,
    kAdd,
    kSub,
    kMul,
    kAddBroadcast,  // b scalar
    kSubBroadcastA,  // a scalar minus vector b
    kSubBroadcastB,  // vector a minus scalar b
    kMulBroadcast,  // b scalar
    kAffine,
    kMatVec,
    kColumn,
    kElement,
    kDot,
    kSum,
    kConcat,
    kRelu,
    kExp,
    kLog,
    kSin,
    kSquare,
    kSigmoid,
    kNormalCdf,
    kNormalLogSf,
    kLog1mExp,
    kSoftmax,
    kLogSoftmax,
    kLogSumExp,
  };
  struct Node {
    Op op;
    int rows;
    int cols;
    std::size_t offset;  // into values_/grads_
    int a = -1;
    int b = -1;
    int extra_begin = 0;  // into extra_inputs_ for concat
    int extra_count = 0;
    double p0 = 0.0;
    double p1 = 0.0;
    int param_id = -1;
  };

  Var push(Op op, int rows, int cols, int a = -1, int b = -1);
  void eval(Node& n);
  void check_same(Var a, Var b, const char* op) const;
  double* val(int id) { return values_.data() + nodes_[id].offset; }
  const double* val(int id) const { return values_.data() + nodes_[id].offset; }
  std::size_t size_of(int id) const {
    return static_cast<std::size_t>(nodes_[id].rows) * nodes_[id].cols;
  }

  ParamSet* params_;
  Evaluation mode_;
  bool fresh_ = true;
  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<int> extra_inputs_;
  std::vector<int> param_nodes_;  // param id -> node id
};

// Adam with bias correction.
class Adam {
 public:
  explicit Adam(const ParamSet& params, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step(ParamSet& params, const ParamGrads& grads);
  int steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct GradCheckEntry {
  std::string param;
  double max_rel_error = 0.0;
  double analytic = 0.0;  // values at the worst entry
  double numeric = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_param;
  std::string worst_param;
  double max_rel_error = 0.0;
};

// Central finite differences against the tape's adjoints. At most
// max_entries elements per parameter are probed (evenly strided). Relative
// error uses max(|analytic|, |numeric|, abs_floor) as denominator.
GradCheckReport check_gradients(Tape& tape, Var loss, double step = 1e-5,
                                std::size_t max_entries = 0,
                                double abs_floor = 1e-6);

}  // namespace relief::grad

#endif  // RELIEF_GRAD_HPP_
