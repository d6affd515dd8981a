#include <cmath>
#include <random>

#include "doctest.h"
#include "relief/error.hpp"
#include "relief/grad.hpp"

using namespace relief;
using namespace relief::grad;

namespace {

Tensor Vec(std::initializer_list<double> v) {
  Tensor t(static_cast<int>(v.size()), 1);
  int i = 0;
  for (double x : v) t[i++] = x;
  return t;
}

Tensor RandomTensor(std::mt19937_64& rng, int r, int c, double scale = 0.5) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(r, c);
  for (auto& v : t.data()) v = n(rng);
  return t;
}

}  // namespace

TEST_CASE("forward values of small graphs") {
  ParamSet ps;
  int x = ps.add("x", Vec({3.0}));
  Tape tape(&ps);
  CHECK(tape.param(x).value() == 3.0);

  ps.value(x)[0] = 2.5;
  Tape t2(&ps);
  CHECK(t2.exp(t2.log(t2.param(x))).value() == doctest::Approx(2.5).epsilon(1e-15));

  Tape t3(nullptr);
  auto sm = t3.softmax(t3.constant({0.0, 0.0}));
  CHECK(sm.at(0) == 0.5);
  CHECK(sm.at(1) == 0.5);
}

TEST_CASE("derivatives of elementary functions") {
  ParamSet ps;
  int x = ps.add("x", Vec({3.0}));
  {
    Tape tape(&ps);
    auto y = tape.square(tape.param(x));
    tape.backward(y);
    CHECK(tape.param_grads().g[x][0] == doctest::Approx(6.0));
  }
  ps.value(x)[0] = 0.0;
  {
    Tape tape(&ps);
    auto y = tape.sin(tape.param(x));
    tape.backward(y);
    CHECK(tape.param_grads().g[x][0] == doctest::Approx(1.0));
  }
  {
    Tape tape(&ps);
    auto y = tape.relu(tape.param(x));
    tape.backward(y);
    CHECK(tape.param_grads().g[x][0] == 0.0);
  }
}

TEST_CASE("deferred tapes refuse stale backward") {
  ParamSet ps;
  int x = ps.add("x", Vec({1.0}));
  Tape tape(&ps, Evaluation::kDeferred);
  auto y = tape.exp(tape.param(x));
  CHECK_THROWS_AS(tape.backward(y), StateError);
  CHECK(tape.forward(y) == doctest::Approx(std::exp(1.0)));
  tape.backward(y);
  CHECK(tape.param_grads().g[x][0] == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("shape mismatches throw") {
  Tape tape(nullptr);
  auto a = tape.constant({1.0, 2.0});
  auto b = tape.constant({1.0, 2.0, 3.0});
  CHECK_THROWS_AS(tape.add(a, b), ShapeError);
  CHECK_THROWS_AS(tape.dot(a, b), ShapeError);
}

TEST_CASE("linear model gradient check is exact") {
  std::mt19937_64 rng(1);
  ParamSet ps;
  int W = ps.add("W", RandomTensor(rng, 3, 4));
  int b = ps.add("b", RandomTensor(rng, 3, 1));
  Tape tape(&ps, Evaluation::kDeferred);
  auto x = tape.constant({0.3, -1.2, 0.7, 2.0});
  auto y = tape.sum(tape.add(tape.matvec(tape.param(W), x), tape.param(b)));
  auto rep = check_gradients(tape, y);
  CHECK(rep.max_rel_error < 1e-8);
  CHECK(rep.per_param.size() == 2);
}

TEST_CASE("two-step relu RNN gradient check") {
  std::mt19937_64 rng(4);
  ParamSet ps;
  int U = ps.add("U", RandomTensor(rng, 4, 4));
  int V = ps.add("V", RandomTensor(rng, 4, 2));
  int c = ps.add("c", RandomTensor(rng, 4, 1));
  Tape tape(&ps, Evaluation::kDeferred);
  auto step = [&](Var h, Var in) {
    return tape.relu(tape.add(
        tape.add(tape.matvec(tape.param(U), h), tape.matvec(tape.param(V), in)),
        tape.param(c)));
  };
  auto h = tape.constant({0.1, -0.2, 0.3, 0.05});
  h = step(h, tape.constant({1.0, -0.5}));
  h = step(h, tape.constant({0.2, 0.8}));
  auto loss = tape.logsumexp(h);
  tape.forward(loss);
  auto rep = check_gradients(tape, loss);
  CHECK(rep.max_rel_error < 1e-3);
}

TEST_CASE("op-by-op finite-difference checks") {
  std::mt19937_64 rng(7);
  ParamSet ps;
  int a = ps.add("a", RandomTensor(rng, 5, 1));
  int b = ps.add("b", RandomTensor(rng, 5, 1));
  Tape tape(&ps, Evaluation::kDeferred);
  auto pa = tape.param(a);
  auto pb = tape.param(b);
  std::vector<Var> terms;
  terms.push_back(tape.sum(tape.mul(pa, pb)));
  terms.push_back(tape.dot(tape.softmax(pa), pb));
  terms.push_back(tape.sum(tape.log_softmax(pb)));
  terms.push_back(tape.sum(tape.sigmoid(pa)));
  terms.push_back(tape.sum(tape.normal_cdf(pb)));
  terms.push_back(tape.sum(tape.normal_log_sf(tape.affine(pa, 3.0, 1.0))));
  terms.push_back(tape.sum(tape.log1mexp(tape.affine(tape.square(pb), -1.0, -0.1))));
  terms.push_back(tape.mul(tape.element(pa, 2), tape.element(pb, 3)));
  terms.push_back(tape.sum(tape.sub(tape.exp(pa), tape.scalar(2.0))));
  terms.push_back(tape.sum(tape.concat({pa, tape.sin(pb)})));
  auto loss = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) loss = tape.add(loss, terms[i]);
  tape.forward(loss);
  auto rep = check_gradients(tape, loss);
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("gradient of a sum is the sum of gradients") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    ParamSet ps;
    int M = ps.add("M", RandomTensor(rng, 3, 3));
    int v = ps.add("v", RandomTensor(rng, 3, 1));
    auto build_f = [&](Tape& t) {
      return t.logsumexp(t.matvec(t.param(M), t.sin(t.param(v))));
    };
    auto build_g = [&](Tape& t) {
      return t.sum(t.square(t.matvec(t.param(M), t.param(v))));
    };
    Tape tf(&ps), tg(&ps), tfg(&ps);
    auto f = build_f(tf);
    auto g = build_g(tg);
    auto fg = tfg.add(build_f(tfg), build_g(tfg));
    tf.backward(f);
    tg.backward(g);
    tfg.backward(fg);
    auto sum = tf.param_grads();
    sum.add(tg.param_grads());
    auto joint = tfg.param_grads();
    for (int p = 0; p < ps.count(); ++p) {
      for (std::size_t i = 0; i < joint.g[p].size(); ++i) {
        CHECK(joint.g[p][i] == doctest::Approx(sum.g[p][i]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("seeded backward joins separate subgraphs") {
  std::mt19937_64 rng(21);
  ParamSet ps;
  int M = ps.add("M", RandomTensor(rng, 3, 3));
  int v = ps.add("v", RandomTensor(rng, 3, 1));
  // Single graph: loss = sum(sigmoid(M v)) + logsumexp(M relu(M v)).
  Tape whole(&ps);
  auto h = whole.sigmoid(whole.matvec(whole.param(M), whole.param(v)));
  auto tail = whole.logsumexp(whole.matvec(whole.param(M), whole.relu(h)));
  whole.backward(whole.add(whole.sum(h), tail));

  Tape head(&ps);
  auto h1 = head.sigmoid(head.matvec(head.param(M), head.param(v)));
  auto head_loss = head.sum(h1);
  Tape rest(&ps);
  std::vector<double> hv(h1.values().begin(), h1.values().end());
  auto h2 = rest.constant(hv);
  auto rest_loss = rest.logsumexp(rest.matvec(rest.param(M), rest.relu(h2)));
  rest.backward(rest_loss);
  std::vector<double> adj(rest.grad(h2).begin(), rest.grad(h2).end());
  head.backward(head_loss, {{h1, adj}});
  auto joined = head.param_grads();
  joined.add(rest.param_grads());
  auto expect = whole.param_grads();
  for (int p = 0; p < ps.count(); ++p) {
    for (std::size_t i = 0; i < expect.g[p].size(); ++i) {
      CHECK(joined.g[p][i] == doctest::Approx(expect.g[p][i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax normalization and normal CDF limits") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + trial % 9);
    for (double& x : v) x = n(rng);
    Tape tape(nullptr);
    auto s = tape.softmax(tape.constant(v));
    double total = 0.0;
    for (double p : s.values()) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(std::fabs(total - 1.0) < 1e-12);
  }
  Tape tape(nullptr);
  auto hi = tape.normal_cdf(tape.scalar(40.0));
  auto lo = tape.normal_cdf(tape.scalar(-40.0));
  CHECK(std::fabs(hi.value() - 1.0) < 1e-9);
  CHECK(std::fabs(lo.value()) < 1e-9);
  auto tail = tape.normal_log_sf(tape.scalar(50.0));
  CHECK(std::isfinite(tail.value()));
  CHECK(tail.value() < -1200.0);
  CHECK(tape.normal_log_sf(tape.scalar(0.0)).value() ==
        doctest::Approx(std::log(0.5)));
}

TEST_CASE("forward values are bit-identical across runs") {
  auto run = [] {
    std::mt19937_64 rng(99);
    ParamSet ps;
    int M = ps.add("M", RandomTensor(rng, 6, 6));
    Tape tape(&ps);
    auto x = tape.constant({1, 2, 3, 4, 5, 6});
    auto y = tape.log_softmax(tape.matvec(tape.param(M), tape.sin(x)));
    return std::vector<double>(y.values().begin(), y.values().end());
  };
  CHECK(run() == run());
}

TEST_CASE("Adam moves against the gradient") {
  ParamSet ps;
  int x = ps.add("x", Vec({1.0, -2.0}));
  Adam opt(ps, 0.1);
  for (int i = 0; i < 200; ++i) {
    Tape tape(&ps);
    auto loss = tape.sum(tape.square(tape.param(x)));
    tape.backward(loss);
    opt.step(ps, tape.param_grads());
  }
  CHECK(std::fabs(ps.value(x)[0]) < 0.05);
  CHECK(std::fabs(ps.value(x)[1]) < 0.05);
  CHECK(opt.steps() == 200);

  // First step has magnitude lr regardless of gradient scale.
  ParamSet q;
  int y = q.add("y", Vec({5.0}));
  Adam o2(q, 1e-3);
  ParamGrads g = ParamGrads::zeros_like(q);
  g.g[y][0] = 1234.0;
  o2.step(q, g);
  CHECK(q.value(y)[0] == doctest::Approx(5.0 - 1e-3));
}
