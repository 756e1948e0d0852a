#pragma once

#include <cmath>
#include <string>
#include <unordered_map>

#include "densetnt/nn/ops.hpp"

namespace densetnt::nn {

/// Binds parameters of a store onto a tape, once per parameter.
class Graph {
 public:
  Graph(Tape& tape, ParamStore& store) : tape_(tape), store_(store) {}

  Var param(std::size_t index) {
    auto it = bound_.find(index);
    if (it != bound_.end()) return it->second;
    Var v = tape_.parameter(store_[index]);
    bound_.emplace(index, v);
    return v;
  }

  Var constant(Matrix m) { return tape_.constant(std::move(m)); }
  Tape& tape() { return tape_; }
  ParamStore& store() { return store_; }

 private:
  Tape& tape_;
  ParamStore& store_;
  std::unordered_map<std::size_t, Var> bound_;
};

/// Forward-only graph over a const store; nothing writes gradients back
/// unless backward() is called on the tape.
inline Graph inference_graph(Tape& tape, const ParamStore& store) {
  return Graph(tape, const_cast<ParamStore&>(store));
}

inline void init_uniform(Parameter& p, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-bound, bound);
}

/// y = x W + b, with W stored in x out.
struct Linear {
  std::size_t weight = 0;
  std::size_t bias = 0;
  Eigen::Index in = 0;
  Eigen::Index out = 0;

  static Linear create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng) {
    Linear l;
    l.in = in;
    l.out = out;
    l.weight = store.create(name + ".w", in, out);
    l.bias = store.create(name + ".b", 1, out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    init_uniform(store[l.weight], bound, rng);
    init_uniform(store[l.bias], bound, rng);
    return l;
  }

  Var operator()(Graph& g, const Var& x) const {
    detail::check(x.cols() == in, "linear expects " + std::to_string(in) + " input columns, got " + std::to_string(x.cols()));
    return add_row_broadcast(matmul(x, g.param(weight)), g.param(bias));
  }
};

/// linear -> ELU -> linear.
struct Mlp2 {
  Linear fc1;
  Linear fc2;

  static Mlp2 create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden, Eigen::Index out,
                     Rng& rng) {
    return Mlp2{Linear::create(store, name + ".fc1", in, hidden, rng), Linear::create(store, name + ".fc2", hidden, out, rng)};
  }

  Var operator()(Graph& g, const Var& x) const { return fc2(g, elu(fc1(g, x))); }
};

/// Single-head scaled dot-product attention of queries from `f` over keys and
/// values from `l`.
struct Attention {
  std::size_t wq = 0;
  std::size_t wk = 0;
  std::size_t wv = 0;
  Eigen::Index dim = 0;
  Eigen::Index key_dim = 0;

  static Attention create(ParamStore& store, const std::string& name, Eigen::Index dim, Eigen::Index key_dim, Rng& rng) {
    Attention a;
    a.dim = dim;
    a.key_dim = key_dim;
    a.wq = store.create(name + ".wq", dim, key_dim);
    a.wk = store.create(name + ".wk", dim, key_dim);
    a.wv = store.create(name + ".wv", dim, dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    init_uniform(store[a.wq], bound, rng);
    init_uniform(store[a.wk], bound, rng);
    init_uniform(store[a.wv], bound, rng);
    return a;
  }

  /// Attention weights, rows of queries over rows of keys.
  Var weights(Graph& g, const Var& f, const Var& l) const {
    detail::check(f.cols() == dim && l.cols() == dim, "attention expects " + std::to_string(dim) + " feature columns");
    const Var q = matmul(f, g.param(wq));
    const Var k = matmul(l, g.param(wk));
    return softmax_rows(scale(matmul_transposed(q, k), 1.0 / std::sqrt(static_cast<double>(key_dim))));
  }

  Var operator()(Graph& g, const Var& f, const Var& l) const {
    return matmul(weights(g, f, l), matmul(l, g.param(wv)));
  }
};

}  // namespace densetnt::nn
