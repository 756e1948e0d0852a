#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "densetnt/nn/adam.hpp"
#include "densetnt/nn/checkpoint.hpp"
#include "densetnt/nn/grad_check.hpp"
#include "densetnt/nn/layers.hpp"
#include "densetnt/nn/losses.hpp"

using namespace densetnt;
using namespace densetnt::nn;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
  return m;
}

double elu_ref(double x) { return x > 0 ? x : std::exp(x) - 1.0; }

// Plain loops, no Eigen products.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

Matrix naive_attention(const Matrix& f, const Matrix& l, const Matrix& wq, const Matrix& wk, const Matrix& wv) {
  const Matrix q = naive_matmul(f, wq), k = naive_matmul(l, wk), v = naive_matmul(l, wv);
  Matrix out = Matrix::Zero(f.rows(), v.cols());
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    std::vector<double> s(static_cast<std::size_t>(l.rows()));
    double mx = -INFINITY;
    for (Eigen::Index j = 0; j < l.rows(); ++j) {
      double dot = 0.0;
      for (Eigen::Index c = 0; c < q.cols(); ++c) dot += q(i, c) * k(j, c);
      s[j] = dot / std::sqrt(static_cast<double>(q.cols()));
      mx = std::max(mx, s[j]);
    }
    double z = 0.0;
    for (auto& x : s) z += (x = std::exp(x - mx));
    for (Eigen::Index j = 0; j < l.rows(); ++j) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) out(i, c) += s[j] / z * v(j, c);
    }
  }
  return out;
}

}  // namespace

TEST(Attention, SingleKeyReturnsItsValueRow) {
  Rng rng(1);
  ParamStore store;
  const Attention att = Attention::create(store, "att", 4, 4, rng);
  Tape tape;
  Graph g(tape, store);
  const Var f = g.constant(random_matrix(rng, 5, 4));
  const Var l = g.constant(random_matrix(rng, 1, 4));
  const Matrix out = att(g, f, l).value();
  const Matrix v = l.value() * store[att.wv].value;
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_LT((out.row(i) - v.row(0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Attention, IdenticalKeysGiveUniformWeights) {
  Rng rng(2);
  ParamStore store;
  const Attention att = Attention::create(store, "att", 3, 3, rng);
  Tape tape;
  Graph g(tape, store);
  Matrix keys(4, 3);
  for (int r = 0; r < 4; ++r) keys.row(r) << 0.3, -1.2, 0.5;
  const Matrix w = att.weights(g, g.constant(random_matrix(rng, 2, 3)), g.constant(keys)).value();
  for (Eigen::Index i = 0; i < w.size(); ++i) EXPECT_NEAR(w.data()[i], 0.25, 1e-15);
}

TEST(Attention, TwoByTwoMatchesStepByStep) {
  ParamStore store;
  Rng rng(3);
  const Attention att = Attention::create(store, "att", 2, 2, rng);
  store[att.wq].value << 1.0, 0.5, -0.5, 2.0;
  store[att.wk].value << 0.2, -1.0, 1.5, 0.3;
  store[att.wv].value << 1.0, -1.0, 0.25, 2.0;
  Matrix f(2, 2), l(2, 2);
  f << 1.0, 2.0, -0.5, 0.5;
  l << 0.3, -0.7, 1.1, 0.9;
  Tape tape;
  Graph g(tape, store);
  const Matrix out = att(g, g.constant(f), g.constant(l)).value();
  // q = f wq, k = l wk, v = l wv written out by hand.
  const double q00 = 1.0 * 1.0 + 2.0 * -0.5, q01 = 1.0 * 0.5 + 2.0 * 2.0;
  const double q10 = -0.5 * 1.0 + 0.5 * -0.5, q11 = -0.5 * 0.5 + 0.5 * 2.0;
  const double k00 = 0.3 * 0.2 + -0.7 * 1.5, k01 = 0.3 * -1.0 + -0.7 * 0.3;
  const double k10 = 1.1 * 0.2 + 0.9 * 1.5, k11 = 1.1 * -1.0 + 0.9 * 0.3;
  const double v00 = 0.3 * 1.0 + -0.7 * 0.25, v01 = 0.3 * -1.0 + -0.7 * 2.0;
  const double v10 = 1.1 * 1.0 + 0.9 * 0.25, v11 = 1.1 * -1.0 + 0.9 * 2.0;
  const double r = 1.0 / std::sqrt(2.0);
  auto row = [&](double qa, double qb, int i) {
    const double s0 = (qa * k00 + qb * k01) * r, s1 = (qa * k10 + qb * k11) * r;
    const double a0 = 1.0 / (1.0 + std::exp(s1 - s0)), a1 = 1.0 - a0;
    EXPECT_NEAR(out(i, 0), a0 * v00 + a1 * v10, 1e-12);
    EXPECT_NEAR(out(i, 1), a0 * v01 + a1 * v11, 1e-12);
  };
  row(q00, q01, 0);
  row(q10, q11, 1);
}

TEST(Attention, RandomCasesMatchNaiveEvaluation) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    ParamStore store;
    const Attention att = Attention::create(store, "att", 6, 5, rng);
    Tape tape;
    Graph g(tape, store);
    const Matrix f = random_matrix(rng, 1 + rng.index(6), 6), l = random_matrix(rng, 1 + rng.index(6), 6);
    const Matrix out = att(g, g.constant(f), g.constant(l)).value();
    const Matrix ref = naive_attention(f, l, store[att.wq].value, store[att.wk].value, store[att.wv].value);
    EXPECT_LT((out - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Attention, RowsAreStochasticProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    ParamStore store;
    const Attention att = Attention::create(store, "att", 4, 4, rng);
    for (auto idx : {att.wq, att.wk}) store[idx].value *= rng.uniform(0.1, 20.0);
    Tape tape;
    Graph g(tape, store);
    const Matrix w = att.weights(g, g.constant(random_matrix(rng, 1 + rng.index(10), 4, 3.0)),
                                 g.constant(random_matrix(rng, 1 + rng.index(10), 4, 3.0)))
                         .value();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      EXPECT_NEAR(w.row(i).sum(), 1.0, 1e-9);
      EXPECT_GE(w.row(i).minCoeff(), 0.0);
    }
  }
}

TEST(Attention, ShapeMismatchIsAnError) {
  Rng rng(6);
  ParamStore store;
  const Attention att = Attention::create(store, "att", 4, 4, rng);
  Tape tape;
  Graph g(tape, store);
  try {
    att(g, g.constant(Matrix::Zero(2, 4)), g.constant(Matrix::Zero(2, 3)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(Mlp2, ZeroWeightsGiveZero) {
  Rng rng(7);
  ParamStore store;
  const Mlp2 mlp = Mlp2::create(store, "mlp", 3, 5, 2, rng);
  for (std::size_t i = 0; i < store.size(); ++i) store[i].value.setZero();
  Tape tape;
  Graph g(tape, store);
  EXPECT_EQ(mlp(g, g.constant(random_matrix(rng, 4, 3))).value(), Matrix::Zero(4, 2));
}

TEST(Mlp2, IdentityWeightsPassPositiveInputs) {
  Rng rng(8);
  ParamStore store;
  const Mlp2 mlp = Mlp2::create(store, "mlp", 3, 3, 3, rng);
  store[mlp.fc1.weight].value = Matrix::Identity(3, 3);
  store[mlp.fc2.weight].value = Matrix::Identity(3, 3);
  store[mlp.fc1.bias].value.setZero();
  store[mlp.fc2.bias].value.setZero();
  Matrix x = random_matrix(rng, 5, 3).cwiseAbs();
  Tape tape;
  Graph g(tape, store);
  EXPECT_EQ(mlp(g, g.constant(x)).value(), x);
}

TEST(Mlp2, RandomCaseMatchesNaiveEvaluation) {
  Rng rng(9);
  ParamStore store;
  const Mlp2 mlp = Mlp2::create(store, "mlp", 4, 7, 3, rng);
  const Matrix x = random_matrix(rng, 6, 4);
  Tape tape;
  Graph g(tape, store);
  const Matrix out = mlp(g, g.constant(x)).value();
  Matrix h = naive_matmul(x, store[mlp.fc1.weight].value);
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.cols(); ++j) h(i, j) = elu_ref(h(i, j) + store[mlp.fc1.bias].value(0, j));
  }
  Matrix y = naive_matmul(h, store[mlp.fc2.weight].value);
  for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i) += store[mlp.fc2.bias].value.row(0);
  EXPECT_LT((out - y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Mlp2, InputWidthMismatch) {
  Rng rng(10);
  ParamStore store;
  const Mlp2 mlp = Mlp2::create(store, "mlp", 4, 4, 1, rng);
  Tape tape;
  Graph g(tape, store);
  EXPECT_THROW(mlp(g, g.constant(Matrix::Zero(2, 5))), Error);
}

TEST(Losses, BceOfLabelAgainstItselfIsNearZero) {
  Tape tape;
  Matrix label(1, 4);
  label << 1e-7, 1 - 1e-7, 1e-7, 1 - 1e-7;
  const double v = bce(tape.constant(label), label).scalar();
  EXPECT_GE(v, 0.0);
  EXPECT_LT(v, 1e-5);
  Matrix hard(1, 2);
  hard << 0.0, 1.0;
  EXPECT_LT(bce(tape.constant(hard), hard).scalar(), 1e-6);
}

TEST(Losses, L1AndSmoothL1ByHand) {
  Tape tape;
  Matrix a = Matrix::Zero(1, 2), b(1, 2);
  b << 3, 4;
  EXPECT_DOUBLE_EQ(l1(tape.constant(a), b).scalar(), 7.0);
  Matrix c = Matrix::Constant(1, 2, 0.5);
  EXPECT_DOUBLE_EQ(smooth_l1(tape.constant(c), Matrix::Zero(1, 2)).scalar(), 0.25);
  Matrix d(1, 1);
  d << 3.0;
  EXPECT_DOUBLE_EQ(smooth_l1(tape.constant(d), Matrix::Zero(1, 1)).scalar(), 2.5);
  EXPECT_DOUBLE_EQ(smooth_l1(tape.constant(Matrix::Ones(1, 1)), Matrix::Zero(1, 1)).scalar(), 0.5);
}

TEST(Losses, CrossEntropyIsNegativeLogSoftmax) {
  Tape tape;
  Matrix logits(1, 3);
  logits << 0.0, std::log(3.0), 0.0;
  EXPECT_NEAR(cross_entropy(tape.constant(logits), 1).scalar(), -std::log(0.6), 1e-14);
}

TEST(Backward, ConstantLossGivesZeroGradients) {
  Rng rng(11);
  ParamStore store;
  const Linear lin = Linear::create(store, "lin", 3, 2, rng);
  Tape tape;
  Graph g(tape, store);
  (void)lin(g, g.constant(random_matrix(rng, 2, 3)));
  Matrix one = Matrix::Ones(1, 1);
  tape.backward(g.constant(one));
  for (std::size_t i = 0; i < store.size(); ++i) EXPECT_EQ(store[i].grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, LinearSquaredLossClosedForm) {
  Rng rng(12);
  ParamStore store;
  const Linear lin = Linear::create(store, "lin", 4, 3, rng);
  const Matrix x = random_matrix(rng, 5, 4), y = random_matrix(rng, 5, 3);
  Tape tape;
  Graph g(tape, store);
  tape.backward(squared_error(lin(g, g.constant(x)), y));
  Matrix pred = x * store[lin.weight].value;
  pred.rowwise() += store[lin.bias].value.row(0);
  const Matrix err = pred - y;
  EXPECT_LT((store[lin.weight].grad - 2.0 * x.transpose() * err).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((store[lin.bias].grad - 2.0 * err.colwise().sum()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GradCheck, LinearLayerAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    ParamStore store;
    const Linear lin = Linear::create(store, "lin", 5, 4, rng);
    const Matrix x = random_matrix(rng, 6, 5), y = random_matrix(rng, 6, 4);
    const auto report = grad_check(store, all_indices(store), [&](Graph& g) {
      return squared_error(lin(g, g.constant(x)), y);
    });
    EXPECT_LT(report.max_relative_error, 1e-6) << "seed " << seed << " " << report.worst_parameter;
  }
}

TEST(GradCheck, AttentionBlockAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    ParamStore store;
    const Attention att = Attention::create(store, "att", 6, 6, rng);
    const Matrix f = random_matrix(rng, 4, 6), l = random_matrix(rng, 5, 6), y = random_matrix(rng, 4, 6);
    const auto report = grad_check(store, all_indices(store), [&](Graph& g) {
      return squared_error(att(g, g.constant(f), g.constant(l)), y);
    });
    EXPECT_LT(report.max_relative_error, 1e-4) << "seed " << seed << " " << report.worst_parameter;
  }
}

TEST(GradCheck, EveryOpComposed) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(200 + seed);
    ParamStore store;
    const Mlp2 mlp = Mlp2::create(store, "mlp", 3, 6, 4, rng);
    const Attention att = Attention::create(store, "att", 4, 4, rng);
    const Linear head = Linear::create(store, "head", 8, 2, rng);
    const Matrix x = random_matrix(rng, 7, 3);
    Matrix labels = Matrix::Zero(1, 3);
    labels(0, 1) = 1.0;
    const Matrix target = random_matrix(rng, 3, 2);
    const auto report = grad_check(store, all_indices(store), [&](Graph& g) {
      const Var h = mlp(g, g.constant(x));
      const Var pooled = segment_max(h, {0, 3, 7});
      const Var a = att(g, h, pooled);
      const Var top = gather_rows(a, {0, 4, 4});
      const Var cat = concat_cols({top, broadcast_rows(max_pool_rows(h), 3)});
      const Var out = head(g, cat);
      const Var probs = softmax_rows(transpose(slice_cols(out, 0, 1)));
      const Var s = sigmoid(slice_rows(out, 0, 2));
      const Var stacked = concat_rows({s, hadamard(slice_rows(out, 2, 1), slice_rows(out, 2, 1))});
      return add_scalars({bce(probs, labels), l1(stacked, target), smooth_l1(scale(out, 2.0), target),
                          sum(sub(stacked, out)), cross_entropy(add(probs, probs), 2)});
    });
    EXPECT_LT(report.max_relative_error, 1e-5) << "seed " << seed << " " << report.worst_parameter;
  }
}

TEST(GradCheck, ReportsBrokenGradients) {
  Rng rng(13);
  ParamStore store;
  const Linear lin = Linear::create(store, "lin", 2, 2, rng);
  const Matrix x = random_matrix(rng, 3, 2);
  // A deliberately wrong backward: doubles the true gradient.
  const auto report = grad_check(store, all_indices(store), [&](Graph& g) {
    const Var y = lin(g, g.constant(x));
    const std::size_t iy = y.id();
    Matrix v(1, 1);
    v(0, 0) = y.value().sum();
    return g.tape().record(std::move(v), {y}, [iy](Tape& t, std::size_t self) {
      t.accumulate(iy, Matrix::Constant(t.value(iy).rows(), t.value(iy).cols(), 2.0 * t.grad(self)(0, 0)));
    });
  });
  EXPECT_GT(report.max_relative_error, 0.4);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Rng rng(14);
  ParamStore store;
  Linear::create(store, "lin", 3, 3, rng);
  const Matrix before = store[0].value;
  store.zero_grad();
  Adam adam;
  for (int i = 0; i < 10; ++i) adam.step(store.all());
  EXPECT_EQ(store[0].value, before);
}

TEST(Adam, ConstantGradientStepsApproachLrTimesSign) {
  ParamStore store;
  store.create("p", 1, 3);
  Adam adam(AdamConfig{0.01});
  Matrix g(1, 3);
  g << 2.0, -0.5, 1e-3;
  Matrix prev = store[0].value;
  for (int i = 0; i < 200; ++i) {
    store[0].grad = g;
    adam.step(store.all());
    const Matrix step = store[0].value - prev;
    prev = store[0].value;
    if (i == 199) {
      EXPECT_NEAR(step(0, 0), -0.01, 1e-6);
      EXPECT_NEAR(step(0, 1), 0.01, 1e-6);
      EXPECT_NEAR(step(0, 2), -0.01, 1e-4);
    }
  }
}

TEST(Adam, IdenticalRunsAreBitwiseIdentical) {
  auto run = [] {
    Rng rng(15);
    ParamStore store;
    const Mlp2 mlp = Mlp2::create(store, "mlp", 2, 8, 1, rng);
    Adam adam;
    const Matrix x = random_matrix(rng, 10, 2), y = random_matrix(rng, 10, 1);
    for (int i = 0; i < 50; ++i) {
      store.zero_grad();
      Tape tape;
      Graph g(tape, store);
      tape.backward(squared_error(mlp(g, g.constant(x)), y));
      adam.step(store.all());
    }
    return store[mlp.fc2.weight].value;
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripWithManifest) {
  Rng rng(16);
  ParamStore store;
  Mlp2::create(store, "enc.mlp", 3, 4, 2, rng);
  const auto dir = std::filesystem::temp_directory_path() / "densetnt_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.bin").string();
  save_checkpoint(store, path, {{"stage", 1}});
  ParamStore other;
  Rng rng2(99);
  Mlp2::create(other, "enc.mlp", 3, 4, 2, rng2);
  EXPECT_EQ(load_checkpoint(other, path), store.size());
  for (std::size_t i = 0; i < store.size(); ++i) EXPECT_EQ(other[i].value, store[i].value);
  const auto manifest = read_manifest(path);
  EXPECT_EQ(manifest["metadata"]["stage"], 1);
  EXPECT_EQ(manifest["tensors"][0]["name"], "enc.mlp.fc1.w");
  EXPECT_EQ(manifest["tensors"][0]["rows"], 3);

  ParamStore wrong;
  Mlp2::create(wrong, "enc.mlp", 3, 5, 2, rng2);
  EXPECT_THROW(load_checkpoint(wrong, path), Error);
  try {
    load_checkpoint(other, (dir / "missing.bin").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingCheckpoint);
  }
  std::filesystem::remove_all(dir);
}
