#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "densetnt/nn/tape.hpp"

namespace densetnt::nn {

namespace detail {

inline void check(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kShapeMismatch, what);
}

inline std::string shape(const Var& v) {
  return std::to_string(v.rows()) + "x" + std::to_string(v.cols());
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  detail::check(a.cols() == b.rows(), "matmul " + detail::shape(a) + " * " + detail::shape(b));
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

/// a * b^T
inline Var matmul_transposed(const Var& a, const Var& b) {
  detail::check(a.cols() == b.cols(), "matmul_transposed " + detail::shape(a) + " * " + detail::shape(b) + "^T");
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value().transpose(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib));
    if (t.requires_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
  });
}

inline Var add(const Var& a, const Var& b) {
  detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "add " + detail::shape(a) + " + " + detail::shape(b));
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "sub " + detail::shape(a) + " - " + detail::shape(b));
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

inline Var scale(const Var& a, double s) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value() * s, {a}, [ia, s](Tape& t, std::size_t self) { t.accumulate(ia, t.grad(self) * s); });
}

inline Var hadamard(const Var& a, const Var& b) {
  detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard " + detail::shape(a) + " .* " + detail::shape(b));
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

/// a + bias with a 1 x n bias broadcast over rows.
inline Var add_row_broadcast(const Var& a, const Var& bias) {
  detail::check(bias.rows() == 1 && bias.cols() == a.cols(), "row broadcast " + detail::shape(a) + " + " + detail::shape(bias));
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = bias.id();
  Matrix out = a.value();
  out.rowwise() += bias.value().row(0);
  return t.record(std::move(out), {a, bias}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    if (t.requires_grad(ib)) t.accumulate(ib, t.grad(self).colwise().sum());
  });
}

/// Exponential linear unit with alpha = 1: identity for x > 0, exp(x) - 1 below.
inline Var elu(const Var& a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  Matrix out = a.value().unaryExpr([](double x) { return x > 0 ? x : std::expm1(x); });
  return t.record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix d = t.value(ia).unaryExpr([](double x) { return x > 0 ? 1.0 : std::exp(x); });
    t.accumulate(ia, t.grad(self).cwiseProduct(d));
  });
}

inline Var sigmoid(const Var& a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  Matrix out = a.value().unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return t.record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    t.accumulate(ia, t.grad(self).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

inline Matrix softmax_rows_value(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - mx).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

/// Row-wise softmax.
inline Var softmax_rows(const Var& a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(softmax_rows_value(a.value()), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix gy = g.cwiseProduct(y);
    const Eigen::VectorXd s = gy.rowwise().sum();
    gy -= (y.array().colwise() * s.array()).matrix();
    t.accumulate(ia, gy);
  });
}

/// Row-wise log-softmax.
inline Var log_softmax_rows(const Var& a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    const double lse = mx + std::log((x.row(r).array() - mx).exp().sum());
    out.row(r) = (x.row(r).array() - lse).matrix();
  }
  return t.record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix p = t.value(self).array().exp().matrix();
    const Eigen::VectorXd s = g.rowwise().sum();
    t.accumulate(ia, g - (p.array().colwise() * s.array()).matrix());
  });
}

inline Var transpose(const Var& a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value().transpose(), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).transpose());
  });
}

/// Column-wise max over rows of each segment [offsets[s], offsets[s+1]).
/// The first maximal row receives the gradient.
inline Var segment_max(const Var& a, const std::vector<Eigen::Index>& offsets) {
  detail::check(offsets.size() >= 2 && offsets.front() == 0 && offsets.back() == a.rows(), "segment_max offsets");
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Eigen::Index segs = static_cast<Eigen::Index>(offsets.size()) - 1;
  const Eigen::Index cols = a.cols();
  Matrix out(segs, cols);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(segs * cols));
  const Matrix& x = a.value();
  for (Eigen::Index s = 0; s < segs; ++s) {
    detail::check(offsets[s + 1] > offsets[s], "segment_max empty segment");
    for (Eigen::Index c = 0; c < cols; ++c) {
      Eigen::Index best = offsets[s];
      for (Eigen::Index r = offsets[s] + 1; r < offsets[s + 1]; ++r) {
        if (x(r, c) > x(best, c)) best = r;
      }
      out(s, c) = x(best, c);
      arg[static_cast<std::size_t>(s * cols + c)] = best;
    }
  }
  const Eigen::Index rows = a.rows();
  return t.record(std::move(out), {a}, [ia, arg = std::move(arg), rows, segs, cols](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix ga = Matrix::Zero(rows, cols);
    for (Eigen::Index s = 0; s < segs; ++s) {
      for (Eigen::Index c = 0; c < cols; ++c) ga(arg[static_cast<std::size_t>(s * cols + c)], c) += g(s, c);
    }
    t.accumulate(ia, ga);
  });
}

/// Max-pool over all rows: 1 x cols.
inline Var max_pool_rows(const Var& a) { return segment_max(a, {0, a.rows()}); }

inline Var concat_cols(const std::vector<Var>& parts) {
  detail::check(!parts.empty(), "concat_cols of nothing");
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    detail::check(p.rows() == rows, "concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, std::pair<Eigen::Index, Eigen::Index>>> spans;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    spans.push_back({p.id(), {c, p.cols()}});
    c += p.cols();
  }
  return t.record(std::move(out), parts, [spans = std::move(spans)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (const auto& [id, range] : spans) {
      if (t.requires_grad(id)) t.accumulate(id, g.middleCols(range.first, range.second));
    }
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  detail::check(!parts.empty(), "concat_rows of nothing");
  Tape& t = *parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    detail::check(p.cols() == cols, "concat_rows column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, std::pair<Eigen::Index, Eigen::Index>>> spans;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    spans.push_back({p.id(), {r, p.rows()}});
    r += p.rows();
  }
  return t.record(std::move(out), parts, [spans = std::move(spans)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (const auto& [id, range] : spans) {
      if (t.requires_grad(id)) t.accumulate(id, g.middleRows(range.first, range.second));
    }
  });
}

/// Repeats a 1 x n row `rows` times.
inline Var broadcast_rows(const Var& a, Eigen::Index rows) {
  detail::check(a.rows() == 1, "broadcast_rows needs a single row");
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value().replicate(rows, 1), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).colwise().sum());
  });
}

inline Var slice_cols(const Var& a, Eigen::Index begin, Eigen::Index count) {
  detail::check(begin >= 0 && count >= 0 && begin + count <= a.cols(), "slice_cols out of range");
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.record(a.value().middleCols(begin, count), {a}, [ia, begin, count, rows, cols](Tape& t, std::size_t self) {
    Matrix ga = Matrix::Zero(rows, cols);
    ga.middleCols(begin, count) = t.grad(self);
    t.accumulate(ia, ga);
  });
}

inline Var slice_rows(const Var& a, Eigen::Index begin, Eigen::Index count) {
  detail::check(begin >= 0 && count >= 0 && begin + count <= a.rows(), "slice_rows out of range");
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.record(a.value().middleRows(begin, count), {a}, [ia, begin, count, rows, cols](Tape& t, std::size_t self) {
    Matrix ga = Matrix::Zero(rows, cols);
    ga.middleRows(begin, count) = t.grad(self);
    t.accumulate(ia, ga);
  });
}

/// Gathers rows by index (duplicates allowed).
inline Var gather_rows(const Var& a, const std::vector<Eigen::Index>& index) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    detail::check(index[i] >= 0 && index[i] < a.rows(), "gather_rows index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.record(std::move(out), {a}, [ia, index, rows, cols](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix ga = Matrix::Zero(rows, cols);
    for (std::size_t i = 0; i < index.size(); ++i) ga.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(ia, ga);
  });
}

inline Var sum(const Var& a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {a}, [ia, rows, cols](Tape& t, std::size_t self) {
    t.accumulate(ia, Matrix::Constant(rows, cols, t.grad(self)(0, 0)));
  });
}

inline Var add_scalars(const std::vector<Var>& terms) {
  detail::check(!terms.empty(), "add_scalars of nothing");
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

}  // namespace densetnt::nn
