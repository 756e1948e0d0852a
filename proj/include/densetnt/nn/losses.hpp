#pragma once

#include <algorithm>
#include <cmath>

#include "densetnt/nn/ops.hpp"

namespace densetnt::nn {

inline constexpr double kBceClamp = 1e-7;

/// Summed binary cross-entropy of probabilities against labels. Predictions
/// are clamped to [1e-7, 1 - 1e-7]; the gradient is evaluated at the clamped
/// value so saturated predictions still move.
inline Var bce(const Var& pred, const Matrix& label) {
  detail::check(pred.rows() == label.rows() && pred.cols() == label.cols(), "bce shape mismatch");
  Tape& t = *pred.tape();
  const std::size_t ip = pred.id();
  const Matrix p = pred.value().cwiseMax(kBceClamp).cwiseMin(1.0 - kBceClamp);
  Matrix out(1, 1);
  out(0, 0) = -(label.array() * p.array().log() + (1.0 - label.array()) * (1.0 - p.array()).log()).sum();
  return t.record(std::move(out), {pred}, [ip, p, label](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    const Matrix d = ((1.0 - label.array()) / (1.0 - p.array()) - label.array() / p.array()).matrix();
    t.accumulate(ip, d * g);
  });
}

/// Summed absolute difference.
inline Var l1(const Var& a, const Matrix& target) {
  detail::check(a.rows() == target.rows() && a.cols() == target.cols(), "l1 shape mismatch");
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Matrix diff = a.value() - target;
  Matrix out(1, 1);
  out(0, 0) = diff.cwiseAbs().sum();
  return t.record(std::move(out), {a}, [ia, diff](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    t.accumulate(ia, diff.unaryExpr([g](double x) { return x > 0 ? g : (x < 0 ? -g : 0.0); }));
  });
}

/// Summed Huber-style loss: 0.5 x^2 for |x| < 1, |x| - 0.5 beyond.
inline Var smooth_l1(const Var& a, const Matrix& target) {
  detail::check(a.rows() == target.rows() && a.cols() == target.cols(), "smooth_l1 shape mismatch");
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Matrix diff = a.value() - target;
  Matrix out(1, 1);
  out(0, 0) = diff.unaryExpr([](double x) { return std::abs(x) < 1.0 ? 0.5 * x * x : std::abs(x) - 0.5; }).sum();
  return t.record(std::move(out), {a}, [ia, diff](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    t.accumulate(ia, diff.unaryExpr([g](double x) { return g * std::clamp(x, -1.0, 1.0); }));
  });
}

inline Var squared_error(const Var& a, const Matrix& target) {
  detail::check(a.rows() == target.rows() && a.cols() == target.cols(), "squared_error shape mismatch");
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Matrix diff = a.value() - target;
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm();
  return t.record(std::move(out), {a}, [ia, diff](Tape& t, std::size_t self) {
    t.accumulate(ia, diff * (2.0 * t.grad(self)(0, 0)));
  });
}

/// Categorical cross-entropy of a 1 x n logit row against class `label`.
inline Var cross_entropy(const Var& logits, Eigen::Index label) {
  detail::check(logits.rows() == 1 && label >= 0 && label < logits.cols(), "cross_entropy label out of range");
  return scale(slice_cols(log_softmax_rows(logits), label, 1), -1.0);
}

}  // namespace densetnt::nn
