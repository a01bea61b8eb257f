#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "glam/errors.hpp"
#include "glam/random.hpp"

namespace glam {

using Index = Eigen::Index;

template <typename Scalar>
using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Sparse = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

using DenseMatrix = Dense<double>;
using SparseMatrix = Sparse<double>;

/// Floor of probabilities inside cross-entropy logarithms.
inline constexpr double kLogEpsilon = 1e-12;

/// ln(max(p, eps)), so a cross-entropy against probabilities is never negative.
template <typename Scalar>
Scalar floored_log(Scalar p) {
  return std::log(std::max(p, Scalar(kLogEpsilon)));
}

/// Derivative of floored_log; zero on the flat part.
template <typename Scalar>
Scalar floored_log_derivative(Scalar p) {
  return p > Scalar(kLogEpsilon) ? Scalar(1) / p : Scalar(0);
}

namespace detail {

inline std::string shape(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

}  // namespace detail

inline void require_same_shape(Index r1, Index c1, Index r2, Index c2, const char* what) {
  if (r1 != r2 || c1 != c2) {
    throw DimensionError(std::string(what) + ": shape " + detail::shape(r1, c1) + " vs " + detail::shape(r2, c2));
  }
}

/// Sparse-dense product a * b.
template <typename Scalar>
Dense<Scalar> spmm(const Sparse<Scalar>& a, const Dense<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("spmm: " + detail::shape(a.rows(), a.cols()) + " * " + detail::shape(b.rows(), b.cols()));
  }
  Dense<Scalar> out = Dense<Scalar>::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.outerSize(); ++i) {
    for (typename Sparse<Scalar>::InnerIterator it(a, i); it; ++it) {
      out.row(i).noalias() += it.value() * b.row(it.col());
    }
  }
  return out;
}

/// Row-wise softmax with max subtraction. Entries equal to -inf act as masked
/// columns and receive probability exactly zero.
template <typename Derived>
Dense<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Dense<Scalar> out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    const Scalar peak = m.row(i).maxCoeff();
    out.row(i) = (m.row(i).array() - peak).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

/// Row-wise log-softmax, exact at -inf (masked) entries.
template <typename Derived>
Dense<typename Derived::Scalar> log_softmax_rows(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Dense<Scalar> out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    const Scalar peak = m.row(i).maxCoeff();
    const Scalar lse = peak + std::log((m.row(i).array() - peak).exp().sum());
    out.row(i) = (m.row(i).array() - lse).matrix();
  }
  return out;
}

/// Elementwise max(0, x); -0.0 maps to +0.0.
template <typename Derived>
Dense<typename Derived::Scalar> relu(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return m.unaryExpr([](Scalar v) { return v > Scalar(0) ? v : Scalar(0); });
}

/// Gradient of relu: upstream where the pre-activation was positive.
template <typename D1, typename D2>
Dense<typename D1::Scalar> relu_backward(const Eigen::MatrixBase<D1>& upstream, const Eigen::MatrixBase<D2>& pre) {
  using Scalar = typename D1::Scalar;
  require_same_shape(upstream.rows(), upstream.cols(), pre.rows(), pre.cols(), "relu_backward");
  return upstream.binaryExpr(pre, [](Scalar g, Scalar x) { return x > Scalar(0) ? g : Scalar(0); });
}

inline void check_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
}

/// Inverted-dropout multiplier: each entry is 0 with probability `rate`,
/// otherwise 1 / (1 - rate).
template <typename Scalar>
Dense<Scalar> dropout_mask(Index rows, Index cols, double rate, Rng& rng) {
  check_dropout_rate(rate);
  Dense<Scalar> mask(rows, cols);
  fill_dropout_scales(rng, rate, 1.0 / (1.0 - rate), mask.data(), mask.size());
  return mask;
}

/// Dropout. With `training == false` or rate 0 the input is returned unchanged.
template <typename Scalar>
Dense<Scalar> dropout(const Dense<Scalar>& m, double rate, Rng& rng, bool training) {
  check_dropout_rate(rate);
  if (!training || rate == 0.0) return m;
  return m.cwiseProduct(dropout_mask<Scalar>(m.rows(), m.cols(), rate, rng));
}

/// Sum over rows in `rows` of -sum_j target(i,j) * ln(pred(i,j) + eps).
template <typename Scalar>
Scalar cross_entropy_rows(const Dense<Scalar>& pred, const Dense<Scalar>& target, std::span<const Index> rows) {
  require_same_shape(pred.rows(), pred.cols(), target.rows(), target.cols(), "cross_entropy_rows");
  Scalar total = 0;
  for (Index i : rows) {
    for (Index j = 0; j < pred.cols(); ++j) {
      const Scalar t = target(i, j);
      if (t != Scalar(0)) total -= t * floored_log(pred(i, j));
    }
  }
  return total;
}

/// Gradient of `scale * cross_entropy_rows(softmax(scores), target, rows)` with
/// respect to the pre-softmax scores, given `probs = softmax(scores)`.
/// Columns with probability zero (masked) get zero gradient.
template <typename Scalar>
Dense<Scalar> softmax_cross_entropy_backward(const Dense<Scalar>& probs, const Dense<Scalar>& target,
                                             std::span<const Index> rows, Scalar scale = Scalar(1)) {
  require_same_shape(probs.rows(), probs.cols(), target.rows(), target.cols(), "softmax_cross_entropy_backward");
  Dense<Scalar> grad = Dense<Scalar>::Zero(probs.rows(), probs.cols());
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> d_prob(probs.cols());
  for (Index i : rows) {
    for (Index j = 0; j < probs.cols(); ++j) {
      d_prob(j) = -scale * target(i, j) * floored_log_derivative(probs(i, j));
    }
    const Scalar inner = d_prob.dot(probs.row(i));
    grad.row(i) += (probs.row(i).array() * (d_prob.array() - inner)).matrix();
  }
  return grad;
}

/// Backward of log_softmax_rows: maps d/d(log p) to d/d(scores). Masked
/// columns (p == 0) get zero gradient.
template <typename Scalar>
Dense<Scalar> log_softmax_backward(const Dense<Scalar>& upstream, const Dense<Scalar>& probs) {
  require_same_shape(upstream.rows(), upstream.cols(), probs.rows(), probs.cols(), "log_softmax_backward");
  Dense<Scalar> grad(upstream.rows(), upstream.cols());
  for (Index i = 0; i < upstream.rows(); ++i) {
    const Scalar total = upstream.row(i).sum();
    for (Index j = 0; j < upstream.cols(); ++j) {
      grad(i, j) = probs(i, j) == Scalar(0) ? Scalar(0) : upstream(i, j) - probs(i, j) * total;
    }
  }
  return grad;
}

template <typename Scalar>
Scalar squared_norm(const Dense<Scalar>& m) {
  return m.squaredNorm();
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment accumulators for a fixed list of parameter matrices.
template <typename Scalar>
struct AdamState {
  AdamConfig config;
  long step = 0;
  std::vector<Dense<Scalar>> first;
  std::vector<Dense<Scalar>> second;
};

/// One bias-corrected Adam update. `weight_decay[k]` adds 2 * alpha * W to the
/// raw gradient of parameter k (the derivative of alpha * ||W||_F^2).
template <typename Scalar>
void adam_step(std::span<Dense<Scalar>* const> params, std::span<const Dense<Scalar>* const> grads,
               std::span<const double> weight_decay, AdamState<Scalar>& state, double lr) {
  if (params.size() != grads.size() || params.size() != weight_decay.size()) {
    throw DimensionError("adam_step: parameter, gradient and decay lists differ in length");
  }
  if (state.step == 0) {
    state.first.clear();
    state.second.clear();
    for (const auto* p : params) {
      state.first.push_back(Dense<Scalar>::Zero(p->rows(), p->cols()));
      state.second.push_back(Dense<Scalar>::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first.size() != params.size()) throw DimensionError("adam_step: parameter count changed between steps");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_same_shape(params[k]->rows(), params[k]->cols(), grads[k]->rows(), grads[k]->cols(), "adam_step gradient");
    require_same_shape(params[k]->rows(), params[k]->cols(), state.first[k].rows(), state.first[k].cols(),
                       "adam_step accumulator");
  }

  ++state.step;
  const auto& c = state.config;
  const Scalar b1 = Scalar(c.beta1), b2 = Scalar(c.beta2);
  const Scalar corr1 = Scalar(1) - Scalar(std::pow(c.beta1, state.step));
  const Scalar corr2 = Scalar(1) - Scalar(std::pow(c.beta2, state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Dense<Scalar>& w = *params[k];
    Dense<Scalar> g = *grads[k];
    if (weight_decay[k] != 0.0) g += Scalar(2.0 * weight_decay[k]) * w;
    state.first[k] = b1 * state.first[k] + (Scalar(1) - b1) * g;
    state.second[k] = b2 * state.second[k] + (Scalar(1) - b2) * g.cwiseAbs2();
    w.array() -= Scalar(lr) * (state.first[k].array() / corr1) /
                 ((state.second[k].array() / corr2).sqrt() + Scalar(c.epsilon));
  }
}

/// Glorot/Xavier uniform initialization.
template <typename Scalar>
Dense<Scalar> glorot_uniform(Index rows, Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Dense<Scalar> w(rows, cols);
  Scalar* p = w.data();
  for (Index k = 0; k < w.size(); ++k) p[k] = Scalar(rng.uniform(-limit, limit));
  return w;
}

template <typename Scalar>
bool all_finite(const Dense<Scalar>& m) {
  return m.allFinite();
}

}  // namespace glam
