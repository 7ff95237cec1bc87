#pragma once

#include <cmath>

#include "aquaseg/types.hpp"

namespace aquaseg {

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Grid<Scalar> sigmoid(const Grid<Scalar>& logits) {
  return logits.unaryExpr([](Scalar z) { return sigmoid(z); });
}

namespace detail {
template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError(std::string(what) + ": prediction and target shapes differ");
}
}  // namespace detail

/// Soft Dice loss 1 - (2 sum(p t) + eps) / (sum p + sum t + eps).
template <typename Scalar>
Scalar dice_loss(const Grid<Scalar>& probabilities, const Mask& target, Scalar eps = Scalar(1)) {
  detail::require_same_shape(probabilities, target, "dice_loss");
  if (!(eps > Scalar(0))) throw ValidationError("dice_loss: eps must be positive");
  const Grid<Scalar> t = target.template cast<Scalar>();
  const Scalar inter = (probabilities * t).sum();
  return Scalar(1) - (Scalar(2) * inter + eps) / (probabilities.sum() + t.sum() + eps);
}

/// Mean binary cross-entropy from logits: max(z, 0) - z t + log(1 + exp(-|z|)).
template <typename Scalar>
Scalar ce_loss(const Grid<Scalar>& logits, const Mask& target) {
  detail::require_same_shape(logits, target, "ce_loss");
  const Grid<Scalar> t = target.template cast<Scalar>();
  const Grid<Scalar> per_pixel = logits.cwiseMax(Scalar(0)) - logits * t + (-logits.abs()).exp().log1p();
  return per_pixel.mean();
}

template <typename Scalar>
struct LossTerms {
  Scalar total{};
  Scalar dice{};
  Scalar ce{};
};

/// Unweighted Dice (on sigmoid probabilities) + cross-entropy.
template <typename Scalar>
LossTerms<Scalar> total_loss(const Grid<Scalar>& logits, const Mask& target, Scalar eps = Scalar(1)) {
  LossTerms<Scalar> out;
  out.dice = dice_loss(sigmoid(logits), target, eps);
  out.ce = ce_loss(logits, target);
  out.total = out.dice + out.ce;
  return out;
}

/// total_loss plus its analytic gradient with respect to the logits.
template <typename Scalar>
LossTerms<Scalar> total_loss_with_grad(const Grid<Scalar>& logits, const Mask& target, Scalar eps,
                                       Grid<Scalar>& grad) {
  const LossTerms<Scalar> terms = total_loss(logits, target, eps);
  const Grid<Scalar> p = sigmoid(logits);
  const Grid<Scalar> t = target.template cast<Scalar>();
  const Scalar num = Scalar(2) * (p * t).sum() + eps;
  const Scalar den = p.sum() + t.sum() + eps;
  // d dice / d p_i = -(2 t_i den - num) / den^2, chained through p(1 - p).
  const Grid<Scalar> d_dice_dp = -(Scalar(2) * t * den - num) / (den * den);
  grad = d_dice_dp * p * (Scalar(1) - p) + (p - t) / static_cast<Scalar>(logits.size());
  return terms;
}

}  // namespace aquaseg
