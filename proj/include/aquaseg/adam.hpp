#pragma once

#include <cmath>
#include <cstdint>

#include "aquaseg/decoder.hpp"

namespace aquaseg {

struct AdamOptions {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Optimizer state: step counter and first/second moments shaped like the parameters.
template <typename Scalar>
struct AdamState {
  std::int64_t step = 0;
  DecoderParams<Scalar> m;
  DecoderParams<Scalar> v;

  static AdamState zeros_for(const DecoderParams<Scalar>& params) {
    return {0, zeros_like(params), zeros_like(params)};
  }
};

/// One bias-corrected Adam update of every tensor in params. Throws DivergenceError before
/// touching any state if a gradient is non-finite.
template <typename Scalar>
void adam_step(DecoderParams<Scalar>& params, const DecoderParams<Scalar>& grads, AdamState<Scalar>& state,
               const AdamOptions& opts) {
  if (!all_finite(grads)) throw DivergenceError("non-finite gradient");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
  const auto b1 = static_cast<Scalar>(opts.beta1), b2 = static_cast<Scalar>(opts.beta2);
  const auto lr = static_cast<Scalar>(opts.learning_rate), eps = static_cast<Scalar>(opts.epsilon);
  const auto c1 = static_cast<Scalar>(bc1), c2 = static_cast<Scalar>(bc2);
  visit_tensors(
      [&](const std::string&, MatrixX<Scalar>& p, const MatrixX<Scalar>& g, MatrixX<Scalar>& m, MatrixX<Scalar>& v) {
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      },
      params, grads, state.m, state.v);
}

}  // namespace aquaseg
