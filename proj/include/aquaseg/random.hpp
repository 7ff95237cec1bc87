#pragma once

#include <cstdint>
#include <random>

#include "aquaseg/types.hpp"

namespace aquaseg {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream id); used so stages never share RNG state.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

template <typename Scalar>
MatrixX<Scalar> gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  MatrixX<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<Scalar>(dist(rng));
  return m;
}

}  // namespace aquaseg
