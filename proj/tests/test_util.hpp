#pragma once

#include <random>

#include "instro/linalg.hpp"

namespace instro::testing {

inline CMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t k = 0; k < c; ++k) m(i, k) = {n(rng), n(rng)};
  return m;
}

inline CMatrix random_hermitian(std::size_t d, std::mt19937_64& rng) { return random_matrix(d, d, rng).hermitian_part(); }

inline CMatrix random_psd(std::size_t d, std::mt19937_64& rng, std::size_t rank = 0) {
  const CMatrix g = random_matrix(d, rank == 0 ? d : rank, rng);
  return (g * g.adjoint()).hermitian_part();
}

}  // namespace instro::testing
