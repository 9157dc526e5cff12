#pragma once

#include <optional>
#include <vector>

#include "instro/devices.hpp"

namespace instro {

/// Row-stochastic matrix: nu[x][y] >= 0, Σ_y nu[x][y] = 1.
using StochasticMatrix = std::vector<std::vector<double>>;

/// Finds x >= 0 with A x = b (A dense row-major, rows x cols) by a phase-one
/// simplex with Bland's rule. Returns nullopt when the system has no
/// nonnegative solution.
std::optional<std::vector<double>> lp_feasible(const std::vector<double>& a, std::size_t rows, std::size_t cols,
                                               const std::vector<double>& b, double tol = 1e-9);

/// A stochastic nu with B(y) = Σ_x nu[x][y] A(x), or nullopt if none exists.
std::optional<StochasticMatrix> lp_postprocess_povm(const Povm& a, const Povm& b, double eq_tol = kEqTol);

}  // namespace instro
