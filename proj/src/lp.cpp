#include "instro/lp.hpp"

#include <algorithm>
#include <cmath>

namespace instro {

std::optional<std::vector<double>> lp_feasible(const std::vector<double>& a, std::size_t rows, std::size_t cols,
                                               const std::vector<double>& b, double tol) {
  if (a.size() != rows * cols || b.size() != rows) throw DimensionError("lp_feasible: shape mismatch");
  // Tableau over [x | artificials | rhs]; rows are flipped so the rhs is nonnegative.
  const std::size_t w = cols + rows + 1;
  std::vector<double> t(rows * w, 0.0);
  std::vector<std::size_t> basis(rows);
  double bscale = 1.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double sgn = b[i] < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < cols; ++j) t[i * w + j] = sgn * a[i * cols + j];
    t[i * w + cols + i] = 1.0;
    t[i * w + w - 1] = sgn * b[i];
    basis[i] = cols + i;
    bscale = std::max(bscale, std::abs(b[i]));
  }
  // Reduced costs of the phase-one objective Σ artificials.
  std::vector<double> cost(w, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) cost[j] -= t[i * w + j];
  for (std::size_t i = 0; i < rows; ++i) cost[w - 1] -= t[i * w + w - 1];

  const double piv_tol = 1e-11;
  for (std::size_t iter = 0; iter < 50 * (rows + cols) + 1000; ++iter) {
    std::size_t enter = w;
    for (std::size_t j = 0; j + 1 < w; ++j)
      if (cost[j] < -piv_tol) {
        enter = j;
        break;
      }
    if (enter == w) break;
    std::size_t leave = rows;
    double best = INFINITY;
    for (std::size_t i = 0; i < rows; ++i) {
      const double p = t[i * w + enter];
      if (p <= piv_tol) continue;
      const double ratio = t[i * w + w - 1] / p;
      if (ratio < best - 1e-14 || (ratio <= best + 1e-14 && leave < rows && basis[i] < basis[leave])) {
        best = ratio;
        leave = i;
      }
    }
    if (leave == rows) break;  // unbounded direction; cannot happen for phase one
    const double p = t[leave * w + enter];
    for (std::size_t j = 0; j < w; ++j) t[leave * w + j] /= p;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == leave) continue;
      const double f = t[i * w + enter];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < w; ++j) t[i * w + j] -= f * t[leave * w + j];
    }
    const double f = cost[enter];
    for (std::size_t j = 0; j < w; ++j) cost[j] -= f * t[leave * w + j];
    basis[leave] = enter;
  }

  double infeas = 0.0;
  std::vector<double> x(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double v = t[i * w + w - 1];
    if (basis[i] < cols) x[basis[i]] = std::max(v, 0.0);
    else infeas += std::abs(v);
  }
  if (infeas > tol * bscale) return std::nullopt;
  return x;
}

std::optional<StochasticMatrix> lp_postprocess_povm(const Povm& a, const Povm& b, double eq_tol) {
  if (a.dim_in() != b.dim_in()) throw DimensionError("lp_postprocess_povm: POVMs act on different spaces");
  const std::size_t nx = a.size(), ny = b.size(), d = a.dim_in(), dd = d * d;
  const std::size_t cols = nx * ny, rows = nx + ny * dd;
  std::vector<double> m(rows * cols, 0.0), rhs(rows, 0.0);
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t y = 0; y < ny; ++y) m[x * cols + x * ny + y] = 1.0;
    rhs[x] = 1.0;
  }
  std::vector<std::vector<double>> ac;
  for (const auto& e : a.effects()) ac.push_back(herm_coords(e));
  for (std::size_t y = 0; y < ny; ++y) {
    const auto bc = herm_coords(b.effect(y));
    for (std::size_t k = 0; k < dd; ++k) {
      const std::size_t r = nx + y * dd + k;
      rhs[r] = bc[k];
      for (std::size_t x = 0; x < nx; ++x) m[r * cols + x * ny + y] = ac[x][k];
    }
  }
  const auto sol = lp_feasible(m, rows, cols, rhs);
  if (!sol) return std::nullopt;
  StochasticMatrix nu(nx, std::vector<double>(ny, 0.0));
  for (std::size_t x = 0; x < nx; ++x) {
    double s = 0.0;
    for (std::size_t y = 0; y < ny; ++y) s += nu[x][y] = (*sol)[x * ny + y];
    if (s > 0.0)
      for (double& v : nu[x]) v /= s;
  }
  for (std::size_t y = 0; y < ny; ++y) {
    CMatrix rec(d, d);
    for (std::size_t x = 0; x < nx; ++x) rec += a.effect(x) * cplx(nu[x][y]);
    if (max_abs_diff(rec, b.effect(y)) > eq_tol) return std::nullopt;
  }
  return nu;
}

}  // namespace instro
