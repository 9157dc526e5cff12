#pragma once

// Dense complex linear algebra used throughout the device and solver layers.
//
// Conventions shared by every module:
//  * matrices are stored row-major;
//  * tensor factors are ordered leftmost = slowest index, so |i>⊗|j> has
//    flat index i*dim_j + j;
//  * vec() stacks columns, so vec(K) = Σ_i |i> ⊗ K|i>.  The Choi matrices in
//    devices.hpp are built from this convention.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "instro/tolerances.hpp"

namespace instro {

using cplx = std::complex<double>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered subsystem dimensions annotating a tensor-product space.
using DimVec = std::vector<std::size_t>;

std::size_t dim_product(const DimVec& dims);

class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols);
  CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries);

  static CMatrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }
  static CMatrix identity(std::size_t n);
  static CMatrix diag(std::span<const double> values);
  static CMatrix diag(std::initializer_list<double> values);
  /// Builds from nested rows, e.g. {{1, 0}, {0, 1}}. All rows must be equally long.
  static CMatrix from_rows(std::initializer_list<std::initializer_list<cplx>> rows);
  /// Column vector.
  static CMatrix column(std::span<const cplx> values);
  /// |u><v|
  static CMatrix outer(const CMatrix& u, const CMatrix& v);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<cplx> data() noexcept { return data_; }
  std::span<const cplx> data() const noexcept { return data_; }

  CMatrix adjoint() const;
  CMatrix transpose() const;
  CMatrix conj() const;
  cplx trace() const;
  double frobenius_norm() const;
  /// Largest entrywise modulus.
  double max_abs() const;

  bool is_hermitian(double tol = kHermTol) const;
  /// (M + M†)/2
  CMatrix hermitian_part() const;

  CMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  void set_block(std::size_t r0, std::size_t c0, const CMatrix& b);
  CMatrix col(std::size_t c) const;

  CMatrix& operator+=(const CMatrix& o);
  CMatrix& operator-=(const CMatrix& o);
  CMatrix& operator*=(cplx s);
  CMatrix& operator/=(cplx s);

  friend bool operator==(const CMatrix& a, const CMatrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

CMatrix operator+(CMatrix a, const CMatrix& b);
CMatrix operator-(CMatrix a, const CMatrix& b);
CMatrix operator-(CMatrix a);
CMatrix operator*(const CMatrix& a, const CMatrix& b);
CMatrix operator*(CMatrix a, cplx s);
CMatrix operator*(cplx s, CMatrix a);
CMatrix operator/(CMatrix a, cplx s);

/// Max entrywise |a - b|; throws on shape mismatch.
double max_abs_diff(const CMatrix& a, const CMatrix& b);
double frobenius_distance(const CMatrix& a, const CMatrix& b);
/// Re tr(a† b)
double inner_real(const CMatrix& a, const CMatrix& b);

/// Kronecker product a ⊗ b.
CMatrix tensor(const CMatrix& a, const CMatrix& b);

/// Traces out the factors of `dims` not listed in `keep`. `keep` may be
/// given in any order; the result keeps the factors in their original order.
CMatrix partial_trace(const CMatrix& m, const DimVec& dims, std::vector<std::size_t> keep);

/// Reorders tensor factors: factor k of the result is factor perm[k] of m.
/// Works for square operators on ⊗dims and for column vectors / row-stacked
/// maps when `rows_only` is set (only the row index is permuted).
CMatrix permute_factors(const CMatrix& m, const DimVec& dims, const std::vector<std::size_t>& perm,
                        bool rows_only = false);

/// Transpose on the listed factors only.
CMatrix partial_transpose(const CMatrix& m, const DimVec& dims, const std::vector<std::size_t>& which);

struct EigenSystem {
  std::vector<double> values;  // descending
  CMatrix vectors;             // columns, matching `values`
};

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
EigenSystem herm_eig(const CMatrix& m, double herm_tol = kHermTol);

/// Same, but starts the rotations from the unitary `guess` (for example the
/// eigenbasis of a nearby matrix). Converges in fewer sweeps when m is
/// nearly diagonal in that basis.
EigenSystem herm_eig(const CMatrix& m, const CMatrix& guess, double herm_tol = kHermTol);

/// Eigenvalues only, descending.
std::vector<double> herm_eigenvalues(const CMatrix& m, double herm_tol = kHermTol);

double min_eig(const CMatrix& m, double herm_tol = kHermTol);
double max_eig(const CMatrix& m, double herm_tol = kHermTol);

/// Nearest PSD matrix in Frobenius norm.
CMatrix psd_project(const CMatrix& m, double herm_tol = kHermTol);

/// Principal square root. Eigenvalues at roundoff level or in
/// [-psd_tol·max(1, λmax), 0) are treated as zero; anything lower is rejected.
CMatrix sqrt_psd(const CMatrix& m, double psd_tol = kPsdTol);

/// Inverse square root on the support; eigenvalues below `cutoff` are dropped.
CMatrix inv_sqrt_psd(const CMatrix& m, double cutoff = kRankTol);

/// Number of eigenvalues above `tol`.
std::size_t psd_rank(const CMatrix& m, double tol = kRankTol);

/// Column-stacking vectorization (rows*cols x 1).
CMatrix vec(const CMatrix& m);
CMatrix unvec(const CMatrix& v, std::size_t rows, std::size_t cols);

/// Coordinates of a Hermitian d x d matrix in an orthonormal real basis of
/// Herm(d): d diagonal entries followed by (√2 Re m_ij, √2 Im m_ij) for i<j.
/// The map is an isometry from the Frobenius norm to the Euclidean norm.
std::vector<double> herm_coords(const CMatrix& m);
void herm_coords_into(const CMatrix& m, std::span<double> out);
CMatrix herm_from_coords(std::span<const double> coords, std::size_t d);

constexpr std::size_t herm_coord_count(std::size_t d) { return d * d; }

std::string to_string(const CMatrix& m, int precision = 4);

}  // namespace instro
