#include "instro/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace instro {

namespace {

void require_same_shape(const CMatrix& a, const CMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
       << b.cols();
    throw DimensionError(os.str());
  }
}

void require_square(const CMatrix& m, const char* what) {
  if (!m.is_square()) throw DimensionError(std::string(what) + ": matrix is not square");
}

void require_hermitian(const CMatrix& m, double tol, const char* what) {
  require_square(m, what);
  if (!m.is_hermitian(tol)) throw NumericalError(std::string(what) + ": matrix is not Hermitian");
}

std::vector<std::size_t> strides_of(const DimVec& dims) {
  std::vector<std::size_t> s(dims.size(), 1);
  for (std::size_t k = dims.size(); k-- > 1;) s[k - 1] = s[k] * dims[k];
  return s;
}

// Flat offsets of all index combinations over the listed factors.
std::vector<std::size_t> offsets_over(const DimVec& dims, const std::vector<std::size_t>& strides,
                                      const std::vector<std::size_t>& factors) {
  std::vector<std::size_t> out{0};
  for (std::size_t f : factors) {
    std::vector<std::size_t> next;
    next.reserve(out.size() * dims[f]);
    for (std::size_t base : out)
      for (std::size_t i = 0; i < dims[f]; ++i) next.push_back(base + i * strides[f]);
    out = std::move(next);
  }
  return out;
}

void check_dims(const CMatrix& m, const DimVec& dims, const char* what) {
  for (std::size_t d : dims)
    if (d == 0) throw DimensionError(std::string(what) + ": zero subsystem dimension");
  if (dim_product(dims) != m.rows()) {
    std::ostringstream os;
    os << what << ": dims product " << dim_product(dims) << " does not match matrix dimension "
       << m.rows();
    throw DimensionError(os.str());
  }
}

// One cyclic Jacobi run on a Hermitian matrix a, accumulating rotations in v.
void jacobi_in_place(CMatrix& a, CMatrix& v) {
  const std::size_t n = a.rows();
  double scale = 0.0;
  for (auto z : a.data()) scale += std::norm(z);
  if (scale == 0.0) return;
  const double stop = 1e-30 * scale;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::norm(a(p, q));
    if (off <= stop) return;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const cplx b = a(p, q);
        const double ab = std::abs(b);
        if (ab < 1e-300) continue;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        if (sweep > 3 && ab < 1e-18 * (std::abs(app) + std::abs(aqq))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * ab);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const cplx ph = std::conj(b) / ab;  // e^{-i arg b}
        // G = [[c, s], [-s*ph, c*ph]] acting on columns p, q.
        const cplx gpp = c, gpq = s, gqp = -s * ph, gqq = c * ph;

        for (std::size_t k = 0; k < n; ++k) {
          const cplx akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * gpp + akq * gqp;
          a(k, q) = akp * gpq + akq * gqq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const cplx apk = a(p, k), aqk = a(q, k);
          a(p, k) = std::conj(gpp) * apk + std::conj(gqp) * aqk;
          a(q, k) = std::conj(gpq) * apk + std::conj(gqq) * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (std::size_t k = 0; k < n; ++k) {
          const cplx vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp * gpp + vkq * gqp;
          v(k, q) = vkp * gpq + vkq * gqq;
        }
      }
    }
  }
  throw NumericalError("herm_eig: Jacobi iteration did not converge");
}

EigenSystem sorted_system(const CMatrix& a, const CMatrix& v) {
  const std::size_t n = a.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i).real() > a(j, j).real(); });
  EigenSystem es;
  es.values.resize(n);
  es.vectors = CMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    es.values[k] = a(order[k], order[k]).real();
    for (std::size_t r = 0; r < n; ++r) es.vectors(r, k) = v(r, order[k]);
  }
  return es;
}

CMatrix from_eigen(const EigenSystem& es, const std::vector<double>& vals) {
  const std::size_t n = es.vectors.rows();
  CMatrix out(n, n);
  for (std::size_t k = 0; k < vals.size(); ++k) {
    if (vals[k] == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const cplx vi = es.vectors(i, k) * vals[k];
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vi * std::conj(es.vectors(j, k));
    }
  }
  return out;
}

}  // namespace

std::size_t dim_product(const DimVec& dims) {
  std::size_t p = 1;
  for (std::size_t d : dims) p *= d;
  return p;
}

CMatrix::CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

CMatrix::CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) throw DimensionError("CMatrix: entry count does not match shape");
}

CMatrix CMatrix::identity(std::size_t n) {
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

CMatrix CMatrix::diag(std::span<const double> values) {
  CMatrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

CMatrix CMatrix::diag(std::initializer_list<double> values) {
  return diag(std::span<const double>(values.begin(), values.size()));
}

CMatrix CMatrix::from_rows(std::initializer_list<std::initializer_list<cplx>> rows) {
  const std::size_t nr = rows.size();
  const std::size_t nc = nr ? rows.begin()->size() : 0;
  std::vector<cplx> e;
  e.reserve(nr * nc);
  for (const auto& r : rows) {
    if (r.size() != nc) throw DimensionError("CMatrix::from_rows: ragged rows");
    e.insert(e.end(), r.begin(), r.end());
  }
  return CMatrix(nr, nc, std::move(e));
}

CMatrix CMatrix::column(std::span<const cplx> values) {
  return CMatrix(values.size(), 1, std::vector<cplx>(values.begin(), values.end()));
}

CMatrix CMatrix::outer(const CMatrix& u, const CMatrix& v) {
  if (u.cols() != 1 || v.cols() != 1) throw DimensionError("outer: arguments must be column vectors");
  CMatrix m(u.rows(), v.rows());
  for (std::size_t i = 0; i < u.rows(); ++i)
    for (std::size_t j = 0; j < v.rows(); ++j) m(i, j) = u(i, 0) * std::conj(v(j, 0));
  return m;
}

CMatrix CMatrix::adjoint() const {
  CMatrix m(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) m(j, i) = std::conj((*this)(i, j));
  return m;
}

CMatrix CMatrix::transpose() const {
  CMatrix m(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) m(j, i) = (*this)(i, j);
  return m;
}

CMatrix CMatrix::conj() const {
  CMatrix m = *this;
  for (auto& z : m.data_) z = std::conj(z);
  return m;
}

cplx CMatrix::trace() const {
  if (!is_square()) throw DimensionError("trace: matrix is not square");
  cplx t = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
  return t;
}

double CMatrix::frobenius_norm() const {
  double s = 0.0;
  for (auto z : data_) s += std::norm(z);
  return std::sqrt(s);
}

double CMatrix::max_abs() const {
  double m = 0.0;
  for (auto z : data_) m = std::max(m, std::abs(z));
  return m;
}

bool CMatrix::is_hermitian(double tol) const {
  if (!is_square()) return false;
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = i; j < cols_; ++j)
      if (std::abs((*this)(i, j) - std::conj((*this)(j, i))) > tol) return false;
  return true;
}

CMatrix CMatrix::hermitian_part() const {
  require_square(*this, "hermitian_part");
  CMatrix m(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) m(i, j) = 0.5 * ((*this)(i, j) + std::conj((*this)(j, i)));
  return m;
}

CMatrix CMatrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) throw DimensionError("block: out of range");
  CMatrix m(nr, nc);
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j) m(i, j) = (*this)(r0 + i, c0 + j);
  return m;
}

void CMatrix::set_block(std::size_t r0, std::size_t c0, const CMatrix& b) {
  if (r0 + b.rows() > rows_ || c0 + b.cols() > cols_) throw DimensionError("set_block: out of range");
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) (*this)(r0 + i, c0 + j) = b(i, j);
}

CMatrix CMatrix::col(std::size_t c) const { return block(0, c, rows_, 1); }

CMatrix& CMatrix::operator+=(const CMatrix& o) {
  require_same_shape(*this, o, "operator+");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
  return *this;
}

CMatrix& CMatrix::operator-=(const CMatrix& o) {
  require_same_shape(*this, o, "operator-");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
  return *this;
}

CMatrix& CMatrix::operator*=(cplx s) {
  for (auto& z : data_) z *= s;
  return *this;
}

CMatrix& CMatrix::operator/=(cplx s) {
  for (auto& z : data_) z /= s;
  return *this;
}

CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
CMatrix operator-(CMatrix a) { return a *= -1.0; }
CMatrix operator*(CMatrix a, cplx s) { return a *= s; }
CMatrix operator*(cplx s, CMatrix a) { return a *= s; }
CMatrix operator/(CMatrix a, cplx s) { return a /= s; }

CMatrix operator*(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows()) {
    std::ostringstream os;
    os << "matmul: " << a.rows() << "x" << a.cols() << " times " << b.rows() << "x" << b.cols();
    throw DimensionError(os.str());
  }
  CMatrix m(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cplx* out = &m(i, 0);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      if (aik == 0.0) continue;
      const cplx* brow = &b(k, 0);
      for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
    }
  }
  return m;
}

double max_abs_diff(const CMatrix& a, const CMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

double frobenius_distance(const CMatrix& a, const CMatrix& b) {
  require_same_shape(a, b, "frobenius_distance");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::norm(a.data()[k] - b.data()[k]);
  return std::sqrt(s);
}

double inner_real(const CMatrix& a, const CMatrix& b) {
  require_same_shape(a, b, "inner_real");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (std::conj(a.data()[k]) * b.data()[k]).real();
  return s;
}

CMatrix tensor(const CMatrix& a, const CMatrix& b) {
  CMatrix m(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const cplx aij = a(i, j);
      if (aij == 0.0) continue;
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l) m(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
    }
  return m;
}

CMatrix partial_trace(const CMatrix& m, const DimVec& dims, std::vector<std::size_t> keep) {
  require_square(m, "partial_trace");
  check_dims(m, dims, "partial_trace");
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  std::vector<std::size_t> traced;
  for (std::size_t f = 0; f < dims.size(); ++f)
    if (!std::binary_search(keep.begin(), keep.end(), f)) traced.push_back(f);
  for (std::size_t k : keep)
    if (k >= dims.size()) throw DimensionError("partial_trace: keep index out of range");

  const auto strides = strides_of(dims);
  const auto ko = offsets_over(dims, strides, keep);
  const auto to = offsets_over(dims, strides, traced);
  CMatrix out(ko.size(), ko.size());
  for (std::size_t i = 0; i < ko.size(); ++i)
    for (std::size_t j = 0; j < ko.size(); ++j) {
      cplx s = 0.0;
      for (std::size_t t : to) s += m(ko[i] + t, ko[j] + t);
      out(i, j) = s;
    }
  return out;
}

CMatrix permute_factors(const CMatrix& m, const DimVec& dims, const std::vector<std::size_t>& perm,
                        bool rows_only) {
  check_dims(m, dims, "permute_factors");
  if (perm.size() != dims.size()) throw DimensionError("permute_factors: permutation length mismatch");
  std::vector<bool> seen(dims.size(), false);
  for (std::size_t p : perm) {
    if (p >= dims.size() || seen[p]) throw DimensionError("permute_factors: not a permutation");
    seen[p] = true;
  }
  if (!rows_only) require_square(m, "permute_factors");
  const auto old_strides = strides_of(dims);
  std::vector<std::size_t> order(perm.begin(), perm.end());
  // Enumerating the permuted factors slowest-first in new order gives the old index of each new index.
  const auto map = offsets_over(dims, old_strides, order);
  CMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(map[i], rows_only ? j : map[j]);
  return out;
}

CMatrix partial_transpose(const CMatrix& m, const DimVec& dims, const std::vector<std::size_t>& which) {
  require_square(m, "partial_transpose");
  check_dims(m, dims, "partial_transpose");
  const auto strides = strides_of(dims);
  CMatrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::size_t nr = r, nc = c;
      for (std::size_t f : which) {
        if (f >= dims.size()) throw DimensionError("partial_transpose: factor index out of range");
        const std::size_t dr = (r / strides[f]) % dims[f];
        const std::size_t dc = (c / strides[f]) % dims[f];
        nr = nr - dr * strides[f] + dc * strides[f];
        nc = nc - dc * strides[f] + dr * strides[f];
      }
      out(nr, nc) = m(r, c);
    }
  return out;
}

EigenSystem herm_eig(const CMatrix& m, double herm_tol) {
  require_hermitian(m, herm_tol * std::max(1.0, m.max_abs()), "herm_eig");
  CMatrix a = m.hermitian_part();
  CMatrix v = CMatrix::identity(m.rows());
  jacobi_in_place(a, v);
  return sorted_system(a, v);
}

EigenSystem herm_eig(const CMatrix& m, const CMatrix& guess, double herm_tol) {
  require_hermitian(m, herm_tol * std::max(1.0, m.max_abs()), "herm_eig");
  if (guess.rows() != m.rows() || guess.cols() != m.cols())
    throw DimensionError("herm_eig: guess basis has the wrong shape");
  CMatrix a = (guess.adjoint() * m * guess).hermitian_part();
  CMatrix v = guess;
  jacobi_in_place(a, v);
  return sorted_system(a, v);
}

std::vector<double> herm_eigenvalues(const CMatrix& m, double herm_tol) { return herm_eig(m, herm_tol).values; }

double min_eig(const CMatrix& m, double herm_tol) {
  if (m.empty()) return 0.0;
  return herm_eig(m, herm_tol).values.back();
}

double max_eig(const CMatrix& m, double herm_tol) {
  if (m.empty()) return 0.0;
  return herm_eig(m, herm_tol).values.front();
}

CMatrix psd_project(const CMatrix& m, double herm_tol) {
  const EigenSystem es = herm_eig(m, herm_tol);
  std::vector<double> vals = es.values;
  for (auto& v : vals) v = std::max(v, 0.0);
  return from_eigen(es, vals);
}

constexpr double kSqrtFloor = 1e-14;

CMatrix sqrt_psd(const CMatrix& m, double psd_tol) {
  const EigenSystem es = herm_eig(m);
  const double scale = std::max(1.0, es.values.empty() ? 0.0 : std::abs(es.values.front()));
  std::vector<double> vals = es.values;
  for (auto& v : vals) {
    if (v < -psd_tol * scale) throw NumericalError("sqrt_psd: matrix is not positive semidefinite");
    // Eigenvalues at roundoff level are zeros; their square roots would not be.
    v = v > kSqrtFloor * scale * static_cast<double>(m.rows()) ? std::sqrt(v) : 0.0;
  }
  return from_eigen(es, vals);
}

CMatrix inv_sqrt_psd(const CMatrix& m, double cutoff) {
  const EigenSystem es = herm_eig(m);
  std::vector<double> vals = es.values;
  for (auto& v : vals) v = v > cutoff ? 1.0 / std::sqrt(v) : 0.0;
  return from_eigen(es, vals);
}

std::size_t psd_rank(const CMatrix& m, double tol) {
  std::size_t r = 0;
  for (double v : herm_eigenvalues(m))
    if (v > tol) ++r;
  return r;
}

CMatrix vec(const CMatrix& m) {
  CMatrix v(m.size(), 1);
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) v(j * m.rows() + i, 0) = m(i, j);
  return v;
}

CMatrix unvec(const CMatrix& v, std::size_t rows, std::size_t cols) {
  if (v.cols() != 1 || v.rows() != rows * cols) throw DimensionError("unvec: shape mismatch");
  CMatrix m(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) m(i, j) = v(j * rows + i, 0);
  return m;
}

void herm_coords_into(const CMatrix& m, std::span<double> out) {
  const std::size_t d = m.rows();
  if (out.size() != d * d) throw DimensionError("herm_coords: output length mismatch");
  static const double r2 = std::sqrt(2.0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i) out[k++] = m(i, i).real();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      // Average the two triangles so slightly non-Hermitian input maps to its Hermitian part.
      const cplx z = 0.5 * (m(i, j) + std::conj(m(j, i)));
      out[k++] = r2 * z.real();
      out[k++] = r2 * z.imag();
    }
}

std::vector<double> herm_coords(const CMatrix& m) {
  require_square(m, "herm_coords");
  std::vector<double> out(m.rows() * m.rows());
  herm_coords_into(m, out);
  return out;
}

CMatrix herm_from_coords(std::span<const double> coords, std::size_t d) {
  if (coords.size() != d * d) throw DimensionError("herm_from_coords: coordinate length mismatch");
  static const double ir2 = 1.0 / std::sqrt(2.0);
  CMatrix m(d, d);
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i) m(i, i) = coords[k++];
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const cplx z(coords[k] * ir2, coords[k + 1] * ir2);
      k += 2;
      m(i, j) = z;
      m(j, i) = std::conj(z);
    }
  return m;
}

std::string to_string(const CMatrix& m, int precision) {
  std::ostringstream os;
  os << std::setprecision(precision);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    os << "[";
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const cplx z = m(i, j);
      os << (j ? ", " : "") << z.real();
      if (z.imag() != 0.0) os << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
    }
    os << "]\n";
  }
  return os.str();
}

}  // namespace instro
