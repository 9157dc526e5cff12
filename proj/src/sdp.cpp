#include "instro/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "instro/devices.hpp"

namespace instro::sdp {

namespace {

// ---------------------------------------------------------------- shapes

std::size_t stage_out_dim(const Stage& s, std::size_t in) {
  auto fail = [](const std::string& what) -> std::size_t { throw DimensionError("constraint stage: " + what); };
  return std::visit(
      [&](const auto& st) -> std::size_t {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, PartialTrace>) {
          if (dim_product(st.dims) != in) return fail("partial trace dims do not match the input");
          std::size_t out = 1;
          for (std::size_t k : st.keep) {
            if (k >= st.dims.size()) return fail("partial trace keep index out of range");
            out *= st.dims[k];
          }
          return out;
        } else if constexpr (std::is_same_v<T, Sandwich>) {
          if (st.left.cols() != in) return fail("sandwich operator has the wrong width");
          return st.left.rows();
        } else if constexpr (std::is_same_v<T, LinkFixedFirst>) {
          if (st.dim_mid * st.dim_out != in) return fail("link input does not match dim_mid*dim_out");
          if (st.fixed.rows() != st.dim_in * st.dim_mid || !st.fixed.is_square())
            return fail("fixed Choi matrix has the wrong shape");
          return st.dim_in * st.dim_out;
        } else if constexpr (std::is_same_v<T, LinkFixedSecond>) {
          if (st.dim_in * st.dim_mid != in) return fail("link input does not match dim_in*dim_mid");
          if (st.fixed.rows() != st.dim_mid * st.dim_out || !st.fixed.is_square())
            return fail("fixed Choi matrix has the wrong shape");
          return st.dim_in * st.dim_out;
        } else if constexpr (std::is_same_v<T, Permute>) {
          if (dim_product(st.dims) != in) return fail("permutation dims do not match the input");
          return in;
        } else {
          return in;
        }
      },
      s);
}

// ---------------------------------------------------------------- dense helpers

using Vec = std::vector<double>;

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vec& v) { return std::sqrt(dot(v.data(), v.data(), v.size())); }

// Cholesky solve of a symmetric positive definite k x k system, in place.
bool cholesky_solve(Vec m, std::size_t k, Vec& rhs) {
  for (std::size_t j = 0; j < k; ++j) {
    double d = m[j * k + j];
    for (std::size_t p = 0; p < j; ++p) d -= m[j * k + p] * m[j * k + p];
    if (!(d > 0.0)) return false;
    d = std::sqrt(d);
    m[j * k + j] = d;
    for (std::size_t i = j + 1; i < k; ++i) {
      double s = m[i * k + j];
      for (std::size_t p = 0; p < j; ++p) s -= m[i * k + p] * m[j * k + p];
      m[i * k + j] = s / d;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    double s = rhs[i];
    for (std::size_t p = 0; p < i; ++p) s -= m[i * k + p] * rhs[p];
    rhs[i] = s / m[i * k + i];
  }
  for (std::size_t i = k; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t p = i + 1; p < k; ++p) s -= m[p * k + i] * rhs[p];
    rhs[i] = s / m[i * k + i];
  }
  return true;
}

struct Space {
  std::vector<std::size_t> dims;
  std::vector<std::size_t> off;
  std::size_t n = 0;

  explicit Space(std::vector<std::size_t> d) : dims(std::move(d)) {
    for (std::size_t x : dims) {
      off.push_back(n);
      n += x * x;
    }
  }
  CMatrix block(const Vec& v, std::size_t b) const {
    return herm_from_coords(std::span<const double>(v.data() + off[b], dims[b] * dims[b]), dims[b]);
  }
  void set_block(Vec& v, std::size_t b, const CMatrix& m) const {
    herm_coords_into(m, std::span<double>(v.data() + off[b], dims[b] * dims[b]));
  }
  Vec identity() const {
    Vec v(n, 0.0);
    for (std::size_t b = 0; b < dims.size(); ++b)
      for (std::size_t i = 0; i < dims[b]; ++i) v[off[b] + i] = 1.0;
    return v;
  }
};

struct Assembled {
  std::size_t m = 0;
  std::vector<std::size_t> row_off;
  Vec a;  // m x n
  Vec b;
};

Assembled assemble(const FeasibilityProblem& p, const Space& sp) {
  Assembled as;
  for (const auto& c : p.constraints()) {
    as.row_off.push_back(as.m);
    as.m += c.target.rows() * c.target.rows();
  }
  as.a.assign(as.m * sp.n, 0.0);
  as.b.assign(as.m, 0.0);
  for (std::size_t c = 0; c < p.constraints().size(); ++c) {
    const auto bc = herm_coords(p.constraints()[c].target);
    std::copy(bc.begin(), bc.end(), as.b.begin() + static_cast<std::ptrdiff_t>(as.row_off[c]));
  }
  for (std::size_t blk = 0; blk < sp.dims.size(); ++blk) {
    const std::size_t d = sp.dims[blk];
    Vec unit(d * d, 0.0);
    for (std::size_t k = 0; k < d * d; ++k) {
      std::fill(unit.begin(), unit.end(), 0.0);
      unit[k] = 1.0;
      const CMatrix e = herm_from_coords(unit, d);
      for (std::size_t c = 0; c < p.constraints().size(); ++c) {
        const auto& con = p.constraints()[c];
        CMatrix out;
        bool any = false;
        for (const auto& t : con.terms) {
          if (t.block != blk) continue;
          CMatrix r = apply_term(t, e);
          if (any) out += r;
          else out = std::move(r);
          any = true;
        }
        if (!any) continue;
        const auto col = herm_coords(out);
        for (std::size_t r = 0; r < col.size(); ++r) as.a[(as.row_off[c] + r) * sp.n + sp.off[blk] + k] = col[r];
      }
    }
  }
  return as;
}

// Rows of Q are orthonormal and span the rows of the input matrix.
struct Ortho {
  std::size_t k = 0, n = 0;
  Vec q;   // k x n
  Vec qt;  // n x k
  Vec beta;
  bool consistent = true;
  double inconsistency = 0.0;
};

Ortho orthonormalize(const Vec& a, std::size_t m, std::size_t n, const Vec& b) {
  Ortho o;
  o.n = n;
  Vec r(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(a.begin() + static_cast<std::ptrdiff_t>(i * n), a.begin() + static_cast<std::ptrdiff_t>((i + 1) * n),
              r.begin());
    double beta = b[i];
    const double n0 = norm2(r);
    if (n0 == 0.0) {
      if (std::abs(beta) > 1e-12) {
        o.consistent = false;
        o.inconsistency = std::max(o.inconsistency, std::abs(beta));
      }
      continue;
    }
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < o.k; ++j) {
        const double* qj = o.q.data() + j * n;
        const double d = dot(qj, r.data(), n);
        if (d == 0.0) continue;
        for (std::size_t t = 0; t < n; ++t) r[t] -= d * qj[t];
        beta -= d * o.beta[j];
      }
    const double nr = norm2(r);
    if (nr <= 1e-9 * n0) {
      // For consistent data |beta| is at most |r| times the solution norm, and
      // the least-norm solution of the rows kept so far has norm |o.beta|.
      const double rho = std::abs(beta) / (n0 * std::max(1.0, norm2(o.beta)));
      if (rho > 1e-9) {
        o.consistent = false;
        o.inconsistency = std::max(o.inconsistency, rho);
      }
      continue;
    }
    for (double& t : r) t /= nr;
    o.q.insert(o.q.end(), r.begin(), r.end());
    o.beta.push_back(beta / nr);
    ++o.k;
  }
  o.qt.assign(n * o.k, 0.0);
  for (std::size_t i = 0; i < o.k; ++i)
    for (std::size_t j = 0; j < n; ++j) o.qt[j * o.k + i] = o.q[i * n + j];
  return o;
}

// r = Q x - beta
Vec residual(const Ortho& o, const Vec& x) {
  Vec r(o.k);
  for (std::size_t i = 0; i < o.k; ++i) r[i] = dot(o.q.data() + i * o.n, x.data(), o.n) - o.beta[i];
  return r;
}

// x - Qᵀ r
void subtract_qt(const Ortho& o, const Vec& r, Vec& x) {
  for (std::size_t i = 0; i < o.k; ++i) {
    const double ri = r[i];
    if (ri == 0.0) continue;
    const double* qi = o.q.data() + i * o.n;
    for (std::size_t j = 0; j < o.n; ++j) x[j] -= ri * qi[j];
  }
}

Vec qt_times(const Ortho& o, const Vec& y) {
  Vec w(o.n, 0.0);
  for (std::size_t i = 0; i < o.k; ++i) {
    const double yi = y[i];
    if (yi == 0.0) continue;
    const double* qi = o.q.data() + i * o.n;
    for (std::size_t j = 0; j < o.n; ++j) w[j] += yi * qi[j];
  }
  return w;
}

// Cached eigenbases make repeated projections of slowly varying blocks cheap.
struct PsdProjector {
  const Space& sp;
  std::vector<CMatrix> basis;
  std::vector<EigenSystem> last;

  explicit PsdProjector(const Space& s) : sp(s), basis(s.dims.size()), last(s.dims.size()) {
    for (std::size_t b = 0; b < s.dims.size(); ++b) basis[b] = CMatrix::identity(s.dims[b]);
  }

  Vec project(const Vec& y) {
    Vec c(sp.n, 0.0);
    for (std::size_t b = 0; b < sp.dims.size(); ++b) {
      const std::size_t d = sp.dims[b];
      if (d == 0) continue;
      const CMatrix m = sp.block(y, b);
      EigenSystem es = herm_eig(m, basis[b], 1e300);
      basis[b] = es.vectors;
      CMatrix out(d, d);
      for (std::size_t k = 0; k < d; ++k) {
        const double lam = es.values[k];
        if (lam <= 0.0) break;
        for (std::size_t i = 0; i < d; ++i) {
          const cplx vi = es.vectors(i, k) * lam;
          for (std::size_t j = 0; j < d; ++j) out(i, j) += vi * std::conj(es.vectors(j, k));
        }
      }
      sp.set_block(c, b, out);
      last[b] = std::move(es);
    }
    return c;
  }
};

double min_eig_blocks(const Space& sp, const Vec& v) {
  double m = INFINITY;
  for (std::size_t b = 0; b < sp.dims.size(); ++b)
    if (sp.dims[b] > 0) m = std::min(m, min_eig(sp.block(v, b), 1e300));
  return m;
}

// ---------------------------------------------------------------- LM polish

std::size_t pair_index(std::size_t d, std::size_t p, std::size_t q) {
  return d + 2 * (p * d - p * (p + 1) / 2 + (q - p - 1));
}

struct Factor {
  std::vector<CMatrix> r;  // per block, dims[b] x rank_b
};

Vec gram_coords(const Space& sp, const Factor& f) {
  Vec x(sp.n, 0.0);
  for (std::size_t b = 0; b < sp.dims.size(); ++b) {
    if (sp.dims[b] == 0 || f.r[b].cols() == 0) continue;
    sp.set_block(x, b, f.r[b] * f.r[b].adjoint());
  }
  return x;
}

// Levenberg–Marquardt on ‖Q coords(R R†) - beta‖ with the eigenbasis of c as start.
bool lm_polish(const Space& sp, const Ortho& o, const std::vector<EigenSystem>& eig, double tau, double target,
               int max_steps, Vec& x_out) {
  Factor f;
  f.r.resize(sp.dims.size());
  std::size_t p = 0;
  for (std::size_t b = 0; b < sp.dims.size(); ++b) {
    const std::size_t d = sp.dims[b];
    if (d == 0) continue;
    std::size_t k = 0;
    while (k < d && eig[b].values[k] > tau) ++k;
    CMatrix r(d, k);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < d; ++i) r(i, j) = eig[b].vectors(i, j) * std::sqrt(std::max(eig[b].values[j], 0.0));
    f.r[b] = std::move(r);
    p += 2 * d * k;
  }
  if (p == 0 || o.k == 0) return false;

  const double r2 = std::sqrt(2.0);
  Vec res = residual(o, gram_coords(sp, f));
  double rn = norm2(res);
  double mu = -1.0;
  Vec jac(p * o.k);  // column-major: parameter t occupies [t*k, (t+1)*k)
  Vec jjt(o.k * o.k);

  auto add_col = [&](double* col, std::size_t coord, double v) {
    if (v == 0.0) return;
    const double* src = o.qt.data() + coord * o.k;
    for (std::size_t i = 0; i < o.k; ++i) col[i] += v * src[i];
  };

  for (int step = 0; step < max_steps && rn > target; ++step) {
    std::fill(jac.begin(), jac.end(), 0.0);
    std::size_t t = 0;
    for (std::size_t b = 0; b < sp.dims.size(); ++b) {
      const std::size_t d = sp.dims[b];
      const CMatrix& r = f.r[b];
      for (std::size_t j = 0; j < r.cols(); ++j)
        for (std::size_t i = 0; i < d; ++i) {
          double* cre = jac.data() + t * o.k;
          double* cim = jac.data() + (t + 1) * o.k;
          t += 2;
          const std::size_t base = sp.off[b];
          add_col(cre, base + i, 2.0 * r(i, j).real());
          add_col(cim, base + i, 2.0 * r(i, j).imag());
          for (std::size_t q = 0; q < d; ++q) {
            if (q == i) continue;
            const double a = r(q, j).real(), bb = r(q, j).imag();
            if (a == 0.0 && bb == 0.0) continue;
            if (i < q) {
              const std::size_t pi = base + pair_index(d, i, q);
              add_col(cre, pi, r2 * a);
              add_col(cre, pi + 1, -r2 * bb);
              add_col(cim, pi, r2 * bb);
              add_col(cim, pi + 1, r2 * a);
            } else {
              const std::size_t pi = base + pair_index(d, q, i);
              add_col(cre, pi, r2 * a);
              add_col(cre, pi + 1, r2 * bb);
              add_col(cim, pi, r2 * bb);
              add_col(cim, pi + 1, -r2 * a);
            }
          }
        }
    }
    std::fill(jjt.begin(), jjt.end(), 0.0);
    for (std::size_t c = 0; c < p; ++c) {
      const double* col = jac.data() + c * o.k;
      for (std::size_t i = 0; i < o.k; ++i) {
        const double ci = col[i];
        if (ci == 0.0) continue;
        double* row = jjt.data() + i * o.k;
        for (std::size_t l = 0; l <= i; ++l) row[l] += ci * col[l];
      }
    }
    double dmax = 0.0;
    for (std::size_t i = 0; i < o.k; ++i) {
      for (std::size_t l = 0; l < i; ++l) jjt[l * o.k + i] = jjt[i * o.k + l];
      dmax = std::max(dmax, jjt[i * o.k + i]);
    }
    if (dmax == 0.0) return false;
    if (mu < 0.0) mu = 1e-3 * dmax;

    bool accepted = false;
    while (!accepted) {
      if (mu > 1e10 * std::max(1.0, dmax)) return false;
      Vec m = jjt;
      for (std::size_t i = 0; i < o.k; ++i) m[i * o.k + i] += mu;
      Vec z = res;
      if (!cholesky_solve(std::move(m), o.k, z)) {
        mu *= 4.0;
        continue;
      }
      Factor trial = f;
      std::size_t tt = 0;
      for (std::size_t b = 0; b < sp.dims.size(); ++b) {
        CMatrix& r = trial.r[b];
        for (std::size_t j = 0; j < r.cols(); ++j)
          for (std::size_t i = 0; i < sp.dims[b]; ++i) {
            const double dre = -dot(jac.data() + tt * o.k, z.data(), o.k);
            const double dim = -dot(jac.data() + (tt + 1) * o.k, z.data(), o.k);
            tt += 2;
            r(i, j) += cplx(dre, dim);
          }
      }
      Vec tres = residual(o, gram_coords(sp, trial));
      const double tn = norm2(tres);
      if (tn < rn) {
        f = std::move(trial);
        res = std::move(tres);
        const bool stalled = tn > 0.99 * rn && step > 20;
        rn = tn;
        mu = std::max(mu / 4.0, 1e-15 * dmax);
        accepted = true;
        if (stalled && rn > 100 * target) return false;
      } else {
        mu *= 4.0;
      }
    }
  }
  if (rn > 1e3 * target) return false;
  x_out = gram_coords(sp, f);
  return true;
}

// ---------------------------------------------------------------- Dykstra

struct RunResult {
  Status status = Status::Undecided;
  Vec x;
  double margin = 0.0;
  std::string margin_kind;
  int iterations = 0;
  std::vector<double> trace;
};

// Separation certificate from a row-space direction y (w = Qᵀy): shift w by
// a multiple of the identity until it is PSD, then margin = -βᵀy / ‖w‖.
double certificate_margin(const Space& sp, const Ortho& o, const Vec& y, const Vec& z_id) {
  Vec w = qt_times(o, y);
  const double wn = norm2(w);
  if (wn == 0.0) return 0.0;
  const double lam = min_eig_blocks(sp, w);
  double s = lam < 0.0 ? -lam + 1e-13 * wn : 0.0;
  Vec y2 = y;
  if (s > 0.0) {
    if (z_id.empty()) return 0.0;
    for (std::size_t i = 0; i < o.k; ++i) y2[i] += s * z_id[i];
    w = qt_times(o, y2);
  }
  const double num = -dot(o.beta.data(), y2.data(), o.k);
  const double den = norm2(w);
  return den > 0.0 ? num / den : 0.0;
}

template <class Verify>
RunResult dykstra(const Space& sp, const Ortho& o, const SolverConfig& cfg, int max_iter, bool allow_polish,
                  Verify&& verify) {
  RunResult out;
  // Identity direction in the row space, needed to make certificates PSD.
  Vec z_id;
  {
    const Vec id = sp.identity();
    Vec z(o.k);
    for (std::size_t i = 0; i < o.k; ++i) z[i] = dot(o.q.data() + i * o.n, id.data(), o.n);
    Vec back = qt_times(o, z);
    double err = 0.0;
    for (std::size_t j = 0; j < sp.n; ++j) err = std::max(err, std::abs(back[j] - id[j]));
    if (err <= 1e-9) z_id = std::move(z);
  }

  static const int checkpoints[] = {30, 100, 300, 1000, 3000, 10000};
  const double bnorm = std::max(1.0, norm2(o.beta));
  PsdProjector psd(sp);
  Vec c(sp.n, 0.0), q(sp.n, 0.0);
  Vec r = residual(o, c);
  Vec a = c;
  subtract_qt(o, r, a);
  double gap = norm2(r), gap_prev = INFINITY;

  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    Vec y(sp.n);
    for (std::size_t j = 0; j < sp.n; ++j) y[j] = a[j] + q[j];
    c = psd.project(y);
    for (std::size_t j = 0; j < sp.n; ++j) q[j] = y[j] - c[j];
    r = residual(o, c);
    gap = norm2(r);  // = ‖P_A(c) - c‖ since Q has orthonormal rows
    Vec a_new = c;
    subtract_qt(o, r, a_new);
    if (cfg.record_trace) {
      double s = 0.0;
      for (std::size_t j = 0; j < sp.n; ++j) s += (a_new[j] - a[j]) * (a_new[j] - a[j]);
      out.trace.push_back(std::sqrt(s));
    }
    a = std::move(a_new);

    if (gap <= 0.5 * cfg.feas_tol && verify(c)) {
      out.status = Status::Feasible;
      out.x = c;
      return out;
    }
    if (allow_polish && cfg.polish && std::find(std::begin(checkpoints), std::end(checkpoints), it) != std::end(checkpoints) &&
        gap < 1e-2 * bnorm) {
      double lmax = 0.0;
      for (const auto& es : psd.last)
        if (!es.values.empty()) lmax = std::max(lmax, es.values.front());
      const double target = std::min(1e-3 * cfg.feas_tol, 1e-10);
      for (double tau : {1e-2 * lmax, -1.0}) {
        Vec x;
        if (lm_polish(sp, o, psd.last, tau, target, 400, x) && verify(x)) {
          out.status = Status::Feasible;
          out.x = std::move(x);
          return out;
        }
      }
    }
    if (it % 100 == 0 && gap > cfg.gap_tol) {
      // Two candidate directions: the Dykstra displacement and P_K(a) - a.
      double best = certificate_margin(sp, o, r, z_id);
      Vec pk = psd.project(a);
      for (std::size_t j = 0; j < sp.n; ++j) pk[j] -= a[j];
      Vec y2(o.k);
      for (std::size_t i = 0; i < o.k; ++i) y2[i] = dot(o.q.data() + i * o.n, pk.data(), o.n);
      best = std::max(best, certificate_margin(sp, o, y2, z_id));
      if (best > 0.1 * cfg.gap_tol) {
        out.status = Status::Infeasible;
        out.margin = best;
        out.margin_kind = "cone";
        return out;
      }
      if (it % 500 == 0) {
        const bool stalled = std::abs(gap - gap_prev) < 1e-3 * gap;
        if (stalled && z_id.empty()) {
          out.status = Status::Infeasible;
          out.margin = gap;
          out.margin_kind = "gap";
          return out;
        }
        gap_prev = gap;
      }
    }
  }
  out.margin = gap;
  out.margin_kind = "gap";
  return out;
}

// ---------------------------------------------------------------- face reduction

struct Face {
  std::vector<CMatrix> v;  // per block, d_b x r_b isometry
  std::vector<std::size_t> dims;
  bool reduced = false;
};

Face structural_face(const FeasibilityProblem& p, const Space& sp, const Assembled& as) {
  Face f;
  Vec z(sp.n, 0.0);
  for (std::size_t c = 0; c < p.constraints().size(); ++c) {
    const auto& con = p.constraints()[c];
    bool positive = !con.terms.empty();
    for (const auto& t : con.terms)
      for (const auto& s : t.stages) positive = positive && stage_is_positive(s);
    if (!positive) continue;
    const EigenSystem es = herm_eig(con.target, 1e300);
    const double lmax = std::max(1.0, std::abs(es.values.front()));
    if (es.values.back() < -1e-9 * lmax) continue;
    CMatrix proj(con.target.rows(), con.target.rows());
    for (std::size_t k = 0; k < es.values.size(); ++k)
      if (es.values[k] <= 1e-9 * lmax) proj += CMatrix::outer(es.vectors.col(k), es.vectors.col(k));
    if (proj.max_abs() == 0.0) continue;
    const auto pc = herm_coords(proj);
    for (std::size_t r = 0; r < pc.size(); ++r) {
      if (pc[r] == 0.0) continue;
      const double* row = as.a.data() + (as.row_off[c] + r) * sp.n;
      for (std::size_t j = 0; j < sp.n; ++j) z[j] += pc[r] * row[j];
    }
  }
  for (std::size_t b = 0; b < sp.dims.size(); ++b) {
    const std::size_t d = sp.dims[b];
    const CMatrix zb = sp.block(z, b);
    const double scale = zb.max_abs();
    if (scale == 0.0) {
      f.v.push_back(CMatrix::identity(d));
      f.dims.push_back(d);
      continue;
    }
    const EigenSystem es = herm_eig(zb, 1e300);
    const double zmax = std::max(1.0, std::abs(es.values.front()));
    std::vector<std::size_t> ker;
    for (std::size_t k = 0; k < d; ++k)
      if (es.values[k] <= 1e-9 * zmax) ker.push_back(k);
    CMatrix v(d, ker.size());
    for (std::size_t j = 0; j < ker.size(); ++j)
      for (std::size_t i = 0; i < d; ++i) v(i, j) = es.vectors(i, ker[j]);
    if (ker.size() < d) f.reduced = true;
    f.v.push_back(std::move(v));
    f.dims.push_back(ker.size());
  }
  return f;
}

// Columns of the original constraint matrix composed with Y -> V Y V†.
Vec reduce_matrix(const Assembled& as, const Space& full, const Space& red, const Face& f) {
  Vec out(as.m * red.n, 0.0);
  for (std::size_t b = 0; b < full.dims.size(); ++b) {
    const std::size_t d = full.dims[b], r = red.dims[b];
    Vec unit(r * r, 0.0);
    for (std::size_t l = 0; l < r * r; ++l) {
      std::fill(unit.begin(), unit.end(), 0.0);
      unit[l] = 1.0;
      const CMatrix y = herm_from_coords(unit, r);
      const auto col = herm_coords(f.v[b] * y * f.v[b].adjoint());
      for (std::size_t i = 0; i < as.m; ++i) {
        const double* row = as.a.data() + i * full.n + full.off[b];
        double s = 0.0;
        for (std::size_t t = 0; t < d * d; ++t) s += row[t] * col[t];
        out[i * red.n + red.off[b] + l] = s;
      }
    }
  }
  return out;
}

std::vector<CMatrix> lift(const Space& red, const Face& f, const Vec& x) {
  std::vector<CMatrix> out;
  for (std::size_t b = 0; b < red.dims.size(); ++b) {
    if (red.dims[b] == 0) {
      out.push_back(CMatrix(f.v[b].rows(), f.v[b].rows()));
      continue;
    }
    out.push_back((f.v[b] * red.block(x, b) * f.v[b].adjoint()).hermitian_part());
  }
  return out;
}

Verdict solve_impl(const FeasibilityProblem& problem, const SolverConfig& cfg) {
  std::vector<std::size_t> dims;
  for (const auto& b : problem.blocks()) dims.push_back(b.dim);
  const Space full(dims);
  const Assembled as = assemble(problem, full);

  Verdict v;
  auto accept = [&](const std::vector<CMatrix>& w) {
    const WitnessCheck chk = check_witness(problem, w);
    if (chk.residual <= cfg.feas_tol && chk.min_eig >= -cfg.feas_tol) {
      v.status = Status::Feasible;
      v.witness = w;
      v.residual = chk.residual;
      v.margin = chk.min_eig;
      v.margin_kind = "slack";
      return true;
    }
    return false;
  };

  Face face;
  if (cfg.facial_reduction) face = structural_face(problem, full, as);
  const bool use_face = cfg.facial_reduction && face.reduced;
  if (!use_face) {
    face.v.clear();
    for (std::size_t d : dims) face.v.push_back(CMatrix::identity(d));
    face.dims = dims;
  }
  const Space red(face.dims);

  auto attempt_full_certificate = [&](int budget) -> bool {
    const Ortho of = orthonormalize(as.a, as.m, full.n, as.b);
    if (!of.consistent) {
      v.status = Status::Infeasible;
      v.margin = of.inconsistency;
      v.margin_kind = "affine";
      return true;
    }
    Face id;
    for (std::size_t d : dims) id.v.push_back(CMatrix::identity(d));
    RunResult rr = dykstra(full, of, cfg, budget, true, [&](const Vec& x) { return accept(lift(full, id, x)); });
    v.iterations += rr.iterations;
    if (v.trace.empty()) v.trace = std::move(rr.trace);
    if (rr.status == Status::Feasible) return true;
    if (rr.status == Status::Infeasible) {
      v.status = Status::Infeasible;
      v.margin = rr.margin;
      v.margin_kind = rr.margin_kind;
      return true;
    }
    return false;
  };

  const Vec ared = use_face ? reduce_matrix(as, full, red, face) : as.a;
  const Ortho o = orthonormalize(ared, as.m, red.n, as.b);

  double face_margin = 0.0;
  std::string face_kind;
  if (!o.consistent) {
    face_margin = o.inconsistency;
    face_kind = "affine";
  } else {
    RunResult rr = dykstra(red, o, cfg, cfg.max_iter, true, [&](const Vec& x) { return accept(lift(red, face, x)); });
    v.iterations = rr.iterations;
    v.trace = std::move(rr.trace);
    if (rr.status == Status::Feasible) return v;
    if (rr.status == Status::Infeasible) {
      face_margin = rr.margin;
      face_kind = rr.margin_kind;
    } else {
      v.status = Status::Undecided;
      v.margin = rr.margin;
      v.margin_kind = "gap";
      return v;
    }
  }

  // The reduced problem is infeasible. When the face is a proper one, look
  // for a certificate against the full cone so the margin is a true distance.
  if (!use_face) {
    v.status = Status::Infeasible;
    v.margin = face_margin;
    v.margin_kind = face_kind;
    return v;
  }
  if (attempt_full_certificate(std::min(cfg.max_iter, 5000))) return v;
  v.status = Status::Infeasible;
  v.margin = face_margin;
  v.margin_kind = face_kind == "affine" ? "affine" : "face";
  return v;
}

}  // namespace

// ---------------------------------------------------------------- public API

std::size_t FeasibilityProblem::add_block(std::string name, std::size_t dim) {
  if (dim == 0) throw DimensionError("add_block: dimension must be positive");
  blocks_.push_back({std::move(name), dim});
  return blocks_.size() - 1;
}

void FeasibilityProblem::add_constraint(Constraint c) {
  if (!c.target.is_square()) throw DimensionError("add_constraint: target must be square");
  if (!c.target.is_hermitian(kHermTol * std::max(1.0, c.target.max_abs())))
    throw NumericalError("add_constraint: target '" + c.label + "' is not Hermitian");
  for (const auto& t : c.terms) {
    if (t.block >= blocks_.size()) throw DimensionError("add_constraint: unknown block index");
    std::size_t d = blocks_[t.block].dim;
    for (const auto& s : t.stages) d = stage_out_dim(s, d);
    if (d != c.target.rows()) {
      std::ostringstream os;
      os << "add_constraint '" << c.label << "': term maps to dimension " << d << " but the target has dimension "
         << c.target.rows();
      throw DimensionError(os.str());
    }
  }
  c.target = c.target.hermitian_part();
  constraints_.push_back(std::move(c));
}

std::size_t FeasibilityProblem::variable_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.dim * b.dim;
  return n;
}

CMatrix apply_stage(const Stage& s, const CMatrix& x) {
  return std::visit(
      [&](const auto& st) -> CMatrix {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, PartialTrace>) {
          return partial_trace(x, st.dims, st.keep);
        } else if constexpr (std::is_same_v<T, Sandwich>) {
          return st.left * x * st.left.adjoint();
        } else if constexpr (std::is_same_v<T, LinkFixedFirst>) {
          return link_product(st.fixed, x, st.dim_in, st.dim_mid, st.dim_out);
        } else if constexpr (std::is_same_v<T, LinkFixedSecond>) {
          return link_product(x, st.fixed, st.dim_in, st.dim_mid, st.dim_out);
        } else if constexpr (std::is_same_v<T, Scale>) {
          return x * cplx(st.factor);
        } else if constexpr (std::is_same_v<T, Transpose>) {
          return x.transpose();
        } else {
          return permute_factors(x, st.dims, st.perm);
        }
      },
      s);
}

CMatrix apply_term(const Term& t, const CMatrix& x) {
  CMatrix m = x;
  for (const auto& s : t.stages) m = apply_stage(s, m);
  return m;
}

bool stage_is_positive(const Stage& s) {
  return std::visit(
      [](const auto& st) -> bool {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, Scale>) {
          return st.factor >= 0.0;
        } else if constexpr (std::is_same_v<T, LinkFixedFirst> || std::is_same_v<T, LinkFixedSecond>) {
          return min_eig(st.fixed, 1e300) >= -1e-12 * std::max(1.0, st.fixed.max_abs());
        } else {
          return true;
        }
      },
      s);
}

CMatrix evaluate_constraint(const FeasibilityProblem& p, std::size_t c, const std::vector<CMatrix>& x) {
  const auto& con = p.constraints().at(c);
  if (x.size() != p.blocks().size()) throw DimensionError("evaluate_constraint: wrong number of blocks");
  CMatrix out(con.target.rows(), con.target.cols());
  for (const auto& t : con.terms) out += apply_term(t, x[t.block]);
  return out;
}

WitnessCheck check_witness(const FeasibilityProblem& p, const std::vector<CMatrix>& x) {
  WitnessCheck w;
  double s = 0.0;
  for (std::size_t c = 0; c < p.constraints().size(); ++c) {
    const double d = frobenius_distance(evaluate_constraint(p, c, x), p.constraints()[c].target);
    s += d * d;
  }
  w.residual = std::sqrt(s);
  w.min_eig = INFINITY;
  for (std::size_t b = 0; b < x.size(); ++b) w.min_eig = std::min(w.min_eig, min_eig(x[b].hermitian_part(), 1e300));
  if (x.empty()) w.min_eig = 0.0;
  return w;
}

std::string to_string(Status s) {
  switch (s) {
    case Status::Feasible:
      return "FEASIBLE";
    case Status::Infeasible:
      return "INFEASIBLE";
    case Status::Undecided:
      return "UNDECIDED";
  }
  return "UNDECIDED";
}

Verdict solve(const FeasibilityProblem& problem, const SolverConfig& cfg) {
  Verdict v = solve_impl(problem, cfg);
  if (cfg.strict_probe && v.status == Status::Feasible) {
    FeasibilityProblem rebuilt;
    for (const auto& b : problem.blocks()) rebuilt.add_block(b.name, b.dim);
    for (const auto& c : problem.constraints()) {
      Constraint sc = c;
      for (const auto& t : c.terms)
        sc.target -= apply_term(t, CMatrix::identity(problem.blocks()[t.block].dim) * cplx(cfg.strict_eps));
      rebuilt.add_constraint(std::move(sc));
    }
    SolverConfig sub = cfg;
    sub.strict_probe = false;
    v.strictly_feasible = solve_impl(rebuilt, sub).status == Status::Feasible;
  }
  return v;
}

AffineProjector::AffineProjector(const FeasibilityProblem& problem) {
  for (const auto& b : problem.blocks()) dims_.push_back(b.dim);
  const Space sp(dims_);
  offsets_ = sp.off;
  n_ = sp.n;
  const Assembled as = assemble(problem, sp);
  Ortho o = orthonormalize(as.a, as.m, sp.n, as.b);
  if (!o.consistent) throw NumericalError("AffineProjector: constraints are inconsistent");
  q_ = std::move(o.q);
  beta_ = std::move(o.beta);
  rank_ = o.k;
}

std::vector<CMatrix> AffineProjector::project(const std::vector<CMatrix>& x) const {
  if (x.size() != dims_.size()) throw DimensionError("project_affine: wrong number of blocks");
  const Space sp(dims_);
  Vec v(n_);
  for (std::size_t b = 0; b < dims_.size(); ++b) {
    if (x[b].rows() != dims_[b] || !x[b].is_square()) throw DimensionError("project_affine: block has the wrong shape");
    sp.set_block(v, b, x[b]);
  }
  for (std::size_t i = 0; i < rank_; ++i) {
    const double ri = dot(q_.data() + i * n_, v.data(), n_) - beta_[i];
    for (std::size_t j = 0; j < n_; ++j) v[j] -= ri * q_[i * n_ + j];
  }
  std::vector<CMatrix> out;
  for (std::size_t b = 0; b < dims_.size(); ++b) out.push_back(sp.block(v, b));
  return out;
}

std::vector<CMatrix> project_affine(const FeasibilityProblem& problem, const std::vector<CMatrix>& x) {
  return AffineProjector(problem).project(x);
}

std::vector<CMatrix> project_psd_blocks(const std::vector<CMatrix>& x) {
  std::vector<CMatrix> out;
  for (const auto& m : x) out.push_back(psd_project(m));
  return out;
}

}  // namespace instro::sdp
