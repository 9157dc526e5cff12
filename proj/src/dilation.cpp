#include "instro/dilation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace instro {

namespace {

// Choi of ρ -> tr_anc[(√F ⊗ I) W ρ W† (√F ⊗ I)] for ancilla operator F, written
// directly as J[(i,a),(j,b)] = Σ_{s,t} W[(s,a),i] F[t,s] conj(W[(t,b),j]).
CMatrix dilated_choi(const Dilation& dil, const CMatrix& f) {
  const std::size_t din = dil.dim_in, dout = dil.dim_out, da = dil.dim_anc;
  // With Y = (F ⊗ I) W (F Hermitian): J[(i,a),(j,b)] = Σ_s W[(s,a),i] conj(Y[(s,b),j]).
  CMatrix y(da * dout, din);
  for (std::size_t s = 0; s < da; ++s)
    for (std::size_t t = 0; t < da; ++t) {
      const cplx fst = f(s, t);
      if (fst == 0.0) continue;
      for (std::size_t b = 0; b < dout; ++b)
        for (std::size_t j = 0; j < din; ++j) y(s * dout + b, j) += fst * dil.w(t * dout + b, j);
    }
  CMatrix out(din * dout, din * dout);
  for (std::size_t i = 0; i < din; ++i)
    for (std::size_t a = 0; a < dout; ++a)
      for (std::size_t j = 0; j < din; ++j)
        for (std::size_t b = 0; b < dout; ++b) {
          cplx sum = 0.0;
          for (std::size_t s = 0; s < da; ++s) sum += dil.w(s * dout + a, i) * std::conj(y(s * dout + b, j));
          out(i * dout + a, j * dout + b) = sum;
        }
  return out;
}

// Kraus operators <k|_out M for every output basis vector k.
std::vector<CMatrix> trace_out_system(const CMatrix& m, std::size_t da, std::size_t dout, std::size_t din) {
  std::vector<CMatrix> ks;
  for (std::size_t k = 0; k < dout; ++k) {
    CMatrix kk(da, din);
    for (std::size_t a = 0; a < da; ++a)
      for (std::size_t i = 0; i < din; ++i) kk(a, i) = m(a * dout + k, i);
    if (kk.max_abs() > 0.0) ks.push_back(std::move(kk));
  }
  return ks;
}

}  // namespace

Dilation canonical_dilation(const Instrument& ins, const Tolerances& tol) {
  ins.validate(tol);
  std::vector<std::vector<CMatrix>> kraus;
  std::size_t total = 0;
  for (const auto& op : ins.ops()) {
    kraus.push_back(op.kraus(tol.rank));
    total += kraus.back().size();
  }
  Dilation d;
  d.dim_anc = total;
  d.dim_in = ins.dim_in();
  d.dim_out = ins.dim_out();
  d.w = CMatrix(total * d.dim_out, d.dim_in);
  std::vector<CMatrix> effects;
  std::size_t slot = 0;
  for (const auto& ks : kraus) {
    CMatrix e(total, total);
    for (const auto& k : ks) {
      e(slot, slot) = 1.0;
      d.w.set_block(slot * d.dim_out, 0, k);
      ++slot;
    }
    effects.push_back(std::move(e));
  }
  d.e = Povm(total, ins.outcomes(), std::move(effects));
  return d;
}

Dilation minimal_dilation(const Instrument& ins, const Tolerances& tol) {
  ins.validate(tol);
  const std::size_t din = ins.dim_in(), dout = ins.dim_out(), n = din * dout;
  CMatrix phi(n, n);
  for (const auto& op : ins.ops()) phi += op.choi();
  const EigenSystem es = herm_eig(phi);
  for (double v : es.values)
    if (v >= tol.rank / 10 && v <= tol.rank * 10) {
      std::ostringstream os;
      os << "minimal_dilation: eigenvalue " << v << " of the induced channel's Choi matrix is too close to the rank "
         << "tolerance " << tol.rank << "; override the rank tolerance";
      throw NumericalRankError(os.str());
    }
  std::size_t r = 0;
  while (r < es.values.size() && es.values[r] > tol.rank) ++r;

  CMatrix v(n, r);
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t row = 0; row < n; ++row) v(row, k) = es.vectors(row, k) * std::sqrt(es.values[k]);

  Dilation d;
  d.dim_anc = r;
  d.dim_in = din;
  d.dim_out = dout;
  d.w = CMatrix(r * dout, din);
  for (std::size_t k = 0; k < r; ++k) d.w.set_block(k * dout, 0, unvec(v.col(k), dout, din));

  // Dual basis of the v_k: Wd = V G^{-1}, so E(x)ᵀ = Wd† J(I_x) Wd.
  const CMatrix g = v.adjoint() * v;
  const EigenSystem ge = herm_eig(g);
  std::vector<double> inv(ge.values.size());
  for (std::size_t k = 0; k < inv.size(); ++k) inv[k] = 1.0 / ge.values[k];
  CMatrix ginv(r, r);
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) ginv(i, j) += ge.vectors(i, k) * inv[k] * std::conj(ge.vectors(j, k));
  const CMatrix wd = v * ginv;
  std::vector<CMatrix> effects;
  for (const auto& op : ins.ops()) effects.push_back((wd.adjoint() * op.choi() * wd).transpose().hermitian_part());
  d.e = Povm(r, ins.outcomes(), std::move(effects));
  return d;
}

Instrument instrument_of(const Dilation& dil) {
  std::vector<Operation> ops;
  for (const auto& e : dil.e.effects()) ops.push_back(Operation::from_choi(dil.dim_in, dil.dim_out, dilated_choi(dil, e)));
  return Instrument(dil.dim_in, dil.dim_out, dil.e.outcomes(), std::move(ops));
}

DilationCheck verify_dilation(const Instrument& ins, const Dilation& dil, const Tolerances& tol) {
  DilationCheck c;
  std::ostringstream msg;
  if (dil.dim_in != ins.dim_in() || dil.dim_out != ins.dim_out() || dil.w.rows() != dil.dim_anc * dil.dim_out ||
      dil.w.cols() != dil.dim_in || dil.e.dim_in() != dil.dim_anc || dil.e.size() != ins.size()) {
    c.message = "shape mismatch between instrument and dilation";
    c.isometry_violation = c.reconstruction_violation = c.povm_violation = INFINITY;
    return c;
  }
  c.isometry_violation = max_abs_diff(dil.w.adjoint() * dil.w, CMatrix::identity(dil.dim_in));

  CMatrix sum(dil.dim_anc, dil.dim_anc);
  for (const auto& e : dil.e.effects()) {
    sum += e;
    c.povm_violation = std::max(c.povm_violation, std::max(0.0, -min_eig(e.hermitian_part())));
  }
  c.povm_violation = std::max(c.povm_violation, max_abs_diff(sum, CMatrix::identity(dil.dim_anc)));

  for (std::size_t x = 0; x < ins.size(); ++x) {
    std::size_t ex = 0;
    try {
      ex = dil.e.index_of(ins.outcomes()[x]);
    } catch (const std::out_of_range&) {
      c.message = "ancilla POVM lacks outcome '" + ins.outcomes()[x] + "'";
      c.reconstruction_violation = INFINITY;
      return c;
    }
    const CMatrix j = dilated_choi(dil, dil.e.effect(ex));
    c.reconstruction_violation = std::max(c.reconstruction_violation, max_abs_diff(j, ins.op(x).choi()));
  }
  const double iso_tol = 1e-9, rec_tol = std::max(tol.eq, 1e-8);
  c.ok = c.isometry_violation <= iso_tol && c.reconstruction_violation <= rec_tol && c.povm_violation <= tol.eq;
  if (!c.ok) {
    msg << "isometry " << c.isometry_violation << ", reconstruction " << c.reconstruction_violation << ", povm "
        << c.povm_violation;
    c.message = msg.str();
  }
  return c;
}

Instrument complementary_instrument(const Instrument& ins, const Dilation& dil, const Tolerances& tol) {
  const DilationCheck chk = verify_dilation(ins, dil, tol);
  if (!chk.ok) throw ValidationError("complementary_instrument: inconsistent dilation (" + chk.message + ")");
  std::vector<Operation> ops;
  for (std::size_t x = 0; x < ins.size(); ++x) {
    const CMatrix& e = dil.e.effect(dil.e.index_of(ins.outcomes()[x]));
    const CMatrix m = tensor(sqrt_psd(e.hermitian_part()), CMatrix::identity(dil.dim_out)) * dil.w;
    ops.push_back(Operation::from_kraus(dil.dim_in, dil.dim_anc, trace_out_system(m, dil.dim_anc, dil.dim_out, dil.dim_in)));
  }
  return Instrument(dil.dim_in, dil.dim_anc, ins.outcomes(), std::move(ops));
}

QChannel complementary_channel(const QChannel& ch, const Tolerances& tol) {
  const Instrument ins = Instrument::channel(ch);
  const Dilation dil = minimal_dilation(ins, tol);
  return Operation::from_kraus(dil.dim_in, dil.dim_anc, trace_out_system(dil.w, dil.dim_anc, dil.dim_out, dil.dim_in));
}

}  // namespace instro
