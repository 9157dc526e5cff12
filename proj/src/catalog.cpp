#include "instro/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace instro {

namespace {

const cplx I1{0.0, 1.0};

CMatrix gaussian(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix g(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t k = 0; k < c; ++k) g(i, k) = {n(rng), n(rng)};
  return g;
}

Povm binary(const CMatrix& sigma, double v, std::vector<std::string> labels) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("visibility must lie in [0, 1]");
  const CMatrix id = CMatrix::identity(2);
  return Povm(2, std::move(labels), {(id + sigma * cplx(v)) * cplx(0.5), (id - sigma * cplx(v)) * cplx(0.5)});
}

}  // namespace

CMatrix pauli_x() { return CMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}}); }
CMatrix pauli_y() { return CMatrix::from_rows({{0.0, -I1}, {I1, 0.0}}); }
CMatrix pauli_z() { return CMatrix::from_rows({{1.0, 0.0}, {0.0, -1.0}}); }

Instrument identity_channel(std::size_t d) {
  return Instrument::channel(Operation::from_kraus(d, d, {CMatrix::identity(d)}));
}

Povm sharp_z() { return binary(pauli_z(), 1.0, {"+", "-"}); }
Povm sharp_x() { return binary(pauli_x(), 1.0, {"+", "-"}); }
Povm noisy_z(double v) { return binary(pauli_z(), v, {"+", "-"}); }
Povm noisy_x(double v) { return binary(pauli_x(), v, {"+", "-"}); }

Instrument pauli_instrument() {
  const CMatrix sig[4] = {CMatrix::identity(2), pauli_x(), pauli_y(), pauli_z()};
  std::vector<Operation> ops;
  for (const auto& s : sig) ops.push_back(Operation::from_kraus(2, 2, {s * cplx(0.5)}));
  return Instrument(2, 2, {"0", "1", "2", "3"}, std::move(ops));
}

std::pair<Instrument, Instrument> xz_map_instruments(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("xz_map_instruments: a must lie in [0, 1]");
  const Povm px = sharp_x(), pz = sharp_z();
  const Povm sx = noisy_x(a), sz = noisy_z(a);
  return {measure_and_prepare(px, sx.effects()), measure_and_prepare(pz, sz.effects())};
}

Instrument trash_and_prepare(const std::vector<double>& p, const std::vector<CMatrix>& states, std::size_t dim_in) {
  if (p.empty() || p.size() != states.size())
    throw std::invalid_argument("trash_and_prepare: need one probability per state");
  double s = 0.0;
  for (double v : p) {
    if (v < 0.0) throw std::invalid_argument("trash_and_prepare: negative probability");
    s += v;
  }
  if (std::abs(s - 1.0) > kEqTol) throw std::invalid_argument("trash_and_prepare: probabilities do not sum to 1");
  std::vector<CMatrix> eff;
  for (double v : p) eff.push_back(CMatrix::identity(dim_in) * cplx(v));
  return measure_and_prepare(Povm(eff), states);
}

Instrument measure_and_prepare(const Povm& a, const std::vector<CMatrix>& states) {
  if (states.size() != a.size()) throw DimensionError("measure_and_prepare: need one state per outcome");
  const std::size_t dout = states.front().rows();
  std::vector<Operation> ops;
  for (std::size_t x = 0; x < a.size(); ++x) {
    const State xi(states[x]);
    if (xi.dim() != dout) throw DimensionError("measure_and_prepare: prepared states differ in dimension");
    ops.push_back(Operation::from_choi(a.dim_in(), dout, tensor(a.effect(x).transpose(), xi.matrix())));
  }
  return Instrument(a.dim_in(), dout, a.outcomes(), std::move(ops));
}

Instrument random_instrument(std::size_t dim_in, std::size_t dim_out, std::size_t outcomes, std::size_t kraus_per_outcome,
                             std::mt19937_64& rng) {
  // Σ K†K = I needs at least dim_in rows among the stacked Kraus operators.
  if (outcomes * kraus_per_outcome * dim_out < dim_in)
    throw std::invalid_argument("random_instrument: too few Kraus operators for a trace-preserving instrument");
  std::vector<std::vector<CMatrix>> g(outcomes);
  CMatrix s(dim_in, dim_in);
  for (auto& ks : g)
    for (std::size_t k = 0; k < kraus_per_outcome; ++k) {
      ks.push_back(gaussian(dim_out, dim_in, rng));
      s += ks.back().adjoint() * ks.back();
    }
  const CMatrix t = inv_sqrt_psd(s.hermitian_part());
  std::vector<std::string> labels;
  std::vector<Operation> ops;
  for (std::size_t x = 0; x < outcomes; ++x) {
    for (auto& k : g[x]) k = k * t;
    labels.push_back(std::to_string(x));
    ops.push_back(Operation::from_kraus(dim_in, dim_out, std::move(g[x])));
  }
  return Instrument(dim_in, dim_out, std::move(labels), std::move(ops));
}

Povm random_povm(std::size_t d, std::size_t outcomes, std::mt19937_64& rng) {
  const Instrument ins = random_instrument(d, d, outcomes, 1, rng);
  return induced_povm(ins);
}

CMatrix random_state(std::size_t d, std::mt19937_64& rng, std::size_t rank) {
  const CMatrix g = gaussian(d, rank == 0 ? d : rank, rng);
  CMatrix rho = g * g.adjoint();
  return (rho / rho.trace()).hermitian_part();
}

Instrument mix_instruments(const Instrument& a, const Instrument& b, double t) {
  if (a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out() || a.outcomes() != b.outcomes())
    throw DimensionError("mix_instruments: instruments differ in shape or outcomes");
  std::vector<Operation> ops;
  for (std::size_t x = 0; x < a.size(); ++x)
    ops.push_back(Operation::from_choi(a.dim_in(), a.dim_out(),
                                       a.op(x).choi() * cplx(1.0 - t) + b.op(x).choi() * cplx(t)));
  return Instrument(a.dim_in(), a.dim_out(), a.outcomes(), std::move(ops), a.out_dims());
}

DeviceClassReport classify(const Instrument& ins, const Tolerances& tol) {
  DeviceClassReport r;
  const std::size_t din = ins.dim_in(), dout = ins.dim_out();
  r.measured = induced_povm(ins);
  r.is_indecomposable = true;
  r.prepared_states_pure = true;
  for (std::size_t x = 0; x < ins.size(); ++x) {
    const CMatrix& j = ins.op(x).choi();
    const double p = j.trace().real();
    if (ins.op(x).is_zero(tol.eq) || p <= tol.eq) {
      r.prepared_states.push_back(CMatrix::identity(dout) / cplx(static_cast<double>(dout)));
      continue;
    }
    const std::size_t rank = ins.op(x).kraus_rank(tol.rank);
    r.max_kraus_rank = std::max(r.max_kraus_rank, rank);
    if (rank > 1) r.is_indecomposable = false;
    CMatrix xi = partial_trace(j, {din, dout}, {1}) / cplx(p);
    xi = xi.hermitian_part();
    const CMatrix at = partial_trace(j, {din, dout}, {0});
    r.mp_residual = std::max(r.mp_residual, max_abs_diff(j, tensor(at, xi)));
    if (psd_rank(xi, 1e-7) != 1) r.prepared_states_pure = false;
    r.prepared_states.push_back(std::move(xi));
  }
  r.is_measure_and_prepare = r.mp_residual <= 1e-7;
  if (!r.is_measure_and_prepare) r.prepared_states_pure = false;

  r.is_rank1_povm = true;
  r.is_trash_and_prepare = r.is_measure_and_prepare;
  for (const auto& e : r.measured.effects()) {
    if (psd_rank(e, tol.rank) > 1) r.is_rank1_povm = false;
    const CMatrix flat = CMatrix::identity(din) * cplx(e.trace().real() / static_cast<double>(din));
    if (max_abs_diff(e, flat) > tol.eq) r.is_trash_and_prepare = false;
  }
  r.is_sharp = r.measured.is_sharp(tol.eq);
  return r;
}

Instrument rebuild_from_report(const DeviceClassReport& r, const Instrument& like) {
  Instrument m = measure_and_prepare(r.measured, r.prepared_states);
  return Instrument(like.dim_in(), like.dim_out(), like.outcomes(), m.ops(), like.out_dims());
}

bool povm_pp_equivalent(const Povm& a, const Povm& b, const Tolerances& tol) {
  if (a.dim_in() != b.dim_in()) throw DimensionError("povm_pp_equivalent: POVMs act on different spaces");
  return lp_postprocess_povm(a, b, tol.eq).has_value() && lp_postprocess_povm(b, a, tol.eq).has_value();
}

std::optional<IndecomposableForm> indecomposable_compat_form(const Instrument& i, const Instrument& j,
                                                             const CompatOptions& opts) {
  const DeviceClassReport cls = classify(i, opts.tol);
  if (!cls.is_indecomposable) throw ValidationError("indecomposable_compat_form: first instrument is decomposable");
  if (i.dim_in() != j.dim_in()) throw DimensionError("indecomposable_compat_form: devices act on different spaces");

  const Dilation dil = canonical_dilation(i, opts.tol);
  const Instrument ic = complementary_instrument(i, dil, opts.tol);
  const PostprocessReport pp = check_postprocessing(j, ic, opts);
  if (!pp.feasible()) return std::nullopt;

  // The complementary of an indecomposable instrument prepares a pure state φ_x per outcome.
  const std::size_t da = dil.dim_anc, dv = j.dim_out(), nx = i.size(), ny = j.size();
  IndecomposableForm f;
  f.nu.assign(nx, std::vector<double>(ny, 0.0));
  f.states.assign(nx, std::vector<CMatrix>(ny, CMatrix::identity(dv) / cplx(static_cast<double>(dv))));
  for (std::size_t x = 0; x < nx; ++x) {
    const CMatrix& jc = ic.op(x).choi();
    if (jc.trace().real() <= opts.tol.eq) {
      // Null outcome: any processor output will do since A(x) = 0.
      for (std::size_t y = 0; y < ny; ++y) f.nu[x][y] = y == 0 ? 1.0 : 0.0;
      continue;
    }
    const EigenSystem es = herm_eig(partial_trace(jc, {i.dim_in(), da}, {1}).hermitian_part());
    CMatrix phi = es.vectors.col(0);
    const CMatrix proj = CMatrix::outer(phi, phi);
    for (std::size_t y = 0; y < ny; ++y) {
      const CMatrix out = apply((*pp.processors)[x].op(y), proj).hermitian_part();
      const double nu = out.trace().real();
      f.nu[x][y] = std::max(nu, 0.0);
      if (nu > opts.tol.eq) f.states[x][y] = out / cplx(nu);
    }
  }
  for (std::size_t y = 0; y < ny; ++y) {
    CMatrix rec(i.dim_in() * dv, i.dim_in() * dv);
    for (std::size_t x = 0; x < nx; ++x)
      rec += tensor(cls.measured.effect(x).transpose(), f.states[x][y]) * cplx(f.nu[x][y]);
    f.rebuild_error = std::max(f.rebuild_error, frobenius_distance(rec, j.op(y).choi()));
  }
  return f;
}

}  // namespace instro
