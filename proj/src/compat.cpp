#include "instro/compat.hpp"

#include <algorithm>
#include <cmath>

namespace instro {

using sdp::Constraint;
using sdp::FeasibilityProblem;
using sdp::Status;
using sdp::Term;

namespace {

void require_same_input(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw DimensionError(std::string(what) + ": devices act on different input spaces");
}

sdp::Verdict trivially_feasible() {
  sdp::Verdict v;
  v.status = Status::Feasible;
  v.margin_kind = "slack";
  return v;
}

Instrument joint_from_blocks(const Instrument& i, const Instrument& j, std::vector<CMatrix> blocks, DimVec out_dims) {
  const std::size_t dout = dim_product(out_dims);
  blocks = normalize_instrument_blocks(std::move(blocks), i.dim_in(), dout);
  std::vector<std::string> labels;
  std::vector<Operation> ops;
  for (std::size_t x = 0; x < i.size(); ++x)
    for (std::size_t y = 0; y < j.size(); ++y) {
      labels.push_back(pair_label(i.outcomes()[x], j.outcomes()[y]));
      ops.push_back(Operation::from_choi(i.dim_in(), dout, blocks[x * j.size() + y]));
    }
  return Instrument(i.dim_in(), dout, std::move(labels), std::move(ops), std::move(out_dims));
}

// Marginal error of a K ⊗ V joint against (i, j).
double joint_marginal_error(const Instrument& joint, const Instrument& i, const Instrument& j) {
  const Instrument mi = marginal(joint, Side::First);
  const Instrument mj = marginal(joint, Side::Second);
  return std::max(choi_distance(mi, i), choi_distance(mj, j));
}

double traditional_marginal_error(const Instrument& joint, const Instrument& i, const Instrument& j) {
  double err = 0.0;
  for (std::size_t x = 0; x < i.size(); ++x) {
    CMatrix s(i.op(x).choi().rows(), i.op(x).choi().cols());
    for (std::size_t y = 0; y < j.size(); ++y) s += joint.op(x * j.size() + y).choi();
    err = std::max(err, frobenius_distance(s, i.op(x).choi()));
  }
  for (std::size_t y = 0; y < j.size(); ++y) {
    CMatrix s(j.op(y).choi().rows(), j.op(y).choi().cols());
    for (std::size_t x = 0; x < i.size(); ++x) s += joint.op(x * j.size() + y).choi();
    err = std::max(err, frobenius_distance(s, j.op(y).choi()));
  }
  return err;
}

}  // namespace

std::string to_string(Route r) {
  switch (r) {
    case Route::DirectSdp:
      return "DIRECT_SDP";
    case Route::ViaComplementary:
      return "VIA_COMPLEMENTARY";
    case Route::JordanProduct:
      return "JORDAN_PRODUCT";
    case Route::LpClassical:
      return "LP_CLASSICAL";
  }
  return "DIRECT_SDP";
}

std::vector<CMatrix> normalize_instrument_blocks(std::vector<CMatrix> chois, std::size_t dim_in, std::size_t dim_out) {
  CMatrix m(dim_in, dim_in);
  for (auto& c : chois) {
    c = psd_project(c.hermitian_part(), 1e300);
    m += partial_trace(c, {dim_in, dim_out}, {0});
  }
  const CMatrix s = tensor(inv_sqrt_psd(m.hermitian_part(), 1e-12), CMatrix::identity(dim_out));
  for (auto& c : chois) c = (s * c * s).hermitian_part();
  return chois;
}

CompatReport check_compatible(const Instrument& i, const Instrument& j, const CompatOptions& opts) {
  require_same_input(i.dim_in(), j.dim_in(), "check_compatible");
  const std::size_t din = i.dim_in(), dk = i.dim_out(), dv = j.dim_out();
  CompatReport rep;
  rep.route = Route::DirectSdp;

  FeasibilityProblem p;
  if (opts.traditional) {
    if (dk != dv) throw DimensionError("check_compatible: traditional compatibility needs equal output spaces");
    for (std::size_t x = 0; x < i.size(); ++x)
      for (std::size_t y = 0; y < j.size(); ++y)
        p.add_block("G[" + pair_label(i.outcomes()[x], j.outcomes()[y]) + "]", din * dk);
    for (std::size_t x = 0; x < i.size(); ++x) {
      Constraint c{"sum_y G = I_" + i.outcomes()[x], {}, i.op(x).choi()};
      for (std::size_t y = 0; y < j.size(); ++y) c.terms.push_back(Term{x * j.size() + y, {}});
      p.add_constraint(std::move(c));
    }
    for (std::size_t y = 0; y < j.size(); ++y) {
      Constraint c{"sum_x G = J_" + j.outcomes()[y], {}, j.op(y).choi()};
      for (std::size_t x = 0; x < i.size(); ++x) c.terms.push_back(Term{x * j.size() + y, {}});
      p.add_constraint(std::move(c));
    }
  } else {
    const DimVec dims{din, dk, dv};
    for (std::size_t x = 0; x < i.size(); ++x)
      for (std::size_t y = 0; y < j.size(); ++y)
        p.add_block("G[" + pair_label(i.outcomes()[x], j.outcomes()[y]) + "]", din * dk * dv);
    for (std::size_t x = 0; x < i.size(); ++x) {
      Constraint c{"sum_y tr_V G = I_" + i.outcomes()[x], {}, i.op(x).choi()};
      for (std::size_t y = 0; y < j.size(); ++y)
        c.terms.push_back(Term{x * j.size() + y, {sdp::PartialTrace{dims, {0, 1}}}});
      p.add_constraint(std::move(c));
    }
    for (std::size_t y = 0; y < j.size(); ++y) {
      Constraint c{"sum_x tr_K G = J_" + j.outcomes()[y], {}, j.op(y).choi()};
      for (std::size_t x = 0; x < i.size(); ++x)
        c.terms.push_back(Term{x * j.size() + y, {sdp::PartialTrace{dims, {0, 2}}}});
      p.add_constraint(std::move(c));
    }
  }
  rep.verdict = sdp::solve(p, opts.solver);
  if (rep.feasible()) {
    if (opts.traditional) {
      rep.joint = joint_from_blocks(i, j, rep.verdict.witness, {dk});
      rep.marginal_error = traditional_marginal_error(*rep.joint, i, j);
    } else {
      rep.joint = joint_from_blocks(i, j, rep.verdict.witness, {dk, dv});
      rep.marginal_error = joint_marginal_error(*rep.joint, i, j);
    }
  }
  return rep;
}

CompatReport check_compatible(const Povm& a, const Povm& b, const CompatOptions& opts) {
  return check_compatible(povm_as_instrument(a), povm_as_instrument(b), opts);
}

PostprocessReport check_postprocessing(const Instrument& target, const Instrument& source, const CompatOptions& opts) {
  require_same_input(target.dim_in(), source.dim_in(), "check_postprocessing");
  const std::size_t din = source.dim_in(), dk = source.dim_out(), dv = target.dim_out();
  const std::size_t nx = source.size(), ny = target.size();
  FeasibilityProblem p;
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y)
      p.add_block("R[" + source.outcomes()[x] + "][" + target.outcomes()[y] + "]", dk * dv);
  for (std::size_t y = 0; y < ny; ++y) {
    Constraint c{"sum_x R_y o I_x = J_" + target.outcomes()[y], {}, target.op(y).choi()};
    for (std::size_t x = 0; x < nx; ++x)
      c.terms.push_back(Term{x * ny + y, {sdp::LinkFixedFirst{source.op(x).choi(), din, dk, dv}}});
    p.add_constraint(std::move(c));
  }
  for (std::size_t x = 0; x < nx; ++x) {
    Constraint c{"R^" + source.outcomes()[x] + " trace preserving", {}, CMatrix::identity(dk)};
    for (std::size_t y = 0; y < ny; ++y) c.terms.push_back(Term{x * ny + y, {sdp::PartialTrace{{dk, dv}, {0}}}});
    p.add_constraint(std::move(c));
  }

  PostprocessReport rep;
  rep.verdict = sdp::solve(p, opts.solver);
  if (!rep.feasible()) return rep;

  std::vector<Instrument> procs;
  for (std::size_t x = 0; x < nx; ++x) {
    std::vector<CMatrix> blocks(rep.verdict.witness.begin() + static_cast<std::ptrdiff_t>(x * ny),
                                rep.verdict.witness.begin() + static_cast<std::ptrdiff_t>((x + 1) * ny));
    blocks = normalize_instrument_blocks(std::move(blocks), dk, dv);
    std::vector<Operation> ops;
    for (auto& b : blocks) ops.push_back(Operation::from_choi(dk, dv, std::move(b)));
    procs.emplace_back(dk, dv, target.outcomes(), std::move(ops));
  }
  for (std::size_t y = 0; y < ny; ++y) {
    CMatrix rec(din * dv, din * dv);
    for (std::size_t x = 0; x < nx; ++x) rec += link_product(source.op(x).choi(), procs[x].op(y).choi(), din, dk, dv);
    rep.reconstruction_error = std::max(rep.reconstruction_error, frobenius_distance(rec, target.op(y).choi()));
  }
  rep.processors = std::move(procs);
  return rep;
}

CompatReport check_compatible_via_complementary(const Instrument& i, const Instrument& j, const CompatOptions& opts) {
  require_same_input(i.dim_in(), j.dim_in(), "check_compatible_via_complementary");
  const Dilation dil =
      opts.dilation == DilationKind::Canonical ? canonical_dilation(i, opts.tol) : minimal_dilation(i, opts.tol);
  const Instrument ic = complementary_instrument(i, dil, opts.tol);
  const PostprocessReport pp = check_postprocessing(j, ic, opts);

  CompatReport rep;
  rep.route = Route::ViaComplementary;
  rep.verdict = pp.verdict;
  if (!pp.feasible()) return rep;

  // G_(x,y)(ρ) = (R^(x)_y ⊗ id_K)(M_x ρ M_x†) with M_x = (√E(x) ⊗ I) W, then reorder V ⊗ K -> K ⊗ V.
  const std::size_t din = i.dim_in(), dk = i.dim_out(), dv = j.dim_out(), da = dil.dim_anc;
  std::vector<std::string> labels;
  std::vector<Operation> ops;
  for (std::size_t x = 0; x < i.size(); ++x) {
    const CMatrix& e = dil.e.effect(dil.e.index_of(i.outcomes()[x]));
    const CMatrix m = tensor(sqrt_psd(e.hermitian_part()), CMatrix::identity(dk)) * dil.w;
    for (std::size_t y = 0; y < j.size(); ++y) {
      std::vector<CMatrix> ks;
      for (const auto& l : (*pp.processors)[x].op(y).kraus()) {
        const CMatrix vk = tensor(l, CMatrix::identity(dk)) * m;  // (dv*dk) x din
        ks.push_back(permute_factors(vk, {dv, dk}, {1, 0}, true));
      }
      labels.push_back(pair_label(i.outcomes()[x], j.outcomes()[y]));
      ops.push_back(Operation::from_kraus(din, dk * dv, std::move(ks)));
    }
  }
  (void)da;
  rep.joint = Instrument(din, dk * dv, std::move(labels), std::move(ops), {dk, dv});
  rep.marginal_error = joint_marginal_error(*rep.joint, i, j);
  return rep;
}

CompatReport check_povm_povm_sandwich(const Povm& a, const Povm& b, const CompatOptions& opts) {
  require_same_input(a.dim_in(), b.dim_in(), "check_povm_povm_sandwich");
  const std::size_t d = a.dim_in(), nx = a.size(), ny = b.size();
  FeasibilityProblem p;
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) p.add_block("R[" + a.outcomes()[x] + "](" + b.outcomes()[y] + ")", d);
  std::vector<CMatrix> roots;
  for (const auto& e : a.effects()) roots.push_back(sqrt_psd(e));
  for (std::size_t y = 0; y < ny; ++y) {
    Constraint c{"B(" + b.outcomes()[y] + ")", {}, b.effect(y)};
    for (std::size_t x = 0; x < nx; ++x) c.terms.push_back(Term{x * ny + y, {sdp::Sandwich{roots[x]}}});
    p.add_constraint(std::move(c));
  }
  for (std::size_t x = 0; x < nx; ++x) {
    Constraint c{"R^" + a.outcomes()[x] + " normalized", {}, CMatrix::identity(d)};
    for (std::size_t y = 0; y < ny; ++y) c.terms.push_back(Term{x * ny + y, {}});
    p.add_constraint(std::move(c));
  }
  CompatReport rep;
  rep.route = Route::DirectSdp;
  rep.verdict = sdp::solve(p, opts.solver);
  if (rep.feasible()) {
    // Joint POVM G(x,y) = √A(x) R^(x)(y) √A(x).
    std::vector<std::string> labels;
    std::vector<Operation> ops;
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t y = 0; y < ny; ++y) {
        const CMatrix g = roots[x] * psd_project(rep.verdict.witness[x * ny + y], 1e300) * roots[x];
        labels.push_back(pair_label(a.outcomes()[x], b.outcomes()[y]));
        ops.push_back(Operation::from_choi(d, 1, g.transpose().hermitian_part()));
      }
    rep.joint = Instrument(d, 1, std::move(labels), std::move(ops), {1, 1});
    rep.marginal_error = joint_marginal_error(*rep.joint, povm_as_instrument(a), povm_as_instrument(b));
  }
  return rep;
}

CMatrix jordan_product_choi(const QChannel& phi, const QChannel& psi) {
  require_same_input(phi.dim_in(), psi.dim_in(), "jordan_product_choi");
  const std::size_t d = phi.dim_in(), dk = phi.dim_out(), dv = psi.dim_out();
  auto blk = [](const CMatrix& j, std::size_t dout, std::size_t p, std::size_t q) {
    return j.block(p * dout, q * dout, dout, dout);
  };
  CMatrix out(d * dk * dv, d * dk * dv);
  for (std::size_t p = 0; p < d; ++p)
    for (std::size_t q = 0; q < d; ++q) {
      CMatrix b(dk * dv, dk * dv);
      for (std::size_t m = 0; m < d; ++m) {
        b += tensor(blk(phi.choi(), dk, p, m), blk(psi.choi(), dv, m, q));
        b += tensor(blk(phi.choi(), dk, m, q), blk(psi.choi(), dv, p, m));
      }
      out.set_block(p * dk * dv, q * dk * dv, b * cplx(0.5));
    }
  return out;
}

CompatReport check_compatible_jordan(const QChannel& phi, const QChannel& psi, const CompatOptions& opts) {
  CompatReport rep;
  rep.route = Route::JordanProduct;
  const CMatrix j = jordan_product_choi(phi, psi);
  const double lam = min_eig(j.hermitian_part());
  rep.verdict.iterations = 0;
  rep.verdict.margin = lam;
  if (lam >= -opts.solver.feas_tol) {
    rep.verdict.status = Status::Feasible;
    rep.verdict.margin_kind = "slack";
    const std::size_t dout = phi.dim_out() * psi.dim_out();
    auto blocks = normalize_instrument_blocks({j}, phi.dim_in(), dout);
    rep.joint = Instrument(phi.dim_in(), dout, {pair_label("0", "0")},
                           {Operation::from_choi(phi.dim_in(), dout, blocks[0])}, {phi.dim_out(), psi.dim_out()});
    rep.marginal_error =
        joint_marginal_error(*rep.joint, Instrument(phi.dim_in(), phi.dim_out(), {"0"}, {phi}),
                             Instrument(psi.dim_in(), psi.dim_out(), {"0"}, {psi}));
  } else {
    rep.verdict.status = Status::Undecided;
    rep.verdict.margin_kind = "min_eig";
  }
  return rep;
}

CompatReport check_compatible_indecomposable_povm(const Instrument& i, const Povm& b, const CompatOptions& opts) {
  require_same_input(i.dim_in(), b.dim_in(), "check_compatible_indecomposable_povm");
  for (const auto& op : i.ops())
    if (op.kraus_rank(opts.tol.rank) > 1)
      throw ValidationError("check_compatible_indecomposable_povm: instrument is not indecomposable");
  CompatReport rep;
  rep.route = Route::LpClassical;
  const auto nu = lp_postprocess_povm(induced_povm(i), b, opts.tol.eq);
  rep.verdict = nu ? trivially_feasible() : sdp::Verdict{};
  if (!nu) {
    rep.verdict.status = Status::Infeasible;
    rep.verdict.margin_kind = "lp";
  }
  return rep;
}

CompatReport check_compatible_route(const Instrument& i, const Instrument& j, Route route, const CompatOptions& opts) {
  switch (route) {
    case Route::DirectSdp:
      return check_compatible(i, j, opts);
    case Route::ViaComplementary:
      return check_compatible_via_complementary(i, j, opts);
    case Route::JordanProduct:
      return check_compatible_jordan(induced_channel(i), induced_channel(j), opts);
    case Route::LpClassical:
      if (!j.is_povm_like()) throw ValidationError("LP route needs a POVM as second device");
      return check_compatible_indecomposable_povm(i, induced_povm(j), opts);
  }
  return check_compatible(i, j, opts);
}

bool check_nondisturbance_exact(const Instrument& i, const Instrument& j, double tol) {
  if (i.dim_in() != i.dim_out()) throw DimensionError("check_nondisturbance_exact: first instrument must be square");
  if (j.dim_in() != i.dim_out()) throw DimensionError("check_nondisturbance_exact: dimension mismatch");
  const QChannel phi = induced_channel(i);
  for (const auto& op : j.ops()) {
    const CMatrix c = link_product(phi.choi(), op.choi(), i.dim_in(), i.dim_out(), j.dim_out());
    if (max_abs_diff(c, op.choi()) > tol) return false;
  }
  return true;
}

sdp::Verdict check_povm_nondisturbance(const Povm& a, const Instrument& j, const CompatOptions& opts) {
  require_same_input(a.dim_in(), j.dim_in(), "check_povm_nondisturbance");
  const std::size_t d = a.dim_in(), dv = j.dim_out();
  FeasibilityProblem p;
  for (std::size_t x = 0; x < a.size(); ++x) p.add_block("I[" + a.outcomes()[x] + "]", d * d);
  for (std::size_t x = 0; x < a.size(); ++x)
    p.add_constraint(Constraint{"induced effect " + a.outcomes()[x],
                                {Term{x, {sdp::PartialTrace{{d, d}, {0}}}}},
                                a.effect(x).transpose()});
  for (std::size_t y = 0; y < j.size(); ++y) {
    Constraint c{"J_" + j.outcomes()[y] + " o Phi = J_" + j.outcomes()[y], {}, j.op(y).choi()};
    for (std::size_t x = 0; x < a.size(); ++x) c.terms.push_back(Term{x, {sdp::LinkFixedSecond{j.op(y).choi(), d, d, dv}}});
    p.add_constraint(std::move(c));
  }
  return sdp::solve(p, opts.solver);
}

}  // namespace instro
