#pragma once

// Deciders for compatibility, postprocessing and non-disturbance, each
// reduced to a block-PSD feasibility problem over Choi matrices.

#include <optional>
#include <string>
#include <vector>

#include "instro/devices.hpp"
#include "instro/dilation.hpp"
#include "instro/lp.hpp"
#include "instro/sdp.hpp"

namespace instro {

enum class Route { DirectSdp, ViaComplementary, JordanProduct, LpClassical };
enum class DilationKind { Canonical, Minimal };

std::string to_string(Route r);

struct CompatOptions {
  sdp::SolverConfig solver;
  Tolerances tol;
  /// Equal output spaces, and Σ_x G_(x,y) = J_y, Σ_y G_(x,y) = I_x without partial traces.
  bool traditional = false;
  DilationKind dilation = DilationKind::Canonical;
};

struct CompatReport {
  sdp::Verdict verdict;
  std::optional<Instrument> joint;  // outcomes "x|y"; output K ⊗ V (or the common output when traditional)
  Route route = Route::DirectSdp;
  /// Largest Choi-block distance between the joint's marginals and the inputs.
  double marginal_error = 0.0;

  bool feasible() const { return verdict.status == sdp::Status::Feasible; }
  bool infeasible() const { return verdict.status == sdp::Status::Infeasible; }
  bool decided() const { return verdict.status != sdp::Status::Undecided; }
};

struct PostprocessReport {
  sdp::Verdict verdict;
  /// processors[x] is R^(x): an instrument from the source output to the
  /// target output, with the target's outcomes.
  std::optional<std::vector<Instrument>> processors;
  /// max_y ‖Σ_x J(R^(x)_y ∘ I_x) - J(J_y)‖_F
  double reconstruction_error = 0.0;

  bool feasible() const { return verdict.status == sdp::Status::Feasible; }
  bool infeasible() const { return verdict.status == sdp::Status::Infeasible; }
  bool decided() const { return verdict.status != sdp::Status::Undecided; }
};

/// Joint-instrument search. POVMs enter as instruments with one-dimensional
/// output and channels as one-outcome instruments.
CompatReport check_compatible(const Instrument& i, const Instrument& j, const CompatOptions& opts = {});
CompatReport check_compatible(const Povm& a, const Povm& b, const CompatOptions& opts = {});

/// Is `target` a postprocessing of `source`: J_y = Σ_x R^(x)_y ∘ I_x for instruments R^(x)?
PostprocessReport check_postprocessing(const Instrument& target, const Instrument& source,
                                       const CompatOptions& opts = {});

/// Decides i ∘∘ j as j ⪯ I^C for the complementary instrument of a dilation
/// of i, then assembles the joint instrument from the processors.
CompatReport check_compatible_via_complementary(const Instrument& i, const Instrument& j,
                                                const CompatOptions& opts = {});

/// POVM pair compatibility as B(y) = Σ_x √A(x) R^(x)(y) √A(x) for POVMs R^(x).
CompatReport check_povm_povm_sandwich(const Povm& a, const Povm& b, const CompatOptions& opts = {});

/// Choi matrix of the Jordan product Φ ⊙ Ψ on C^din ⊗ C^dK ⊗ C^dV.
CMatrix jordan_product_choi(const QChannel& phi, const QChannel& psi);

/// FEASIBLE when the Jordan product is PSD (it is then a joint channel);
/// UNDECIDED otherwise, since the Jordan product is one candidate only.
CompatReport check_compatible_jordan(const QChannel& phi, const QChannel& psi, const CompatOptions& opts = {});

/// For an indecomposable instrument i and a POVM b: i ∘∘ b iff b is a
/// classical postprocessing of the induced POVM of i.
CompatReport check_compatible_indecomposable_povm(const Instrument& i, const Povm& b, const CompatOptions& opts = {});

/// Route dispatch used by the command line.
CompatReport check_compatible_route(const Instrument& i, const Instrument& j, Route route,
                                    const CompatOptions& opts = {});

/// J_y ∘ Φ^I = J_y for every y, compared on Choi matrices.
bool check_nondisturbance_exact(const Instrument& i, const Instrument& j, double tol = kEqTol);

/// Is there an instrument I with induced POVM a that does not disturb j?
sdp::Verdict check_povm_nondisturbance(const Povm& a, const Instrument& j, const CompatOptions& opts = {});

/// Clips negative eigenvalues of Choi blocks and rescales so that the blocks
/// sum to a trace-preserving map: C -> (M^{-1/2} ⊗ I) C (M^{-1/2} ⊗ I).
std::vector<CMatrix> normalize_instrument_blocks(std::vector<CMatrix> chois, std::size_t dim_in, std::size_t dim_out);

}  // namespace instro
