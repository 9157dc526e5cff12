#pragma once

// Feasibility of affine constraints over products of PSD cones:
//   find X_1 ⪰ 0, ..., X_B ⪰ 0 with Σ_terms L_term(X_block) = T_c for every c,
// where each L_term is a chain of simple Hermiticity-preserving stages.
//
// solve() runs Dykstra alternating projections on the real-embedded Hermitian
// space. Two accelerations keep boundary-feasible problems (witnesses of low
// rank) from stalling:
//  * structural facial reduction: a constraint built only from positive
//    stages with a PSD target forces every witness into the kernel of the
//    adjoint applied to the target's kernel projector;
//  * Levenberg–Marquardt polishing of a factorised iterate X = R R† at a few
//    checkpoints.
// Infeasibility is declared from a separating certificate derived from the
// projection displacement; its margin is a lower bound on the distance
// between the affine set and the cone product.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "instro/linalg.hpp"

namespace instro::sdp {

/// tr over the factors of `dims` not in `keep`.
struct PartialTrace {
  DimVec dims;
  std::vector<std::size_t> keep;
};
/// X -> L X L†.
struct Sandwich {
  CMatrix left;
};
/// X = J(R) for R: C^dim_mid -> C^dim_out, mapped to J(R ∘ F) with F = `fixed` (C^dim_in -> C^dim_mid).
struct LinkFixedFirst {
  CMatrix fixed;
  std::size_t dim_in, dim_mid, dim_out;
};
/// X = J(F) for F: C^dim_in -> C^dim_mid, mapped to J(S ∘ F) with S = `fixed` (C^dim_mid -> C^dim_out).
struct LinkFixedSecond {
  CMatrix fixed;
  std::size_t dim_in, dim_mid, dim_out;
};
struct Scale {
  double factor;
};
/// Full transpose.
struct Transpose {};
/// Reorders tensor factors (see permute_factors).
struct Permute {
  DimVec dims;
  std::vector<std::size_t> perm;
};

using Stage = std::variant<PartialTrace, Sandwich, LinkFixedFirst, LinkFixedSecond, Scale, Transpose, Permute>;

/// Stages are applied left to right to the block variable.
struct Term {
  std::size_t block;
  std::vector<Stage> stages;
};

struct Constraint {
  std::string label;
  std::vector<Term> terms;
  CMatrix target;
};

struct Block {
  std::string name;
  std::size_t dim;
};

class FeasibilityProblem {
 public:
  std::size_t add_block(std::string name, std::size_t dim);
  /// Validates stage shapes and target Hermiticity; throws DimensionError / NumericalError.
  void add_constraint(Constraint c);

  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  const std::vector<Constraint>& constraints() const noexcept { return constraints_; }
  std::size_t variable_count() const;

 private:
  std::vector<Block> blocks_;
  std::vector<Constraint> constraints_;
};

CMatrix apply_stage(const Stage& s, const CMatrix& x);
CMatrix apply_term(const Term& t, const CMatrix& x);
/// True for stages that map PSD matrices to PSD matrices (all but negative scalings,
/// and link products with a non-PSD fixed Choi matrix).
bool stage_is_positive(const Stage& s);

/// Σ_terms L(X) for constraint `c`, evaluated directly (not through the assembled matrix).
CMatrix evaluate_constraint(const FeasibilityProblem& p, std::size_t c, const std::vector<CMatrix>& x);

struct WitnessCheck {
  double residual = 0.0;  // sqrt(Σ_c ‖L_c(X) - T_c‖_F²)
  double min_eig = 0.0;   // smallest eigenvalue over all blocks
};
WitnessCheck check_witness(const FeasibilityProblem& p, const std::vector<CMatrix>& x);

struct SolverConfig {
  double feas_tol = 1e-7;
  double gap_tol = 1e-5;
  int max_iter = 20000;
  bool facial_reduction = true;
  bool polish = true;
  /// Re-solve with X -> X - εI to test strict feasibility.
  bool strict_probe = false;
  double strict_eps = 1e-6;
  /// Record ‖a_k - a_{k-1}‖ for the affine-projected iterates of the first Dykstra run.
  bool record_trace = false;
};

enum class Status { Feasible, Infeasible, Undecided };

std::string to_string(Status s);

struct Verdict {
  Status status = Status::Undecided;
  std::vector<CMatrix> witness;  // one per block when Feasible
  /// Infeasible: lower bound on the distance between the affine set and the
  /// cone (or the reduced face, see margin_kind). Feasible: smallest witness
  /// eigenvalue slack. Undecided: last projection gap.
  double margin = 0.0;
  /// "cone", "face", "affine" (inconsistent equations), "slack" or "gap".
  std::string margin_kind;
  int iterations = 0;
  double residual = 0.0;
  std::optional<bool> strictly_feasible;
  std::vector<double> trace;
};

Verdict solve(const FeasibilityProblem& problem, const SolverConfig& cfg = {});

/// Exact Euclidean projection onto {X : all constraints hold}. Throws
/// NumericalError if the constraints are inconsistent.
class AffineProjector {
 public:
  explicit AffineProjector(const FeasibilityProblem& problem);
  std::vector<CMatrix> project(const std::vector<CMatrix>& x) const;
  std::size_t rank() const noexcept { return rank_; }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::vector<double> q_;  // rank_ x n, orthonormal rows
  std::vector<double> beta_;
  std::size_t n_ = 0;
  std::size_t rank_ = 0;
};

std::vector<CMatrix> project_affine(const FeasibilityProblem& problem, const std::vector<CMatrix>& x);
std::vector<CMatrix> project_psd_blocks(const std::vector<CMatrix>& x);

}  // namespace instro::sdp
