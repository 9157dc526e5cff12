#pragma once

// POVMs, operations, channels and instruments.
//
// Every operation N: L(C^din) -> L(C^dout) is stored by its Choi matrix
//   J(N) = Σ_ij |i><j| ⊗ N(|i><j|)
// on C^din ⊗ C^dout (input factor first). With column-stacking vec this is
// J = Σ_k vec(K_k) vec(K_k)† for Kraus operators K_k, and
//   N(ρ) = tr_in[(ρᵀ ⊗ I) J],   Σ_k K_k† K_k = (tr_out J)ᵀ.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "instro/linalg.hpp"

namespace instro {

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Povm {
 public:
  Povm() = default;
  /// Checks shapes only; call validate() for positivity and normalization.
  Povm(std::size_t dim_in, std::vector<std::string> outcomes, std::vector<CMatrix> effects);
  /// Outcomes labelled "0", "1", ...
  explicit Povm(std::vector<CMatrix> effects);

  std::size_t dim_in() const noexcept { return dim_in_; }
  std::size_t size() const noexcept { return effects_.size(); }
  const std::vector<std::string>& outcomes() const noexcept { return outcomes_; }
  const std::vector<CMatrix>& effects() const noexcept { return effects_; }
  const CMatrix& effect(std::size_t x) const { return effects_.at(x); }
  const CMatrix& effect(const std::string& label) const;
  std::size_t index_of(const std::string& label) const;

  /// Throws ValidationError unless every effect is PSD and they sum to I.
  void validate(const Tolerances& tol = {}) const;
  bool is_valid(const Tolerances& tol = {}) const;
  bool is_sharp(double tol = kEqTol) const;

 private:
  std::size_t dim_in_ = 0;
  std::vector<std::string> outcomes_;
  std::vector<CMatrix> effects_;
};

/// A completely positive map given by its Choi matrix, optionally with Kraus operators.
class Operation {
 public:
  Operation() = default;
  static Operation from_kraus(std::size_t dim_in, std::size_t dim_out, std::vector<CMatrix> kraus);
  /// Infers the dimensions from the first Kraus operator (the list must be nonempty).
  static Operation from_kraus(std::vector<CMatrix> kraus);
  static Operation from_choi(std::size_t dim_in, std::size_t dim_out, CMatrix choi);
  /// Both representations; they must agree within `tol`.
  static Operation from_both(std::size_t dim_in, std::size_t dim_out, std::vector<CMatrix> kraus, CMatrix choi,
                             double tol = kEqTol);
  static Operation zero(std::size_t dim_in, std::size_t dim_out);

  std::size_t dim_in() const noexcept { return dim_in_; }
  std::size_t dim_out() const noexcept { return dim_out_; }
  const CMatrix& choi() const noexcept { return choi_; }
  bool has_kraus() const noexcept { return kraus_.has_value(); }
  /// Stored Kraus operators, or a minimal set extracted from the Choi matrix.
  std::vector<CMatrix> kraus(double rank_tol = kRankTol) const;
  /// Rank of the Choi matrix.
  std::size_t kraus_rank(double rank_tol = kRankTol) const;
  bool is_zero(double tol = kEqTol) const;

 private:
  std::size_t dim_in_ = 0;
  std::size_t dim_out_ = 0;
  std::optional<std::vector<CMatrix>> kraus_;
  CMatrix choi_;
};

using QChannel = Operation;

class Instrument {
 public:
  Instrument() = default;
  /// Checks shapes only. `out_dims` optionally factorizes the output space
  /// (its product must equal dim_out); defaults to {dim_out}.
  Instrument(std::size_t dim_in, std::size_t dim_out, std::vector<std::string> outcomes, std::vector<Operation> ops,
             DimVec out_dims = {});

  /// One-outcome instrument labelled "0".
  static Instrument channel(const Operation& op);

  std::size_t dim_in() const noexcept { return dim_in_; }
  std::size_t dim_out() const noexcept { return dim_out_; }
  const DimVec& out_dims() const noexcept { return out_dims_; }
  std::size_t size() const noexcept { return ops_.size(); }
  const std::vector<std::string>& outcomes() const noexcept { return outcomes_; }
  const std::vector<Operation>& ops() const noexcept { return ops_; }
  const Operation& op(std::size_t x) const { return ops_.at(x); }
  const Operation& op(const std::string& label) const;
  std::size_t index_of(const std::string& label) const;

  bool is_channel() const noexcept { return ops_.size() == 1; }
  bool is_povm_like() const noexcept { return dim_out_ == 1; }

  /// Throws ValidationError unless every Choi block is PSD and the blocks sum to a channel.
  void validate(const Tolerances& tol = {}) const;
  bool is_valid(const Tolerances& tol = {}) const;

 private:
  std::size_t dim_in_ = 0;
  std::size_t dim_out_ = 0;
  DimVec out_dims_;
  std::vector<std::string> outcomes_;
  std::vector<Operation> ops_;
};

/// Unit-trace PSD operator.
class State {
 public:
  explicit State(CMatrix rho, const Tolerances& tol = {});
  const CMatrix& matrix() const noexcept { return rho_; }
  std::size_t dim() const noexcept { return rho_.rows(); }

 private:
  CMatrix rho_;
};

CMatrix choi_of(const Operation& op);
CMatrix choi_from_kraus(const std::vector<CMatrix>& kraus, std::size_t dim_in, std::size_t dim_out);
/// Minimal Kraus set: one operator per Choi eigenvalue above `rank_tol`.
std::vector<CMatrix> kraus_of(const CMatrix& choi, std::size_t dim_in, std::size_t dim_out,
                              double rank_tol = kRankTol, double psd_tol = kPsdTol);

CMatrix apply(const Operation& op, const CMatrix& rho);
/// N(ρ) = tr_in[(ρᵀ ⊗ I) J]
CMatrix apply_choi(const CMatrix& choi, std::size_t dim_in, std::size_t dim_out, const CMatrix& rho);

Povm induced_povm(const Instrument& ins);
/// Effect Σ_k K_k† K_k of a single operation.
CMatrix induced_effect(const Operation& op);
QChannel induced_channel(const Instrument& ins);

Instrument luders_instrument(const Povm& a);
/// The POVM as an instrument with one-dimensional output (Choi of outcome x is A(x)ᵀ).
Instrument povm_as_instrument(const Povm& a);

/// second ∘ first.
Operation compose(const Operation& second, const Operation& first);

/// Choi of second ∘ first, where `first` acts C^din -> C^dmid and `second` C^dmid -> C^dout:
///   J[(i,c),(j,e)] = Σ_{a,b} F[(i,b),(j,a)] X[(b,c),(a,e)]
CMatrix link_product(const CMatrix& first, const CMatrix& second, std::size_t dim_in, std::size_t dim_mid,
                     std::size_t dim_out);

/// Parallel product with outcomes "x|y" and output dims [dout_i..., dout_j...].
Instrument tensor_instruments(const Instrument& i, const Instrument& j);

/// Tensor product of operations; input and output factors ordered (first, second).
Operation tensor_operations(const Operation& a, const Operation& b);

enum class Side { First, Second };

/// Marginal of a joint instrument with outcomes "x|y" and out_dims [dK, dV]:
/// sums over the other label component and traces out the other output factor.
Instrument marginal(const Instrument& joint, Side side);

/// Same outcome labels and dimensions, and every Choi block within `tol` in Frobenius norm.
bool devices_equal(const Instrument& a, const Instrument& b, double tol = kEqTol);
bool devices_equal(const Povm& a, const Povm& b, double tol = kEqTol);

/// Largest Frobenius distance between matching Choi blocks; throws on shape or label mismatch.
double choi_distance(const Instrument& a, const Instrument& b);

std::string pair_label(const std::string& x, const std::string& y);
/// Splits "x|y" at the first '|'; throws ValidationError if absent.
std::pair<std::string, std::string> split_pair_label(const std::string& label);

}  // namespace instro
