#pragma once

// Stinespring dilations of instruments and the complementary devices they induce.
// The isometry W maps C^din into C^danc ⊗ C^dout (ancilla factor first), and
//   I_x(ρ) = tr_anc[W ρ W† (E(x) ⊗ I)].

#include <string>

#include "instro/devices.hpp"

namespace instro {

class NumericalRankError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct Dilation {
  std::size_t dim_anc = 0;
  std::size_t dim_in = 0;
  std::size_t dim_out = 0;
  CMatrix w;  // (dim_anc * dim_out) x dim_in
  Povm e;     // on C^dim_anc, labelled like the instrument
};

/// Ancilla basis |x,i> over outcomes in declared order, Kraus index fastest;
/// E(x) projects onto the slots of outcome x.
Dilation canonical_dilation(const Instrument& ins, const Tolerances& tol = {});

/// Dilation through a minimal Kraus set of the induced channel. Throws
/// NumericalRankError when an eigenvalue of its Choi matrix is too close to
/// tol.rank to decide the rank.
Dilation minimal_dilation(const Instrument& ins, const Tolerances& tol = {});

/// I^C_x(ρ) = tr_out[(√E(x) ⊗ I) W ρ W† (√E(x) ⊗ I)], an instrument C^din -> C^danc.
/// Throws ValidationError if `dil` does not reproduce `ins`.
Instrument complementary_instrument(const Instrument& ins, const Dilation& dil, const Tolerances& tol = {});

/// Complementary of a channel through its minimal dilation.
QChannel complementary_channel(const QChannel& ch, const Tolerances& tol = {});

/// The instrument realised by a dilation.
Instrument instrument_of(const Dilation& dil);

struct DilationCheck {
  bool ok = false;
  double isometry_violation = 0.0;        // max |W†W - I|
  double reconstruction_violation = 0.0;  // max over x of max |J(dilated_x) - J(I_x)|
  double povm_violation = 0.0;            // E fails to be a POVM by this much
  std::string message;
};

/// Checks W†W = I, that E is a POVM, and that the dilation reproduces every
/// Choi block of `ins` (equivalently, every operator of a full input basis).
DilationCheck verify_dilation(const Instrument& ins, const Dilation& dil, const Tolerances& tol = {});

}  // namespace instro
