#pragma once

// Named device families and structural classifiers.

#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "instro/compat.hpp"
#include "instro/devices.hpp"
#include "instro/lp.hpp"

namespace instro {

CMatrix pauli_x();
CMatrix pauli_y();
CMatrix pauli_z();

/// One-outcome instrument with Kraus operator I_d.
Instrument identity_channel(std::size_t d);

Povm sharp_z();
Povm sharp_x();
/// ½(I ± v σ), v in [0, 1].
Povm noisy_z(double v);
Povm noisy_x(double v);

/// J_i(ρ) = ¼ σ_i ρ σ_i for σ_0 = I and the three Pauli matrices.
Instrument pauli_instrument();

/// The measure-and-prepare pair measuring X (resp. Z) and preparing
/// ½(I ± a σ_X) (resp. ½(I ± a σ_Z)). Throws std::invalid_argument unless 0 ≤ a ≤ 1.
std::pair<Instrument, Instrument> xz_map_instruments(double a);

/// I_x(ρ) = tr(ρ) p_x ξ_x.
Instrument trash_and_prepare(const std::vector<double>& p, const std::vector<CMatrix>& states, std::size_t dim_in);

/// I_x(ρ) = tr(A(x) ρ) ξ_x.
Instrument measure_and_prepare(const Povm& a, const std::vector<CMatrix>& states);

/// Kraus operators K = G S^{-1/2} from complex Gaussian G, S = Σ G†G. Throws
/// std::invalid_argument when outcomes·kraus_per_outcome·dim_out < dim_in.
Instrument random_instrument(std::size_t dim_in, std::size_t dim_out, std::size_t outcomes, std::size_t kraus_per_outcome,
                             std::mt19937_64& rng);
Povm random_povm(std::size_t d, std::size_t outcomes, std::mt19937_64& rng);
/// G G† / tr(G G†) for a d x rank complex Gaussian G.
CMatrix random_state(std::size_t d, std::mt19937_64& rng, std::size_t rank = 0);

/// (1 - t) a + t b outcome by outcome; both must share dimensions and outcome labels.
Instrument mix_instruments(const Instrument& a, const Instrument& b, double t);

struct DeviceClassReport {
  bool is_measure_and_prepare = false;
  bool is_indecomposable = false;
  bool is_rank1_povm = false;
  bool is_sharp = false;
  bool is_trash_and_prepare = false;
  /// Every nonzero prepared state has rank one (meaningful when m&p).
  bool prepared_states_pure = false;

  Povm measured;                       // induced POVM
  std::vector<CMatrix> prepared_states;  // ξ_x = tr_in J(I_x) / tr J(I_x), or I/dout for null outcomes
  double mp_residual = 0.0;            // max_x max|J(I_x) - A(x)ᵀ ⊗ ξ_x|
  std::size_t max_kraus_rank = 0;
};

DeviceClassReport classify(const Instrument& ins, const Tolerances& tol = {});

/// Rebuilds the measure-and-prepare form of a classified device from its witnesses.
Instrument rebuild_from_report(const DeviceClassReport& r, const Instrument& like);

/// Classical postprocessing in both directions.
bool povm_pp_equivalent(const Povm& a, const Povm& b, const Tolerances& tol = {});

struct IndecomposableForm {
  StochasticMatrix nu;                      // nu[x][y]
  std::vector<std::vector<CMatrix>> states;  // states[x][y] = ξ_xy
  /// max_y ‖Σ_x ν_xy A(x)ᵀ ⊗ ξ_xy - J(J_y)‖_F
  double rebuild_error = 0.0;
};

/// For indecomposable i compatible with j, writes J_y(ρ) = Σ_x ν_xy tr(A(x) ρ) ξ_xy.
/// Returns nullopt unless the compatibility check is FEASIBLE.
std::optional<IndecomposableForm> indecomposable_compat_form(const Instrument& i, const Instrument& j,
                                                             const CompatOptions& opts = {});

}  // namespace instro
