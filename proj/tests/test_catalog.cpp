#include <gtest/gtest.h>

#include <cmath>

#include "instro/catalog.hpp"
#include "test_util.hpp"

using namespace instro;

namespace {

Instrument as_ins(const Povm& p) { return povm_as_instrument(p); }

CMatrix ket(std::size_t d, std::size_t k) {
  CMatrix v(d, 1);
  v(k, 0) = 1.0;
  return v;
}

// The qubit trine: rank-1 effects ⅔|ψ_k><ψ_k| at angles 2πk/3 on the XZ circle.
Povm trine() {
  std::vector<CMatrix> eff;
  for (int k = 0; k < 3; ++k) {
    const double t = 2.0 * M_PI * k / 3.0;
    const CMatrix v = CMatrix::column(std::vector<cplx>{std::cos(t / 2), std::sin(t / 2)});
    eff.push_back(CMatrix::outer(v, v) * cplx(2.0 / 3.0));
  }
  return Povm(eff);
}

// flip(p) applied to the outcomes of a two-outcome POVM.
Povm flipped(const Povm& a, double p) {
  return Povm(a.dim_in(), a.outcomes(),
              {a.effect(0) * cplx(1 - p) + a.effect(1) * cplx(p), a.effect(0) * cplx(p) + a.effect(1) * cplx(1 - p)});
}

}  // namespace

TEST(Pauli, Examples) {
  const Instrument p = pauli_instrument();
  EXPECT_TRUE(p.is_valid());
  const Povm a = induced_povm(p);
  for (const auto& e : a.effects()) EXPECT_LT(max_abs_diff(e, CMatrix::identity(2) * cplx(0.25)), 1e-14);
  EXPECT_LT(max_abs_diff(induced_channel(p).choi(), CMatrix::identity(4) * cplx(0.5)), 1e-14);
  for (const auto& op : p.ops()) EXPECT_EQ(op.kraus_rank(), 1u);
  EXPECT_LT(max_abs_diff(pauli_x() * pauli_y(), pauli_z() * cplx(0.0, 1.0)), 1e-15);
}

TEST(Xz, Examples) {
  {
    const auto [i, j] = xz_map_instruments(0.0);
    const DeviceClassReport ci = classify(i), cj = classify(j);
    for (const auto& xi : ci.prepared_states) EXPECT_LT(max_abs_diff(xi, CMatrix::identity(2) * cplx(0.5)), 1e-12);
    for (const auto& xi : cj.prepared_states) EXPECT_LT(max_abs_diff(xi, CMatrix::identity(2) * cplx(0.5)), 1e-12);
  }
  {
    const auto [i, j] = xz_map_instruments(1.0);
    EXPECT_TRUE(classify(i).prepared_states_pure);
    EXPECT_TRUE(classify(j).prepared_states_pure);
  }
  for (double a : {0.0, 0.4, 1.0}) {
    const auto [i, j] = xz_map_instruments(a);
    EXPECT_TRUE(devices_equal(induced_povm(i), sharp_x(), 1e-12));
    EXPECT_TRUE(devices_equal(induced_povm(j), sharp_z(), 1e-12));
    const DeviceClassReport c = classify(j);
    EXPECT_LT(max_abs_diff(c.prepared_states[0], noisy_z(a).effect(0)), 1e-12);
  }
  EXPECT_THROW(xz_map_instruments(1.1), std::invalid_argument);
  EXPECT_THROW(xz_map_instruments(-0.1), std::invalid_argument);
}

TEST(Trash, Examples) {
  std::mt19937_64 rng(1);
  const CMatrix xi = random_state(3, rng);
  const Instrument one = trash_and_prepare({1.0}, {xi}, 2);
  EXPECT_TRUE(one.is_channel());
  EXPECT_LT(max_abs_diff(apply(one.op(0), random_state(2, rng)), xi), 1e-12);

  const Instrument noise =
      trash_and_prepare({0.5, 0.5}, {CMatrix::outer(ket(2, 0), ket(2, 0)), CMatrix::outer(ket(2, 1), ket(2, 1))}, 2);
  EXPECT_TRUE(noise.is_valid());
  const Povm a = induced_povm(noise);
  for (const auto& e : a.effects()) EXPECT_LT(max_abs_diff(e, CMatrix::identity(2) * cplx(0.5)), 1e-14);
  EXPECT_TRUE(check_compatible(noise, identity_channel(2)).feasible());

  EXPECT_THROW(trash_and_prepare({0.5, 0.4}, {xi, xi}, 2), std::invalid_argument);
  EXPECT_THROW(trash_and_prepare({1.2, -0.2}, {xi, xi}, 2), std::invalid_argument);
  EXPECT_THROW(trash_and_prepare({1.0}, {xi, xi}, 2), std::invalid_argument);
}

TEST(Random, GeneratorsProduceValidDevices) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10; ++k) {
    EXPECT_TRUE(random_instrument(2, 3, 3, 1 + k % 3, rng).is_valid());
    EXPECT_TRUE(random_povm(3, 2 + k % 3, rng).is_valid());
    const CMatrix rho = random_state(3, rng, 1 + k % 3);
    EXPECT_NEAR(rho.trace().real(), 1.0, 1e-12);
    EXPECT_EQ(psd_rank(rho), 1u + k % 3);
  }
  std::mt19937_64 a(9), b(9);
  EXPECT_TRUE(devices_equal(random_instrument(2, 2, 2, 2, a), random_instrument(2, 2, 2, 2, b), 0.0));
}

TEST(Classify, LudersOfRankOnePovm) {
  const DeviceClassReport c = classify(luders_instrument(trine()));
  EXPECT_TRUE(c.is_indecomposable);
  EXPECT_TRUE(c.is_measure_and_prepare);
  EXPECT_TRUE(c.prepared_states_pure);
  EXPECT_TRUE(c.is_rank1_povm);
  EXPECT_FALSE(c.is_sharp);
  EXPECT_FALSE(c.is_trash_and_prepare);
}

TEST(Classify, LudersOfSharpRankOneZIsMeasureAndPrepare) {
  const DeviceClassReport c = classify(luders_instrument(sharp_z()));
  EXPECT_TRUE(c.is_indecomposable);
  EXPECT_TRUE(c.is_measure_and_prepare);
  EXPECT_TRUE(c.is_sharp);
}

TEST(Classify, LudersOfRankTwoEffectIsNotMeasureAndPrepare) {
  const Povm a(3, {"a", "b"}, {CMatrix::diag({1.0, 1.0, 0.0}), CMatrix::diag({0.0, 0.0, 1.0})});
  const DeviceClassReport c = classify(luders_instrument(a));
  EXPECT_TRUE(c.is_indecomposable);
  EXPECT_FALSE(c.is_measure_and_prepare);
  EXPECT_GT(c.mp_residual, 0.1);
  EXPECT_FALSE(c.is_rank1_povm);
  EXPECT_TRUE(c.is_sharp);
}

TEST(Classify, PauliInstrument) {
  const DeviceClassReport c = classify(pauli_instrument());
  EXPECT_TRUE(c.is_indecomposable);
  EXPECT_FALSE(c.is_measure_and_prepare);
  EXPECT_GE(c.mp_residual, 0.1);
  EXPECT_EQ(c.max_kraus_rank, 1u);
}

TEST(Classify, TrashAndRandom) {
  std::mt19937_64 rng(3);
  const Instrument t = trash_and_prepare({0.2, 0.8}, {random_state(2, rng), random_state(2, rng)}, 2);
  const DeviceClassReport ct = classify(t);
  EXPECT_TRUE(ct.is_trash_and_prepare);
  EXPECT_TRUE(ct.is_measure_and_prepare);
  EXPECT_FALSE(ct.is_indecomposable);
  const DeviceClassReport cr = classify(random_instrument(2, 2, 2, 2, rng));
  EXPECT_FALSE(cr.is_indecomposable);
  EXPECT_FALSE(cr.is_measure_and_prepare);
  EXPECT_EQ(cr.max_kraus_rank, 2u);
}

TEST(Classify, ZeroOutcomeConvention) {
  const Instrument ins(2, 2, {"a", "b"}, {identity_channel(2).op(0), Operation::zero(2, 2)});
  const DeviceClassReport c = classify(ins);
  EXPECT_TRUE(c.is_indecomposable);
  EXPECT_FALSE(c.is_measure_and_prepare);  // the identity outcome does not factor
  const Instrument mp(2, 2, {"a", "b"},
                      {trash_and_prepare({1.0}, {CMatrix::identity(2) * cplx(0.5)}, 2).op(0), Operation::zero(2, 2)});
  EXPECT_TRUE(classify(mp).is_measure_and_prepare);
}

TEST(Classify, LudersAlwaysIndecomposable) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 10; ++k) EXPECT_TRUE(classify(luders_instrument(random_povm(2 + k % 2, 3, rng))).is_indecomposable);
}

TEST(Classify, WitnessesRebuildTheDevice) {
  std::mt19937_64 rng(5);
  const Povm a = random_povm(3, 3, rng);
  const Instrument m = measure_and_prepare(a, {random_state(2, rng), random_state(2, rng), random_state(2, rng)});
  const DeviceClassReport c = classify(m);
  ASSERT_TRUE(c.is_measure_and_prepare);
  EXPECT_TRUE(devices_equal(rebuild_from_report(c, m), m, 1e-8));
  const auto [i, j] = xz_map_instruments(0.6);
  EXPECT_TRUE(devices_equal(rebuild_from_report(classify(i), i), i, 1e-8));
}

TEST(PpEquivalent, Examples) {
  const Povm z = sharp_z();
  const Povm relabelled(2, {"-", "+"}, {z.effect(1), z.effect(0)});
  EXPECT_TRUE(povm_pp_equivalent(z, relabelled));
  EXPECT_FALSE(povm_pp_equivalent(z, noisy_z(0.5)));
  // Split one outcome of a rank-1 POVM into two half-weight copies.
  const Povm t = trine();
  const Povm split({t.effect(0), t.effect(1) * cplx(0.5), t.effect(1) * cplx(0.5), t.effect(2)});
  EXPECT_TRUE(povm_pp_equivalent(t, split));
  EXPECT_THROW(povm_pp_equivalent(z, Povm({CMatrix::identity(3)})), DimensionError);
}

TEST(IndecomposableForm, IdentityPostprocessing) {
  const Instrument lz = luders_instrument(sharp_z());
  const auto f = indecomposable_compat_form(lz, as_ins(sharp_z()));
  ASSERT_TRUE(f.has_value());
  EXPECT_NEAR(f->nu[0][0], 1.0, 1e-6);
  EXPECT_NEAR(f->nu[1][1], 1.0, 1e-6);
  EXPECT_NEAR(f->nu[0][1], 0.0, 1e-6);
  EXPECT_NEAR(f->nu[1][0], 0.0, 1e-6);
  EXPECT_LE(f->rebuild_error, 1e-7);
}

TEST(IndecomposableForm, BinarySymmetricChannel) {
  const Instrument lz = luders_instrument(sharp_z());
  const Povm b = flipped(sharp_z(), 0.2);
  // Independent check of the target: ½(I ± 0.6 σ_Z).
  EXPECT_LT(max_abs_diff(b.effect(0), noisy_z(0.6).effect(0)), 1e-15);
  const auto f = indecomposable_compat_form(lz, as_ins(b));
  ASSERT_TRUE(f.has_value());
  EXPECT_NEAR(f->nu[0][0], 0.8, 1e-6);
  EXPECT_NEAR(f->nu[0][1], 0.2, 1e-6);
  EXPECT_NEAR(f->nu[1][0], 0.2, 1e-6);
  EXPECT_NEAR(f->nu[1][1], 0.8, 1e-6);
  EXPECT_LE(f->rebuild_error, 1e-7);
}

TEST(IndecomposableForm, IncompatibleGivesNothing) {
  EXPECT_FALSE(indecomposable_compat_form(luders_instrument(sharp_z()), as_ins(sharp_x())).has_value());
  std::mt19937_64 rng(6);
  EXPECT_THROW(indecomposable_compat_form(random_instrument(2, 2, 2, 2, rng), as_ins(sharp_z())), ValidationError);
}

TEST(IndecomposableForm, InstrumentTargetRebuilds) {
  // j measures Z, flips the outcome with probability 0.1 and prepares a state per outcome.
  std::mt19937_64 rng(7);
  const Instrument lz = luders_instrument(sharp_z());
  const Instrument j = measure_and_prepare(flipped(sharp_z(), 0.1), {random_state(2, rng), random_state(2, rng)});
  const auto f = indecomposable_compat_form(lz, j);
  ASSERT_TRUE(f.has_value());
  EXPECT_LE(f->rebuild_error, 1e-7);
  for (const auto& row : f->nu) {
    double s = 0.0;
    for (double v : row) s += v;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Property, IndecomposablePairs) {
  // Compatible iff both are m&p with pure outputs and postprocessing-equivalent rank-1 POVMs.
  std::mt19937_64 rng(8);
  const Povm t = trine();
  const Povm split({t.effect(0), t.effect(1) * cplx(0.5), t.effect(1) * cplx(0.5), t.effect(2)});
  std::vector<Instrument> corpus{luders_instrument(sharp_z()), luders_instrument(sharp_x()),
                                 luders_instrument(noisy_z(0.6)), luders_instrument(t), luders_instrument(split),
                                 random_instrument(2, 2, 2, 1, rng)};
  // A rank-1 m&p device with pure outputs other than its own effects.
  corpus.push_back(measure_and_prepare(sharp_z(), {random_state(2, rng, 1), random_state(2, rng, 1)}));
  int feasible = 0;
  for (std::size_t a = 0; a < corpus.size(); ++a)
    for (std::size_t b = a; b < corpus.size(); ++b) {
      const CompatReport r = check_compatible(corpus[a], corpus[b]);
      ASSERT_TRUE(r.decided()) << a << "," << b;
      const DeviceClassReport ca = classify(corpus[a]), cb = classify(corpus[b]);
      const bool predicted = ca.is_measure_and_prepare && ca.prepared_states_pure && cb.is_measure_and_prepare &&
                             cb.prepared_states_pure && povm_pp_equivalent(ca.measured, cb.measured);
      EXPECT_EQ(r.feasible(), predicted) << "pair " << a << "," << b;
      feasible += r.feasible();
    }
  EXPECT_GT(feasible, 0);
}

TEST(Property, MeasureAndPreparePairsFollowTheirPovms) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 6; ++k) {
    const Povm a = k % 2 ? noisy_x(0.5 + 0.1 * k) : random_povm(2, 2, rng);
    const Povm b = k % 2 ? noisy_z(0.5 + 0.1 * k) : random_povm(2, 2, rng);
    const Instrument i = measure_and_prepare(a, {random_state(2, rng), random_state(2, rng)});
    const Instrument j = measure_and_prepare(b, {random_state(3, rng), random_state(3, rng)});
    const CompatReport ins = check_compatible(i, j), pov = check_compatible(a, b);
    if (ins.decided() && pov.decided()) EXPECT_EQ(ins.verdict.status, pov.verdict.status) << "pair " << k;
  }
  for (double a : {0.3, 0.8}) {
    const auto [i, j] = xz_map_instruments(a);
    EXPECT_EQ(check_compatible(i, j).verdict.status, check_compatible(sharp_x(), sharp_z()).verdict.status);
  }
}

TEST(Property, MeasureAndPrepareTargetReducesToItsPovm) {
  std::mt19937_64 rng(10);
  for (int k = 0; k < 6; ++k) {
    const Instrument i = random_instrument(2, 2, 2, 1 + k % 3 * 2, rng);
    const Povm b = k < 3 ? noisy_z(0.3 + 0.3 * k) : random_povm(2, 2, rng);
    const Instrument j = measure_and_prepare(b, {random_state(2, rng), random_state(2, rng)});
    const CompatReport full = check_compatible(i, j), reduced = check_compatible(i, as_ins(b));
    if (full.decided() && reduced.decided()) EXPECT_EQ(full.verdict.status, reduced.verdict.status) << "pair " << k;
  }
}

TEST(Mix, Endpoints) {
  std::mt19937_64 rng(11);
  const Instrument a = random_instrument(2, 2, 2, 1, rng), b = random_instrument(2, 2, 2, 2, rng);
  EXPECT_TRUE(devices_equal(mix_instruments(a, b, 0.0), a, 1e-14));
  EXPECT_TRUE(devices_equal(mix_instruments(a, b, 1.0), b, 1e-14));
  EXPECT_TRUE(mix_instruments(a, b, 0.3).is_valid());
  EXPECT_THROW(mix_instruments(a, pauli_instrument(), 0.5), DimensionError);
}
