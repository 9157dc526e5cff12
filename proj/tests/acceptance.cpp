// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "instro/catalog.hpp"
#include "instro/cli.hpp"
#include "instro/compat.hpp"

using namespace instro;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

const char* name(sdp::Status s) {
  switch (s) {
    case sdp::Status::Feasible:
      return "F";
    case sdp::Status::Infeasible:
      return "I";
    case sdp::Status::Undecided:
      return "U";
  }
  return "?";
}

Instrument as_ins(const Povm& p) { return povm_as_instrument(p); }
Instrument channel_of(const Instrument& i) { return Instrument::channel(induced_channel(i)); }

Outcome xz_threshold() {
  auto lam = [](double a) {
    const auto [i, j] = xz_map_instruments(a);
    return min_eig(jordan_product_choi(induced_channel(i), induced_channel(j)).hermitian_part());
  };
  const double l70 = lam(0.70), l72 = lam(0.72);
  const cli::ScanResult s = cli::scan_xz(0.0, 1.0, 0.01);
  std::ostringstream os;
  os << "min_eig(0.70)=" << l70 << " min_eig(0.72)=" << l72 << " scan sign change in (" << s.sign_change_lo << ", "
     << s.sign_change_hi << ")";
  const bool ok = l70 >= -1e-9 && l72 <= -1e-4 && std::abs(s.sign_change_lo - 0.70) < 1e-12 &&
                  std::abs(s.sign_change_hi - 0.71) < 1e-12;
  return {ok, os.str()};
}

Outcome no_broadcasting() {
  const CompatReport r = check_compatible(identity_channel(2), identity_channel(2));
  std::ostringstream os;
  os << sdp::to_string(r.verdict.status) << " margin=" << r.verdict.margin << " (" << r.verdict.margin_kind << ")";
  return {r.infeasible() && r.verdict.margin > 1e-4, os.str()};
}

Outcome pauli_counterexample() {
  const Instrument id = identity_channel(2), pa = pauli_instrument();
  const CompatReport ins = check_compatible(id, pa);
  const CompatReport ch = check_compatible(channel_of(id), channel_of(pa));
  const CompatReport pv = check_compatible(as_ins(induced_povm(id)), as_ins(induced_povm(pa)));
  std::ostringstream os;
  os << "instruments " << sdp::to_string(ins.verdict.status) << ", induced channels "
     << sdp::to_string(ch.verdict.status) << ", induced POVMs " << sdp::to_string(pv.verdict.status);
  return {ins.infeasible() && ch.feasible() && pv.feasible(), os.str()};
}

std::vector<std::pair<Instrument, Instrument>> random_pairs() {
  std::mt19937_64 rng(20240611);
  std::vector<std::pair<Instrument, Instrument>> pairs;
  for (int k = 0; k < 60; ++k) {
    const std::size_t ri = 1 + static_cast<std::size_t>(k % 4) * 2;
    const std::size_t rj = 1 + static_cast<std::size_t>((k / 4) % 4) * 2;
    Instrument i = random_instrument(2, 2, 2, ri, rng);
    Instrument j = random_instrument(2, 2, 2, rj, rng);
    pairs.emplace_back(std::move(i), std::move(j));
  }
  return pairs;
}

std::vector<std::pair<Instrument, Instrument>> g_feasible;

Outcome main_theorem() {
  const auto pairs = random_pairs();
  int f = 0, inf = 0, und = 0, contradictions = 0;
  for (const auto& [i, j] : pairs) {
    const CompatReport d = check_compatible(i, j);
    const CompatReport c = check_compatible_via_complementary(i, j);
    for (const auto* r : {&d, &c}) {
      if (r->feasible()) ++f;
      else if (r->infeasible()) ++inf;
      else ++und;
    }
    if (d.decided() && c.decided() && d.verdict.status != c.verdict.status) ++contradictions;
    if (d.feasible() || c.feasible()) g_feasible.push_back({i, j});
  }
  const double rate = static_cast<double>(und) / static_cast<double>(2 * pairs.size());
  std::ostringstream os;
  os << pairs.size() << " pairs, verdicts F/I/U = " << f << "/" << inf << "/" << und << ", undecided rate " << rate
     << ", contradictions " << contradictions;
  return {contradictions == 0 && rate <= 0.10 && pairs.size() >= 50, os.str()};
}

Outcome marginal_lattice() {
  int violations = 0, checks = 0;
  for (const auto& [i, j] : g_feasible) {
    const Instrument vi[3] = {i, channel_of(i), as_ins(induced_povm(i))};
    const Instrument vj[3] = {j, channel_of(j), as_ins(induced_povm(j))};
    for (const auto& a : vi)
      for (const auto& b : vj) {
        ++checks;
        if (!check_compatible(a, b).feasible()) ++violations;
      }
  }
  std::ostringstream os;
  os << g_feasible.size() << " feasible pairs, " << checks << " induced checks, " << violations << " violations";
  return {violations == 0 && !g_feasible.empty(), os.str()};
}

Outcome complementary_equivalence() {
  std::mt19937_64 rng(77);
  int violations = 0;
  CompatOptions o;
  for (int k = 0; k < 20; ++k) {
    const std::size_t dout = 1 + static_cast<std::size_t>(k % 2);
    const Instrument ins = random_instrument(2, dout, 2 + static_cast<std::size_t>(k % 3 == 0), 1 + k % 2, rng);
    const Instrument can = complementary_instrument(ins, canonical_dilation(ins));
    const Instrument min = complementary_instrument(ins, minimal_dilation(ins));
    if (!check_postprocessing(can, min, o).feasible() || !check_postprocessing(min, can, o).feasible()) ++violations;
  }
  std::ostringstream os;
  os << "20 instruments, " << violations << " violations";
  return {violations == 0, os.str()};
}

Outcome sharp_nondisturbance() {
  const Povm as[2] = {sharp_z(), sharp_x()};
  const Povm js[3] = {sharp_z(), sharp_x(), noisy_z(0.5)};
  const char* an[2] = {"Z", "X"};
  const char* jn[3] = {"Z", "X", "Z(0.5)"};
  int mismatches = 0;
  bool zz = false, zx = false;
  std::ostringstream os;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 3; ++b) {
      const CompatReport c = check_compatible(as_ins(as[a]), as_ins(js[b]));
      const sdp::Verdict n = check_povm_nondisturbance(as[a], as_ins(js[b]));
      if (c.verdict.status != n.status || !c.decided()) ++mismatches;
      if (a == 0 && b == 0) zz = c.feasible();
      if (a == 0 && b == 1) zx = c.infeasible();
      os << an[a] << "/" << jn[b] << "=" << name(c.verdict.status) << name(n.status) << " ";
    }
  os << "mismatches " << mismatches;
  return {mismatches == 0 && zz && zx, os.str()};
}

Outcome indecomposable_reduction() {
  std::mt19937_64 rng(4242);
  const Instrument lz = luders_instrument(sharp_z());
  int mismatches = 0, decided = 0, feasible = 0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = 2 + static_cast<std::size_t>(k % 2);
    Povm b;
    if (k % 2 == 0) {
      b = random_povm(2, n, rng);
    } else {
      // A random classical postprocessing of Z.
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<CMatrix> eff(n, CMatrix(2, 2));
      for (std::size_t x = 0; x < 2; ++x) {
        std::vector<double> w(n);
        double s = 0.0;
        for (auto& v : w) s += v = u(rng);
        for (std::size_t y = 0; y < n; ++y) eff[y] += sharp_z().effect(x) * cplx(w[y] / s);
      }
      b = Povm(eff);
    }
    const CompatReport c = check_compatible(lz, as_ins(b));
    const bool lp = lp_postprocess_povm(sharp_z(), b).has_value();
    if (!c.decided()) continue;
    ++decided;
    feasible += c.feasible();
    if (c.feasible() != lp) ++mismatches;
  }
  std::ostringstream os;
  os << decided << "/20 decided, " << feasible << " feasible, " << mismatches << " mismatches";
  return {mismatches == 0 && decided > 0, os.str()};
}

Outcome mp_reduction() {
  const CompatReport povms = check_compatible(sharp_x(), sharp_z());
  std::ostringstream os;
  os << "X/Z POVMs " << sdp::to_string(povms.verdict.status) << "; instruments";
  bool ok = povms.infeasible();
  for (double a : {0.0, 0.5, 1.0}) {
    const auto [i, j] = xz_map_instruments(a);
    const CompatReport r = check_compatible(i, j);
    os << " a=" << a << ":" << sdp::to_string(r.verdict.status);
    ok = ok && r.verdict.status == povms.verdict.status;
  }
  return {ok, os.str()};
}

Outcome sandwich_form() {
  std::mt19937_64 rng(9001);
  int mismatches = 0, decided = 0, feasible = 0;
  for (int k = 0; k < 20; ++k) {
    const Povm a = random_povm(2, 2 + static_cast<std::size_t>(k % 2), rng);
    const Povm b = random_povm(2, 2, rng);
    const CompatReport s = check_povm_povm_sandwich(a, b);
    const CompatReport c = check_compatible(a, b);
    if (!s.decided() || !c.decided()) continue;
    ++decided;
    feasible += c.feasible();
    if (s.verdict.status != c.verdict.status) ++mismatches;
  }
  std::ostringstream os;
  os << decided << "/20 decided, " << feasible << " feasible, " << mismatches << " mismatches";
  return {mismatches == 0 && decided > 0, os.str()};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double budget_s;
    std::function<Outcome()> run;
  };
  const Criterion all[] = {
      {1, "xz threshold", 1.0, xz_threshold},
      {2, "no-broadcasting", 30.0, no_broadcasting},
      {3, "Pauli counterexample", 60.0, pauli_counterexample},
      {4, "direct vs complementary route", 600.0, main_theorem},
      {5, "marginal implication lattice", 600.0, marginal_lattice},
      {6, "complementary equivalence", 600.0, complementary_equivalence},
      {7, "sharp non-disturbance converse", 600.0, sharp_nondisturbance},
      {8, "indecomposable reduction", 600.0, indecomposable_reduction},
      {9, "m&p reduction", 600.0, mp_reduction},
      {10, "sandwich form", 600.0, sandwich_form},
  };
  int failures = 0;
  for (const auto& c : all) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool pass = o.pass && secs < c.budget_s;
    if (!pass) ++failures;
    std::printf("[%s] criterion %d (%s): %s [%.2f s, budget %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.title,
                o.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
