#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hyperspin/spin_system.hpp"

using namespace hyperspin;

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

double mdiff(const Matrix& a, const Matrix& b) { return max_abs(a - b); }

const TransitionRecord& record_between(
    const std::vector<TransitionRecord>& table, int a, int b) {
  for (const TransitionRecord& r : table)
    if ((r.from_level == a && r.to_level == b) ||
        (r.from_level == b && r.to_level == a))
      return r;
  throw std::runtime_error("no such record");
}

}  // namespace

TEST_CASE("validate rejects malformed systems") {
  SpinSystem sys = malonic_ref();
  CHECK_NOTHROW(sys.validate());
  CHECK(sys.n_sites() == 3);
  CHECK(sys.dim() == 8);

  SpinSystem bad = sys;
  bad.nuclei.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = sys;
  bad.nuclei.resize(4, sys.nuclei[0]);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = sys;
  bad.t2e_us = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = sys;
  bad.linewidth_mhz = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = sys;
  bad.nuclei[0].larmor_mhz = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = sys;
  bad.nuclei[1].a_mhz = std::nan("");
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("hyperfine_coeffs at the standard orientations") {
  HyperfinePair p = hyperfine_coeffs(10.0, 2.0, 0.0);
  CHECK(p.a_mhz == doctest::Approx(14.0));
  CHECK(p.b_mhz == doctest::Approx(0.0));
  p = hyperfine_coeffs(10.0, 2.0, std::numbers::pi / 2);
  CHECK(p.a_mhz == doctest::Approx(8.0));
  CHECK(p.b_mhz == doctest::Approx(0.0));
  p = hyperfine_coeffs(10.0, 2.0, std::numbers::pi / 4);
  CHECK(p.a_mhz == doctest::Approx(11.0));
  CHECK(p.b_mhz == doctest::Approx(3.0));
  // Magic angle kills the secular dipolar part.
  p = hyperfine_coeffs(10.0, 2.0, std::acos(1.0 / std::sqrt(3.0)));
  CHECK(p.a_mhz == doctest::Approx(10.0));
  CHECK(p.b_mhz == doctest::Approx(2.0 * std::sqrt(2.0)));
}

TEST_CASE("build_hamiltonian explicit 4x4 oracle") {
  SpinSystem sys;
  sys.nuclei = {{"X", 5.0, 2.0, 4.0}};
  Matrix expect(4, 4);
  expect << 3, 1, 0, 0,
            1, -3, 0, 0,
            0, 0, 2, -1,
            0, 0, -1, -2;
  CHECK(mdiff(build_hamiltonian(sys), expect) < 1e-14);

  sys.electron_offset_mhz = 3.0;
  Matrix shifted = expect;
  shifted.diagonal() += (Eigen::Vector4d(1.5, 1.5, -1.5, -1.5)).cast<cxd>();
  CHECK(mdiff(build_hamiltonian(sys), shifted) < 1e-14);
}

TEST_CASE("hamiltonian commutes with Sz and is hermitian") {
  const SpinSystem sys = malonic_ref();
  const Matrix h = build_hamiltonian(sys);
  CHECK(h.rows() == 8);
  CHECK(is_hermitian(h));
  const Matrix sz = spin_ops(sys.n_sites(), 0).sz;
  CHECK(mdiff(h * sz, sz * h) < 1e-12);
}

TEST_CASE("quantization angles of the reference system") {
  const SpinSystem sys = malonic_ref();
  const QuantizationAngles qh = quantization_angles(sys.nuclei[0]);
  const QuantizationAngles qc = quantization_angles(sys.nuclei[1]);
  CHECK(qh.up_rad * kDeg == doctest::Approx(55.34).epsilon(2e-3));
  CHECK(qh.down_rad * kDeg == doctest::Approx(15.72).epsilon(2e-3));
  CHECK(qc.up_rad * kDeg == doctest::Approx(-35.15).epsilon(2e-3));
  CHECK(qc.down_rad * kDeg == doctest::Approx(-39.15).epsilon(2e-3));
}

TEST_CASE("quantization angles stay on the principal branch") {
  // b -> 0 must give a vanishing tilt regardless of the z-coefficient sign.
  QuantizationAngles q = quantization_angles({"X", 5.0, 2.0, 0.0});
  CHECK(q.up_rad == 0.0);
  CHECK(q.down_rad == 0.0);
  q = quantization_angles({"X", 1.0, -10.0, 0.0});
  CHECK(q.up_rad == 0.0);
  CHECK(q.down_rad == 0.0);
  // Pure transverse field tilts exactly to pi/2.
  q = quantization_angles({"X", 1.0, -2.0, 3.0});
  CHECK(q.up_rad == doctest::Approx(std::numbers::pi / 2));
  // Vanishing effective field has no quantization axis at all.
  CHECK_THROWS_AS(quantization_angles({"X", 1.0, -2.0, 0.0}),
                  std::domain_error);
  CHECK_THROWS_AS(quantization_angles({"X", 1.0, 2.0, 0.0}),
                  std::domain_error);
}

TEST_CASE("effective frequencies of the reference system") {
  const SpinSystem sys = malonic_ref();
  const EffectiveFrequencies fh = effective_frequencies(sys.nuclei[0]);
  const EffectiveFrequencies fc = effective_frequencies(sys.nuclei[1]);
  CHECK(fh.up_mhz == doctest::Approx(11.9749).epsilon(1e-4));
  CHECK(fh.down_mhz == doctest::Approx(36.3500).epsilon(1e-4));
  CHECK(fc.up_mhz == doctest::Approx(64.0109).epsilon(1e-4));
  CHECK(fc.down_mhz == doctest::Approx(58.3643).epsilon(1e-4));
  // The probed difference frequencies in the two manifolds.
  CHECK(fc.down_mhz - fh.down_mhz == doctest::Approx(22.014).epsilon(1e-3));
  CHECK(fc.up_mhz - fh.up_mhz == doctest::Approx(52.036).epsilon(1e-3));
}

TEST_CASE("effective frequencies match the manifold block eigenvalues") {
  SpinSystem sys;
  sys.nuclei = {{"X", 5.0, 2.0, 4.0}};
  const Matrix h = build_hamiltonian(sys);
  const EffectiveFrequencies f = effective_frequencies(sys.nuclei[0]);
  // Up manifold block is the top-left 2x2, gap = effective frequency.
  const EigSystem up = eig_hermitian(h.block(0, 0, 2, 2));
  const EigSystem dn = eig_hermitian(h.block(2, 2, 2, 2));
  CHECK(up.values(1) - up.values(0) == doctest::Approx(f.up_mhz));
  CHECK(dn.values(1) - dn.values(0) == doctest::Approx(f.down_mhz));
  CHECK(f.up_mhz == doctest::Approx(std::hypot(6.0, 2.0)));
  CHECK(f.down_mhz == doctest::Approx(std::hypot(4.0, 2.0)));
}

TEST_CASE("logical states are orthonormal manifold eigenvectors") {
  const SpinSystem sys = malonic_ref();
  for (const Nucleus& nuc : sys.nuclei) {
    for (Manifold m : {Manifold::Up, Manifold::Down}) {
      const LogicalStates ls = logical_states(nuc, m);
      CHECK(std::abs(ls.zero.dot(ls.zero) - cxd(1, 0)) < 1e-14);
      CHECK(std::abs(ls.one.dot(ls.one) - cxd(1, 0)) < 1e-14);
      CHECK(std::abs(ls.zero.dot(ls.one)) < 1e-14);
    }
  }
}

TEST_CASE("level table of the reference system") {
  const SpinSystem sys = malonic_ref();
  const LevelTable tbl = level_table(sys);
  REQUIRE(tbl.levels.size() == 8);

  const double eh = 36.3500 / 2, ec = 58.3643 / 2;      // down manifold
  const double uh = 11.9749 / 2, uc = 64.0109 / 2;      // up manifold
  struct Row { Manifold m; int config; double energy; };
  const Row expect[8] = {
      {Manifold::Down, 2, -eh - ec},  // -47.357
      {Manifold::Up, 1, -uh - uc},    // -37.993
      {Manifold::Up, 3, uh - uc},     // -26.018
      {Manifold::Down, 0, eh - ec},   // -11.007
      {Manifold::Down, 3, -eh + ec},  // +11.007
      {Manifold::Up, 0, -uh + uc},    // +26.018
      {Manifold::Up, 2, uh + uc},     // +37.993
      {Manifold::Down, 1, eh + ec},   // +47.357
  };
  for (int i = 0; i < 8; ++i) {
    CHECK(tbl.levels[i].index == i);
    CHECK(tbl.levels[i].manifold == expect[i].m);
    CHECK(tbl.levels[i].config == expect[i].config);
    CHECK(tbl.levels[i].energy_mhz ==
          doctest::Approx(expect[i].energy).epsilon(1e-4));
  }

  // Each table entry is a true eigenvector of the full Hamiltonian.
  const Matrix h = build_hamiltonian(sys);
  const Matrix sz = spin_ops(sys.n_sites(), 0).sz;
  for (const Level& lv : tbl.levels) {
    CHECK(max_abs(h * lv.state - lv.energy_mhz * lv.state) < 1e-10);
    CHECK(std::abs(lv.state.norm() - 1.0) < 1e-12);
    const double ms = (lv.state.adjoint() * sz * lv.state)(0).real();
    CHECK(ms == doctest::Approx(lv.manifold == Manifold::Up ? 0.5 : -0.5));
  }

  CHECK(tbl.find(Manifold::Down, 0).energy_mhz ==
        doctest::Approx(-11.007).epsilon(1e-3));
  CHECK_THROWS_AS(tbl.find(Manifold::Down, 4), std::out_of_range);
}

TEST_CASE("transition table of the reference system") {
  const SpinSystem sys = malonic_ref();
  const LevelTable tbl = level_table(sys);
  const auto table = transition_table(sys);
  CHECK(table.size() == 28);  // 16 electron + 2 x 6 nuclear

  const int d00 = tbl.find(Manifold::Down, 0).index;
  const int d11 = tbl.find(Manifold::Down, 3).index;
  const int u00 = tbl.find(Manifold::Up, 0).index;
  const int u11 = tbl.find(Manifold::Up, 3).index;
  const int d10 = tbl.find(Manifold::Down, 2).index;
  const int u10 = tbl.find(Manifold::Up, 2).index;

  // Allowed lines sit at +-37.03 and +-85.35 MHz from the carrier.
  const TransitionRecord& inner = record_between(table, d00, u00);
  CHECK(inner.kind == TransitionKind::Allowed);
  CHECK(inner.offset_mhz == doctest::Approx(37.025).epsilon(1e-3));
  CHECK(inner.frequency_mhz == doctest::Approx(37.025).epsilon(1e-3));
  CHECK(inner.intensity == doctest::Approx(0.94026).epsilon(1e-3));

  const TransitionRecord& inner2 = record_between(table, d11, u11);
  CHECK(inner2.kind == TransitionKind::Allowed);
  CHECK(inner2.offset_mhz == doctest::Approx(-37.025).epsilon(1e-3));
  CHECK(inner2.frequency_mhz == doctest::Approx(37.025).epsilon(1e-3));

  const TransitionRecord& outer = record_between(table, d10, u10);
  CHECK(outer.kind == TransitionKind::Allowed);
  CHECK(outer.offset_mhz == doctest::Approx(85.350).epsilon(1e-3));

  // The double-flip line is weaker by exactly the suppression factor.
  const TransitionRecord& dflip = record_between(table, d00, u11);
  CHECK(dflip.kind == TransitionKind::Forbidden);
  CHECK(dflip.intensity == doctest::Approx(0.011839).epsilon(1e-3));
  CHECK(dflip.intensity / inner.intensity ==
        doctest::Approx(suppression_factor(sys)).epsilon(1e-9));

  // Probed nuclear coherence gaps inside each manifold.
  const TransitionRecord& dq_down = record_between(table, d00, d11);
  CHECK(dq_down.kind == TransitionKind::Nuclear);
  CHECK(dq_down.intensity == 0.0);
  CHECK(dq_down.frequency_mhz == doctest::Approx(22.014).epsilon(1e-3));
  const TransitionRecord& dq_up = record_between(table, u00, u11);
  CHECK(dq_up.kind == TransitionKind::Nuclear);
  CHECK(dq_up.frequency_mhz == doctest::Approx(52.036).epsilon(1e-3));

  // Drive strength is conserved: intensities out of any level sum to one.
  for (const Level& lv : tbl.levels) {
    double sum = 0.0;
    for (const TransitionRecord& r : table) {
      if (r.kind == TransitionKind::Nuclear) continue;
      if (r.from_level == lv.index || r.to_level == lv.index)
        sum += r.intensity * r.intensity;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("secular system has no forbidden intensity") {
  SpinSystem sys;
  sys.nuclei = {{"X", 5.0, 2.0, 0.0}};
  const auto table = transition_table(sys);
  CHECK(table.size() == 6);
  for (const TransitionRecord& r : table) {
    if (r.kind == TransitionKind::Allowed)
      CHECK(r.intensity == doctest::Approx(1.0).epsilon(1e-12));
    if (r.kind == TransitionKind::Forbidden) CHECK(r.intensity < 1e-12);
  }
  CHECK(suppression_factor(sys) == doctest::Approx(0.0));
}

TEST_CASE("suppression factor of the reference system") {
  CHECK(suppression_factor(malonic_ref()) ==
        doctest::Approx(0.012592).epsilon(2e-3));
  // And it lands inside the design window for the experiment.
  CHECK(suppression_factor(malonic_ref()) > 0.010);
  CHECK(suppression_factor(malonic_ref()) < 0.016);
}

TEST_CASE("reference larmor frequencies follow from the spectrometer field") {
  // B0 = h f / (g mu_B) at f = 9.1875 GHz, g = 1.9843, then gamma * B0.
  const double h_planck = 6.62607015e-34;
  const double mu_bohr = 9.2740100783e-24;
  const double b0 = h_planck * 9.1875e9 / (1.9843 * mu_bohr);
  CHECK(b0 == doctest::Approx(0.33081).epsilon(1e-4));
  const SpinSystem sys = malonic_ref();
  CHECK(sys.nuclei[0].larmor_mhz ==
        doctest::Approx(42.5775 * b0).epsilon(1e-3));
  CHECK(sys.nuclei[1].larmor_mhz ==
        doctest::Approx(10.7084 * b0).epsilon(1e-3));
}
