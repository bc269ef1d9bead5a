#include "hyperspin/spin_system.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hyperspin {

namespace {

constexpr double kPi = std::numbers::pi;

// atan2 folded into the principal branch (-pi/2, pi/2]. The branch choice
// keeps the angle continuous through b -> 0, where the quantization axis
// must line up with the field no matter the sign of the z coefficient.
double principal_atan(double y, double x) {
  if (y == 0.0 && x == 0.0)
    throw std::domain_error(
        "quantization axis undefined: effective field vanishes");
  double t = std::atan2(y, x);
  if (t > 0.5 * kPi)
    t -= kPi;
  else if (t <= -0.5 * kPi)
    t += kPi;
  return t;
}

int config_bit(int config, int nucleus, int n_nuc) {
  return (config >> (n_nuc - 1 - nucleus)) & 1;
}

}  // namespace

void SpinSystem::validate() const {
  if (nuclei.empty() || nuclei.size() > 3)
    throw std::invalid_argument("SpinSystem: need 1 to 3 nuclei");
  if (!(t2e_us > 0.0))
    throw std::invalid_argument("SpinSystem: t2e_us must be positive");
  if (!(linewidth_mhz >= 0.0))
    throw std::invalid_argument("SpinSystem: linewidth_mhz must be >= 0");
  if (!std::isfinite(electron_offset_mhz))
    throw std::invalid_argument("SpinSystem: electron_offset_mhz not finite");
  for (const Nucleus& nuc : nuclei) {
    if (!(nuc.larmor_mhz >= 0.0))
      throw std::invalid_argument("SpinSystem: larmor_mhz must be >= 0");
    if (!std::isfinite(nuc.a_mhz) || !std::isfinite(nuc.b_mhz))
      throw std::invalid_argument("SpinSystem: hyperfine values not finite");
  }
}

SpinSystem malonic_ref() {
  SpinSystem sys;
  sys.electron_offset_mhz = 0.0;
  sys.nuclei = {
      {"1H", 14.09, -41.8, 19.7},
      {"13C", 3.54, 97.6, 73.7},
  };
  sys.t2e_us = 2.3;
  sys.linewidth_mhz = 14.0;
  return sys;
}

HyperfinePair hyperfine_coeffs(double a_iso_mhz, double d_dipolar_mhz,
                               double theta_rad) {
  const double c = std::cos(theta_rad);
  const double s = std::sin(theta_rad);
  return {a_iso_mhz + d_dipolar_mhz * (3.0 * c * c - 1.0),
          3.0 * d_dipolar_mhz * c * s};
}

Matrix build_hamiltonian(const SpinSystem& sys) {
  sys.validate();
  const int n = sys.n_sites();
  const SpinOperatorSet e = spin_ops(n, 0);
  Matrix h = sys.electron_offset_mhz * e.sz;
  for (int k = 0; k < static_cast<int>(sys.nuclei.size()); ++k) {
    const Nucleus& nuc = sys.nuclei[k];
    const SpinOperatorSet ik = spin_ops(n, k + 1);
    // Operators on distinct sites commute, so the plain matrix product is
    // the coupling term Sz (x) (a Iz + b Ix).
    h += nuc.larmor_mhz * ik.sz + e.sz * (nuc.a_mhz * ik.sz + nuc.b_mhz * ik.sx);
  }
  return h;
}

QuantizationAngles quantization_angles(const Nucleus& nuc) {
  QuantizationAngles q;
  q.up_rad = principal_atan(-nuc.b_mhz, 2.0 * nuc.larmor_mhz + nuc.a_mhz);
  q.down_rad = principal_atan(-nuc.b_mhz, -2.0 * nuc.larmor_mhz + nuc.a_mhz);
  return q;
}

EffectiveFrequencies effective_frequencies(const Nucleus& nuc) {
  EffectiveFrequencies f;
  f.up_mhz = std::hypot(nuc.larmor_mhz + 0.5 * nuc.a_mhz, 0.5 * nuc.b_mhz);
  f.down_mhz = std::hypot(nuc.larmor_mhz - 0.5 * nuc.a_mhz, 0.5 * nuc.b_mhz);
  return f;
}

LogicalStates logical_states(const Nucleus& nuc, Manifold manifold) {
  const QuantizationAngles q = quantization_angles(nuc);
  const double t = (manifold == Manifold::Up) ? q.up_rad : q.down_rad;
  const double c = std::cos(0.5 * t);
  const double s = std::sin(0.5 * t);
  LogicalStates ls;
  ls.zero << c, -s;
  ls.one << s, c;
  return ls;
}

const Level& LevelTable::find(Manifold manifold, int config) const {
  for (const Level& lv : levels)
    if (lv.manifold == manifold && lv.config == config) return lv;
  throw std::out_of_range("LevelTable: no level with that manifold/config");
}

LevelTable level_table(const SpinSystem& sys) {
  const Matrix h = build_hamiltonian(sys);
  const int n_nuc = static_cast<int>(sys.nuclei.size());

  LevelTable tbl;
  for (Manifold m : {Manifold::Up, Manifold::Down}) {
    Matrix elec = Matrix::Zero(2, 1);
    elec(m == Manifold::Up ? 0 : 1, 0) = 1.0;
    for (int config = 0; config < (1 << n_nuc); ++config) {
      Matrix state = elec;
      for (int k = 0; k < n_nuc; ++k) {
        const LogicalStates ls = logical_states(sys.nuclei[k], m);
        const Eigen::Vector2cd& nk =
            config_bit(config, k, n_nuc) ? ls.one : ls.zero;
        state = kron(state, Matrix(nk));
      }
      Level lv;
      lv.manifold = m;
      lv.config = config;
      lv.state = state.col(0);
      lv.energy_mhz = (lv.state.adjoint() * h * lv.state)(0).real();
      tbl.levels.push_back(std::move(lv));
    }
  }

  std::sort(tbl.levels.begin(), tbl.levels.end(),
            [](const Level& a, const Level& b) {
              if (a.energy_mhz != b.energy_mhz)
                return a.energy_mhz < b.energy_mhz;
              if (a.manifold != b.manifold)
                return static_cast<int>(a.manifold) <
                       static_cast<int>(b.manifold);
              return a.config < b.config;
            });
  for (int i = 0; i < static_cast<int>(tbl.levels.size()); ++i)
    tbl.levels[i].index = i;
  return tbl;
}

std::vector<TransitionRecord> transition_table(const SpinSystem& sys) {
  const LevelTable tbl = level_table(sys);
  const int n = sys.n_sites();
  // Drive couples through the electron only; scale so a transition with no
  // nuclear character change has unit strength.
  const Matrix drive = 2.0 * spin_ops(n, 0).sx;

  std::vector<TransitionRecord> out;
  const int n_lv = static_cast<int>(tbl.levels.size());
  for (int i = 0; i < n_lv; ++i) {
    for (int j = i + 1; j < n_lv; ++j) {
      const Level& lo = tbl.levels[i];
      const Level& hi = tbl.levels[j];
      TransitionRecord r;
      r.from_level = i;
      r.to_level = j;
      r.frequency_mhz = hi.energy_mhz - lo.energy_mhz;
      if (lo.manifold == hi.manifold) {
        r.kind = TransitionKind::Nuclear;
      } else {
        const Level& up = (lo.manifold == Manifold::Up) ? lo : hi;
        const Level& dn = (lo.manifold == Manifold::Up) ? hi : lo;
        r.offset_mhz = up.energy_mhz - dn.energy_mhz;
        r.intensity = std::abs((up.state.adjoint() * drive * dn.state)(0));
        r.kind = (up.config == dn.config) ? TransitionKind::Allowed
                                          : TransitionKind::Forbidden;
      }
      out.push_back(r);
    }
  }
  return out;
}

double suppression_factor(const SpinSystem& sys) {
  sys.validate();
  double f = 1.0;
  for (const Nucleus& nuc : sys.nuclei) {
    const QuantizationAngles q = quantization_angles(nuc);
    f *= std::abs(std::tan(0.5 * (q.up_rad - q.down_rad)));
  }
  return f;
}

}  // namespace hyperspin
