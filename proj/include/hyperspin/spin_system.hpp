#pragma once

#include <string>
#include <vector>

#include "hyperspin/linalg.hpp"

namespace hyperspin {

/// One spin-1/2 nucleus coupled to the electron: Zeeman frequency and the
/// secular (a) / pseudosecular (b) hyperfine coefficients, all in MHz.
struct Nucleus {
  std::string label;
  double larmor_mhz = 0.0;
  double a_mhz = 0.0;
  double b_mhz = 0.0;
};

/// Electron + nuclei in the rotating frame of the microwave carrier.
/// Site ordering of the Hilbert space is electron first, then nuclei in
/// list order; dimension is 2^(1 + nuclei.size()).
struct SpinSystem {
  double electron_offset_mhz = 0.0;  // rotating-frame detuning, 0 on resonance
  std::vector<Nucleus> nuclei;
  double t2e_us = 2.3;
  double linewidth_mhz = 14.0;  // inhomogeneous FWHM

  int n_sites() const { return 1 + static_cast<int>(nuclei.size()); }
  int dim() const { return 1 << n_sites(); }
  void validate() const;  // throws std::invalid_argument on bad fields
};

/// Reference single-crystal radical system used throughout the tests and
/// as the built-in CLI config "malonic-ref".
SpinSystem malonic_ref();

struct HyperfinePair {
  double a_mhz = 0.0;
  double b_mhz = 0.0;
};

/// Secular/pseudosecular coefficients of an axially symmetric hyperfine
/// tensor: a = a_iso + d(3cos^2(theta) - 1), b = 3d cos(theta)sin(theta).
HyperfinePair hyperfine_coeffs(double a_iso_mhz, double d_dipolar_mhz,
                               double theta_rad);

/// H = delta*Sz + sum_k w_k Iz_k + sum_k Sz (a_k Iz_k + b_k Ix_k), in MHz.
/// Commutes with Sz, so it is block diagonal in the electron manifolds.
Matrix build_hamiltonian(const SpinSystem& sys);

enum class Manifold { Up, Down };

/// Tilt of the nuclear quantization axis away from the field direction in
/// each electron manifold. Principal branch (-pi/2, pi/2]: the angle goes
/// to zero continuously as b -> 0 so that the transition character stays
/// tied to physical nuclear spin flips.
struct QuantizationAngles {
  double up_rad = 0.0;
  double down_rad = 0.0;
};

QuantizationAngles quantization_angles(const Nucleus& nuc);

/// Nuclear precession frequencies in the two manifolds:
/// w_up = sqrt((w + a/2)^2 + (b/2)^2), w_down = sqrt((w - a/2)^2 + (b/2)^2).
struct EffectiveFrequencies {
  double up_mhz = 0.0;
  double down_mhz = 0.0;
};

EffectiveFrequencies effective_frequencies(const Nucleus& nuc);

/// Logical basis of one nucleus in the given manifold,
///   |0> = cos(t/2)|up> - sin(t/2)|dn>,  |1> = sin(t/2)|up> + cos(t/2)|dn>,
/// with t the manifold quantization angle. Both are eigenvectors of the
/// manifold's effective nuclear Hamiltonian.
struct LogicalStates {
  Eigen::Vector2cd zero, one;
};

LogicalStates logical_states(const Nucleus& nuc, Manifold manifold);

/// One eigenstate of the full Hamiltonian with its nuclear product label.
/// `config` packs the per-nucleus logical labels, nucleus 0 in the highest
/// bit (so for two nuclei: config = 2*m_first + m_second).
struct Level {
  int index = 0;  // position in the energy-ascending global ordering
  Manifold manifold = Manifold::Up;
  int config = 0;
  double energy_mhz = 0.0;
  Vector state;  // full-space eigenvector
};

struct LevelTable {
  std::vector<Level> levels;  // ascending energy
  const Level& find(Manifold manifold, int config) const;
};

LevelTable level_table(const SpinSystem& sys);

enum class TransitionKind { Allowed, Forbidden, Nuclear };

/// Electron-flipping transition (allowed / forbidden) or intra-manifold
/// nuclear transition between two eigenstates. `frequency_mhz` is the
/// level gap |E_to - E_from|; for electron transitions `offset_mhz` is the
/// signed rotating-frame resonance offset E(up state) - E(down state).
struct TransitionRecord {
  int from_level = 0;
  int to_level = 0;
  double frequency_mhz = 0.0;
  double offset_mhz = 0.0;
  double intensity = 0.0;  // relative drive rate in [0,1]; 0 for Nuclear
  TransitionKind kind = TransitionKind::Allowed;
};

/// All transitions between eigenstates: every up<->down electron pair with
/// its drive rate (product over nuclei of cos or sin of half the angle
/// difference), plus the nuclear gaps inside each manifold.
std::vector<TransitionRecord> transition_table(const SpinSystem& sys);

/// |tan((t_up - t_dn)/2)| product over the two nuclei: how strongly the
/// double-nuclear-flip transition is suppressed relative to allowed lines.
double suppression_factor(const SpinSystem& sys);

}  // namespace hyperspin
