#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hyperspin/dynamics.hpp"

namespace hyperspin {

struct GrapeConfig {
  int n_segments = 800;        // pulse length = dt_us * n_segments
  double dt_us = 1e-3;         // segment resolution
  double max_amp_mhz = 28.0;   // radial cap on (amp_x, amp_y)
  Matrix target;               // target unitary, full Hilbert space
  std::vector<WeightedDetuning> ensemble{{0.0, 1.0}};  // robustness grid
  std::uint64_t seed = 1;      // deterministic initial guess
  int max_iterations = 2000;
  double goal_fidelity = 0.98;
  double step_init = 0.02;     // first trial step, fraction of max_amp_mhz
  double init_scale = 0.1;     // start uniform in +-init_scale*max_amp_mhz
  std::optional<ShapedPulse> initial_pulse;  // warm start (clipped to cap)

  void validate() const;
};

struct GrapeResult {
  ShapedPulse pulse;
  double fidelity_ideal = 0.0;   // on-resonance gate overlap of the pulse
  double fidelity_robust = 0.0;  // ensemble-weighted gate overlap
  std::vector<double> fidelity_trace;  // value before / after each step
  int iterations = 0;            // accepted line-search steps
  bool reached_goal = false;
  std::string stop_reason;       // "goal" | "max_iterations" | "stalled"
};

struct GrapeGradient {
  double fidelity = 0.0;
  std::vector<double> grad_x;  // dF / d amp_x_mhz[k]
  std::vector<double> grad_y;
};

/// Self-inverse equal-weight beam splitter on a level pair of the chosen
/// manifold, identity on the other six levels: the block on (i, j) is
/// [[1, s], [s, -1]]/sqrt(2) with s = sign. Conjugating the population
/// difference |i><i| - |j><j| by it yields the pure pair coherence
/// s*(|i><j| + |j><i|). Applying the gate twice undoes it, so one
/// optimized pulse serves as both the coherence-creation and the
/// recombination step of the experiment. The default pair (0, 3) spans
/// the two double-flip states whose splitting is the difference of the
/// manifold's effective nuclear frequencies.
Matrix target_subspace_pi2(const SpinSystem& sys, Manifold manifold,
                           std::pair<int, int> level_pair = {0, 3},
                           int sign = 1);

/// CNOT between the two nuclei inside the down manifold (first nucleus
/// controls the second), identity on the up manifold.
Matrix nuclear_cnot_target(const SpinSystem& sys);

/// SWAP of the two nuclear labels inside the down manifold, identity on
/// the up manifold.
Matrix nuclear_swap_target(const SpinSystem& sys);

/// Ensemble-averaged gate overlap sum_k w_k |Tr(T^H U(offset_k))|^2 / d^2
/// of the pulse propagator against the target (no decoherence).
double robust_fidelity(const SpinSystem& sys, const ShapedPulse& pulse,
                       const Matrix& target,
                       const std::vector<WeightedDetuning>& ensemble);

/// Exact derivative of robust_fidelity with respect to every segment
/// amplitude, via the spectral (Daleckii-Krein) derivative of each slice
/// exponential. Matches finite differences to solver precision.
GrapeGradient grape_gradient(const SpinSystem& sys, const ShapedPulse& pulse,
                             const Matrix& target,
                             const std::vector<WeightedDetuning>& ensemble);

/// Monotone gradient ascent on config.target over config.ensemble with a
/// backtracking line search; search directions are preconditioned with a
/// limited curvature memory built from accepted steps. Candidate steps
/// are clipped to the amplitude cap before evaluation, so the fidelity
/// trace is strictly increasing and the returned pulse always respects
/// the cap. Deterministic for a fixed config regardless of thread count.
GrapeResult grape_optimize(const SpinSystem& sys, const GrapeConfig& config);

}  // namespace hyperspin
