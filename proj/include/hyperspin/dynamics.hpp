#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "hyperspin/linalg.hpp"
#include "hyperspin/pulse.hpp"
#include "hyperspin/spin_system.hpp"

namespace hyperspin {

/// Markovian electron dephasing. Nuclear coherences are assumed long-lived
/// on the experiment timescale, so T2e is the only decay channel.
struct NoiseModel {
  double t2e_us = std::numeric_limits<double>::infinity();

  static NoiseModel none() { return {}; }
  static NoiseModel from_system(const SpinSystem& sys) {
    return {sys.t2e_us};
  }
};

/// One member of the inhomogeneous ensemble: a static electron offset with
/// its statistical weight.
struct WeightedDetuning {
  double offset_mhz = 0.0;
  double weight = 1.0;
};

/// Odd-count grid sampling a Gaussian line of the given FWHM out to
/// +-1.5 sigma, weights normalized to sum to one. n_points == 1 gives the
/// single on-resonance point.
std::vector<WeightedDetuning> gaussian_detuning_grid(double fwhm_mhz,
                                                     int n_points);

/// Rotating-frame drive amp_x*Sx + amp_y*Sy on the electron; an amplitude
/// of f MHz turns the bare spin through a full cycle in 1/f microseconds.
Matrix control_hamiltonian(int n_sites, double amp_x_mhz, double amp_y_mhz);

/// Propagators of h0 plus each pulse segment, one unitary per slice.
std::vector<Matrix> slice_unitaries(const Matrix& h0_mhz,
                                    const ShapedPulse& pulse);

/// Total unitary of the pulse acting on top of the static Hamiltonian
/// (product of the slice unitaries, last slice leftmost).
Matrix propagate(const Matrix& h0_mhz, const ShapedPulse& pulse);

/// Multiply the electron-flip coherence blocks of rho by exp(-t/T2e).
/// Populations and within-manifold nuclear coherences are untouched.
Matrix dephase_electron(Matrix rho, double t_us, double t2e_us);

/// One step of a pulse sequence: a shaped pulse, a free-evolution delay,
/// or an idealized instantaneous gate (no duration, no decoherence).
struct SequenceSegment {
  enum class Kind { Pulse, Delay, IdealGate };
  Kind kind = Kind::Delay;
  ShapedPulse pulse;     // Kind::Pulse
  double delay_us = 0.0; // Kind::Delay
  Matrix gate;           // Kind::IdealGate

  static SequenceSegment make_pulse(ShapedPulse p);
  static SequenceSegment make_delay(double t_us);
  static SequenceSegment make_gate(Matrix u);
};

/// Evolve rho0 through the segments for every ensemble member and return
/// the weight-averaged final state. Dephasing is interleaved slice by
/// slice during pulses and applied in one step across delays (exact, since
/// the static Hamiltonian commutes with Sz). The ensemble reduction is
/// performed in grid order whatever the thread count.
Matrix run_sequence(const SpinSystem& sys, const Matrix& rho0,
                    const std::vector<SequenceSegment>& segments,
                    const NoiseModel& noise,
                    const std::vector<WeightedDetuning>& ensemble);

/// Convenience: single on-resonance ensemble member.
Matrix run_sequence(const SpinSystem& sys, const Matrix& rho0,
                    const std::vector<SequenceSegment>& segments,
                    const NoiseModel& noise);

/// Ensemble expectation value <M> = Tr(M rho) / Tr(M^2), normalized so the
/// signal is 1 when rho carries exactly the pattern M. Throws if M = 0.
double measure(const Matrix& observable, const Matrix& rho);

/// Process fidelity between the target unitary and an arbitrary channel,
/// evaluated by feeding all d^2 matrix units through the channel:
/// F = (1/d^2) sum_ij <i| U^H E(|i><j|) U |j>.
double noisy_process_fidelity(
    const Matrix& target,
    const std::function<Matrix(const Matrix&)>& channel);

/// The channel rho -> ensemble average of (pulse with interleaved
/// dephasing applied to rho), with all per-detuning slice propagators
/// precomputed once. Use this when the same pulse acts on many inputs.
std::function<Matrix(const Matrix&)> pulse_channel(
    const SpinSystem& sys, const ShapedPulse& pulse, const NoiseModel& noise,
    const std::vector<WeightedDetuning>& ensemble);

}  // namespace hyperspin
