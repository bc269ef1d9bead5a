#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hyperspin/dynamics.hpp"
#include "hyperspin/grape.hpp"

namespace hyperspin {

/// Uniformly sampled real-valued trace: values[i] is the signal at
/// start + i * dt (microseconds for time scans, MHz for spectra).
struct SignalSeries {
  double dt = 0.0;
  double start = 0.0;
  std::vector<double> values;
  std::string label;
};

struct SpectrumPeak {
  double frequency_mhz = 0.0;
  double amplitude = 0.0;
  double width_mhz = 0.0;  // FWHM of the spectral line
};

/// Spectral peaks of a time-domain trace: mean-subtracted, Hann-windowed
/// (keeps window sidelobes below 3% so weak tones stay resolvable),
/// zero-padded 4x, magnitude spectrum, local maxima refined by parabolic
/// interpolation. Peaks below threshold_fraction of the strongest one are
/// dropped. Sorted by descending amplitude (ascending frequency on ties);
/// amplitudes are normalized so a unit cosine peaks near 1.
std::vector<SpectrumPeak> fft_peaks(const SignalSeries& signal,
                                    double threshold_fraction);

/// Deviation state after a selective inversion on one allowed electron
/// line: the thermal pattern (+1 up / -1 down in units of 2 Sz) with the
/// two populations joined by the line exchanged. Throws unless the record
/// is an allowed electron transition.
Matrix initial_state_after_inversion(const SpinSystem& sys,
                                     const TransitionRecord& line);

/// The double-nuclear-coherence experiment. Starting from inversion on
/// the inner allowed line, apply the pair gate, wait tau, apply the same
/// gate again, then read out through an ideal selective pi/2 on that line.
/// gate_pulse empty = ideal self-inverse pair gate; otherwise the shaped
/// pulse is propagated with interleaved dephasing for every ensemble
/// member. Returns S(tau) sampled at 0, tau_step, ..., up to tau_max;
/// ideal gates give exactly (1 + cos(2 pi gap tau)) / 2.
SignalSeries double_coherence_scan(
    const SpinSystem& sys, Manifold manifold,
    const std::optional<ShapedPulse>& gate_pulse, double tau_max_us,
    double tau_step_us, const NoiseModel& noise,
    const std::vector<WeightedDetuning>& ensemble);

/// Three-pulse stimulated-echo envelope V(T): pi/2 - tau1 - pi/2 - T -
/// pi/2 - tau1 - echo, sampled over T. Only the stimulated pathway is
/// kept (electron coherence is discarded during storage, the component
/// phase cycling removes). rabi_mhz = 0 uses instantaneous electron pi/2
/// rotations; a positive value uses square pulses of that amplitude
/// (1 ns resolution). Modulation peaks sit at the effective nuclear
/// frequencies of both manifolds.
SignalSeries eseem_3pulse(const SpinSystem& sys, double tau1_us,
                          double t_max_us, double t_step_us,
                          const NoiseModel& noise,
                          const std::vector<WeightedDetuning>& ensemble,
                          double rabi_mhz = 0.0);

/// Absorption spectrum vs carrier offset: every electron transition
/// contributes a unit-area Gaussian of the system linewidth (FWHM),
/// centered at its offset and weighted by intensity squared, so the
/// integrated spectrum is independent of the linewidth.
SignalSeries fieldswept(const SpinSystem& sys, double offset_min_mhz,
                        double offset_max_mhz, double step_mhz);

/// Invert the two effective frequencies of one nucleus into hyperfine
/// coefficients: a = (up^2 - down^2) / (2 larmor), b >= 0 fixed by the
/// up-manifold magnitude. Throws std::domain_error if no real b exists.
HyperfinePair fit_nucleus_params(double up_mhz, double down_mhz,
                                 double larmor_mhz);

/// One measured spectral frequency with its physical identity.
struct FrequencyMeasurement {
  enum class Kind {
    NucleusUp,    // effective frequency of `nucleus`, up manifold
    NucleusDown,  // effective frequency of `nucleus`, down manifold
    DiffUp,       // frequency gap nucleus 1 minus nucleus 0, up manifold
    DiffDown,     // same gap in the down manifold
  };
  Kind kind = Kind::NucleusUp;
  int nucleus = 0;  // ignored for the Diff kinds
  double value_mhz = 0.0;
};

struct RefineResult {
  SpinSystem system;         // refined hyperfine couplings, larmor kept
  double rel_distance = 0.0; // ||H_guess - H_refined||_F / ||H_guess||_F
  double residual_mhz = 0.0; // rms misfit of the measurements
  int iterations = 0;
};

/// Gauss-Newton fit of all hyperfine couplings (a_k, b_k) to the measured
/// frequencies, Larmor frequencies held fixed. Throws if the measurement
/// set cannot determine the couplings.
RefineResult refine_hamiltonian(const SpinSystem& guess,
                                const std::vector<FrequencyMeasurement>& data);

}  // namespace hyperspin
