#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperspin/experiments.hpp"
#include "hyperspin/grape.hpp"
#include "hyperspin/spin_system.hpp"

namespace hyperspin {

/// Built-in registry lookup ("malonic-ref") falling back to file loading,
/// so CLI users can name a stock system or point at a config file.
SpinSystem resolve_spin_system(const std::string& name_or_path);

/// Reads a spin system from a JSON config with keys
///   electron_offset_mhz, t2e_us, linewidth_mhz,
///   nuclei: [{label, larmor_mhz, a_mhz, b_mhz}, ...]
/// Missing scalar keys fall back to the defaults of SpinSystem{}.
SpinSystem load_spin_system(const std::string& path);
void save_spin_system(const SpinSystem& sys, const std::string& path);

/// Reads GRAPE settings from the same config format. Scalar keys mirror
/// the GrapeConfig fields (n_segments, dt_us, max_amp_mhz, seed,
/// max_iterations, goal_fidelity, step_init, init_scale); the target is
/// named: target: {kind: "subspace_pi2"|"cnot"|"swap", manifold:
/// "up"|"down", pair: [i, j], sign: +-1} and the robustness grid is built
/// from ensemble_points against the system linewidth. An optional
/// initial_pulse key names a pulse file used as warm start.
GrapeConfig load_grape_config(const std::string& path, const SpinSystem& sys);

/// Reads measured transition frequencies for refinement: a JSON file
/// with measurements: [{kind: "nucleus_up"|"nucleus_down"|"diff_up"|
/// "diff_down", nucleus: index, value_mhz: f}, ...].
std::vector<FrequencyMeasurement> load_measurements(const std::string& path);
void save_measurements(const std::vector<FrequencyMeasurement>& data,
                       const std::string& path);

/// Two-column CSV (x, value), 12 significant digits, label in a leading
/// comment alongside the grid definition.
void write_signal_csv(const SignalSeries& series, const std::string& path);

/// CSV with columns frequency_mhz, amplitude, width_mhz.
void write_peaks_csv(const std::vector<SpectrumPeak>& peaks,
                     const std::string& path);

/// CSV with columns from_level, to_level, frequency_mhz, offset_mhz,
/// intensity, kind.
void write_transitions_csv(const std::vector<TransitionRecord>& records,
                           const std::string& path);

/// Optimization summary written next to the pulse file.
void write_grape_metadata(const GrapeResult& result, std::uint64_t seed,
                          const std::string& path);

/// One record per CLI run: what ran, against which config, where the
/// outputs went, with which seed, and when.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string output_dir;
  std::uint64_t seed = 0;
  std::string timestamp;  // ISO-8601 UTC
};

std::string iso8601_utc_now();
void write_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace hyperspin
