// Command-line front end: wires config files to the simulation and
// optimization routines and writes plot-ready CSV artifacts.
//
// Exit codes: 0 success, 2 unknown command / bad flags, 3 bad config,
// 4 numerical failure while computing or writing outputs.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hyperspin/config_io.hpp"
#include "hyperspin/dynamics.hpp"
#include "hyperspin/experiments.hpp"
#include "hyperspin/grape.hpp"
#include "hyperspin/hardware.hpp"
#include "hyperspin/pulse.hpp"

namespace fs = std::filesystem;
using namespace hyperspin;

namespace {

// Tracks files created by the current run so a failure can clean up
// everything except the manifest record.
struct OutputSet {
  fs::path dir;
  std::vector<fs::path> written;

  explicit OutputSet(const std::string& out_dir) : dir(out_dir) {
    fs::create_directories(dir);
  }
  std::string file(const std::string& name) {
    written.push_back(dir / name);
    return written.back().string();
  }
  void discard_all() {
    for (const fs::path& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
};

struct CommonFlags {
  std::string config = "malonic-ref";
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  double linewidth_mhz = -1.0;  // <0: keep the system's own value
  int ensemble_points = 1;

  void attach(CLI::App* cmd, bool with_ensemble) {
    cmd->add_option("--config", config,
                    "spin-system config file or builtin name");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "seed recorded in the manifest");
    cmd->add_option("--linewidth-mhz", linewidth_mhz,
                    "override the config's inhomogeneous linewidth");
    if (with_ensemble)
      cmd->add_option("--ensemble-points", ensemble_points,
                      "detuning grid size (1 = on-resonance only)");
  }

  SpinSystem load_system() const {
    SpinSystem sys = resolve_spin_system(config);
    if (linewidth_mhz > 0.0) sys.linewidth_mhz = linewidth_mhz;
    return sys;
  }

  std::vector<WeightedDetuning> grid(const SpinSystem& sys) const {
    return ensemble_points > 1
               ? gaussian_detuning_grid(sys.linewidth_mhz, ensemble_points)
               : std::vector<WeightedDetuning>{{0.0, 1.0}};
  }
};

// Two-phase runner keeping the spec'd failure contract: configuration
// problems (load phase) exit 3 before anything is written; numerical or
// I/O failures during compute exit 4 with the partial outputs removed.
// The manifest records the attempt either way once the config is valid.
int run_phases(const CommonFlags& flags, const std::string& command,
               const std::function<void()>& load,
               const std::function<void(OutputSet&)>& compute) {
  std::optional<OutputSet> out;
  try {
    load();
    out.emplace(flags.out_dir);
    RunManifest m;
    m.command = command;
    m.config_path = flags.config;
    m.output_dir = out->dir.string();
    m.seed = flags.seed;
    m.timestamp = iso8601_utc_now();
    write_manifest(m, (out->dir / "manifest.json").string());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  try {
    compute(*out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    out->discard_all();
    return 4;
  }
  return 0;
}

int run_spectrum(const CommonFlags& flags) {
  SpinSystem sys;
  return run_phases(
      flags, "spectrum", [&] { sys = flags.load_system(); },
      [&](OutputSet& out) {
        const auto table = transition_table(sys);
        double span = 0.0;
        std::vector<TransitionRecord> lines;
        for (const TransitionRecord& r : table) {
          if (r.kind == TransitionKind::Nuclear) continue;
          span = std::max(span, std::abs(r.offset_mhz));
          if (r.kind == TransitionKind::Allowed) lines.push_back(r);
        }
        span += 2.5 * sys.linewidth_mhz;
        const SignalSeries swept =
            fieldswept(sys, -span, span, sys.linewidth_mhz / 25.0);

        write_signal_csv(swept, out.file("fieldswept.csv"));
        write_transitions_csv(lines, out.file("lines.csv"));
        write_transitions_csv(table, out.file("transitions.csv"));
      });
}

int run_eseem(const CommonFlags& flags, double tau1_us, double t_max_us,
              double t_step_us) {
  SpinSystem sys;
  return run_phases(
      flags, "eseem", [&] { sys = flags.load_system(); },
      [&](OutputSet& out) {
        const SignalSeries echo =
            eseem_3pulse(sys, tau1_us, t_max_us, t_step_us, NoiseModel::none(),
                         flags.grid(sys));
        write_signal_csv(echo, out.file("eseem.csv"));
        write_peaks_csv(fft_peaks(echo, 0.05), out.file("eseem_peaks.csv"));
      });
}

int run_grape(CommonFlags flags, const std::string& grape_config,
              bool seed_given) {
  SpinSystem sys;
  GrapeConfig cfg;
  return run_phases(
      flags, "grape",
      [&] {
        sys = flags.load_system();
        if (!grape_config.empty()) {
          cfg = load_grape_config(grape_config, sys);
        } else {
          cfg.target = target_subspace_pi2(sys, Manifold::Down);
        }
        if (seed_given || grape_config.empty()) cfg.seed = flags.seed;
        flags.seed = cfg.seed;  // manifest records the effective seed
      },
      [&](OutputSet& out) {
        const GrapeResult res = grape_optimize(sys, cfg);
        save_pulse(res.pulse, out.file("pulse.txt"));
        write_grape_metadata(res, cfg.seed, out.file("grape_result.json"));

        SignalSeries trace;
        trace.dt = 1.0;
        trace.start = 0.0;
        trace.values = res.fidelity_trace;
        trace.label = "fidelity_trace";
        write_signal_csv(trace, out.file("fidelity_trace.csv"));

        std::fprintf(stderr,
                     "grape: fidelity_robust=%.6f (%s after %d steps)\n",
                     res.fidelity_robust, res.stop_reason.c_str(),
                     res.iterations);
      });
}

int run_double_coherence(const CommonFlags& flags, const std::string& manifold,
                         bool ideal_gates, const std::string& pulse_path,
                         double tau_max_us, double tau_step_us) {
  SpinSystem sys;
  std::optional<ShapedPulse> gate;
  return run_phases(
      flags, "double-coherence",
      [&] {
        sys = flags.load_system();
        if (ideal_gates == !pulse_path.empty())
          throw std::runtime_error(
              "double-coherence: pass exactly one of --ideal-gates or "
              "--pulse");
        if (!pulse_path.empty()) gate = load_pulse(pulse_path);
      },
      [&](OutputSet& out) {
        const Manifold m = manifold == "up" ? Manifold::Up : Manifold::Down;
        const SignalSeries scan =
            double_coherence_scan(sys, m, gate, tau_max_us, tau_step_us,
                                  NoiseModel::from_system(sys),
                                  flags.grid(sys));
        write_signal_csv(scan, out.file("scan.csv"));
        write_peaks_csv(fft_peaks(scan, 0.05), out.file("scan_peaks.csv"));
      });
}

int run_predistort(const CommonFlags& flags, const std::string& pulse_path,
                   double q_factor, double center_ghz, double max_drive_mhz) {
  ShapedPulse target;
  ResonatorModel res;
  return run_phases(
      flags, "predistort",
      [&] {
        target = load_pulse(pulse_path);
        res.q_factor = q_factor;
        res.center_freq_ghz = center_ghz;
        res.max_drive_mhz = max_drive_mhz;
        res.validate();
      },
      [&](OutputSet& out) {
        const PredistortResult pd = predistort(target, res);
        save_pulse(pd.pulse, out.file("predistorted.txt"));
        save_pulse(apply_filter(pd.pulse, res), out.file("filtered.txt"));
        write_signal_csv(power_spectrum(target), out.file("power_target.csv"));
        write_signal_csv(power_spectrum(pd.pulse), out.file("power_input.csv"));

        SignalSeries residual;
        residual.dt = 1.0;
        residual.start = 0.0;
        residual.values = {pd.residual_mhz, static_cast<double>(pd.iterations)};
        residual.label = "predistort_residual_mhz_iterations";
        write_signal_csv(residual, out.file("residual.csv"));

        std::fprintf(stderr,
                     "predistort: residual=%.6g MHz after %d iterations\n",
                     pd.residual_mhz, pd.iterations);
      });
}

int run_refine(const CommonFlags& flags, const std::string& data_path) {
  SpinSystem guess;
  std::vector<FrequencyMeasurement> data;
  return run_phases(
      flags, "refine",
      [&] {
        guess = flags.load_system();
        data = load_measurements(data_path);
      },
      [&](OutputSet& out) {
        const RefineResult res = refine_hamiltonian(guess, data);
        save_spin_system(res.system, out.file("refined_system.json"));

        SignalSeries summary;
        summary.dt = 1.0;
        summary.start = 0.0;
        summary.values = {res.residual_mhz, res.rel_distance,
                          static_cast<double>(res.iterations)};
        summary.label = "refine_residual_mhz_rel_distance_iterations";
        write_signal_csv(summary, out.file("refine.csv"));

        std::fprintf(stderr, "refine: residual=%.6g MHz rel_distance=%.6g\n",
                     res.residual_mhz, res.rel_distance);
      });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperfine electron-nuclear spin simulation toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;

  CLI::App* spectrum =
      app.add_subcommand("spectrum", "echo-detected field-swept spectrum");
  flags.attach(spectrum, false);

  CLI::App* eseem = app.add_subcommand("eseem", "3-pulse stimulated-echo "
                                                "envelope modulation scan");
  double tau1_us = 0.1, t_max_us = 3.0, t_step_us = 0.004;
  flags.attach(eseem, true);
  eseem->add_option("--tau1-us", tau1_us, "first interpulse delay");
  eseem->add_option("--tau-max", t_max_us, "largest storage delay scanned");
  eseem->add_option("--tau-step", t_step_us, "storage delay increment");

  CLI::App* grape =
      app.add_subcommand("grape", "optimize a control pulse and save it");
  std::string grape_config;
  flags.attach(grape, false);
  grape->add_option("--grape-config", grape_config,
                    "optimizer settings file (defaults if omitted)");

  CLI::App* dc = app.add_subcommand(
      "double-coherence", "two-nucleus coherence delay scan (gate pulse "
                          "or ideal gates)");
  std::string manifold = "down", pulse_path;
  bool ideal_gates = false;
  double tau_max_us = 0.5, tau_step_us = 0.002;
  flags.attach(dc, true);
  dc->add_option("--manifold", manifold, "electron manifold: up or down")
      ->check(CLI::IsMember({"up", "down"}));
  dc->add_flag("--ideal-gates", ideal_gates,
               "use exact subspace gates instead of a pulse");
  dc->add_option("--pulse", pulse_path, "optimized gate pulse file");
  dc->add_option("--tau-max", tau_max_us, "largest delay scanned");
  dc->add_option("--tau-step", tau_step_us, "delay increment");

  CLI::App* pre = app.add_subcommand(
      "predistort", "compensate a pulse for the resonator filter");
  std::string pre_pulse;
  double q_factor = 65.0, center_ghz = 9.1875, max_drive_mhz = 28.0;
  flags.attach(pre, false);
  pre->add_option("--pulse", pre_pulse, "target pulse file")->required();
  pre->add_option("--q-factor", q_factor, "loaded resonator Q");
  pre->add_option("--center-ghz", center_ghz, "resonator center frequency");
  pre->add_option("--max-drive-mhz", max_drive_mhz, "drive amplitude cap");

  CLI::App* refine = app.add_subcommand(
      "refine", "fit hyperfine parameters to measured frequencies");
  std::string data_path;
  flags.attach(refine, false);
  refine->add_option("--data", data_path, "measured-frequency file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }

  if (spectrum->parsed()) return run_spectrum(flags);
  if (eseem->parsed()) return run_eseem(flags, tau1_us, t_max_us, t_step_us);
  if (grape->parsed())
    return run_grape(flags, grape_config, grape->count("--seed") > 0);
  if (dc->parsed())
    return run_double_coherence(flags, manifold, ideal_gates, pulse_path,
                                tau_max_us, tau_step_us);
  if (pre->parsed())
    return run_predistort(flags, pre_pulse, q_factor, center_ghz,
                          max_drive_mhz);
  if (refine->parsed()) return run_refine(flags, data_path);
  return 2;
}
