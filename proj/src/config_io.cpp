#include "hyperspin/config_io.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "hyperspin/pulse.hpp"

namespace hyperspin {

using nlohmann::json;

namespace {

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("cannot parse " + path + ": " + e.what());
  }
}

// snprintf %.12g: 12 significant digits, no trailing-zero noise.
std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  return out;
}

}  // namespace

SpinSystem resolve_spin_system(const std::string& name_or_path) {
  if (name_or_path == "malonic-ref") return malonic_ref();
  return load_spin_system(name_or_path);
}

SpinSystem load_spin_system(const std::string& path) {
  const json j = parse_file(path);
  SpinSystem sys;
  try {
    sys.electron_offset_mhz = j.value("electron_offset_mhz", 0.0);
    sys.t2e_us = j.value("t2e_us", sys.t2e_us);
    sys.linewidth_mhz = j.value("linewidth_mhz", sys.linewidth_mhz);
    for (const json& n : j.at("nuclei")) {
      Nucleus nuc;
      nuc.label = n.at("label").get<std::string>();
      nuc.larmor_mhz = n.at("larmor_mhz").get<double>();
      nuc.a_mhz = n.at("a_mhz").get<double>();
      nuc.b_mhz = n.at("b_mhz").get<double>();
      sys.nuclei.push_back(std::move(nuc));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("bad spin-system config " + path + ": " +
                             e.what());
  }
  sys.validate();
  return sys;
}

void save_spin_system(const SpinSystem& sys, const std::string& path) {
  json nuclei = json::array();
  for (const Nucleus& n : sys.nuclei)
    nuclei.push_back({{"label", n.label},
                      {"larmor_mhz", n.larmor_mhz},
                      {"a_mhz", n.a_mhz},
                      {"b_mhz", n.b_mhz}});
  const json j = {{"electron_offset_mhz", sys.electron_offset_mhz},
                  {"t2e_us", sys.t2e_us},
                  {"linewidth_mhz", sys.linewidth_mhz},
                  {"nuclei", nuclei}};
  open_out(path) << j.dump(2) << "\n";
}

GrapeConfig load_grape_config(const std::string& path, const SpinSystem& sys) {
  const json j = parse_file(path);
  GrapeConfig cfg;
  try {
    cfg.n_segments = j.value("n_segments", cfg.n_segments);
    cfg.dt_us = j.value("dt_us", cfg.dt_us);
    cfg.max_amp_mhz = j.value("max_amp_mhz", cfg.max_amp_mhz);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.max_iterations = j.value("max_iterations", cfg.max_iterations);
    cfg.goal_fidelity = j.value("goal_fidelity", cfg.goal_fidelity);
    cfg.step_init = j.value("step_init", cfg.step_init);
    cfg.init_scale = j.value("init_scale", cfg.init_scale);

    const json t = j.value("target", json{{"kind", "subspace_pi2"}});
    const std::string kind = t.value("kind", "subspace_pi2");
    if (kind == "subspace_pi2") {
      const std::string mtext = t.value("manifold", "down");
      if (mtext != "up" && mtext != "down")
        throw std::runtime_error("target.manifold must be up or down");
      const Manifold m = mtext == "up" ? Manifold::Up : Manifold::Down;
      std::pair<int, int> pair{0, 3};
      if (t.contains("pair")) {
        const json& p = t.at("pair");
        if (!p.is_array() || p.size() != 2)
          throw std::runtime_error("target.pair must be [i, j]");
        pair = {p[0].get<int>(), p[1].get<int>()};
      }
      cfg.target = target_subspace_pi2(sys, m, pair, t.value("sign", 1));
    } else if (kind == "cnot") {
      cfg.target = nuclear_cnot_target(sys);
    } else if (kind == "swap") {
      cfg.target = nuclear_swap_target(sys);
    } else {
      throw std::runtime_error("unknown target.kind: " + kind);
    }

    const int points = j.value("ensemble_points", 1);
    cfg.ensemble = points > 1
                       ? gaussian_detuning_grid(sys.linewidth_mhz, points)
                       : std::vector<WeightedDetuning>{{0.0, 1.0}};

    if (j.contains("initial_pulse"))
      cfg.initial_pulse = load_pulse(j.at("initial_pulse").get<std::string>());
  } catch (const json::exception& e) {
    throw std::runtime_error("bad grape config " + path + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

const char* kind_name(FrequencyMeasurement::Kind kind) {
  switch (kind) {
    case FrequencyMeasurement::Kind::NucleusUp: return "nucleus_up";
    case FrequencyMeasurement::Kind::NucleusDown: return "nucleus_down";
    case FrequencyMeasurement::Kind::DiffUp: return "diff_up";
    default: return "diff_down";
  }
}

FrequencyMeasurement::Kind kind_from(const std::string& text,
                                     const std::string& path) {
  if (text == "nucleus_up") return FrequencyMeasurement::Kind::NucleusUp;
  if (text == "nucleus_down") return FrequencyMeasurement::Kind::NucleusDown;
  if (text == "diff_up") return FrequencyMeasurement::Kind::DiffUp;
  if (text == "diff_down") return FrequencyMeasurement::Kind::DiffDown;
  throw std::runtime_error("bad measurement kind in " + path + ": " + text);
}

}  // namespace

std::vector<FrequencyMeasurement> load_measurements(const std::string& path) {
  const json j = parse_file(path);
  std::vector<FrequencyMeasurement> data;
  try {
    for (const json& m : j.at("measurements")) {
      FrequencyMeasurement fm;
      fm.kind = kind_from(m.at("kind").get<std::string>(), path);
      fm.nucleus = m.value("nucleus", 0);
      fm.value_mhz = m.at("value_mhz").get<double>();
      data.push_back(fm);
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("bad measurement file " + path + ": " + e.what());
  }
  return data;
}

void save_measurements(const std::vector<FrequencyMeasurement>& data,
                       const std::string& path) {
  json list = json::array();
  for (const FrequencyMeasurement& m : data)
    list.push_back({{"kind", kind_name(m.kind)},
                    {"nucleus", m.nucleus},
                    {"value_mhz", m.value_mhz}});
  open_out(path) << json{{"measurements", list}}.dump(2) << "\n";
}

void write_signal_csv(const SignalSeries& series, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "# " << series.label << " dt=" << num(series.dt) << " start="
      << num(series.start) << "\n";
  out << "x,value\n";
  for (std::size_t i = 0; i < series.values.size(); ++i)
    out << num(series.start + static_cast<double>(i) * series.dt) << ","
        << num(series.values[i]) << "\n";
}

void write_peaks_csv(const std::vector<SpectrumPeak>& peaks,
                     const std::string& path) {
  std::ofstream out = open_out(path);
  out << "frequency_mhz,amplitude,width_mhz\n";
  for (const SpectrumPeak& p : peaks)
    out << num(p.frequency_mhz) << "," << num(p.amplitude) << ","
        << num(p.width_mhz) << "\n";
}

void write_transitions_csv(const std::vector<TransitionRecord>& records,
                           const std::string& path) {
  std::ofstream out = open_out(path);
  out << "from_level,to_level,frequency_mhz,offset_mhz,intensity,kind\n";
  for (const TransitionRecord& r : records) {
    const char* kind = r.kind == TransitionKind::Allowed    ? "allowed"
                       : r.kind == TransitionKind::Forbidden ? "forbidden"
                                                             : "nuclear";
    out << r.from_level << "," << r.to_level << "," << num(r.frequency_mhz)
        << "," << num(r.offset_mhz) << "," << num(r.intensity) << "," << kind
        << "\n";
  }
}

void write_grape_metadata(const GrapeResult& result, std::uint64_t seed,
                          const std::string& path) {
  const json j = {{"fidelity_ideal", result.fidelity_ideal},
                  {"fidelity_robust", result.fidelity_robust},
                  {"iterations", result.iterations},
                  {"seed", seed},
                  {"reached_goal", result.reached_goal},
                  {"stop_reason", result.stop_reason}};
  open_out(path) << j.dump(2) << "\n";
}

std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  const json j = {{"command", manifest.command},
                  {"config_path", manifest.config_path},
                  {"output_dir", manifest.output_dir},
                  {"seed", manifest.seed},
                  {"timestamp", manifest.timestamp}};
  open_out(path) << j.dump(2) << "\n";
}

}  // namespace hyperspin
