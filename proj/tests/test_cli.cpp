#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "hyperspin/config_io.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const int status = std::system((std::string(HYPERSPIN_CLI) + " " + args +
                                  " > cli_stdout.log 2> cli_stderr.log")
                                     .c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& path) {
  const std::string text = slurp(path);
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

// First data row of a peaks CSV -> frequency column.
double top_peak_freq(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string header, row;
  std::getline(in, header);
  REQUIRE(std::getline(in, row));
  return std::stod(row.substr(0, row.find(',')));
}

struct OutDir {
  fs::path dir;
  explicit OutDir(const std::string& name) : dir(name) {
    fs::remove_all(dir);
  }
  ~OutDir() { fs::remove_all(dir); }
  std::string str() const { return dir.string(); }
};

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("spectrum run resolves the four allowed lines") {
  OutDir out("cli_spectrum");
  CHECK(run_cli("spectrum --config malonic-ref --out " + out.str()) == 0);
  CHECK(fs::exists(out.dir / "fieldswept.csv"));
  CHECK(fs::exists(out.dir / "transitions.csv"));
  CHECK(line_count(out.dir / "lines.csv") == 5);  // header + 4 lines

  const std::string manifest = slurp(out.dir / "manifest.json");
  CHECK(manifest.find("\"command\": \"spectrum\"") != std::string::npos);
  CHECK(manifest.find("\"config_path\": \"malonic-ref\"") !=
        std::string::npos);
}

TEST_CASE("exit codes distinguish usage, config, and numerical failures") {
  CHECK(run_cli("no-such-command") == 2);
  CHECK(run_cli("spectrum --no-such-flag") == 2);
  CHECK(run_cli("") == 2);

  OutDir out("cli_fail");
  CHECK(run_cli("spectrum --config missing.json --out " + out.str()) == 3);
  CHECK_FALSE(fs::exists(out.dir / "manifest.json"));

  // Flag conflict is caught before anything is written.
  CHECK(run_cli("double-coherence --ideal-gates --pulse p.txt --out " +
                out.str()) == 3);

  // Degenerate refinement data fails in the numerics: the manifest stays,
  // the partial outputs are removed.
  spit("cli_dup.json", R"({"measurements": [
    {"kind": "nucleus_up", "nucleus": 0, "value_mhz": 11.99},
    {"kind": "nucleus_up", "nucleus": 0, "value_mhz": 11.99},
    {"kind": "nucleus_up", "nucleus": 0, "value_mhz": 11.99},
    {"kind": "nucleus_up", "nucleus": 0, "value_mhz": 11.99}
  ]})");
  CHECK(run_cli("refine --data cli_dup.json --out " + out.str()) == 4);
  CHECK(fs::exists(out.dir / "manifest.json"));
  CHECK_FALSE(fs::exists(out.dir / "refined_system.json"));
  CHECK_FALSE(fs::exists(out.dir / "refine.csv"));
  fs::remove("cli_dup.json");
}

TEST_CASE("ideal-gate double-coherence scan peaks at the 22 MHz splitting") {
  OutDir out("cli_dc");
  CHECK(run_cli("double-coherence --ideal-gates --tau-max 0.5 --out " +
                out.str()) == 0);
  CHECK(top_peak_freq(out.dir / "scan_peaks.csv") ==
        doctest::Approx(22.0).epsilon(0.02));
  const std::string scan = slurp(out.dir / "scan.csv");
  CHECK(scan.find("double_coherence_down") != std::string::npos);
}

TEST_CASE("eseem run finds the proton lines") {
  OutDir out("cli_eseem");
  CHECK(run_cli("eseem --tau-max 2.0 --out " + out.str()) == 0);
  const double f = top_peak_freq(out.dir / "eseem_peaks.csv");
  const bool proton = std::abs(f - 11.97) < 0.3 || std::abs(f - 36.35) < 0.3;
  CHECK(proton);
}

TEST_CASE("grape reruns with one seed are byte-identical") {
  spit("cli_grape.json", R"({
    "n_segments": 24, "max_iterations": 25, "goal_fidelity": 0.9,
    "target": {"kind": "subspace_pi2", "manifold": "down"}
  })");
  OutDir a("cli_grape_a"), b("cli_grape_b");
  CHECK(run_cli("grape --grape-config cli_grape.json --seed 5 --out " +
                a.str()) == 0);
  CHECK(run_cli("grape --grape-config cli_grape.json --seed 5 --out " +
                b.str()) == 0);
  CHECK(slurp(a.dir / "pulse.txt") == slurp(b.dir / "pulse.txt"));
  CHECK(slurp(a.dir / "fidelity_trace.csv") ==
        slurp(b.dir / "fidelity_trace.csv"));
  CHECK(slurp(a.dir / "grape_result.json")
            .find("\"seed\": 5") != std::string::npos);

  // A different seed changes the pulse.
  OutDir c("cli_grape_c");
  CHECK(run_cli("grape --grape-config cli_grape.json --seed 6 --out " +
                c.str()) == 0);
  CHECK(slurp(a.dir / "pulse.txt") != slurp(c.dir / "pulse.txt"));
  fs::remove("cli_grape.json");
}

TEST_CASE("predistort run corrects a band-limited pulse") {
  // Slow half-cosine ramp: well inside the resonator band.
  std::ostringstream pulse;
  pulse << "# dt_us 0.001\n";
  for (int k = 0; k < 200; ++k)
    pulse << k << " " << 10.0 * (1.0 - std::cos(3.14159265 * k / 199.0))
          << " 0\n";
  spit("cli_ramp.txt", pulse.str());

  OutDir out("cli_pre");
  CHECK(run_cli("predistort --pulse cli_ramp.txt --out " + out.str()) == 0);
  CHECK(fs::exists(out.dir / "predistorted.txt"));
  CHECK(fs::exists(out.dir / "filtered.txt"));
  CHECK(fs::exists(out.dir / "power_target.csv"));

  // residual.csv rows: residual_mhz then iteration count.
  std::ifstream in(out.dir / "residual.csv");
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  REQUIRE(std::getline(in, line));
  const double residual = std::stod(line.substr(line.find(',') + 1));
  CHECK(residual < 1e-5);
  fs::remove("cli_ramp.txt");
}

TEST_CASE("refine run writes the corrected system config") {
  spit("cli_meas.json", R"({"measurements": [
    {"kind": "nucleus_up",   "nucleus": 0, "value_mhz": 11.99},
    {"kind": "nucleus_down", "nucleus": 0, "value_mhz": 36.35},
    {"kind": "nucleus_up",   "nucleus": 1, "value_mhz": 64.01},
    {"kind": "nucleus_down", "nucleus": 1, "value_mhz": 58.36}
  ]})");
  OutDir out("cli_refine");
  CHECK(run_cli("refine --config malonic-ref --data cli_meas.json --out " +
                out.str()) == 0);
  const hyperspin::SpinSystem refined = hyperspin::load_spin_system(
      (out.dir / "refined_system.json").string());
  REQUIRE(refined.nuclei.size() == 2);
  CHECK(refined.nuclei[0].a_mhz == doctest::Approx(-41.8).epsilon(0.01));
  CHECK(refined.nuclei[1].b_mhz == doctest::Approx(73.7).epsilon(0.01));
  CHECK(fs::exists(out.dir / "refine.csv"));
  fs::remove("cli_meas.json");
}
