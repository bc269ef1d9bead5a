#include "hyperspin/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hyperspin/fft_utils.hpp"
#include "hyperspin/parallel.hpp"

namespace hyperspin {

namespace {

// Free-evolution propagator for time tau from a cached eigensystem.
Matrix delay_unitary(const EigSystem& eig, double tau_us) {
  Vector phase(eig.values.size());
  for (int p = 0; p < eig.values.size(); ++p)
    phase(p) = std::exp(cxd(0.0, -kTwoPi * eig.values(p) * tau_us));
  return eig.vectors * phase.asDiagonal() * eig.vectors.adjoint();
}

int scan_points(double t_max, double t_step) {
  if (!(t_step > 0.0) || !(t_max >= 0.0))
    throw std::invalid_argument("scan: need t_step > 0 and t_max >= 0");
  return static_cast<int>(std::floor(t_max / t_step + 1e-9)) + 1;
}

// Weighted in-order reduction of per-member traces.
std::vector<double> reduce_slots(const std::vector<std::vector<double>>& slots,
                                 const std::vector<WeightedDetuning>& ensemble,
                                 int n) {
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < ensemble.size(); ++i)
    for (int t = 0; t < n; ++t) out[t] += ensemble[i].weight * slots[i][t];
  return out;
}

}  // namespace

namespace {

// Half-maximum crossing positions around bin k, walked outward until the
// magnitude drops below half or turns back up (overlapping line).
double half_crossing(const std::vector<double>& mag, int k, double level,
                     int dir, int last) {
  int j = k;
  while (j != last && mag[j + dir] < mag[j] && mag[j + dir] >= level)
    j += dir;
  if (j == last || mag[j + dir] >= mag[j]) return j;
  const double frac = (mag[j] - level) / (mag[j] - mag[j + dir]);
  return j + dir * frac;
}

}  // namespace

std::vector<SpectrumPeak> fft_peaks(const SignalSeries& signal,
                                    double threshold_fraction) {
  if (signal.values.size() < 8)
    throw std::invalid_argument("fft_peaks: need at least 8 samples");
  if (!(signal.dt > 0.0))
    throw std::invalid_argument("fft_peaks: dt must be positive");
  if (!(threshold_fraction >= 0.0) || threshold_fraction > 1.0)
    throw std::invalid_argument("fft_peaks: threshold must be in [0,1]");

  const int n = static_cast<int>(signal.values.size());
  double mean = 0.0, biggest = 0.0;
  for (double v : signal.values) {
    mean += v;
    biggest = std::max(biggest, std::abs(v));
  }
  mean /= n;

  const int nfft = 4 * n;  // zero-pad for a finer frequency comb
  std::vector<cxd> buf(nfft, cxd(0.0, 0.0));
  double gain = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w =
        0.5 * (1.0 - std::cos(kTwoPi * i / (n - 1)));  // Hann window
    buf[i] = w * (signal.values[i] - mean);
    gain += w;
  }
  const std::vector<cxd> spec = fft_forward(buf);

  const int half = nfft / 2;
  std::vector<double> mag(half + 1);
  const double scale = 2.0 / gain;  // unit cosine -> peak amplitude near 1
  for (int k = 0; k <= half; ++k) mag[k] = std::abs(spec[k]) * scale;
  const double top = *std::max_element(mag.begin(), mag.end());
  if (top <= 1e-12 * std::max(1.0, biggest)) return {};  // numerically flat

  const double df = 1.0 / (nfft * signal.dt);
  std::vector<SpectrumPeak> peaks;
  for (int k = 1; k < half; ++k) {
    if (!(mag[k] > mag[k - 1] && mag[k] >= mag[k + 1])) continue;
    if (mag[k] < threshold_fraction * top) continue;
    const double alpha = mag[k - 1], beta = mag[k], gamma = mag[k + 1];
    const double denom = alpha - 2.0 * beta + gamma;
    const double shift = (denom == 0.0) ? 0.0
                                        : 0.5 * (alpha - gamma) / denom;
    const double amp = beta - 0.25 * (alpha - gamma) * shift;
    const double lo = half_crossing(mag, k, 0.5 * amp, -1, 0);
    const double hi = half_crossing(mag, k, 0.5 * amp, +1, half);
    peaks.push_back({(k + shift) * df, amp, (hi - lo) * df});
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const SpectrumPeak& a, const SpectrumPeak& b) {
              if (a.amplitude != b.amplitude) return a.amplitude > b.amplitude;
              return a.frequency_mhz < b.frequency_mhz;
            });
  return peaks;
}

Matrix initial_state_after_inversion(const SpinSystem& sys,
                                     const TransitionRecord& line) {
  if (line.kind != TransitionKind::Allowed)
    throw std::invalid_argument(
        "initial_state_after_inversion: selective inversion needs an "
        "allowed electron line");
  const LevelTable tbl = level_table(sys);
  const int n_levels = static_cast<int>(tbl.levels.size());
  if (line.from_level < 0 || line.from_level >= n_levels ||
      line.to_level < 0 || line.to_level >= n_levels ||
      line.from_level == line.to_level)
    throw std::invalid_argument(
        "initial_state_after_inversion: bad level indices");
  if (tbl.levels[line.from_level].manifold ==
      tbl.levels[line.to_level].manifold)
    throw std::invalid_argument(
        "initial_state_after_inversion: line does not flip the electron");

  Matrix rho = Matrix::Zero(sys.dim(), sys.dim());
  for (const Level& lv : tbl.levels) {
    double s = (lv.manifold == Manifold::Up) ? 1.0 : -1.0;
    if (lv.index == line.from_level || lv.index == line.to_level) s = -s;
    rho += s * (lv.state * lv.state.adjoint());
  }
  return rho;
}

SignalSeries double_coherence_scan(
    const SpinSystem& sys, Manifold manifold,
    const std::optional<ShapedPulse>& gate_pulse, double tau_max_us,
    double tau_step_us, const NoiseModel& noise,
    const std::vector<WeightedDetuning>& ensemble) {
  sys.validate();
  if (sys.nuclei.size() != 2)
    throw std::invalid_argument("double_coherence_scan: needs two nuclei");
  if (ensemble.empty())
    throw std::invalid_argument("double_coherence_scan: empty ensemble");
  if (gate_pulse) gate_pulse->validate();
  const int n_tau = scan_points(tau_max_us, tau_step_us);

  // Inversion and readout both run through the inner allowed line, the one
  // joining the (0,0) nuclear configuration of the two manifolds.
  const LevelTable tbl = level_table(sys);
  const Level& lo = tbl.find(Manifold::Down, 0);
  const Level& hi = tbl.find(Manifold::Up, 0);
  TransitionRecord inner;
  inner.from_level = lo.index;
  inner.to_level = hi.index;
  inner.kind = TransitionKind::Allowed;
  const Matrix rho0 = initial_state_after_inversion(sys, inner);

  const Matrix gate_ideal = target_subspace_pi2(sys, manifold);

  // Selective pi/2 on the readout pair followed by an in-phase transverse
  // measurement: equivalent to reading the population difference across
  // the line, normalized to 1 at tau = 0.
  const int d = sys.dim();
  const Matrix pp = lo.state * lo.state.adjoint();
  const Matrix qq = hi.state * hi.state.adjoint();
  const Matrix cross_up = hi.state * lo.state.adjoint();   // |q><p|
  const Matrix cross_dn = lo.state * hi.state.adjoint();   // |p><q|
  const double r = 1.0 / std::sqrt(2.0);
  const Matrix readout = Matrix::Identity(d, d) - pp - qq +
                         r * (pp + qq - cross_dn + cross_up);
  const Matrix echo_obs = cross_dn + cross_up;

  const Matrix h_base = build_hamiltonian(sys);
  const Matrix sz = spin_ops(sys.n_sites(), 0).sz;

  std::vector<std::vector<double>> slots(ensemble.size());
  parallel_for(static_cast<int>(ensemble.size()), [&](int i) {
    const Matrix h = h_base + ensemble[i].offset_mhz * sz;
    const EigSystem eig = eig_hermitian(h);

    std::vector<Matrix> us;
    double slice_f = 1.0;
    if (gate_pulse) {
      us = slice_unitaries(h, *gate_pulse);
      slice_f = std::isinf(noise.t2e_us)
                    ? 1.0
                    : std::exp(-gate_pulse->dt_us / noise.t2e_us);
    }
    auto apply_gate = [&](Matrix rho) {
      if (!gate_pulse) return Matrix(gate_ideal * rho * gate_ideal.adjoint());
      for (const Matrix& u : us) {
        rho = u * rho * u.adjoint();
        if (slice_f != 1.0)
          rho = dephase_electron(std::move(rho), gate_pulse->dt_us,
                                 noise.t2e_us);
      }
      return rho;
    };

    const Matrix rho1 = apply_gate(rho0);
    slots[i].resize(n_tau);
    for (int t = 0; t < n_tau; ++t) {
      const double tau = t * tau_step_us;
      const Matrix ud = delay_unitary(eig, tau);
      Matrix rho = ud * rho1 * ud.adjoint();
      rho = dephase_electron(std::move(rho), tau, noise.t2e_us);
      rho = apply_gate(std::move(rho));
      rho = readout * rho * readout.adjoint();
      slots[i][t] = measure(echo_obs, rho);
    }
  });

  SignalSeries out;
  out.dt = tau_step_us;
  out.start = 0.0;
  out.values = reduce_slots(slots, ensemble, n_tau);
  out.label = manifold == Manifold::Down ? "double_coherence_down"
                                         : "double_coherence_up";
  return out;
}

SignalSeries eseem_3pulse(const SpinSystem& sys, double tau1_us,
                          double t_max_us, double t_step_us,
                          const NoiseModel& noise,
                          const std::vector<WeightedDetuning>& ensemble,
                          double rabi_mhz) {
  sys.validate();
  if (!(tau1_us > 0.0))
    throw std::invalid_argument("eseem_3pulse: tau1 must be positive");
  if (ensemble.empty())
    throw std::invalid_argument("eseem_3pulse: empty ensemble");
  if (rabi_mhz < 0.0)
    throw std::invalid_argument("eseem_3pulse: rabi must be >= 0");
  const int n_t = scan_points(t_max_us, t_step_us);

  const int n_sites = sys.n_sites();
  const Matrix rho0 = 2.0 * spin_ops(n_sites, 0).sz;
  const Matrix echo_obs = 2.0 * spin_ops(n_sites, 0).sy;

  // Instantaneous electron pi/2 about x, or a square pulse at rabi_mhz.
  const Matrix r90 =
      expm_unitary(control_hamiltonian(n_sites, 1.0, 0.0), 0.25);
  ShapedPulse hard;
  if (rabi_mhz > 0.0) {
    hard.dt_us = 1e-3;
    const int n_seg =
        std::max(1, static_cast<int>(std::lround(0.25 / rabi_mhz / 1e-3)));
    hard.amp_x_mhz.assign(n_seg, rabi_mhz);
    hard.amp_y_mhz.assign(n_seg, 0.0);
  }

  const Matrix h_base = build_hamiltonian(sys);
  const Matrix sz = spin_ops(n_sites, 0).sz;

  std::vector<std::vector<double>> slots(ensemble.size());
  parallel_for(static_cast<int>(ensemble.size()), [&](int i) {
    const Matrix h = h_base + ensemble[i].offset_mhz * sz;
    const EigSystem eig = eig_hermitian(h);

    std::vector<Matrix> us;
    if (rabi_mhz > 0.0) us = slice_unitaries(h, hard);
    auto p90 = [&](Matrix rho) {
      if (rabi_mhz == 0.0) return Matrix(r90 * rho * r90.adjoint());
      const double f = std::isinf(noise.t2e_us)
                           ? 1.0
                           : std::exp(-hard.dt_us / noise.t2e_us);
      for (const Matrix& u : us) {
        rho = u * rho * u.adjoint();
        if (f != 1.0)
          rho = dephase_electron(std::move(rho), hard.dt_us, noise.t2e_us);
      }
      return rho;
    };
    auto wait = [&](Matrix rho, double t) {
      const Matrix u = delay_unitary(eig, t);
      rho = u * rho * u.adjoint();
      return dephase_electron(std::move(rho), t, noise.t2e_us);
    };

    // Phase cycling keeps only the stimulated pathway: what survives the
    // storage interval is electron population and nuclear coherence.
    Matrix stored = p90(wait(p90(rho0), tau1_us));
    const int half = static_cast<int>(stored.rows()) / 2;
    stored.topRightCorner(half, half).setZero();
    stored.bottomLeftCorner(half, half).setZero();
    slots[i].resize(n_t);
    for (int t = 0; t < n_t; ++t) {
      Matrix rho = p90(wait(stored, t * t_step_us));
      rho = wait(std::move(rho), tau1_us);
      slots[i][t] = measure(echo_obs, rho);
    }
  });

  SignalSeries out;
  out.dt = t_step_us;
  out.start = 0.0;
  out.values = reduce_slots(slots, ensemble, n_t);
  out.label = "eseem_3pulse";
  return out;
}

SignalSeries fieldswept(const SpinSystem& sys, double offset_min_mhz,
                        double offset_max_mhz, double step_mhz) {
  sys.validate();
  if (!(sys.linewidth_mhz > 0.0))
    throw std::invalid_argument("fieldswept: linewidth must be positive");
  if (!(step_mhz > 0.0) || !(offset_max_mhz > offset_min_mhz))
    throw std::invalid_argument("fieldswept: bad sweep range");

  const double sigma =
      sys.linewidth_mhz / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const int n = static_cast<int>(
                    std::floor((offset_max_mhz - offset_min_mhz) / step_mhz +
                               1e-9)) +
                1;
  SignalSeries out;
  out.dt = step_mhz;
  out.start = offset_min_mhz;
  out.label = "fieldswept";
  out.values.assign(n, 0.0);
  const double norm = 1.0 / (sigma * std::sqrt(kTwoPi));  // unit-area kernel
  for (const TransitionRecord& rec : transition_table(sys)) {
    if (rec.kind == TransitionKind::Nuclear) continue;
    const double w = rec.intensity * rec.intensity * norm;
    if (w == 0.0) continue;
    for (int i = 0; i < n; ++i) {
      const double x = offset_min_mhz + i * step_mhz - rec.offset_mhz;
      out.values[i] += w * std::exp(-x * x / (2.0 * sigma * sigma));
    }
  }
  return out;
}

HyperfinePair fit_nucleus_params(double up_mhz, double down_mhz,
                                 double larmor_mhz) {
  if (!(larmor_mhz > 0.0))
    throw std::invalid_argument("fit_nucleus_params: larmor must be positive");
  if (!(up_mhz >= 0.0) || !(down_mhz >= 0.0))
    throw std::invalid_argument("fit_nucleus_params: frequencies must be >= 0");
  const double a = (up_mhz * up_mhz - down_mhz * down_mhz) / (2.0 * larmor_mhz);
  const double axis = larmor_mhz + 0.5 * a;
  double rad = up_mhz * up_mhz - axis * axis;
  const double scale = std::max(1.0, up_mhz * up_mhz);
  if (rad < -1e-9 * scale)
    throw std::domain_error(
        "fit_nucleus_params: frequencies admit no real coupling");
  if (rad < 0.0) rad = 0.0;
  return {a, 2.0 * std::sqrt(rad)};
}

RefineResult refine_hamiltonian(
    const SpinSystem& guess, const std::vector<FrequencyMeasurement>& data) {
  guess.validate();
  const int n_nuc = static_cast<int>(guess.nuclei.size());
  const int n_par = 2 * n_nuc;
  if (static_cast<int>(data.size()) < n_par)
    throw std::invalid_argument(
        "refine_hamiltonian: fewer measurements than free couplings");
  for (const FrequencyMeasurement& m : data) {
    const bool diff = m.kind == FrequencyMeasurement::Kind::DiffUp ||
                      m.kind == FrequencyMeasurement::Kind::DiffDown;
    if (diff && n_nuc < 2)
      throw std::invalid_argument(
          "refine_hamiltonian: difference measurement needs two nuclei");
    if (!diff && (m.nucleus < 0 || m.nucleus >= n_nuc))
      throw std::invalid_argument("refine_hamiltonian: bad nucleus index");
    if (!std::isfinite(m.value_mhz))
      throw std::invalid_argument("refine_hamiltonian: non-finite value");
  }

  // Parameters a_0, b_0, a_1, b_1, ... with Larmor frequencies pinned.
  Eigen::VectorXd par(n_par);
  for (int k = 0; k < n_nuc; ++k) {
    par(2 * k) = guess.nuclei[k].a_mhz;
    par(2 * k + 1) = guess.nuclei[k].b_mhz;
  }

  const auto freq = [&](int k, bool up) {
    const double w = guess.nuclei[k].larmor_mhz;
    const double axis = up ? w + 0.5 * par(2 * k) : w - 0.5 * par(2 * k);
    return std::hypot(axis, 0.5 * par(2 * k + 1));
  };
  // d freq / d a = +-axis / (2 freq), d freq / d b = b / (4 freq).
  const auto jac_row = [&](int k, bool up, Eigen::VectorXd& row) {
    const double w = guess.nuclei[k].larmor_mhz;
    const double axis = up ? w + 0.5 * par(2 * k) : w - 0.5 * par(2 * k);
    const double f = std::hypot(axis, 0.5 * par(2 * k + 1));
    row(2 * k) += (up ? axis : -axis) / (2.0 * f);
    row(2 * k + 1) += par(2 * k + 1) / (4.0 * f);
  };

  const auto model_value = [&](const FrequencyMeasurement& meas) {
    switch (meas.kind) {
      case FrequencyMeasurement::Kind::NucleusUp:
        return freq(meas.nucleus, true);
      case FrequencyMeasurement::Kind::NucleusDown:
        return freq(meas.nucleus, false);
      case FrequencyMeasurement::Kind::DiffUp:
        return freq(1, true) - freq(0, true);
      case FrequencyMeasurement::Kind::DiffDown:
        return freq(1, false) - freq(0, false);
    }
    return 0.0;
  };

  const int m = static_cast<int>(data.size());
  Eigen::VectorXd resid(m);
  int iterations = 0;
  for (; iterations < 100; ++iterations) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, n_par);
    for (int i = 0; i < m; ++i) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(n_par);
      switch (data[i].kind) {
        case FrequencyMeasurement::Kind::NucleusUp:
          jac_row(data[i].nucleus, true, row);
          break;
        case FrequencyMeasurement::Kind::NucleusDown:
          jac_row(data[i].nucleus, false, row);
          break;
        case FrequencyMeasurement::Kind::DiffUp:
          jac_row(1, true, row);
          {
            Eigen::VectorXd neg = Eigen::VectorXd::Zero(n_par);
            jac_row(0, true, neg);
            row -= neg;
          }
          break;
        case FrequencyMeasurement::Kind::DiffDown:
          jac_row(1, false, row);
          {
            Eigen::VectorXd neg = Eigen::VectorXd::Zero(n_par);
            jac_row(0, false, neg);
            row -= neg;
          }
          break;
      }
      resid(i) = data[i].value_mhz - model_value(data[i]);
      jac.row(i) = row;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) < 1e-9 * std::max(1.0, sv(0)))
      throw std::runtime_error(
          "refine_hamiltonian: measurements do not determine the couplings");
    const Eigen::VectorXd step = svd.solve(resid);
    par += step;
    if (step.norm() < 1e-12 * (1.0 + par.norm())) break;
  }
  for (int i = 0; i < m; ++i)
    resid(i) = data[i].value_mhz - model_value(data[i]);

  RefineResult out;
  out.system = guess;
  for (int k = 0; k < n_nuc; ++k) {
    out.system.nuclei[k].a_mhz = par(2 * k);
    out.system.nuclei[k].b_mhz = par(2 * k + 1);
  }
  const Matrix hg = build_hamiltonian(guess);
  const Matrix hr = build_hamiltonian(out.system);
  out.rel_distance = (hg - hr).norm() / hg.norm();
  out.residual_mhz = std::sqrt(resid.squaredNorm() / m);
  out.iterations = iterations + 1;
  return out;
}

}  // namespace hyperspin
