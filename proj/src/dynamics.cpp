#include "hyperspin/dynamics.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

#include "hyperspin/parallel.hpp"

namespace hyperspin {

namespace {

double dephasing_factor(double t_us, double t2e_us) {
  if (std::isinf(t2e_us)) return 1.0;
  return std::exp(-t_us / t2e_us);
}

Matrix evolve_segments(const Matrix& h0, Matrix rho,
                       const std::vector<SequenceSegment>& segments,
                       const NoiseModel& noise) {
  for (const SequenceSegment& seg : segments) {
    switch (seg.kind) {
      case SequenceSegment::Kind::Pulse: {
        const std::vector<Matrix> us = slice_unitaries(h0, seg.pulse);
        const double f = dephasing_factor(seg.pulse.dt_us, noise.t2e_us);
        for (const Matrix& u : us) {
          rho = u * rho * u.adjoint();
          if (f != 1.0) rho = dephase_electron(std::move(rho),
                                               seg.pulse.dt_us, noise.t2e_us);
        }
        break;
      }
      case SequenceSegment::Kind::Delay: {
        const Matrix u = expm_unitary(h0, seg.delay_us);
        rho = u * rho * u.adjoint();
        rho = dephase_electron(std::move(rho), seg.delay_us, noise.t2e_us);
        break;
      }
      case SequenceSegment::Kind::IdealGate: {
        if (seg.gate.rows() != rho.rows() || seg.gate.cols() != rho.cols())
          throw std::invalid_argument("run_sequence: gate dimension mismatch");
        rho = seg.gate * rho * seg.gate.adjoint();
        break;
      }
    }
  }
  return rho;
}

}  // namespace

std::vector<WeightedDetuning> gaussian_detuning_grid(double fwhm_mhz,
                                                     int n_points) {
  if (n_points < 1 || (n_points > 1 && n_points % 2 == 0))
    throw std::invalid_argument(
        "gaussian_detuning_grid: point count must be odd and positive");
  if (!(fwhm_mhz >= 0.0))
    throw std::invalid_argument("gaussian_detuning_grid: fwhm must be >= 0");
  if (n_points == 1 || fwhm_mhz == 0.0) return {{0.0, 1.0}};

  const double sigma = fwhm_mhz / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  std::vector<WeightedDetuning> grid(n_points);
  double total = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double x = -1.5 * sigma + 3.0 * sigma * i / (n_points - 1);
    grid[i].offset_mhz = x;
    grid[i].weight = std::exp(-x * x / (2.0 * sigma * sigma));
    total += grid[i].weight;
  }
  for (WeightedDetuning& p : grid) p.weight /= total;
  return grid;
}

Matrix control_hamiltonian(int n_sites, double amp_x_mhz, double amp_y_mhz) {
  const SpinOperatorSet e = spin_ops(n_sites, 0);
  return amp_x_mhz * e.sx + amp_y_mhz * e.sy;
}

std::vector<Matrix> slice_unitaries(const Matrix& h0_mhz,
                                    const ShapedPulse& pulse) {
  pulse.validate();
  const int n_sites = [&] {
    int n = 0, d = static_cast<int>(h0_mhz.rows());
    while ((1 << n) < d) ++n;
    if ((1 << n) != d) throw std::invalid_argument("slice_unitaries: dim");
    return n;
  }();
  std::vector<Matrix> us(pulse.n_segments());
  for (int k = 0; k < pulse.n_segments(); ++k) {
    const Matrix h = h0_mhz + control_hamiltonian(n_sites, pulse.amp_x_mhz[k],
                                                  pulse.amp_y_mhz[k]);
    us[k] = expm_unitary(h, pulse.dt_us);
  }
  return us;
}

Matrix propagate(const Matrix& h0_mhz, const ShapedPulse& pulse) {
  Matrix u = Matrix::Identity(h0_mhz.rows(), h0_mhz.cols());
  for (const Matrix& uk : slice_unitaries(h0_mhz, pulse)) u = uk * u;
  return u;
}

Matrix dephase_electron(Matrix rho, double t_us, double t2e_us) {
  if (rho.rows() != rho.cols() || rho.rows() % 2 != 0)
    throw std::invalid_argument("dephase_electron: bad density matrix shape");
  if (!(t_us >= 0.0) || !(t2e_us > 0.0))
    throw std::invalid_argument("dephase_electron: bad time arguments");
  const double f = dephasing_factor(t_us, t2e_us);
  if (f == 1.0) return rho;
  const int b = static_cast<int>(rho.rows()) / 2;
  rho.block(0, b, b, b) *= f;
  rho.block(b, 0, b, b) *= f;
  return rho;
}

SequenceSegment SequenceSegment::make_pulse(ShapedPulse p) {
  p.validate();
  SequenceSegment s;
  s.kind = Kind::Pulse;
  s.pulse = std::move(p);
  return s;
}

SequenceSegment SequenceSegment::make_delay(double t_us) {
  if (!(t_us >= 0.0))
    throw std::invalid_argument("SequenceSegment: delay must be >= 0");
  SequenceSegment s;
  s.kind = Kind::Delay;
  s.delay_us = t_us;
  return s;
}

SequenceSegment SequenceSegment::make_gate(Matrix u) {
  SequenceSegment s;
  s.kind = Kind::IdealGate;
  s.gate = std::move(u);
  return s;
}

Matrix run_sequence(const SpinSystem& sys, const Matrix& rho0,
                    const std::vector<SequenceSegment>& segments,
                    const NoiseModel& noise,
                    const std::vector<WeightedDetuning>& ensemble) {
  sys.validate();
  if (rho0.rows() != sys.dim() || rho0.cols() != sys.dim())
    throw std::invalid_argument("run_sequence: rho dimension mismatch");
  if (ensemble.empty())
    throw std::invalid_argument("run_sequence: empty ensemble");

  const Matrix h_base = build_hamiltonian(sys);
  const Matrix sz = spin_ops(sys.n_sites(), 0).sz;

  std::vector<Matrix> slots(ensemble.size());
  parallel_for(static_cast<int>(ensemble.size()), [&](int i) {
    const Matrix h = h_base + ensemble[i].offset_mhz * sz;
    slots[i] = evolve_segments(h, rho0, segments, noise);
  });

  Matrix out = Matrix::Zero(sys.dim(), sys.dim());
  for (std::size_t i = 0; i < ensemble.size(); ++i)
    out += ensemble[i].weight * slots[i];
  return out;
}

Matrix run_sequence(const SpinSystem& sys, const Matrix& rho0,
                    const std::vector<SequenceSegment>& segments,
                    const NoiseModel& noise) {
  return run_sequence(sys, rho0, segments, noise, {{0.0, 1.0}});
}

double measure(const Matrix& observable, const Matrix& rho) {
  if (observable.rows() != rho.rows() || observable.cols() != rho.cols())
    throw std::invalid_argument("measure: dimension mismatch");
  if (!is_hermitian(observable, 1e-9 * std::max(1.0, max_abs(observable))))
    throw std::invalid_argument("measure: observable must be Hermitian");
  const double norm2 = observable.squaredNorm();  // Tr(M^2) for Hermitian M
  if (norm2 <= 0.0)
    throw std::invalid_argument("measure: zero observable");
  return (observable * rho).trace().real() / norm2;
}

std::function<Matrix(const Matrix&)> pulse_channel(
    const SpinSystem& sys, const ShapedPulse& pulse, const NoiseModel& noise,
    const std::vector<WeightedDetuning>& ensemble) {
  sys.validate();
  pulse.validate();
  if (ensemble.empty())
    throw std::invalid_argument("pulse_channel: empty ensemble");

  const Matrix h_base = build_hamiltonian(sys);
  const Matrix sz = spin_ops(sys.n_sites(), 0).sz;
  auto members = std::make_shared<std::vector<std::vector<Matrix>>>();
  members->resize(ensemble.size());
  parallel_for(static_cast<int>(ensemble.size()), [&](int i) {
    (*members)[i] =
        slice_unitaries(h_base + ensemble[i].offset_mhz * sz, pulse);
  });

  const double dt = pulse.dt_us;
  const double t2e = noise.t2e_us;
  const int d = sys.dim();
  return [members, ensemble, dt, t2e, d](const Matrix& rho) {
    if (rho.rows() != d || rho.cols() != d)
      throw std::invalid_argument("pulse_channel: rho dimension mismatch");
    Matrix out = Matrix::Zero(d, d);
    std::vector<Matrix> slots(ensemble.size());
    parallel_for(static_cast<int>(ensemble.size()), [&](int i) {
      Matrix r = rho;
      const double f = std::isinf(t2e) ? 1.0 : std::exp(-dt / t2e);
      for (const Matrix& u : (*members)[i]) {
        r = u * r * u.adjoint();
        if (f != 1.0) r = dephase_electron(std::move(r), dt, t2e);
      }
      slots[i] = std::move(r);
    });
    for (std::size_t i = 0; i < ensemble.size(); ++i)
      out += ensemble[i].weight * slots[i];
    return out;
  };
}

double noisy_process_fidelity(
    const Matrix& target,
    const std::function<Matrix(const Matrix&)>& channel) {
  const int d = static_cast<int>(target.rows());
  if (target.cols() != d || d < 1)
    throw std::invalid_argument("noisy_process_fidelity: bad target");
  cxd sum = 0.0;
  Matrix unit = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      unit(i, j) = 1.0;
      const Matrix mapped = target.adjoint() * channel(unit) * target;
      sum += mapped(i, j);
      unit(i, j) = 0.0;
    }
  }
  return sum.real() / (d * d);
}

}  // namespace hyperspin
