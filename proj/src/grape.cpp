#include "hyperspin/grape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>

#include "hyperspin/parallel.hpp"

namespace hyperspin {

namespace {

double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

// Slice propagator exp(-i 2 pi H dt) from the eigendecomposition of H.
Matrix slice_u(const EigSystem& eig, double dt_us) {
  Vector phase(eig.values.size());
  for (int p = 0; p < eig.values.size(); ++p)
    phase(p) = std::exp(cxd(0.0, -kTwoPi * eig.values(p) * dt_us));
  return eig.vectors * phase.asDiagonal() * eig.vectors.adjoint();
}

// Divided-difference table of f(x) = exp(-i 2 pi x dt) at the slice
// eigenvalues, written in the numerically stable product form
//   f[p,q] = -2i pi dt sinc(pi dt (lp - lq)) exp(-i pi dt (lp + lq)).
Matrix divided_differences(const Eigen::VectorXd& lam, double dt_us) {
  const int n = static_cast<int>(lam.size());
  Matrix f1(n, n);
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      const double half = std::numbers::pi * dt_us;
      f1(p, q) = cxd(0.0, -2.0 * half) * sinc(half * (lam(p) - lam(q))) *
                 std::exp(cxd(0.0, -half * (lam(p) + lam(q))));
    }
  }
  return f1;
}

struct MemberResult {
  double fidelity = 0.0;
  std::vector<double> grad_x, grad_y;
};

// Fidelity (and optionally its gradient) for one ensemble member.
MemberResult evaluate_member(const Matrix& h0, const ShapedPulse& pulse,
                             const Matrix& target, bool want_gradient) {
  const int d = static_cast<int>(h0.rows());
  const int n = pulse.n_segments();
  const SpinOperatorSet e = [&] {
    int sites = 0;
    while ((1 << sites) < d) ++sites;
    return spin_ops(sites, 0);
  }();

  std::vector<EigSystem> eigs;
  std::vector<Matrix> us(n), fwd(n + 1);
  if (want_gradient) eigs.resize(n);

  fwd[0] = Matrix::Identity(d, d);
  for (int k = 0; k < n; ++k) {
    const Matrix h = h0 + pulse.amp_x_mhz[k] * e.sx + pulse.amp_y_mhz[k] * e.sy;
    EigSystem eig = eig_hermitian(h);
    us[k] = slice_u(eig, pulse.dt_us);
    fwd[k + 1] = us[k] * fwd[k];
    if (want_gradient) eigs[k] = std::move(eig);
  }

  const cxd z = (target.adjoint() * fwd[n]).trace() / static_cast<double>(d);
  MemberResult out;
  out.fidelity = std::norm(z);
  if (!want_gradient) return out;

  out.grad_x.assign(n, 0.0);
  out.grad_y.assign(n, 0.0);
  const Matrix t_adj = target.adjoint();
  Matrix back = Matrix::Identity(d, d);  // U_n ... U_{k+1}
  for (int k = n - 1; k >= 0; --k) {
    const Matrix mk = fwd[k] * t_adj * back;
    const Matrix f1 = divided_differences(eigs[k].values, pulse.dt_us);
    const Matrix g = eigs[k].vectors.adjoint() * mk * eigs[k].vectors;
    const Matrix wx = eigs[k].vectors.adjoint() * e.sx * eigs[k].vectors;
    const Matrix wy = eigs[k].vectors.adjoint() * e.sy * eigs[k].vectors;
    cxd sx = 0.0, sy = 0.0;
    for (int p = 0; p < d; ++p) {
      for (int q = 0; q < d; ++q) {
        const cxd common = g(p, q) * f1(q, p);
        sx += common * wx(q, p);
        sy += common * wy(q, p);
      }
    }
    // dF = 2 Re(conj(z) * Tr(T^H dU) / d)
    out.grad_x[k] = 2.0 * (std::conj(z) * sx).real() / d;
    out.grad_y[k] = 2.0 * (std::conj(z) * sy).real() / d;
    back = back * us[k];
  }
  return out;
}

struct EnsembleEval {
  double fidelity = 0.0;
  std::vector<double> grad_x, grad_y;
};

EnsembleEval evaluate_ensemble(const SpinSystem& sys, const ShapedPulse& pulse,
                               const Matrix& target,
                               const std::vector<WeightedDetuning>& ensemble,
                               bool want_gradient) {
  sys.validate();
  pulse.validate();
  if (target.rows() != sys.dim() || target.cols() != sys.dim())
    throw std::invalid_argument("grape: target dimension mismatch");
  if (ensemble.empty())
    throw std::invalid_argument("grape: empty ensemble");

  const Matrix h_base = build_hamiltonian(sys);
  const Matrix sz = spin_ops(sys.n_sites(), 0).sz;

  std::vector<MemberResult> slots(ensemble.size());
  parallel_for(static_cast<int>(ensemble.size()), [&](int i) {
    slots[i] = evaluate_member(h_base + ensemble[i].offset_mhz * sz, pulse,
                               target, want_gradient);
  });

  EnsembleEval out;
  const int n = pulse.n_segments();
  if (want_gradient) {
    out.grad_x.assign(n, 0.0);
    out.grad_y.assign(n, 0.0);
  }
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    out.fidelity += ensemble[i].weight * slots[i].fidelity;
    if (want_gradient) {
      for (int k = 0; k < n; ++k) {
        out.grad_x[k] += ensemble[i].weight * slots[i].grad_x[k];
        out.grad_y[k] += ensemble[i].weight * slots[i].grad_y[k];
      }
    }
  }
  return out;
}

// Portable uniform double in [-1, 1): fixed mapping from the standardized
// mt19937_64 stream, independent of the standard library's distributions.
double uniform_pm1(std::mt19937_64& rng) {
  return 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0;
}

// Smooth parametrization of the amplitude disc: segment k's drive is
// amp_max * tanh(r) * (u, v) / r with r = |(u, v)|, so the cap holds by
// construction and the ascent runs on unconstrained coordinates. Hard
// clipping instead leaves most segments of a strongly driven solution
// pinned to the boundary, where projected steps starve the line search
// and poison the curvature memory.
ShapedPulse squash_to_pulse(const Eigen::VectorXd& z, double dt,
                            double amp_max) {
  const int n = static_cast<int>(z.size()) / 2;
  ShapedPulse p;
  p.dt_us = dt;
  p.amp_x_mhz.resize(n);
  p.amp_y_mhz.resize(n);
  for (int k = 0; k < n; ++k) {
    const double u = z(k), v = z(n + k);
    const double r = std::hypot(u, v);
    const double f = r < 1e-9 ? 1.0 : std::tanh(r) / r;
    p.amp_x_mhz[k] = amp_max * f * u;
    p.amp_y_mhz[k] = amp_max * f * v;
  }
  return p;
}

// Inverse map; amplitudes at the cap land at tanh(r) = 0.999 so they stay
// responsive to the gradient.
Eigen::VectorXd squash_from_pulse(const ShapedPulse& p, double amp_max) {
  const int n = p.n_segments();
  Eigen::VectorXd z(2 * n);
  for (int k = 0; k < n; ++k) {
    const double rho =
        std::min(std::hypot(p.amp_x_mhz[k], p.amp_y_mhz[k]) / amp_max, 0.999);
    const double scale =
        rho < 1e-12 ? 1.0 / amp_max : std::atanh(rho) / (rho * amp_max);
    z(k) = scale * p.amp_x_mhz[k];
    z(n + k) = scale * p.amp_y_mhz[k];
  }
  return z;
}

// Pull the amplitude-space gradient back through the squash map
// (symmetric 2x2 Jacobian per segment).
Eigen::VectorXd squash_pull_gradient(const Eigen::VectorXd& z,
                                     const std::vector<double>& gx,
                                     const std::vector<double>& gy,
                                     double amp_max) {
  const int n = static_cast<int>(z.size()) / 2;
  Eigen::VectorXd g(2 * n);
  for (int k = 0; k < n; ++k) {
    const double u = z(k), v = z(n + k);
    const double r = std::hypot(u, v);
    if (r < 1e-9) {
      g(k) = amp_max * gx[k];
      g(n + k) = amp_max * gy[k];
      continue;
    }
    const double t = std::tanh(r);
    const double f = t / r;
    const double gamma = ((1.0 - t * t) * r - t) / (r * r * r);
    g(k) = amp_max * ((f + gamma * u * u) * gx[k] + gamma * u * v * gy[k]);
    g(n + k) =
        amp_max * (gamma * u * v * gx[k] + (f + gamma * v * v) * gy[k]);
  }
  return g;
}

}  // namespace

void GrapeConfig::validate() const {
  if (!(dt_us > 0.0))
    throw std::invalid_argument("GrapeConfig: dt_us must be positive");
  if (n_segments < 1)
    throw std::invalid_argument("GrapeConfig: n_segments must be >= 1");
  if (!(max_amp_mhz > 0.0))
    throw std::invalid_argument("GrapeConfig: max_amp_mhz must be positive");
  if (target.rows() == 0 || target.rows() != target.cols())
    throw std::invalid_argument("GrapeConfig: target must be a square matrix");
  if (ensemble.empty())
    throw std::invalid_argument("GrapeConfig: ensemble must be non-empty");
  if (max_iterations < 0)
    throw std::invalid_argument("GrapeConfig: max_iterations must be >= 0");
  if (!(goal_fidelity > 0.0) || goal_fidelity > 1.0)
    throw std::invalid_argument("GrapeConfig: goal_fidelity must be in (0,1]");
  if (!(step_init > 0.0))
    throw std::invalid_argument("GrapeConfig: step_init must be positive");
  if (!(init_scale >= 0.0) || init_scale > 1.0)
    throw std::invalid_argument("GrapeConfig: init_scale must be in [0,1]");
  if (initial_pulse) {
    initial_pulse->validate();
    if (initial_pulse->n_segments() != n_segments ||
        initial_pulse->dt_us != dt_us)
      throw std::invalid_argument(
          "GrapeConfig: initial_pulse grid must match n_segments and dt_us");
  }
}

Matrix target_subspace_pi2(const SpinSystem& sys, Manifold manifold,
                           std::pair<int, int> level_pair, int sign) {
  if (sys.nuclei.size() != 2)
    throw std::invalid_argument("target_subspace_pi2: needs two nuclei");
  const auto [i, j] = level_pair;
  if (i == j || i < 0 || i > 3 || j < 0 || j > 3)
    throw std::invalid_argument("target_subspace_pi2: invalid level pair");
  if (sign != 1 && sign != -1)
    throw std::invalid_argument("target_subspace_pi2: sign must be +1 or -1");
  const LevelTable tbl = level_table(sys);
  const Vector& a = tbl.find(manifold, i).state;
  const Vector& b = tbl.find(manifold, j).state;
  const double r = 1.0 / std::sqrt(2.0);
  const double s = static_cast<double>(sign);
  Matrix u = Matrix::Identity(sys.dim(), sys.dim());
  u -= a * a.adjoint() + b * b.adjoint();
  u += r * (a * a.adjoint() + s * a * b.adjoint() + s * b * a.adjoint() -
            b * b.adjoint());
  return u;
}

Matrix nuclear_cnot_target(const SpinSystem& sys) {
  if (sys.nuclei.size() != 2)
    throw std::invalid_argument("nuclear_cnot_target: needs two nuclei");
  const LevelTable tbl = level_table(sys);
  Matrix u = Matrix::Zero(sys.dim(), sys.dim());
  for (int config = 0; config < 4; ++config) {
    // First nucleus (high bit) controls the second.
    const int flipped = (config & 2) ? (config ^ 1) : config;
    u += tbl.find(Manifold::Down, flipped).state *
         tbl.find(Manifold::Down, config).state.adjoint();
    u += tbl.find(Manifold::Up, config).state *
         tbl.find(Manifold::Up, config).state.adjoint();
  }
  return u;
}

Matrix nuclear_swap_target(const SpinSystem& sys) {
  if (sys.nuclei.size() != 2)
    throw std::invalid_argument("nuclear_swap_target: needs two nuclei");
  const LevelTable tbl = level_table(sys);
  Matrix u = Matrix::Zero(sys.dim(), sys.dim());
  for (int config = 0; config < 4; ++config) {
    const int swapped = ((config & 1) << 1) | ((config >> 1) & 1);
    u += tbl.find(Manifold::Down, swapped).state *
         tbl.find(Manifold::Down, config).state.adjoint();
    u += tbl.find(Manifold::Up, config).state *
         tbl.find(Manifold::Up, config).state.adjoint();
  }
  return u;
}

double robust_fidelity(const SpinSystem& sys, const ShapedPulse& pulse,
                       const Matrix& target,
                       const std::vector<WeightedDetuning>& ensemble) {
  return evaluate_ensemble(sys, pulse, target, ensemble, false).fidelity;
}

GrapeGradient grape_gradient(const SpinSystem& sys, const ShapedPulse& pulse,
                             const Matrix& target,
                             const std::vector<WeightedDetuning>& ensemble) {
  EnsembleEval ev = evaluate_ensemble(sys, pulse, target, ensemble, true);
  GrapeGradient g;
  g.fidelity = ev.fidelity;
  g.grad_x = std::move(ev.grad_x);
  g.grad_y = std::move(ev.grad_y);
  return g;
}

GrapeResult grape_optimize(const SpinSystem& sys, const GrapeConfig& config) {
  config.validate();
  const Matrix& target = config.target;
  const std::vector<WeightedDetuning>& ensemble = config.ensemble;

  ShapedPulse start;
  if (config.initial_pulse) {
    start = clip_to_max(*config.initial_pulse, config.max_amp_mhz);
    // Hand a solved warm start back untouched: the squash round trip below
    // nudges segments sitting exactly on the cap.
    const double f0 = robust_fidelity(sys, start, target, ensemble);
    if (f0 >= config.goal_fidelity) {
      GrapeResult done;
      done.pulse = std::move(start);
      done.fidelity_robust = f0;
      done.fidelity_trace.push_back(f0);
      done.reached_goal = true;
      done.stop_reason = "goal";
      done.fidelity_ideal =
          robust_fidelity(sys, done.pulse, target, {{0.0, 1.0}});
      return done;
    }
  } else {
    start.dt_us = config.dt_us;
    start.amp_x_mhz.resize(config.n_segments);
    start.amp_y_mhz.resize(config.n_segments);
    std::mt19937_64 rng(config.seed);
    const double c = config.init_scale * config.max_amp_mhz;
    for (int k = 0; k < config.n_segments; ++k) {
      start.amp_x_mhz[k] = c * uniform_pm1(rng);
      start.amp_y_mhz[k] = c * uniform_pm1(rng);
    }
  }

  GrapeResult res;
  Eigen::VectorXd x = squash_from_pulse(start, config.max_amp_mhz);
  res.pulse = squash_to_pulse(x, config.dt_us, config.max_amp_mhz);

  GrapeGradient g = grape_gradient(sys, res.pulse, target, ensemble);
  res.fidelity_robust = g.fidelity;
  res.fidelity_trace.push_back(res.fidelity_robust);
  res.stop_reason = "max_iterations";

  Eigen::VectorXd grad =
      squash_pull_gradient(x, g.grad_x, g.grad_y, config.max_amp_mhz);

  // Quasi-Newton ascent in the squashed coordinates: curvature pairs from
  // accepted steps, two-loop recursion for the search direction, strong
  // Wolfe line search (so every accepted pair has usable curvature). When
  // the curvature memory misleads the search, fall back to the raw
  // gradient before declaring a stall.
  std::vector<Eigen::VectorXd> hist_s, hist_y;
  std::vector<double> hist_rho;
  const std::size_t memory = 20;
  const auto clear_memory = [&] {
    hist_s.clear();
    hist_y.clear();
    hist_rho.clear();
  };

  struct Probe {
    double alpha = 0.0;
    double f = 0.0;
    double slope = 0.0;
    ShapedPulse pulse;
    Eigen::VectorXd grad;
  };
  const auto probe = [&](double alpha, const Eigen::VectorXd& d) {
    Probe pr;
    pr.alpha = alpha;
    pr.pulse =
        squash_to_pulse(x + alpha * d, config.dt_us, config.max_amp_mhz);
    const GrapeGradient gg =
        grape_gradient(sys, pr.pulse, target, ensemble);
    pr.f = gg.fidelity;
    pr.grad = squash_pull_gradient(x + alpha * d, gg.grad_x, gg.grad_y,
                                   config.max_amp_mhz);
    pr.slope = pr.grad.dot(d);
    return pr;
  };

  const auto install = [&](Probe&& pr, const Eigen::VectorXd& d) {
    const Eigen::VectorXd s = pr.alpha * d;
    const Eigen::VectorXd y = grad - pr.grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      hist_s.push_back(s);
      hist_y.push_back(y);
      hist_rho.push_back(1.0 / sy);
      if (hist_s.size() > memory) {
        hist_s.erase(hist_s.begin());
        hist_y.erase(hist_y.begin());
        hist_rho.erase(hist_rho.begin());
      }
    }
    x += s;
    grad = std::move(pr.grad);
    res.pulse = std::move(pr.pulse);
    res.fidelity_robust = pr.f;
    res.fidelity_trace.push_back(pr.f);
    ++res.iterations;
  };

  // Strong Wolfe conditions for ascent along d (sufficient increase and
  // flattened slope); bracketing with doubling, then bisection zoom. Any
  // probe that at least improves the fidelity is kept as a last resort so
  // a usable monotone step is never thrown away.
  const double c1 = 1e-4, c2 = 0.9;
  const auto wolfe_search = [&](const Eigen::VectorXd& d,
                                double alpha0) -> bool {
    const double f0 = res.fidelity_robust;
    const double g0 = grad.dot(d);
    if (!(g0 > 0.0) || !(alpha0 > 0.0)) return false;

    std::optional<Probe> fallback;  // best improving probe seen
    const auto remember = [&](const Probe& pr) {
      if (pr.f > f0 && (!fallback || pr.f > fallback->f))
        fallback = pr;
    };
    const auto wolfe_ok = [&](const Probe& pr) {
      return pr.f >= f0 + c1 * pr.alpha * g0 &&
             std::abs(pr.slope) <= c2 * g0;
    };

    Probe lo;  // bracket end with the best accepted value
    lo.alpha = 0.0;
    lo.f = f0;
    lo.slope = g0;
    Probe hi;
    bool bracketed = false;

    Probe pr = probe(alpha0, d);
    for (int it = 0; it < 20 && !bracketed; ++it) {
      remember(pr);
      if (wolfe_ok(pr)) {
        install(std::move(pr), d);
        return true;
      }
      if (pr.f < f0 + c1 * pr.alpha * g0 || pr.f <= lo.f) {
        hi = std::move(pr);  // increase condition broke: max inside
        bracketed = true;
        break;
      }
      if (pr.slope <= 0.0) {  // walked past the ridge crest
        hi = lo;
        lo = std::move(pr);
        bracketed = true;
        break;
      }
      lo = std::move(pr);
      pr = probe(2.0 * lo.alpha, d);
    }
    if (!bracketed) {
      remember(pr);
      if (fallback) {
        install(std::move(*fallback), d);
        return true;
      }
      return false;
    }

    for (int it = 0; it < 24; ++it) {
      const double alpha = 0.5 * (lo.alpha + hi.alpha);
      if (!(std::abs(hi.alpha - lo.alpha) >
            1e-10 * std::max(1.0, lo.alpha)))
        break;
      Probe mid = probe(alpha, d);
      remember(mid);
      if (wolfe_ok(mid)) {
        install(std::move(mid), d);
        return true;
      }
      if (mid.f < f0 + c1 * alpha * g0 || mid.f <= lo.f) {
        hi = std::move(mid);
      } else {
        if (mid.slope * (hi.alpha - lo.alpha) <= 0.0) hi = lo;
        lo = std::move(mid);
      }
    }
    if (fallback) {
      install(std::move(*fallback), d);
      return true;
    }
    return false;
  };

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (res.fidelity_robust >= config.goal_fidelity) {
      res.reached_goal = true;
      res.stop_reason = "goal";
      break;
    }
    if (grad.lpNorm<Eigen::Infinity>() == 0.0) {
      res.stop_reason = "stalled";
      break;
    }

    Eigen::VectorXd d = grad;
    std::vector<double> alpha(hist_s.size());
    for (int i = static_cast<int>(hist_s.size()) - 1; i >= 0; --i) {
      alpha[i] = hist_rho[i] * hist_s[i].dot(d);
      d -= alpha[i] * hist_y[i];
    }
    if (!hist_s.empty())
      d *= hist_s.back().dot(hist_y.back()) / hist_y.back().squaredNorm();
    for (std::size_t i = 0; i < hist_s.size(); ++i) {
      const double beta = hist_rho[i] * hist_y[i].dot(d);
      d += (alpha[i] - beta) * hist_s[i];
    }
    if (d.dot(grad) <= 0.0) {  // curvature memory went stale
      clear_memory();
      d = grad;
    }

    const bool fresh = hist_s.empty();
    bool accepted = wolfe_search(
        d, fresh ? config.step_init / d.lpNorm<Eigen::Infinity>() : 1.0);
    if (!accepted && !fresh) {
      // The preconditioned direction failed everywhere along the ray;
      // drop the memory and retry with the plain gradient.
      clear_memory();
      accepted = wolfe_search(
          grad, config.step_init / grad.lpNorm<Eigen::Infinity>());
    }
    if (!accepted) {
      res.stop_reason = "stalled";
      break;
    }
  }

  if (res.fidelity_robust >= config.goal_fidelity && !res.reached_goal) {
    res.reached_goal = true;
    res.stop_reason = "goal";
  }
  res.fidelity_ideal =
      robust_fidelity(sys, res.pulse, target, {{0.0, 1.0}});
  return res;
}

}  // namespace hyperspin
