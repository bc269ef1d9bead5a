#include "hyperspin/linalg.hpp"

#include <stdexcept>

namespace hyperspin {

double max_abs(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

bool is_hermitian(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return max_abs(m - m.adjoint()) < tol;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

SpinOperatorSet spin_ops(int n_sites, int site) {
  if (n_sites < 1 || n_sites > 4)
    throw std::invalid_argument("spin_ops: n_sites must be in [1,4]");
  if (site < 0 || site >= n_sites)
    throw std::invalid_argument("spin_ops: site out of range");

  const cxd i1(0.0, 1.0);
  Matrix sx(2, 2), sy(2, 2), sz(2, 2);
  sx << 0.0, 0.5, 0.5, 0.0;
  sy << 0.0, -0.5 * i1, 0.5 * i1, 0.0;
  sz << 0.5, 0.0, 0.0, -0.5;

  SpinOperatorSet ops;
  ops.site = site;
  auto embed = [&](const Matrix& s) {
    Matrix full = Matrix::Identity(1, 1);
    for (int k = 0; k < n_sites; ++k)
      full = kron(full, k == site ? s : Matrix(Matrix::Identity(2, 2)));
    return full;
  };
  ops.sx = embed(sx);
  ops.sy = embed(sy);
  ops.sz = embed(sz);
  return ops;
}

EigSystem eig_hermitian(const Matrix& m) {
  if (!is_hermitian(m, 1e-10 * std::max(1.0, max_abs(m))))
    throw std::invalid_argument("eig_hermitian: input is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> solver((m + m.adjoint()) / 2.0);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eig_hermitian: eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Matrix expm_unitary(const Matrix& h_mhz, double duration_us) {
  const EigSystem es = eig_hermitian(h_mhz);
  const Eigen::Index d = h_mhz.rows();
  Vector phases(d);
  for (Eigen::Index k = 0; k < d; ++k)
    phases(k) = std::exp(cxd(0.0, -kTwoPi * es.values(k) * duration_us));
  return es.vectors * phases.asDiagonal() * es.vectors.adjoint();
}

double fidelity_unitary(const Matrix& u, const Matrix& v) {
  if (u.rows() != v.rows() || u.cols() != v.cols())
    throw std::invalid_argument("fidelity_unitary: dimension mismatch");
  const double d = static_cast<double>(u.rows());
  const cxd tr = (u.adjoint() * v).trace();
  return std::norm(tr) / (d * d);
}

}  // namespace hyperspin
