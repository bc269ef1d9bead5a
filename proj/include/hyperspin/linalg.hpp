#pragma once

#include <Eigen/Dense>
#include <complex>

namespace hyperspin {

using cxd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kTwoPi = 6.28318530717958647692528676656;

/// Largest absolute entry, max over |m_ij|.
double max_abs(const Matrix& m);

/// True if ||m - m^dag||_max < tol.
bool is_hermitian(const Matrix& m, double tol = 1e-10);

/// Kronecker product, a on the left (site 0 = leftmost factor).
Matrix kron(const Matrix& a, const Matrix& b);

/// Spin-1/2 operators for one site, identity-padded into the full
/// n_sites tensor-product space. Eigenvalues are +-1/2.
struct SpinOperatorSet {
  int site = 0;
  Matrix sx, sy, sz;
};

SpinOperatorSet spin_ops(int n_sites, int site);

/// Eigendecomposition of a Hermitian matrix, values ascending,
/// columns of `vectors` orthonormal.
struct EigSystem {
  Eigen::VectorXd values;
  Matrix vectors;
};

EigSystem eig_hermitian(const Matrix& m);

/// U = exp(-i 2*pi h t) for a Hermitian h in MHz and t in microseconds,
/// computed exactly through the eigendecomposition.
Matrix expm_unitary(const Matrix& h_mhz, double duration_us);

/// Global-phase-invariant gate overlap |Tr(u^dag v)|^2 / d^2.
double fidelity_unitary(const Matrix& u, const Matrix& v);

}  // namespace hyperspin
