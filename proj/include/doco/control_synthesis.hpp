#pragma once

// Linear-system synthesis for heterogeneous agents: regulator equations,
// stabilizing state-feedback / observer gains and the Lyapunov certificate
// used by the regret and fit bounds.
//
// Everything here is a pure function of its arguments and templated on the
// scalar type so that the same code runs in double and long double.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <utility>

#include "doco/errors.hpp"

namespace doco {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// One agent's plant  x' = A x + B u,  y = C x.
template <typename Scalar = double>
struct LtiModel {
  MatrixX<Scalar> A;
  MatrixX<Scalar> B;
  MatrixX<Scalar> C;

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }

  void check_dimensions() const {
    if (A.rows() == 0 || A.rows() != A.cols())
      throw StructuralError("LtiModel: A must be square and non-empty");
    if (B.rows() != A.rows() || B.cols() == 0)
      throw StructuralError("LtiModel: B must have as many rows as A");
    if (C.cols() != A.rows() || C.rows() == 0)
      throw StructuralError("LtiModel: C must have as many columns as A");
  }
};

/// Feedforward solution of  B Gamma = Psi,  B Upsilon = A Psi,  C Psi = I.
template <typename Scalar = double>
struct RegulatorSolution {
  MatrixX<Scalar> Gamma;    // m x p
  MatrixX<Scalar> Psi;      // n x p
  MatrixX<Scalar> Upsilon;  // m x p
};

template <typename Scalar = double>
struct GainSet {
  MatrixX<Scalar> K;        // m x n, A - B K Hurwitz
  MatrixX<Scalar> H;        // n x p, A - H C Hurwitz
  MatrixX<Scalar> Gamma;    // m x p
  MatrixX<Scalar> Psi;      // n x p
  MatrixX<Scalar> Upsilon;  // m x p
};

template <typename Scalar = double>
struct CertificateMatrix {
  MatrixX<Scalar> P;
  Scalar varsigma1{0};
  Scalar varsigma2{0};
  // Smallest |lambda_i + conj(lambda_j)| met by the Lyapunov solve, relative
  // to the matrix norm. Small values mean P is poorly determined.
  Scalar separation{0};
  bool ill_conditioned{false};
};

inline constexpr double kRankTolerance = 1e-8;
inline constexpr double kRegulatorTolerance = 1e-10;
inline constexpr double kHurwitzThreshold = -1e-9;
inline constexpr double kDefaultStabilityMargin = 0.5;
inline constexpr double kCertificateSlack = 0.1;

/// Rank with singular values below rel_tol * sigma_max treated as zero.
template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& M,
                            double rel_tol = kRankTolerance) {
  using Scalar = typename Derived::Scalar;
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(M.eval());
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == Real(0)) return 0;
  const Real cutoff = Real(rel_tol) * s(0);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++r;
  return r;
}

template <typename Derived>
auto spectral_abscissa(const Eigen::MatrixBase<Derived>& M) {
  using Scalar = typename Derived::Scalar;
  if (M.rows() != M.cols()) throw StructuralError("spectral_abscissa: matrix not square");
  if (M.rows() == 0) return -std::numeric_limits<Scalar>::infinity();
  Eigen::EigenSolver<MatrixX<Scalar>> es(M.eval(), false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue solver did not converge");
  return es.eigenvalues().real().maxCoeff();
}

/// True iff every eigenvalue has real part below -1e-9.
template <typename Derived>
bool is_hurwitz(const Eigen::MatrixBase<Derived>& M) {
  return spectral_abscissa(M) < typename Derived::Scalar(kHurwitzThreshold);
}

/// rank [C B, 0; -A B, B] == n + p.
template <typename Scalar>
bool check_rank_condition(const LtiModel<Scalar>& model) {
  model.check_dimensions();
  const auto n = model.states(), m = model.inputs(), p = model.outputs();
  MatrixX<Scalar> stacked = MatrixX<Scalar>::Zero(p + n, 2 * m);
  stacked.topLeftCorner(p, m) = model.C * model.B;
  stacked.bottomLeftCorner(n, m) = -model.A * model.B;
  stacked.bottomRightCorner(n, m) = model.B;
  return numerical_rank(stacked) == n + p;
}

namespace detail {

// PBH test: rank [lambda I - A, X] == n for every eigenvalue lambda of A with
// real part >= `abscissa_floor`.
template <typename Scalar>
bool pbh_full_rank(const MatrixX<Scalar>& A, const MatrixX<Scalar>& X, Scalar abscissa_floor) {
  using Complex = std::complex<Scalar>;
  const auto n = A.rows();
  Eigen::EigenSolver<MatrixX<Scalar>> es(A, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue solver did not converge");
  for (Eigen::Index k = 0; k < n; ++k) {
    const Complex lambda = es.eigenvalues()(k);
    if (lambda.real() < abscissa_floor) continue;
    MatrixX<Complex> pencil(n, n + X.cols());
    pencil.leftCols(n) = lambda * MatrixX<Complex>::Identity(n, n) - A.template cast<Complex>();
    pencil.rightCols(X.cols()) = X.template cast<Complex>();
    if (numerical_rank(pencil) < n) return false;
  }
  return true;
}

}  // namespace detail

template <typename Scalar>
bool is_controllable(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B) {
  return detail::pbh_full_rank<Scalar>(A, B, -std::numeric_limits<Scalar>::infinity());
}

template <typename Scalar>
bool is_detectable(const MatrixX<Scalar>& A, const MatrixX<Scalar>& C) {
  MatrixX<Scalar> At = A.transpose();
  MatrixX<Scalar> Ct = C.transpose();
  return detail::pbh_full_rank<Scalar>(At, Ct, Scalar(0));
}

/// Solves the regulator equations as one stacked least-squares problem in
/// vec(Gamma), vec(Psi), vec(Upsilon). Throws SynthesisError when any of the
/// three residuals exceeds 1e-10 in Frobenius norm.
template <typename Scalar>
RegulatorSolution<Scalar> solve_regulator_equations(const LtiModel<Scalar>& model) {
  model.check_dimensions();
  const auto n = model.states(), m = model.inputs(), p = model.outputs();
  const auto unknowns = m * p + n * p + m * p;
  const auto off_gamma = Eigen::Index{0};
  const auto off_psi = m * p;
  const auto off_upsilon = m * p + n * p;

  MatrixX<Scalar> lhs = MatrixX<Scalar>::Zero(2 * n * p + p * p, unknowns);
  VectorX<Scalar> rhs = VectorX<Scalar>::Zero(lhs.rows());
  // Column-major vec: vec(M X) = (I_p kron M) vec(X).
  for (Eigen::Index c = 0; c < p; ++c) {
    const auto row1 = c * n;
    const auto row2 = n * p + c * n;
    const auto row3 = 2 * n * p + c * p;
    lhs.block(row1, off_gamma + c * m, n, m) = model.B;
    lhs.block(row1, off_psi + c * n, n, n) = -MatrixX<Scalar>::Identity(n, n);
    lhs.block(row2, off_upsilon + c * m, n, m) = model.B;
    lhs.block(row2, off_psi + c * n, n, n) = -model.A;
    lhs.block(row3, off_psi + c * n, p, n) = model.C;
    rhs(row3 + c) = Scalar(1);
  }

  RegulatorSolution<Scalar> sol;
  const MatrixX<Scalar> CB = model.C * model.B;
  if (m == p && numerical_rank(CB) == p && numerical_rank(model.B) == m) {
    // Square case: Gamma = (CB)^-1 is forced, and substitution keeps exact
    // answers exact (the single integrator gives I, I, 0 bit for bit).
    sol.Gamma = CB.fullPivLu().solve(MatrixX<Scalar>::Identity(p, p));
    sol.Psi = model.B * sol.Gamma;
    sol.Upsilon = model.B.fullPivHouseholderQr().solve(MatrixX<Scalar>(model.A * sol.Psi));
  } else {
    const VectorX<Scalar> theta = lhs.completeOrthogonalDecomposition().solve(rhs);
    sol.Gamma = Eigen::Map<const MatrixX<Scalar>>(theta.data() + off_gamma, m, p);
    sol.Psi = Eigen::Map<const MatrixX<Scalar>>(theta.data() + off_psi, n, p);
    sol.Upsilon = Eigen::Map<const MatrixX<Scalar>>(theta.data() + off_upsilon, m, p);
  }

  const Scalar r1 = (model.B * sol.Gamma - sol.Psi).norm();
  const Scalar r2 = (model.B * sol.Upsilon - model.A * sol.Psi).norm();
  const Scalar r3 = (model.C * sol.Psi - MatrixX<Scalar>::Identity(p, p)).norm();
  const Scalar worst = std::max({r1, r2, r3});
  if (!(worst <= Scalar(kRegulatorTolerance)))
    throw SynthesisError("regulator equations inconsistent (residual " +
                         std::to_string(static_cast<double>(worst)) + ")");
  return sol;
}

/// Solves  M^T X + X M = -Q  by Bartels-Stewart on the complex Schur form of
/// M. Returns the symmetric part of the solution. `separation` receives
/// min |conj(l_i) + l_j| / max(1, |M|).
template <typename Scalar>
MatrixX<Scalar> solve_lyapunov(const MatrixX<Scalar>& M, const MatrixX<Scalar>& Q,
                               Scalar* separation = nullptr) {
  using Complex = std::complex<Scalar>;
  if (M.rows() != M.cols() || Q.rows() != M.rows() || Q.cols() != M.cols())
    throw StructuralError("solve_lyapunov: dimension mismatch");
  const auto n = M.rows();
  Eigen::ComplexSchur<MatrixX<Scalar>> schur(M);
  if (schur.info() != Eigen::Success) throw NumericalError("Schur decomposition did not converge");
  const MatrixX<Complex>& T = schur.matrixT();
  const MatrixX<Complex>& U = schur.matrixU();
  const MatrixX<Complex> Qt = U.adjoint() * Q.template cast<Complex>() * U;

  const Scalar scale = std::max(Scalar(1), M.norm());
  Scalar sep = std::numeric_limits<Scalar>::infinity();
  MatrixX<Complex> Y = MatrixX<Complex>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Complex acc = -Qt(i, j);
      for (Eigen::Index k = 0; k < i; ++k) acc -= std::conj(T(k, i)) * Y(k, j);
      for (Eigen::Index k = 0; k < j; ++k) acc -= Y(i, k) * T(k, j);
      const Complex diag = std::conj(T(i, i)) + T(j, j);
      sep = std::min(sep, std::abs(diag) / scale);
      if (std::abs(diag) <= std::numeric_limits<Scalar>::epsilon() * scale)
        throw NumericalError("solve_lyapunov: spectrum of M meets its mirror image");
      Y(i, j) = acc / diag;
    }
  }
  if (separation) *separation = sep;
  MatrixX<Scalar> X = (U * Y * U.adjoint()).real();
  return (X + X.transpose()) / Scalar(2);
}

/// Infinite-horizon LQR gain (Q = I, R = I) for the pair (A + margin I, B),
/// so that A - B K has every eigenvalue real part <= -margin. The Riccati
/// equation is solved by Newton-Kleinman, seeded with a Bass-type shifted
/// stabilizing gain.
template <typename Scalar>
MatrixX<Scalar> synthesize_state_feedback(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B,
                                          Scalar stability_margin = Scalar(kDefaultStabilityMargin),
                                          int max_iterations = 100) {
  if (A.rows() != A.cols() || B.rows() != A.rows())
    throw StructuralError("synthesize_state_feedback: dimension mismatch");
  if (!(stability_margin >= Scalar(0)))
    throw PreconditionError("synthesize_state_feedback: stability margin must be >= 0");
  if (!is_controllable(A, B)) throw SynthesisError("pair (A, B) is not controllable");

  const auto n = A.rows();
  const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(n, n);
  const MatrixX<Scalar> As = A + stability_margin * I;

  // Seed: with beta above every |eig(As)|, -(As + beta I) is Hurwitz and the
  // gain B^T Z^{-1} places the closed loop spectrum on Re = -beta.
  const Scalar beta = As.norm() + Scalar(1);
  const MatrixX<Scalar> Mseed = -(As + beta * I).transpose();
  const MatrixX<Scalar> Z = solve_lyapunov<Scalar>(Mseed, Scalar(2) * B * B.transpose());
  Eigen::LLT<MatrixX<Scalar>> zllt(Z);
  if (zllt.info() != Eigen::Success) throw SynthesisError("pair (A, B) is not controllable");
  MatrixX<Scalar> K = zllt.solve(B).transpose();

  MatrixX<Scalar> X = MatrixX<Scalar>::Zero(n, n);
  for (int it = 0; it < max_iterations; ++it) {
    const MatrixX<Scalar> Acl = As - B * K;
    const MatrixX<Scalar> Xn = solve_lyapunov<Scalar>(Acl, I + K.transpose() * K);
    const Scalar change = (Xn - X).norm();
    X = Xn;
    K = B.transpose() * X;
    if (change <= Scalar(1e-12) * std::max(Scalar(1), X.norm())) {
      const Scalar abscissa = spectral_abscissa(A - B * K);
      if (abscissa > -stability_margin + Scalar(1e-9) * std::max(Scalar(1), A.norm()))
        throw NumericalError("state feedback misses the requested stability margin");
      return K;
    }
  }
  throw NumericalError("Newton-Kleinman iteration did not converge");
}

template <typename Scalar>
MatrixX<Scalar> synthesize_state_feedback(const LtiModel<Scalar>& model,
                                          Scalar stability_margin = Scalar(kDefaultStabilityMargin)) {
  model.check_dimensions();
  return synthesize_state_feedback<Scalar>(model.A, model.B, stability_margin);
}

/// Observer gain H with A - H C Hurwitz, from state feedback on (A^T, C^T).
template <typename Scalar>
MatrixX<Scalar> synthesize_observer_gain(const LtiModel<Scalar>& model,
                                         Scalar stability_margin = Scalar(kDefaultStabilityMargin)) {
  model.check_dimensions();
  if (!is_detectable(model.A, model.C)) throw SynthesisError("pair (A, C) is not detectable");
  const MatrixX<Scalar> At = model.A.transpose();
  const MatrixX<Scalar> Ct = model.C.transpose();
  try {
    return synthesize_state_feedback<Scalar>(At, Ct, stability_margin).transpose();
  } catch (const SynthesisError&) {
    throw SynthesisError("pair (A, C) is not observable");
  }
}

template <typename Scalar>
GainSet<Scalar> synthesize_gains(const LtiModel<Scalar>& model,
                                 Scalar stability_margin = Scalar(kDefaultStabilityMargin)) {
  if (!check_rank_condition(model)) throw SynthesisError("rank condition violated");
  auto reg = solve_regulator_equations(model);
  GainSet<Scalar> g;
  g.K = synthesize_state_feedback(model, stability_margin);
  g.H = synthesize_observer_gain(model, stability_margin);
  g.Gamma = std::move(reg.Gamma);
  g.Psi = std::move(reg.Psi);
  g.Upsilon = std::move(reg.Upsilon);
  return g;
}

/// P solving  A_H^T P + P A_H = -(1 + slack) varsigma2 I.  `varsigma1` is
/// carried through unchanged for reporting.
template <typename Scalar>
CertificateMatrix<Scalar> solve_certificate_matrix(const MatrixX<Scalar>& A_H, Scalar varsigma2,
                                                   Scalar varsigma1 = Scalar(0)) {
  if (A_H.rows() != A_H.cols()) throw StructuralError("certificate: A_H not square");
  if (!(varsigma2 > Scalar(0))) throw PreconditionError("certificate: varsigma2 must be positive");
  if (!is_hurwitz(A_H)) throw PreconditionError("certificate: A_H is not Hurwitz");
  const auto n = A_H.rows();
  CertificateMatrix<Scalar> cert;
  const Scalar rhs = (Scalar(1) + Scalar(kCertificateSlack)) * varsigma2;
  cert.P = solve_lyapunov<Scalar>(A_H, rhs * MatrixX<Scalar>::Identity(n, n), &cert.separation);
  cert.varsigma1 = varsigma1;
  cert.varsigma2 = varsigma2;
  cert.ill_conditioned = cert.separation < Scalar(1e-8);
  return cert;
}

/// Block matrix [A - H C, 0; B K, A - B K] of the estimation / tracking error.
template <typename Scalar>
MatrixX<Scalar> error_dynamics_matrix(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B,
                                      const MatrixX<Scalar>& C, const MatrixX<Scalar>& K,
                                      const MatrixX<Scalar>& H) {
  const auto n = A.rows();
  MatrixX<Scalar> AH = MatrixX<Scalar>::Zero(2 * n, 2 * n);
  AH.topLeftCorner(n, n) = A - H * C;
  AH.bottomLeftCorner(n, n) = B * K;
  AH.bottomRightCorner(n, n) = A - B * K;
  return AH;
}

/// varsigma1 = eps l / 4 and varsigma2 = 1.01 max(|C A_c|^2, |B K|^2) / (4 varsigma1),
/// spectral norms, A_c = A - B K.
template <typename Scalar>
std::pair<Scalar, Scalar> certificate_constants(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B,
                                                const MatrixX<Scalar>& C, const MatrixX<Scalar>& K,
                                                Scalar epsilon, Scalar strong_convexity) {
  if (!(epsilon > Scalar(0)) || !(strong_convexity > Scalar(0)))
    throw PreconditionError("certificate constants need epsilon > 0 and l > 0");
  auto spectral = [](const MatrixX<Scalar>& M) {
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(M);
    return svd.singularValues().size() ? svd.singularValues()(0) : Scalar(0);
  };
  const Scalar s1 = epsilon * strong_convexity / Scalar(4);
  const Scalar a = spectral(C * (A - B * K));
  const Scalar b = spectral(B * K);
  const Scalar s2 = Scalar(1.01) * std::max(a * a, b * b) / (Scalar(4) * s1);
  return {s1, s2};
}

}  // namespace doco
