#pragma once

// Block preconditioned conjugate gradient eigensolver (LOBPCG) for the lowest
// eigenpairs of a symmetric operator given only by its action.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lllab/error.hpp"

namespace lllab {

using LinearMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LobpcgOptions {
  int max_iterations = 2000;
  double tol_first = 1e-8;  // relative residual for the lowest pair
  double tol_rest = 1e-4;   // relative residual for the other block members
};

struct LobpcgResult {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // Euclidean-orthonormal columns
  Eigen::VectorXd residuals;
  int iterations = 0;
};

namespace detail {

/// Orthonormal basis of span(S) (columns with relative Gram eigenvalue below
/// drop are discarded); returns Z with S Z orthonormal.
inline Eigen::MatrixXd svqb(const Eigen::MatrixXd& S, double drop = 1e-13) {
  Eigen::VectorXd scale = S.colwise().norm().transpose();
  for (Eigen::Index i = 0; i < scale.size(); ++i) scale[i] = scale[i] > 0 ? 1.0 / scale[i] : 0.0;
  const Eigen::MatrixXd D = scale.asDiagonal();
  Eigen::MatrixXd G = D * (S.transpose() * S) * D;
  G = 0.5 * (G + G.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const double top = es.eigenvalues().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < G.rows(); ++i)
    if (es.eigenvalues()[i] > drop * top) keep.push_back(i);
  Eigen::MatrixXd Z(G.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k)
    Z.col(static_cast<Eigen::Index>(k)) =
        es.eigenvectors().col(keep[k]) / std::sqrt(es.eigenvalues()[keep[k]]);
  return D * Z;
}

}  // namespace detail

inline LobpcgResult lobpcg(const LinearMap& A, const LinearMap& T, Eigen::MatrixXd X,
                           const LobpcgOptions& opt = {}) {
  const Eigen::Index m = X.cols();
  require(m >= 1 && X.rows() > 3 * m, Errc::invalid_argument, "lobpcg block does not fit the space");
  auto apply_block = [](const LinearMap& op, const Eigen::MatrixXd& M) {
    Eigen::MatrixXd out(M.rows(), M.cols());
    for (Eigen::Index i = 0; i < M.cols(); ++i) out.col(i) = op(M.col(i));
    return out;
  };

  // Initial Rayleigh-Ritz.
  {
    const Eigen::MatrixXd Z = detail::svqb(X);
    require(Z.cols() == m, Errc::invalid_argument, "lobpcg initial block is rank deficient");
    X = X * Z;
  }
  Eigen::MatrixXd AX = apply_block(A, X);
  {
    Eigen::MatrixXd G = X.transpose() * AX;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()));
    X = X * es.eigenvectors();
    AX = AX * es.eigenvectors();
  }
  Eigen::MatrixXd P, AP;
  LobpcgResult res;
  Eigen::VectorXd lambda(m);
  for (Eigen::Index i = 0; i < m; ++i) lambda[i] = X.col(i).dot(AX.col(i));

  for (int it = 1; it <= opt.max_iterations; ++it) {
    const Eigen::MatrixXd R = AX - X * lambda.asDiagonal();
    Eigen::VectorXd rn(m);
    bool done = true;
    for (Eigen::Index i = 0; i < m; ++i) {
      rn[i] = R.col(i).norm() / std::max(1.0, std::abs(lambda[i]));
      if (rn[i] > (i == 0 ? opt.tol_first : opt.tol_rest)) done = false;
    }
    res.iterations = it - 1;
    res.residuals = rn;
    if (done) break;

    const Eigen::MatrixXd W = apply_block(T, R);
    const Eigen::MatrixXd AW = apply_block(A, W);
    const Eigen::Index k = P.cols();
    Eigen::MatrixXd S(X.rows(), 2 * m + k), AS(X.rows(), 2 * m + k);
    S.leftCols(m) = X;
    S.middleCols(m, m) = W;
    AS.leftCols(m) = AX;
    AS.middleCols(m, m) = AW;
    if (k > 0) {
      S.rightCols(k) = P;
      AS.rightCols(k) = AP;
    }

    // Orthonormalize, with a second pass for stability.
    Eigen::MatrixXd Z = detail::svqb(S);
    Z = Z * detail::svqb(S * Z);
    const Eigen::MatrixXd Q = S * Z;
    Eigen::MatrixXd G = Q.transpose() * (AS * Z);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()));
    const Eigen::MatrixXd Y = Z * es.eigenvectors().leftCols(m);
    lambda = es.eigenvalues().head(m);

    X = S * Y;
    // Explicit products keep the residuals honest; the operator may be
    // linear only to rounding.
    AX = apply_block(A, X);
    const Eigen::Index tail = S.cols() - m;
    P = S.rightCols(tail) * Y.bottomRows(tail);
    AP = apply_block(A, P);
    res.iterations = it;
    if (it == opt.max_iterations)
      throw Error(Errc::no_convergence, "lobpcg did not converge in " + std::to_string(it) +
                                            " iterations (residual " + std::to_string(rn[0]) + ")");
  }
  // Clean Ritz values from the final block.
  for (Eigen::Index i = 0; i < m; ++i) {
    const double nrm = X.col(i).norm();
    X.col(i) /= nrm;
    AX.col(i) /= nrm;
    lambda[i] = X.col(i).dot(AX.col(i));
  }
  res.values = lambda;
  res.vectors = X;
  return res;
}

}  // namespace lllab
