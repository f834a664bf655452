#pragma once

// Closed-form l2-regularized hull representation of a query feature set over
// a gallery stack:
//
//   min_{a,b} ||Y a - X b||^2 + lambda1 ||a||^2 + lambda2 ||b||^2   s.t. sum(a) = 1
//
// With z = [a; b], A = [Y, -X], B = blockdiag(lambda1 I, lambda2 I) and
// d = [1..1, 0..0], the stationarity system (A^T A + B) z + phi d = 0 gives
// z = z0 / (d^T z0) where z0 = (A^T A + B)^{-1} d.

#include "fsrl/core_types.hpp"

namespace fsrl {

struct VectorCRParams
{
  double lambda1 = 1e-3;
  double lambda2 = 1e-3;

  void check() const
  {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
      throw InvalidParameterError("lambda1 and lambda2 must be nonnegative");
  }
};

template<typename Scalar>
struct VectorSystem
{
  Matrix<Scalar> A;
  Eigen::DiagonalMatrix<Scalar, Eigen::Dynamic> B;
  Vector<Scalar> d;
};

template<typename Scalar>
VectorSystem<Scalar> assemble_system(const FeatureSet<Scalar>& query,
                                     const Gallery<Scalar>& gallery,
                                     const VectorCRParams& params)
{
  params.check();
  if (query.dim() != gallery.dim())
    throw DimensionMismatchError("query dimension " + std::to_string(query.dim()) +
                                 " differs from gallery dimension " +
                                 std::to_string(gallery.dim()));
  const Index na = query.size();
  const Index nb = gallery.size();

  VectorSystem<Scalar> sys;
  sys.A.resize(query.dim(), na + nb);
  sys.A.leftCols(na) = query.data();
  sys.A.rightCols(nb) = -gallery.stack();

  Vector<Scalar> diag(na + nb);
  diag.head(na).setConstant(static_cast<Scalar>(params.lambda1));
  diag.tail(nb).setConstant(static_cast<Scalar>(params.lambda2));
  sys.B = diag.asDiagonal();

  sys.d = Vector<Scalar>::Zero(na + nb);
  sys.d.head(na).setOnes();
  return sys;
}

/// ||Y a - X b||^2 + lambda1 ||a||^2 + lambda2 ||b||^2
template<typename Scalar, typename DerivedA, typename DerivedB>
Scalar objective_vector(const FeatureSet<Scalar>& query, const Gallery<Scalar>& gallery,
                        const Eigen::MatrixBase<DerivedA>& alpha,
                        const Eigen::MatrixBase<DerivedB>& beta,
                        const VectorCRParams& params)
{
  if (query.dim() != gallery.dim() || alpha.size() != query.size() ||
      beta.size() != gallery.size())
    throw DimensionMismatchError("objective_vector: inconsistent dimensions");
  const Vector<Scalar> r = query.data() * alpha - gallery.stack() * beta;
  return r.squaredNorm() + static_cast<Scalar>(params.lambda1) * alpha.squaredNorm() +
         static_cast<Scalar>(params.lambda2) * beta.squaredNorm();
}

template<typename Scalar>
HullSolution<Scalar> solve_vector_hull(const FeatureSet<Scalar>& query,
                                       const Gallery<Scalar>& gallery,
                                       const VectorCRParams& params)
{
  const auto sys = assemble_system(query, gallery, params);
  const Index na = query.size();
  const Index n = sys.A.cols();

  Matrix<Scalar> gram = Matrix<Scalar>::Zero(n, n);
  gram.template selfadjointView<Eigen::Lower>().rankUpdate(sys.A.transpose());
  gram.diagonal() += sys.B.diagonal();
  gram.template triangularView<Eigen::StrictlyUpper>() = gram.transpose();

  Eigen::LLT<Matrix<Scalar>> llt(gram);
  const Scalar tiny = static_cast<Scalar>(n) * std::numeric_limits<Scalar>::epsilon();
  if (llt.info() != Eigen::Success || !(llt.rcond() > tiny))
    throw SingularSystemError("A^T A + B is singular; increase lambda1/lambda2 above zero");

  const Vector<Scalar> z0 = llt.solve(sys.d);
  const Scalar scale = sys.d.dot(z0);
  if (!(std::abs(scale) > Scalar(1e-12) * sys.d.norm() * z0.norm()))
    throw DegenerateConstraintError("d^T z0 is numerically zero; the sum-to-one "
                                    "constraint cannot be met");
  const Vector<Scalar> z = z0 / scale;

  HullSolution<Scalar> out;
  out.alpha = z.head(na);
  out.beta = z.tail(n - na);

  // phi by least squares on (A^T A + B) z + phi d = 0
  const Vector<Scalar> gz = gram * z;
  out.diagnostics.multiplier = static_cast<double>(-sys.d.dot(gz) / sys.d.squaredNorm());
  out.diagnostics.iterations = 1;
  out.diagnostics.converged = true;
  out.diagnostics.final_primal_residual = std::abs(static_cast<double>(out.alpha.sum()) - 1.0);
  out.diagnostics.objective =
    static_cast<double>(objective_vector(query, gallery, out.alpha, out.beta, params));
  return out;
}

/// Relative residual ||(A^T A + B) z + phi d|| / ||d|| with phi fitted by least squares.
template<typename Scalar>
double stationarity_residual(const FeatureSet<Scalar>& query, const Gallery<Scalar>& gallery,
                             const VectorCRParams& params, const HullSolution<Scalar>& sol)
{
  const auto sys = assemble_system(query, gallery, params);
  Vector<Scalar> z(sys.A.cols());
  z << sol.alpha, sol.beta;
  const Vector<Scalar> gz = sys.A.transpose() * (sys.A * z) + sys.B * z;
  const Scalar phi = -sys.d.dot(gz) / sys.d.squaredNorm();
  return static_cast<double>((gz + phi * sys.d).norm() / sys.d.norm());
}

} // namespace fsrl
