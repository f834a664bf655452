#pragma once

// Nuclear-norm hull representation, solved by ADMM:
//
//   min_{a,b,E} ||E||_* + lambda1 ||a||^2 + lambda2 ||b||^2
//   s.t.        Y(a) - X(b) = E,  sum(a) = 1
//
// Each sweep updates a (ridge), b (ridge), E (singular value thresholding at
// 1/mu), then the multipliers Z and gamma. Iteration stops once
// ||Y(a) - X(b) - E||_F^2 <= epsilon and the sum and dual checks below pass,
// or after max_iter sweeps.

#include <cmath>
#include <limits>
#include <functional>
#include <tuple>

#include "fsrl/core_types.hpp"

namespace fsrl {

struct MatrixCRParams
{
  double lambda1 = 1e-3;
  double lambda2 = 1e-3;
  double mu = 1.0;
  double epsilon = 1e-6;
  int max_iter = 500;
  // The sum-to-one row is only enforced through gamma, so convergence also
  // requires |sum(alpha) - 1| <= sum_tolerance.
  double sum_tolerance = 1e-5;
  // Squared dual residual mu^2 (||dE||_F^2 + ||X db||^2) between sweeps must
  // also fall to dual_epsilon. Set to +inf to stop on primal feasibility alone.
  double dual_epsilon = 1e-9;

  // Optional increasing penalty schedule: mu <- min(mu * mu_growth, mu_max)
  // after every sweep whose primal residual still exceeds epsilon. Off by default.
  bool adaptive_mu = false;
  double mu_growth = 1.05;
  double mu_max = 1e6;

  void check() const
  {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
      throw InvalidParameterError("lambda1 and lambda2 must be nonnegative");
    if (!(mu > 0.0) || !std::isfinite(mu))
      throw InvalidParameterError("mu must be positive");
    if (!(epsilon > 0.0))
      throw InvalidParameterError("epsilon must be positive");
    if (!(dual_epsilon > 0.0))
      throw InvalidParameterError("dual_epsilon must be positive");
    if (!(sum_tolerance > 0.0))
      throw InvalidParameterError("sum_tolerance must be positive");
    if (max_iter < 1)
      throw InvalidParameterError("max_iter must be at least 1");
    if (adaptive_mu && !(mu_growth >= 1.0 && mu_max >= mu))
      throw InvalidParameterError("adaptive mu needs mu_growth >= 1 and mu_max >= mu");
  }
};

template<typename Scalar>
struct AdmmState
{
  Vector<Scalar> alpha;
  Vector<Scalar> beta;
  Matrix<Scalar> E;
  Matrix<Scalar> Z;
  Scalar gamma = 0;
  Scalar mu = 1;
  int iter = 0;

  /// All-zero start for the given problem size.
  static AdmmState zeros(Index na, Index nb, Index rows, Index cols, Scalar mu)
  {
    AdmmState s;
    s.alpha = Vector<Scalar>::Zero(na);
    s.beta = Vector<Scalar>::Zero(nb);
    s.E = Matrix<Scalar>::Zero(rows, cols);
    s.Z = Matrix<Scalar>::Zero(rows, cols);
    s.gamma = 0;
    s.mu = mu;
    s.iter = 0;
    return s;
  }
};

/// coeffs[0] * map(0) + ... + coeffs[n-1] * map(n-1)
template<typename Scalar, typename Derived>
Matrix<Scalar> combine(const MatrixFeatureSet<Scalar>& set,
                       const Eigen::MatrixBase<Derived>& coeffs)
{
  if (coeffs.size() != set.size())
    throw DimensionMismatchError("combine: " + std::to_string(coeffs.size()) +
                                 " coefficients for " + std::to_string(set.size()) + " maps");
  return (set.stack() * coeffs).reshaped(set.map_rows(), set.map_cols());
}

template<typename Scalar, typename Derived>
Matrix<Scalar> combine(const Gallery<Scalar>& gallery, const Eigen::MatrixBase<Derived>& coeffs)
{
  if (coeffs.size() != gallery.size())
    throw DimensionMismatchError("combine: " + std::to_string(coeffs.size()) +
                                 " coefficients for " + std::to_string(gallery.size()) +
                                 " maps");
  return (gallery.stack() * coeffs).reshaped(gallery.map_rows(), gallery.map_cols());
}

template<typename Derived>
auto nuclear_norm(const Eigen::MatrixBase<Derived>& m)
{
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m);
  return svd.singularValues().sum();
}

/// Singular value thresholding: argmin_E threshold * ||E||_* + 1/2 ||E - F||_F^2.
template<typename Derived>
auto prox_nuclear(const Eigen::MatrixBase<Derived>& F, typename Derived::Scalar threshold)
{
  using Scalar = typename Derived::Scalar;
  if (!(threshold > 0))
    throw InvalidParameterError("prox_nuclear: threshold must be positive");
  if (!F.allFinite())
    throw DivergenceError("prox_nuclear: non-finite input");

  Eigen::JacobiSVD<Matrix<Scalar>> svd(F, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw DivergenceError("prox_nuclear: SVD failed");
  const Vector<Scalar> shrunk = (svd.singularValues().array() - threshold).max(Scalar(0));
  return Matrix<Scalar>(svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose());
}

template<typename Scalar, typename DerivedA, typename DerivedB>
Scalar objective_matrix(const MatrixFeatureSet<Scalar>& query, const Gallery<Scalar>& gallery,
                        const Eigen::MatrixBase<DerivedA>& alpha,
                        const Eigen::MatrixBase<DerivedB>& beta, const MatrixCRParams& params)
{
  const Matrix<Scalar> r = combine(query, alpha) - combine(gallery, beta);
  return nuclear_norm(r) + static_cast<Scalar>(params.lambda1) * alpha.squaredNorm() +
         static_cast<Scalar>(params.lambda2) * beta.squaredNorm();
}

namespace detail {

template<typename Scalar>
void check_shapes(const MatrixFeatureSet<Scalar>& query, const Gallery<Scalar>& gallery)
{
  if (query.map_rows() != gallery.map_rows() || query.map_cols() != gallery.map_cols())
    throw DimensionMismatchError(
      "query maps are " + std::to_string(query.map_rows()) + "x" +
      std::to_string(query.map_cols()) + ", gallery maps are " +
      std::to_string(gallery.map_rows()) + "x" + std::to_string(gallery.map_cols()));
}

template<typename Scalar>
void check_state(const AdmmState<Scalar>& state, const MatrixFeatureSet<Scalar>& query,
                 const Gallery<Scalar>& gallery)
{
  if (state.alpha.size() != query.size() || state.beta.size() != gallery.size() ||
      state.E.rows() != query.map_rows() || state.E.cols() != query.map_cols() ||
      state.Z.rows() != query.map_rows() || state.Z.cols() != query.map_cols())
    throw DimensionMismatchError("ADMM state does not match the problem dimensions");
  if (!(state.mu > 0))
    throw InvalidParameterError("ADMM state penalty mu must be positive");
}

/// Cholesky factor of G^T G + shift I, optionally with an extra all-ones row in G.
template<typename Scalar>
class RidgeFactor
{
public:
  RidgeFactor(const Matrix<Scalar>& G, bool ones_row, Scalar shift, const char* what)
  {
    const Index n = G.cols();
    Matrix<Scalar> gram = Matrix<Scalar>::Zero(n, n);
    gram.template selfadjointView<Eigen::Lower>().rankUpdate(G.transpose());
    gram.template triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    if (ones_row)
      gram.array() += Scalar(1);
    gram.diagonal().array() += shift;
    llt_.compute(gram);
    const Scalar tiny = static_cast<Scalar>(n) * std::numeric_limits<Scalar>::epsilon();
    if (llt_.info() != Eigen::Success || !(llt_.rcond() > tiny))
      throw SingularSystemError(std::string(what) +
                                " system is singular; use a positive lambda");
  }

  template<typename Rhs>
  Vector<Scalar> solve(const Eigen::MatrixBase<Rhs>& rhs) const
  {
    return llt_.solve(rhs);
  }

private:
  Eigen::LLT<Matrix<Scalar>> llt_;
};

template<typename Scalar>
Vector<Scalar> alpha_rhs(const AdmmState<Scalar>& s, const MatrixFeatureSet<Scalar>& query,
                         const Gallery<Scalar>& gallery)
{
  // Y~^T x~ with Y~ = [H; 1^T], x~ = [vec(X(b) + E - Z/mu); 1 - gamma/mu]
  const Vector<Scalar> top =
    gallery.stack() * s.beta + s.E.reshaped() - s.Z.reshaped() / s.mu;
  const Scalar bottom = Scalar(1) - s.gamma / s.mu;
  return query.stack().transpose() * top + Vector<Scalar>::Constant(query.size(), bottom);
}

template<typename Scalar>
Vector<Scalar> beta_rhs(const AdmmState<Scalar>& s, const MatrixFeatureSet<Scalar>& query,
                        const Gallery<Scalar>& gallery)
{
  // X~^T y~ with y~ = vec(Y(a) - E + Z/mu)
  const Vector<Scalar> ytil = query.stack() * s.alpha - s.E.reshaped() + s.Z.reshaped() / s.mu;
  return gallery.stack().transpose() * ytil;
}

} // namespace detail

/// Exact minimizer of the alpha subproblem given the rest of `state`.
template<typename Scalar>
Vector<Scalar> update_alpha(const AdmmState<Scalar>& state, const MatrixFeatureSet<Scalar>& query,
                            const Gallery<Scalar>& gallery, const MatrixCRParams& params)
{
  params.check();
  detail::check_shapes(query, gallery);
  detail::check_state(state, query, gallery);
  const Scalar eta = static_cast<Scalar>(2.0 * params.lambda1) / state.mu;
  detail::RidgeFactor<Scalar> factor(query.stack(), true, eta, "alpha");
  return factor.solve(detail::alpha_rhs(state, query, gallery));
}

/// Exact minimizer of the beta subproblem given the rest of `state` (alpha already updated).
template<typename Scalar>
Vector<Scalar> update_beta(const AdmmState<Scalar>& state, const MatrixFeatureSet<Scalar>& query,
                           const Gallery<Scalar>& gallery, const MatrixCRParams& params)
{
  params.check();
  detail::check_shapes(query, gallery);
  detail::check_state(state, query, gallery);
  const Scalar rho = static_cast<Scalar>(2.0 * params.lambda2) / state.mu;
  detail::RidgeFactor<Scalar> factor(gallery.stack(), false, rho, "beta");
  return factor.solve(detail::beta_rhs(state, query, gallery));
}

/// Per-sweep hook for tracing; receives the state after the multiplier update.
template<typename Scalar>
using AdmmObserver = std::function<void(const AdmmState<Scalar>&, double primal_residual)>;

template<typename Scalar>
HullSolution<Scalar> solve_matrix_hull(const MatrixFeatureSet<Scalar>& query,
                                       const Gallery<Scalar>& gallery,
                                       const MatrixCRParams& params,
                                       const AdmmObserver<Scalar>& observer = {})
{
  params.check();
  detail::check_shapes(query, gallery);

  const Index rows = query.map_rows();
  const Index cols = query.map_cols();
  auto state = AdmmState<Scalar>::zeros(query.size(), gallery.size(), rows, cols,
                                        static_cast<Scalar>(params.mu));

  auto factor = [&](Scalar mu) {
    return std::pair{
      detail::RidgeFactor<Scalar>(query.stack(), true, Scalar(2 * params.lambda1) / mu, "alpha"),
      detail::RidgeFactor<Scalar>(gallery.stack(), false, Scalar(2 * params.lambda2) / mu, "beta")
    };
  };
  auto [alpha_factor, beta_factor] = factor(state.mu);

  double residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  Matrix<Scalar> R(rows, cols);
  double dual_residual = std::numeric_limits<double>::infinity();
  Vector<Scalar> beta_prev;
  Matrix<Scalar> E_prev;
  while (state.iter < params.max_iter) {
    beta_prev = state.beta;
    E_prev = state.E;
    state.alpha = alpha_factor.solve(detail::alpha_rhs(state, query, gallery));
    state.beta = beta_factor.solve(detail::beta_rhs(state, query, gallery));

    const Matrix<Scalar> diff = combine(query, state.alpha) - combine(gallery, state.beta);
    const Matrix<Scalar> F = diff + state.Z / state.mu;
    if (!F.allFinite())
      throw DivergenceError("ADMM iterate became non-finite at sweep " +
                            std::to_string(state.iter + 1) +
                            "; try a smaller mu or larger lambda");
    state.E = prox_nuclear(F, Scalar(1) / state.mu);

    R = diff - state.E;
    dual_residual = static_cast<double>(
      state.mu * state.mu *
      ((state.E - E_prev).squaredNorm() +
       (gallery.stack() * (state.beta - beta_prev)).squaredNorm()));
    state.gamma += state.mu * (state.alpha.sum() - Scalar(1));
    state.Z += state.mu * R;
    ++state.iter;

    residual = static_cast<double>(R.squaredNorm());
    const double sum_gap = std::abs(static_cast<double>(state.alpha.sum()) - 1.0);
    if (!std::isfinite(residual) || !std::isfinite(static_cast<double>(state.gamma)) ||
        !state.Z.allFinite())
      throw DivergenceError("ADMM iterate became non-finite at sweep " +
                            std::to_string(state.iter) + "; try a smaller mu or larger lambda");
    if (observer)
      observer(state, residual);
    if (residual <= params.epsilon && sum_gap <= params.sum_tolerance &&
        dual_residual <= params.dual_epsilon) {
      converged = true;
      break;
    }
    if (params.adaptive_mu && residual > params.epsilon &&
        state.mu < static_cast<Scalar>(params.mu_max)) {
      state.mu = std::min(state.mu * static_cast<Scalar>(params.mu_growth),
                          static_cast<Scalar>(params.mu_max));
      std::tie(alpha_factor, beta_factor) = factor(state.mu);
    }
  }

  HullSolution<Scalar> out;
  out.alpha = std::move(state.alpha);
  out.beta = std::move(state.beta);
  out.diagnostics.iterations = state.iter;
  out.diagnostics.final_primal_residual = residual;
  out.diagnostics.converged = converged;
  out.diagnostics.multiplier = static_cast<double>(state.gamma);
  out.diagnostics.objective =
    static_cast<double>(objective_matrix(query, gallery, out.alpha, out.beta, params));
  return out;
}

} // namespace fsrl
