#pragma once

// Reference solver for
//
//   min_{a,b} ||Y a - X b||^2 + l1 ||a||^2 + l2 ||b||^2   s.t. sum(a) = 1
//
// The constraint is eliminated by a_last = 1 - sum(a_1..a_{na-1}); the reduced
// unconstrained quadratic is minimized by accelerated gradient descent with
// adaptive restart, until the gradient vanishes or no step descends.

#include <Eigen/Dense>

#include <cmath>

namespace fsrl::oracle {

struct VectorHullResult
{
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  double objective = 0.0;
  int iterations = 0;
};

inline double vector_objective(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X, double l1,
                               double l2, const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
  return (Y * a - X * b).squaredNorm() + l1 * a.squaredNorm() + l2 * b.squaredNorm();
}

inline VectorHullResult solve_vector_hull_gradient(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X,
                                                   double l1, double l2, double grad_tol = 1e-10,
                                                   int max_iter = 2000000)
{
  const long na = Y.cols();
  const long nb = X.cols();
  const long m = na - 1 + nb;

  // z = z0 + T w, z = [a; b]
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(na + nb);
  z0(na - 1) = 1.0;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(na + nb, m);
  for (long i = 0; i < na - 1; ++i) {
    T(i, i) = 1.0;
    T(na - 1, i) = -1.0;
  }
  for (long j = 0; j < nb; ++j)
    T(na + j, na - 1 + j) = 1.0;

  Eigen::MatrixXd A(Y.rows(), na + nb);
  A << Y, -X;
  Eigen::VectorXd reg(na + nb);
  reg.head(na).setConstant(l1);
  reg.tail(nb).setConstant(l2);
  Eigen::MatrixXd G = A.transpose() * A;
  G.diagonal() += reg;
  const Eigen::MatrixXd Q = T.transpose() * G * T;
  const Eigen::VectorXd c = T.transpose() * G * z0;

  VectorHullResult out;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  if (m > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, Eigen::EigenvaluesOnly);
    const double L = 2.0 * std::max(es.eigenvalues().maxCoeff(), 1e-300);
    auto grad = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return 2.0 * (Q * x + c); };
    auto f = [&](const Eigen::VectorXd& x) { return x.dot(Q * x) + 2.0 * c.dot(x); };

    Eigen::VectorXd v = w;
    double t = 1.0;
    double fw = f(w);
    const double scale = 1.0 + c.norm();
    for (int k = 0; k < max_iter; ++k) {
      const Eigen::VectorXd w_next = v - grad(v) / L;
      const double f_next = f(w_next);
      out.iterations = k + 1;
      if (f_next > fw) {
        // a plain gradient step from w no longer descends: numerical floor
        if (t == 1.0)
          break;
        t = 1.0;
        v = w;
        continue;
      }
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      v = w_next + ((t - 1.0) / t_next) * (w_next - w);
      t = t_next;
      w = w_next;
      fw = f_next;
      if (grad(w).norm() <= grad_tol * scale)
        break;
    }
  }
  const Eigen::VectorXd z = z0 + T * w;
  out.alpha = z.head(na);
  out.beta = z.tail(nb);
  out.objective = vector_objective(Y, X, l1, l2, out.alpha, out.beta);
  return out;
}

} // namespace fsrl::oracle
