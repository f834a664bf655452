#pragma once

// Decision-level fusion of per-scale predictions. Weights come from the
// nonnegative l1-regularized least squares fit
//
//   min_{sigma >= floor} ||e - D^ sigma||^2 + tau * sum(sigma),   D^ = [D; 1^T], e = 1
//
// where D is the +-1 correctness matrix on a validation table.

#include <Eigen/Dense>

#include <span>

#include "fsrl/core_types.hpp"

namespace fsrl {

using LabelMatrix = Eigen::Matrix<Label, Eigen::Dynamic, Eigen::Dynamic>;
using LabelVector = Eigen::Matrix<Label, Eigen::Dynamic, 1>;

/// h(i, j): label predicted for validation sample i at scale j; z(i): its true label.
struct PredictionTable
{
  LabelMatrix h;
  LabelVector z;
};

/// n x s matrix with entries exactly +1 (scale j right on sample i) or -1.
class DecisionMatrix
{
public:
  explicit DecisionMatrix(Eigen::MatrixXd values);

  Index samples() const noexcept { return values_.rows(); }
  Index scales() const noexcept { return values_.cols(); }
  const Eigen::MatrixXd& values() const noexcept { return values_; }

private:
  Eigen::MatrixXd values_;
};

DecisionMatrix build_decision_matrix(const PredictionTable& table);

struct FusionOptions
{
  /// Lower bound on every weight; 0 relaxes the strict positivity constraint.
  double floor = 0.0;
  int max_iter = 10000;
  /// Stop once L * ||sigma - P(sigma - grad / L)|| falls below this.
  double tolerance = 1e-8;
};

struct ScaleWeights
{
  Eigen::VectorXd sigma;
  double tau = 0.0;
  int iterations = 0;
  bool converged = false;
};

double fusion_objective(const DecisionMatrix& D, const Eigen::VectorXd& sigma, double tau);
Eigen::VectorXd fusion_gradient(const DecisionMatrix& D, const Eigen::VectorXd& sigma, double tau);

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration.
double power_iteration(const Eigen::MatrixXd& spd, int max_iter = 1000, double rel_tol = 1e-12);

ScaleWeights learn_scale_weights(const DecisionMatrix& D, double tau,
                                 const FusionOptions& options = {});

/// Worst violation of the first-order optimality conditions at `sigma`:
/// |grad_i| where sigma_i > floor, max(0, -grad_i) where sigma_i sits on the floor.
double kkt_violation(const DecisionMatrix& D, const Eigen::VectorXd& sigma, double tau,
                     double floor = 0.0);

/// Weighted vote over the labels present in `preds`; ties go to the smallest label.
Label fuse(std::span<const Label> preds, const ScaleWeights& weights);

} // namespace fsrl
