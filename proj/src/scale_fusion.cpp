#include "fsrl/scale_fusion.hpp"

#include <algorithm>
#include <map>

namespace fsrl {

DecisionMatrix::DecisionMatrix(Eigen::MatrixXd values)
  : values_(std::move(values))
{
  if (values_.rows() < 1 || values_.cols() < 1)
    throw ZeroDimensionError("decision matrix needs at least one sample and one scale");
  for (Index j = 0; j < values_.cols(); ++j)
    for (Index i = 0; i < values_.rows(); ++i)
      if (values_(i, j) != 1.0 && values_(i, j) != -1.0)
        throw InvalidParameterError("decision matrix entry (" + std::to_string(i) + "," +
                                    std::to_string(j) + ") is not +-1");
}

DecisionMatrix build_decision_matrix(const PredictionTable& table)
{
  if (table.h.rows() != table.z.size())
    throw DimensionMismatchError("prediction table has " + std::to_string(table.h.rows()) +
                                 " prediction rows but " + std::to_string(table.z.size()) +
                                 " true labels");
  Eigen::MatrixXd D(table.h.rows(), table.h.cols());
  for (Index j = 0; j < D.cols(); ++j)
    for (Index i = 0; i < D.rows(); ++i)
      D(i, j) = table.h(i, j) == table.z(i) ? 1.0 : -1.0;
  return DecisionMatrix(std::move(D));
}

namespace {

Eigen::MatrixXd augmented(const DecisionMatrix& D)
{
  Eigen::MatrixXd out(D.samples() + 1, D.scales());
  out.topRows(D.samples()) = D.values();
  out.bottomRows(1).setOnes();
  return out;
}

} // namespace

double fusion_objective(const DecisionMatrix& D, const Eigen::VectorXd& sigma, double tau)
{
  const Eigen::MatrixXd Dh = augmented(D);
  return (Eigen::VectorXd::Ones(Dh.rows()) - Dh * sigma).squaredNorm() + tau * sigma.sum();
}

Eigen::VectorXd fusion_gradient(const DecisionMatrix& D, const Eigen::VectorXd& sigma, double tau)
{
  const Eigen::MatrixXd Dh = augmented(D);
  const Eigen::VectorXd r = Dh * sigma - Eigen::VectorXd::Ones(Dh.rows());
  return 2.0 * Dh.transpose() * r + Eigen::VectorXd::Constant(sigma.size(), tau);
}

double power_iteration(const Eigen::MatrixXd& spd, int max_iter, double rel_tol)
{
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(spd.rows(), 1.0, 2.0).normalized();
  double lambda = 0.0;
  for (int k = 0; k < max_iter; ++k) {
    Eigen::VectorXd w = spd * v;
    const double norm = w.norm();
    if (norm == 0.0)
      return 0.0;
    const double next = v.dot(w);
    v = w / norm;
    if (std::abs(next - lambda) <= rel_tol * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

ScaleWeights learn_scale_weights(const DecisionMatrix& D, double tau, const FusionOptions& options)
{
  if (!(tau >= 0.0))
    throw InvalidParameterError("tau must be nonnegative");
  if (!(options.floor >= 0.0))
    throw InvalidParameterError("weight floor must be nonnegative");

  const Eigen::MatrixXd Dh = augmented(D);
  const Eigen::MatrixXd gram = Dh.transpose() * Dh;
  const Eigen::VectorXd lin = Dh.transpose() * Eigen::VectorXd::Ones(Dh.rows());
  const Index s = D.scales();

  // gradient of the objective is 2 (gram sigma - lin) + tau; its Lipschitz
  // constant is 2 lambda_max(gram). The 1% margin covers power-iteration slack.
  double L = 2.0 * 1.01 * power_iteration(gram);
  if (!(L > 0.0))
    L = 1.0;

  auto grad = [&](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(2.0 * (gram * x - lin) + Eigen::VectorXd::Constant(s, tau));
  };
  auto objective = [&](const Eigen::VectorXd& x) {
    return x.dot(gram * x) - 2.0 * lin.dot(x) + tau * x.sum();
  };

  ScaleWeights out;
  out.tau = tau;
  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(s, std::max(1.0 / s, options.floor));
  double f = objective(sigma);
  for (int k = 0; k < options.max_iter; ++k) {
    const Eigen::VectorXd g = grad(sigma);
    Eigen::VectorXd next = (sigma - g / L).cwiseMax(options.floor);
    double f_next = objective(next);
    // safeguard in case the eigenvalue estimate fell short
    while (f_next > f + 1e-15 * (1.0 + std::abs(f)) && L < 1e300) {
      L *= 2.0;
      next = (sigma - g / L).cwiseMax(options.floor);
      f_next = objective(next);
    }
    const double step = L * (next - sigma).norm();
    sigma = std::move(next);
    f = f_next;
    out.iterations = k + 1;
    if (step <= options.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.sigma = std::move(sigma);
  return out;
}

double kkt_violation(const DecisionMatrix& D, const Eigen::VectorXd& sigma, double tau, double floor)
{
  const Eigen::VectorXd g = fusion_gradient(D, sigma, tau);
  double worst = 0.0;
  for (Index i = 0; i < sigma.size(); ++i) {
    if (sigma[i] > floor)
      worst = std::max(worst, std::abs(g[i]));
    else
      worst = std::max(worst, std::max(0.0, -g[i]));
  }
  return worst;
}

Label fuse(std::span<const Label> preds, const ScaleWeights& weights)
{
  if (preds.empty())
    throw ZeroDimensionError("fuse: empty prediction vector");
  if (static_cast<Index>(preds.size()) != weights.sigma.size())
    throw DimensionMismatchError("fuse: " + std::to_string(preds.size()) + " predictions for " +
                                 std::to_string(weights.sigma.size()) + " weights");
  std::map<Label, double> score;
  for (std::size_t j = 0; j < preds.size(); ++j)
    score[preds[j]] += weights.sigma[static_cast<Index>(j)];
  // std::map iterates in ascending label order, so strict > keeps the smallest on ties
  auto best = score.begin();
  for (auto it = score.begin(); it != score.end(); ++it)
    if (it->second > best->second)
      best = it;
  return best->first;
}

} // namespace fsrl
