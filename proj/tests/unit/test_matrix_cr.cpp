#include "doctest.h"

#include "fsrl/matrix_cr.hpp"
#include "oracles/nuclear_hull_oracle.hpp"
#include "test_support.hpp"

using namespace fsrl;
using fsrl::testing::gaussian;
using fsrl::testing::uniform_int;

namespace {

/// argmin_{s' >= 0} t s' + (s' - s)^2 / 2, by bisection on the sign of the derivative t + s' - s.
double scalar_prox(double s, double t)
{
  auto slope = [&](double x) { return t + x - s; };
  if (slope(0.0) >= 0.0)
    return 0.0;
  double lo = 0.0;
  double hi = std::abs(s) + t + 1.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double prox_objective(const Eigen::MatrixXd& E, const Eigen::MatrixXd& F, double t)
{
  return t * oracle::nuclear(E) + 0.5 * (E - F).squaredNorm();
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m)
{
  return Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues();
}

struct Problem
{
  MatrixFeatureSet<double> query;
  Gallery<double> gallery;
};

Problem random_problem(std::mt19937_64& rng, Index p, Index q, Index na, Index nb)
{
  return { MatrixFeatureSet<double>(p, q, gaussian(rng, p * q, na)),
           fsrl::testing::random_gallery(rng, p, q, fsrl::testing::random_partition(rng, nb, 4)) };
}

AdmmState<double> random_state(std::mt19937_64& rng, const Problem& pr, double mu)
{
  auto s = AdmmState<double>::zeros(pr.query.size(), pr.gallery.size(), pr.query.map_rows(),
                                    pr.query.map_cols(), mu);
  s.alpha = gaussian(rng, pr.query.size(), 1);
  s.beta = gaussian(rng, pr.gallery.size(), 1);
  s.E = gaussian(rng, pr.query.map_rows(), pr.query.map_cols());
  s.Z = gaussian(rng, pr.query.map_rows(), pr.query.map_cols());
  s.gamma = gaussian(rng, 1, 1)(0);
  return s;
}

Eigen::VectorXd alpha_target(const AdmmState<double>& s, const Problem& pr)
{
  const Eigen::MatrixXd m = combine(pr.gallery, s.beta) + s.E - s.Z / s.mu;
  Eigen::VectorXd x(m.size() + 1);
  x << m.reshaped(), 1.0 - s.gamma / s.mu;
  return x;
}

Eigen::MatrixXd alpha_design(const Problem& pr)
{
  Eigen::MatrixXd Yt(pr.query.stack().rows() + 1, pr.query.size());
  Yt << pr.query.stack(), Eigen::RowVectorXd::Ones(pr.query.size());
  return Yt;
}

} // namespace

TEST_CASE("combine examples")
{
  std::mt19937_64 rng(20);
  const MatrixFeatureSet<double> set(3, 2, gaussian(rng, 6, 4));
  for (Index k = 0; k < 4; ++k)
    CHECK(combine(set, Eigen::VectorXd::Unit(4, k)) == Eigen::MatrixXd(set.map(k)));
  CHECK(combine(set, Eigen::VectorXd::Zero(4)) == Eigen::MatrixXd::Zero(3, 2));

  const MatrixFeatureSet<double> two(3, 2, gaussian(rng, 6, 2));
  const Eigen::MatrixXd mean = combine(two, Eigen::Vector2d(0.5, 0.5));
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 2; ++j)
      CHECK(mean(i, j) == doctest::Approx(0.5 * (two.map(0)(i, j) + two.map(1)(i, j))));

  CHECK_THROWS_AS(combine(set, Eigen::VectorXd::Zero(3)), DimensionMismatchError);
}

TEST_CASE("prox_nuclear examples")
{
  Eigen::MatrixXd F = Eigen::Vector2d(3, 1).asDiagonal();
  const Eigen::MatrixXd E = prox_nuclear(F, 2.0);
  CHECK((E - Eigen::MatrixXd(Eigen::Vector2d(1, 0).asDiagonal())).norm() <= 1e-12);
  CHECK(prox_nuclear(Eigen::MatrixXd::Zero(3, 4), 0.5).norm() == 0.0);

  CHECK_THROWS_AS(prox_nuclear(F, 0.0), InvalidParameterError);
  CHECK_THROWS_AS(prox_nuclear(F, -1.0), InvalidParameterError);
  F(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(prox_nuclear(F, 1.0), DivergenceError);
}

TEST_CASE("prox_nuclear matches the scalar oracle and beats random perturbations")
{
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    const Index p = t == 0 ? 5 : uniform_int(rng, 1, 8);
    const Index q = t == 0 ? 4 : uniform_int(rng, 1, 8);
    const Eigen::MatrixXd F = gaussian(rng, p, q);
    const double thr = t == 0 ? 0.3 : std::uniform_real_distribution<double>(0.05, 2.0)(rng);
    const Eigen::MatrixXd E = prox_nuclear(F, thr);

    const Eigen::VectorXd sf = singular_values(F);
    const Eigen::VectorXd se = singular_values(E);
    for (Index j = 0; j < sf.size(); ++j)
      CHECK(std::abs(se(j) - scalar_prox(sf(j), thr)) <= 1e-9);
    CHECK(se.maxCoeff() <= std::max(0.0, sf.maxCoeff() - thr) + 1e-9);

    const double best = prox_objective(E, F, thr);
    for (int k = 0; k < 1000; ++k) {
      const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-6.0, 0.0)(rng));
      CHECK(best <= prox_objective(E + gaussian(rng, p, q, scale), F, thr) + 1e-12);
    }
  }
}

TEST_CASE("update_alpha: scalar ridge, stationarity, shrinkage")
{
  std::mt19937_64 rng(22);
  SUBCASE("single query map")
  {
    const auto pr = random_problem(rng, 3, 4, 1, 5);
    MatrixCRParams params;
    params.lambda1 = 0.3;
    params.mu = 1.7;
    const auto s = random_state(rng, pr, params.mu);
    const Eigen::VectorXd a = update_alpha(s, pr.query, pr.gallery, params);
    const Eigen::VectorXd y = alpha_design(pr).col(0);
    const Eigen::VectorXd x = alpha_target(s, pr);
    const double eta = 2.0 * params.lambda1 / params.mu;
    const double want = y.dot(x) / (y.dot(y) + eta);
    CHECK(std::abs(a(0) - want) <= 1e-12 * (1.0 + std::abs(want)));
  }
  SUBCASE("gradient of the subproblem vanishes")
  {
    for (int t = 0; t < 20; ++t) {
      const auto pr = random_problem(rng, uniform_int(rng, 1, 6), uniform_int(rng, 1, 6),
                                     uniform_int(rng, 1, 4), uniform_int(rng, 1, 10));
      MatrixCRParams params;
      params.lambda1 = std::uniform_real_distribution<double>(1e-3, 2.0)(rng);
      params.mu = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
      const auto s = random_state(rng, pr, params.mu);
      const Eigen::VectorXd a = update_alpha(s, pr.query, pr.gallery, params);
      const Eigen::MatrixXd Yt = alpha_design(pr);
      const Eigen::VectorXd x = alpha_target(s, pr);
      const double eta = 2.0 * params.lambda1 / params.mu;
      CHECK((Yt.transpose() * (Yt * a - x) + eta * a).norm() <= 1e-8 * (1.0 + x.norm()));
    }
  }
  SUBCASE("large eta shrinks alpha toward zero")
  {
    for (int t = 0; t < 10; ++t) {
      const auto pr = random_problem(rng, 4, 4, 3, 6);
      auto s = random_state(rng, pr, 1.0);
      s.Z *= 0.1;
      MatrixCRParams small;
      small.lambda1 = 0.5; // eta = 1
      MatrixCRParams large;
      large.lambda1 = 0.5e8; // eta = 1e8
      const double a1 = update_alpha(s, pr.query, pr.gallery, small).norm();
      const double a8 = update_alpha(s, pr.query, pr.gallery, large).norm();
      CHECK(a8 <= 1e-6 * a1);
    }
  }
  SUBCASE("singular subproblem")
  {
    const auto pr = random_problem(rng, 1, 1, 3, 2);
    MatrixCRParams params;
    params.lambda1 = 0.0;
    const auto s = random_state(rng, pr, 1.0);
    CHECK_THROWS_AS(update_alpha(s, pr.query, pr.gallery, params), SingularSystemError);
  }
}

TEST_CASE("update_beta: zero target, scalar ridge, stationarity")
{
  std::mt19937_64 rng(23);
  SUBCASE("zero target gives zero beta")
  {
    const auto pr = random_problem(rng, 3, 3, 2, 4);
    const auto s = AdmmState<double>::zeros(2, pr.gallery.size(), 3, 3, 1.0);
    CHECK(update_beta(s, pr.query, pr.gallery, MatrixCRParams{}).norm() == 0.0);
  }
  SUBCASE("single gallery map")
  {
    const auto pr = random_problem(rng, 2, 5, 2, 1);
    MatrixCRParams params;
    params.lambda2 = 0.4;
    params.mu = 0.8;
    const auto s = random_state(rng, pr, params.mu);
    const Eigen::VectorXd b = update_beta(s, pr.query, pr.gallery, params);
    const Eigen::VectorXd x = pr.gallery.stack().col(0);
    const Eigen::VectorXd y = (combine(pr.query, s.alpha) - s.E + s.Z / s.mu).reshaped();
    const double rho = 2.0 * params.lambda2 / params.mu;
    const double want = x.dot(y) / (x.dot(x) + rho);
    CHECK(std::abs(b(0) - want) <= 1e-12 * (1.0 + std::abs(want)));
  }
  SUBCASE("stationarity")
  {
    for (int t = 0; t < 20; ++t) {
      const auto pr = random_problem(rng, uniform_int(rng, 1, 6), uniform_int(rng, 1, 6),
                                     uniform_int(rng, 1, 4), uniform_int(rng, 1, 10));
      MatrixCRParams params;
      params.lambda2 = std::uniform_real_distribution<double>(1e-3, 2.0)(rng);
      params.mu = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
      const auto s = random_state(rng, pr, params.mu);
      const Eigen::VectorXd b = update_beta(s, pr.query, pr.gallery, params);
      const Eigen::MatrixXd& X = pr.gallery.stack();
      const Eigen::VectorXd y = (combine(pr.query, s.alpha) - s.E + s.Z / s.mu).reshaped();
      const double rho = 2.0 * params.lambda2 / params.mu;
      CHECK((X.transpose() * (X * b - y) + rho * b).norm() <= 1e-8 * (1.0 + y.norm()));
    }
  }
}

TEST_CASE("ADMM: gallery identical to the query")
{
  std::mt19937_64 rng(24);
  const Eigen::MatrixXd Y = gaussian(rng, 25, 3);
  const MatrixFeatureSet<double> query(5, 5, Y);
  const auto gallery = concat_gallery(std::vector<LabeledSet<MatrixFeatureSet<double>>>{ { 0, query } });
  MatrixCRParams params;
  params.lambda1 = params.lambda2 = 1e-4;
  params.mu = 1.0;
  const auto sol = solve_matrix_hull(query, gallery, params);
  CHECK(sol.diagnostics.converged);
  CHECK(sol.diagnostics.final_primal_residual <= 1e-6);
  CHECK((combine(query, sol.alpha) - combine(gallery, sol.beta)).norm() <= 1e-2);

  const auto oracle = oracle::solve_nuclear_hull_dual(Y, Y, 5, 5, 1e-4, 1e-4);
  CHECK(oracle.gap() <= 1e-7 * (1.0 + oracle.primal));
  CHECK(sol.diagnostics.objective >= oracle.dual - 1e-12);
  CHECK(std::abs(sol.diagnostics.objective - oracle.primal) <= 1e-3 * (1.0 + oracle.primal));
}

TEST_CASE("ADMM: all-zero query gives uniform alpha and zero beta")
{
  std::mt19937_64 rng(25);
  for (Index na : { 1, 2, 3, 4 }) {
    const MatrixFeatureSet<double> query(4, 3, Eigen::MatrixXd::Zero(12, na));
    const auto gallery = fsrl::testing::random_gallery(rng, 4, 3, { 3, 2 });
    MatrixCRParams params;
    params.lambda1 = params.lambda2 = 0.5;
    const auto sol = solve_matrix_hull(query, gallery, params);
    CHECK(sol.diagnostics.converged);
    for (Index i = 0; i < na; ++i)
      CHECK(std::abs(sol.alpha(i) - 1.0 / static_cast<double>(na)) <= 1e-4);
    CHECK(sol.beta.norm() <= 1e-4);
  }
}

TEST_CASE("ADMM: random instance against the convex oracle")
{
  std::mt19937_64 rng(26);
  const auto pr = random_problem(rng, 6, 6, 3, 9);
  MatrixCRParams params;
  params.lambda1 = params.lambda2 = 1.0;
  const auto sol = solve_matrix_hull(pr.query, pr.gallery, params);
  CHECK(sol.diagnostics.converged);
  CHECK(sol.diagnostics.final_primal_residual <= 1e-6);
  CHECK(std::abs(sol.alpha.sum() - 1.0) <= 1e-4);
  const auto oracle =
    oracle::solve_nuclear_hull_dual(pr.query.stack(), pr.gallery.stack(), 6, 6, 1.0, 1.0);
  CHECK(std::abs(sol.diagnostics.objective - oracle.primal) <= 1e-3 * oracle.primal);
}

TEST_CASE("ADMM invariants: bounded iterations, finite iterates, observer trace")
{
  std::mt19937_64 rng(27);
  for (int t = 0; t < 10; ++t) {
    const auto pr = random_problem(rng, uniform_int(rng, 1, 8), uniform_int(rng, 1, 8),
                                   uniform_int(rng, 1, 4), uniform_int(rng, 1, 12));
    MatrixCRParams params;
    params.lambda1 = params.lambda2 = 1.0;
    params.max_iter = 40;
    int calls = 0;
    bool finite = true;
    const auto sol = solve_matrix_hull<double>(pr.query, pr.gallery, params,
                                               [&](const AdmmState<double>& s, double residual) {
                                                 ++calls;
                                                 finite = finite && s.alpha.allFinite() &&
                                                          s.beta.allFinite() && s.E.allFinite() &&
                                                          s.Z.allFinite() && std::isfinite(residual);
                                               });
    CHECK(finite);
    CHECK(sol.diagnostics.iterations == calls);
    CHECK(sol.diagnostics.iterations <= params.max_iter);
    if (!sol.diagnostics.converged)
      CHECK(sol.diagnostics.iterations == params.max_iter);
  }
}

TEST_CASE("ADMM: tightening epsilon never raises the final objective")
{
  std::mt19937_64 rng(28);
  for (int t = 0; t < 20; ++t) {
    const auto pr = random_problem(rng, uniform_int(rng, 1, 8), uniform_int(rng, 1, 8),
                                   uniform_int(rng, 1, 4), uniform_int(rng, 1, 12));
    double previous = std::numeric_limits<double>::infinity();
    for (double eps : { 1e-2, 1e-3, 1e-4, 1e-5, 1e-6 }) {
      MatrixCRParams params;
      params.lambda1 = params.lambda2 = 1.0;
      params.epsilon = eps;
      const auto sol = solve_matrix_hull(pr.query, pr.gallery, params);
      CHECK(sol.diagnostics.objective <= previous + 1e-12);
      previous = sol.diagnostics.objective;
    }
  }
}

TEST_CASE("ADMM: adaptive penalty also converges to the oracle value")
{
  std::mt19937_64 rng(29);
  const auto pr = random_problem(rng, 5, 4, 2, 6);
  MatrixCRParams params;
  params.lambda1 = params.lambda2 = 0.5;
  params.adaptive_mu = true;
  params.max_iter = 2000;
  const auto sol = solve_matrix_hull(pr.query, pr.gallery, params);
  CHECK(sol.diagnostics.converged);
  const auto oracle = oracle::solve_nuclear_hull_dual(pr.query.stack(), pr.gallery.stack(), 5, 4, 0.5, 0.5);
  CHECK(std::abs(sol.diagnostics.objective - oracle.primal) <= 1e-3 * oracle.primal);
}

TEST_CASE("ADMM parameter and shape errors")
{
  std::mt19937_64 rng(30);
  const auto pr = random_problem(rng, 3, 3, 2, 3);
  MatrixCRParams bad;
  bad.mu = 0.0;
  CHECK_THROWS_AS(solve_matrix_hull(pr.query, pr.gallery, bad), InvalidParameterError);
  bad = MatrixCRParams{};
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(solve_matrix_hull(pr.query, pr.gallery, bad), InvalidParameterError);
  bad = MatrixCRParams{};
  bad.max_iter = 0;
  CHECK_THROWS_AS(solve_matrix_hull(pr.query, pr.gallery, bad), InvalidParameterError);

  const MatrixFeatureSet<double> other(9, 1, pr.query.stack());
  CHECK_THROWS_AS(solve_matrix_hull(other, pr.gallery, MatrixCRParams{}), DimensionMismatchError);
}
