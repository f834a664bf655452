#pragma once

#include <limits>
#include <string_view>

#include "fsrl/matrix_cr.hpp"
#include "fsrl/vector_cr.hpp"

namespace fsrl {

enum class SolverKind
{
  vector,
  matrix,
};

inline std::string_view to_string(SolverKind kind)
{
  return kind == SolverKind::vector ? "vector" : "matrix";
}

inline SolverKind parse_solver_kind(std::string_view name)
{
  if (name == "vector")
    return SolverKind::vector;
  if (name == "matrix")
    return SolverKind::matrix;
  throw InvalidParameterError("unknown solver '" + std::string(name) +
                              "' (expected vector or matrix)");
}

struct ClassifierParams
{
  SolverKind solver = SolverKind::vector;
  VectorCRParams vector;
  MatrixCRParams matrix;
};

/// Below this squared coefficient norm a class counts as unrepresented.
inline constexpr double unrepresented_floor = 1e-12;

template<typename Scalar>
struct ClassDecision
{
  Label label = 0;
  /// r_c per class, in gallery class order; +inf for unrepresented classes.
  Eigen::VectorXd residuals;
  /// second-best minus best residual; +inf with a single class.
  double margin = 0.0;
  HullSolution<Scalar> solution;
};

/// r_c = ||Y(a) - X_c(b_c)||_F^2 / ||b_c||^2 for the class at gallery position
/// `class_pos`. Works on the flattened stacks, so vector and matrix forms agree.
template<typename Scalar>
double class_residual(const HullSolution<Scalar>& solution, const Matrix<Scalar>& query_stack,
                      const Gallery<Scalar>& gallery, Index class_pos)
{
  if (class_pos < 0 || class_pos >= gallery.num_classes())
    throw std::out_of_range("class position " + std::to_string(class_pos) + " not in gallery");
  if (solution.alpha.size() != query_stack.cols() || solution.beta.size() != gallery.size() ||
      query_stack.rows() != gallery.dim())
    throw DimensionMismatchError("class_residual: solution does not match query/gallery");

  const auto& r = gallery.range(class_pos);
  const auto beta_c = solution.beta.segment(r.begin, r.size());
  const double coeff = static_cast<double>(beta_c.squaredNorm());
  if (!(coeff >= unrepresented_floor))
    return std::numeric_limits<double>::infinity();
  const Vector<Scalar> diff = query_stack * solution.alpha - gallery.class_stack(class_pos) * beta_c;
  return static_cast<double>(diff.squaredNorm()) / coeff;
}

template<typename Scalar>
double class_residual(const HullSolution<Scalar>& solution, const FeatureSet<Scalar>& query,
                      const Gallery<Scalar>& gallery, Index class_pos)
{
  return class_residual(solution, query.data(), gallery, class_pos);
}

template<typename Scalar>
double class_residual(const HullSolution<Scalar>& solution, const MatrixFeatureSet<Scalar>& query,
                      const Gallery<Scalar>& gallery, Index class_pos)
{
  return class_residual(solution, query.stack(), gallery, class_pos);
}

/// Residuals within this relative distance of the minimum count as tied.
inline constexpr double residual_tie_tolerance = 1e-9;

/// Argmin over residuals; ties go to the smallest label.
template<typename Scalar>
ClassDecision<Scalar> decide(const Gallery<Scalar>& gallery, Eigen::VectorXd residuals,
                             HullSolution<Scalar> solution)
{
  double lowest = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < residuals.size(); ++c)
    if (std::isfinite(residuals[c]))
      lowest = std::min(lowest, residuals[c]);
  if (!std::isfinite(lowest))
    throw NoRepresentableClassError("every class has a zero coefficient block; no class "
                                    "represents the query");

  const double cutoff = lowest + residual_tie_tolerance * lowest;
  Index best = -1;
  for (Index c = 0; c < residuals.size(); ++c)
    if (residuals[c] <= cutoff && (best < 0 || gallery.range(c).label < gallery.range(best).label))
      best = c;

  double second = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < residuals.size(); ++c)
    if (c != best)
      second = std::min(second, residuals[c]);

  ClassDecision<Scalar> out;
  out.label = gallery.range(best).label;
  out.margin = std::max(0.0, second - residuals[best]);
  out.residuals = std::move(residuals);
  out.solution = std::move(solution);
  return out;
}

template<typename Scalar>
ClassDecision<Scalar> classify(const MatrixFeatureSet<Scalar>& query, const Gallery<Scalar>& gallery,
                               const ClassifierParams& params)
{
  if (gallery.num_classes() < 1)
    throw EmptyClassError("gallery has no classes");
  auto solution = params.solver == SolverKind::vector
                    ? solve_vector_hull(query.as_vectors(), gallery, params.vector)
                    : solve_matrix_hull(query, gallery, params.matrix);
  Eigen::VectorXd residuals(gallery.num_classes());
  for (Index c = 0; c < gallery.num_classes(); ++c)
    residuals[c] = class_residual(solution, query.stack(), gallery, c);
  return decide(gallery, std::move(residuals), std::move(solution));
}

template<typename Scalar>
ClassDecision<Scalar> classify(const FeatureSet<Scalar>& query, const Gallery<Scalar>& gallery,
                               const ClassifierParams& params)
{
  return classify(MatrixFeatureSet<Scalar>(gallery.map_rows(), gallery.map_cols(), query.data()),
                  gallery, params);
}

} // namespace fsrl
