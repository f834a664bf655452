#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsrl/errors.hpp"

namespace fsrl {

using Index = Eigen::Index;
using Label = std::int64_t;

template<typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template<typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Throws ZeroDimensionError or NonFiniteError on the first violation found.
/// Positions are reported as (row, col) of `data`; `map` is -1 for vector sets.
template<typename Derived>
void validate_dense(const Eigen::MatrixBase<Derived>& data)
{
  if (data.rows() < 1 || data.cols() < 1)
    throw ZeroDimensionError("feature set has zero dimension (" +
                             std::to_string(data.rows()) + "x" +
                             std::to_string(data.cols()) + ")");
  for (Index j = 0; j < data.cols(); ++j)
    for (Index i = 0; i < data.rows(); ++i)
      if (!std::isfinite(static_cast<double>(data(i, j))))
        throw NonFiniteError(-1, i, j);
}

/// A bag of d-dimensional feature vectors, one column per flattened feature map.
template<typename Scalar_ = double>
class FeatureSet
{
public:
  using Scalar = Scalar_;

  explicit FeatureSet(Matrix<Scalar> data)
    : data_(std::move(data))
  {
    validate_dense(data_);
  }

  Index dim() const noexcept { return data_.rows(); }
  Index size() const noexcept { return data_.cols(); }
  const Matrix<Scalar>& data() const noexcept { return data_; }

private:
  Matrix<Scalar> data_;
};

/// A bag of p x q feature maps. Maps are stored flattened column-major, one
/// per column of `stack()`, so vec/unvec is a reinterpretation of storage.
template<typename Scalar_ = double>
class MatrixFeatureSet
{
public:
  using Scalar = Scalar_;
  using MapView = Eigen::Map<const Matrix<Scalar>>;

  MatrixFeatureSet(Index rows, Index cols, Matrix<Scalar> stack)
    : rows_(rows)
    , cols_(cols)
    , stack_(std::move(stack))
  {
    if (rows_ < 1 || cols_ < 1)
      throw ZeroDimensionError("map shape must be at least 1x1");
    if (stack_.rows() != rows_ * cols_)
      throw DimensionMismatchError("stack has " + std::to_string(stack_.rows()) +
                                   " rows, expected p*q = " +
                                   std::to_string(rows_ * cols_));
    check_finite();
  }

  explicit MatrixFeatureSet(std::span<const Matrix<Scalar>> maps)
  {
    if (maps.empty())
      throw ZeroDimensionError("empty map list");
    rows_ = maps.front().rows();
    cols_ = maps.front().cols();
    if (rows_ < 1 || cols_ < 1)
      throw ZeroDimensionError("map shape must be at least 1x1");
    stack_.resize(rows_ * cols_, static_cast<Index>(maps.size()));
    for (std::size_t k = 0; k < maps.size(); ++k) {
      if (maps[k].rows() != rows_ || maps[k].cols() != cols_)
        throw DimensionMismatchError("map " + std::to_string(k) + " is " +
                                     std::to_string(maps[k].rows()) + "x" +
                                     std::to_string(maps[k].cols()) + ", expected " +
                                     std::to_string(rows_) + "x" + std::to_string(cols_));
      stack_.col(static_cast<Index>(k)) = maps[k].reshaped();
    }
    check_finite();
  }

  explicit MatrixFeatureSet(const std::vector<Matrix<Scalar>>& maps)
    : MatrixFeatureSet(std::span<const Matrix<Scalar>>(maps))
  {
  }

  Index map_rows() const noexcept { return rows_; }
  Index map_cols() const noexcept { return cols_; }
  Index size() const noexcept { return stack_.cols(); }
  const Matrix<Scalar>& stack() const noexcept { return stack_; }

  MapView map(Index k) const { return MapView(stack_.col(k).data(), rows_, cols_); }

  std::vector<Matrix<Scalar>> maps() const
  {
    std::vector<Matrix<Scalar>> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (Index k = 0; k < size(); ++k)
      out.emplace_back(map(k));
    return out;
  }

  FeatureSet<Scalar> as_vectors() const { return FeatureSet<Scalar>(stack_); }

private:
  void check_finite() const
  {
    if (stack_.cols() < 1)
      throw ZeroDimensionError("empty map list");
    for (Index k = 0; k < stack_.cols(); ++k)
      for (Index i = 0; i < stack_.rows(); ++i)
        if (!std::isfinite(static_cast<double>(stack_(i, k))))
          throw NonFiniteError(k, i % rows_, i / rows_);
  }

  Index rows_ = 0;
  Index cols_ = 0;
  Matrix<Scalar> stack_;
};

/// Column-major flattening of one map.
template<typename Derived>
auto vec(const Eigen::MatrixBase<Derived>& map)
{
  return Vector<typename Derived::Scalar>(map.reshaped());
}

template<typename Derived>
auto unvec(const Eigen::MatrixBase<Derived>& v, Index rows, Index cols)
{
  if (v.size() != rows * cols)
    throw DimensionMismatchError("cannot reshape length " + std::to_string(v.size()) +
                                 " to " + std::to_string(rows) + "x" +
                                 std::to_string(cols));
  return Matrix<typename Derived::Scalar>(v.reshaped(rows, cols));
}

template<typename Set>
struct LabeledSet
{
  Label label;
  Set set;
};

/// Labeled gallery: every class's maps concatenated into one stack, plus the
/// per-class column ranges. Vector-form galleries use map shape (d, 1).
template<typename Scalar_ = double>
class Gallery
{
public:
  using Scalar = Scalar_;

  struct ClassRange
  {
    Label label;
    Index begin;
    Index end;

    Index size() const noexcept { return end - begin; }
  };

  Gallery(Index map_rows, Index map_cols, Matrix<Scalar> stack,
          std::vector<ClassRange> classes)
    : map_rows_(map_rows)
    , map_cols_(map_cols)
    , stack_(std::move(stack))
    , classes_(std::move(classes))
  {
  }

  Index map_rows() const noexcept { return map_rows_; }
  Index map_cols() const noexcept { return map_cols_; }
  Index dim() const noexcept { return stack_.rows(); }
  Index size() const noexcept { return stack_.cols(); }
  Index num_classes() const noexcept { return static_cast<Index>(classes_.size()); }

  const Matrix<Scalar>& stack() const noexcept { return stack_; }
  const std::vector<ClassRange>& classes() const noexcept { return classes_; }
  const ClassRange& range(Index c) const { return classes_.at(static_cast<std::size_t>(c)); }

  auto class_stack(Index c) const
  {
    const auto& r = range(c);
    return stack_.middleCols(r.begin, r.size());
  }

  std::vector<Label> labels() const
  {
    std::vector<Label> out;
    out.reserve(classes_.size());
    for (const auto& c : classes_)
      out.push_back(c.label);
    return out;
  }

  /// Class position of `label`, or -1.
  Index find(Label label) const
  {
    for (std::size_t c = 0; c < classes_.size(); ++c)
      if (classes_[c].label == label)
        return static_cast<Index>(c);
    return -1;
  }

  /// Stack column -> (class position, index within the class).
  std::pair<Index, Index> locate(Index column) const
  {
    if (column < 0 || column >= size())
      throw std::out_of_range("gallery column out of range");
    auto it = std::upper_bound(classes_.begin(), classes_.end(), column,
                               [](Index col, const ClassRange& r) { return col < r.end; });
    return { static_cast<Index>(it - classes_.begin()), column - it->begin };
  }

  Index column(Index class_pos, Index local) const
  {
    const auto& r = range(class_pos);
    if (local < 0 || local >= r.size())
      throw std::out_of_range("local index out of range");
    return r.begin + local;
  }

private:
  Index map_rows_;
  Index map_cols_;
  Matrix<Scalar> stack_;
  std::vector<ClassRange> classes_;
};

namespace detail {

template<typename Scalar, typename Item, typename ShapeOf, typename StackOf>
Gallery<Scalar> concat(std::span<const Item> classes, ShapeOf shape_of, StackOf stack_of)
{
  if (classes.empty())
    throw EmptyClassError("gallery needs at least one class");
  const auto [rows, cols] = shape_of(classes.front().set);
  std::set<Label> seen;
  Index total = 0;
  for (const auto& c : classes) {
    if (!seen.insert(c.label).second)
      throw DuplicateLabelError("duplicate class label " + std::to_string(c.label));
    const auto [r, q] = shape_of(c.set);
    if (r != rows || q != cols)
      throw DimensionMismatchError("class " + std::to_string(c.label) + " has shape " +
                                   std::to_string(r) + "x" + std::to_string(q) +
                                   ", expected " + std::to_string(rows) + "x" +
                                   std::to_string(cols));
    if (stack_of(c.set).cols() < 1)
      throw EmptyClassError("class " + std::to_string(c.label) + " is empty");
    total += stack_of(c.set).cols();
  }

  Matrix<Scalar> stack(rows * cols, total);
  std::vector<typename Gallery<Scalar>::ClassRange> ranges;
  ranges.reserve(classes.size());
  Index at = 0;
  for (const auto& c : classes) {
    const auto& s = stack_of(c.set);
    stack.middleCols(at, s.cols()) = s;
    ranges.push_back({ c.label, at, at + s.cols() });
    at += s.cols();
  }
  return Gallery<Scalar>(rows, cols, std::move(stack), std::move(ranges));
}

} // namespace detail

template<typename Scalar>
Gallery<Scalar> concat_gallery(std::span<const LabeledSet<FeatureSet<Scalar>>> classes)
{
  return detail::concat<Scalar>(
    classes,
    [](const FeatureSet<Scalar>& s) { return std::pair<Index, Index>{ s.dim(), 1 }; },
    [](const FeatureSet<Scalar>& s) -> const Matrix<Scalar>& { return s.data(); });
}

template<typename Scalar>
Gallery<Scalar> concat_gallery(std::span<const LabeledSet<MatrixFeatureSet<Scalar>>> classes)
{
  return detail::concat<Scalar>(
    classes,
    [](const MatrixFeatureSet<Scalar>& s) {
      return std::pair<Index, Index>{ s.map_rows(), s.map_cols() };
    },
    [](const MatrixFeatureSet<Scalar>& s) -> const Matrix<Scalar>& { return s.stack(); });
}

template<typename Scalar>
Gallery<Scalar> concat_gallery(const std::vector<LabeledSet<FeatureSet<Scalar>>>& classes)
{
  return concat_gallery<Scalar>(std::span<const LabeledSet<FeatureSet<Scalar>>>(classes));
}

template<typename Scalar>
Gallery<Scalar> concat_gallery(const std::vector<LabeledSet<MatrixFeatureSet<Scalar>>>& classes)
{
  return concat_gallery<Scalar>(std::span<const LabeledSet<MatrixFeatureSet<Scalar>>>(classes));
}

struct SolverDiagnostics
{
  int iterations = 0;
  double final_primal_residual = 0.0;
  double objective = 0.0;
  bool converged = true;
  /// Multiplier of the sum-to-one constraint (phi for the closed form, gamma for ADMM).
  double multiplier = 0.0;
};

template<typename Scalar>
struct HullSolution
{
  Vector<Scalar> alpha;
  Vector<Scalar> beta;
  SolverDiagnostics diagnostics;
};

} // namespace fsrl
