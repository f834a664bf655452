#pragma once

#include <random>
#include <vector>

#include "fsrl/core_types.hpp"

namespace fsrl::testing {

inline Eigen::MatrixXd gaussian(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0)
{
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i)
    m.data()[i] = g(rng);
  return m;
}

inline Index uniform_int(std::mt19937_64& rng, Index lo, Index hi)
{
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

/// Gallery whose class c holds sizes[c] random columns of dimension rows*cols, label c.
inline Gallery<double> random_gallery(std::mt19937_64& rng, Index rows, Index cols,
                                      const std::vector<Index>& sizes)
{
  std::vector<LabeledSet<MatrixFeatureSet<double>>> classes;
  for (std::size_t c = 0; c < sizes.size(); ++c)
    classes.push_back({ static_cast<Label>(c),
                        MatrixFeatureSet<double>(rows, cols, gaussian(rng, rows * cols, sizes[c])) });
  return concat_gallery(classes);
}

/// Splits n columns into 1..max_classes classes of random positive sizes.
inline std::vector<Index> random_partition(std::mt19937_64& rng, Index n, Index max_classes)
{
  Index k = uniform_int(rng, 1, std::min(n, max_classes));
  std::vector<Index> sizes(static_cast<std::size_t>(k), 1);
  for (Index extra = n - k; extra > 0; --extra)
    ++sizes[static_cast<std::size_t>(uniform_int(rng, 0, k - 1))];
  return sizes;
}

} // namespace fsrl::testing
