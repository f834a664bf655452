#pragma once

// Seeded Gaussian class model for desk-scale experiments, plus a square-patch
// occlusion corruption. Every random stream is derived from (seed, purpose,
// class or map index) so results do not depend on generation order.

#include <cstdint>
#include <random>
#include <vector>

#include "fsrl/core_types.hpp"

namespace fsrl {

struct SynthConfig
{
  Index num_classes = 10;
  Index maps_per_class = 4;
  Index rows = 8; // p, or d for vector form
  Index cols = 8; // q, 1 for vector form
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
  /// Scale of the class prototypes (entries ~ N(0, separation^2)).
  double separation = 1.0;
  /// 0: dense Gaussian prototypes. r > 0: rank-r prototypes with the same entry scale.
  Index prototype_rank = 0;

  void check() const;
};

struct SynthGallery
{
  Gallery<double> gallery;
  std::vector<Matrix<double>> prototypes;
};

/// Class k gets label k.
SynthGallery gen_gallery(const SynthConfig& config);

Matrix<double> gen_prototype(const SynthConfig& config, Index class_id);

/// `draw` selects an independent query stream for the same class.
MatrixFeatureSet<double> gen_query(const SynthConfig& config, Index class_id, Index n_a,
                                   std::uint64_t draw);

enum class FillKind
{
  constant,
  structured,
};

struct OcclusionSpec
{
  double fraction = 0.0;
  FillKind fill = FillKind::constant;
  /// Constant fill value, or amplitude of the structured texture.
  double value = 0.0;
  std::uint64_t seed = 0;

  void check() const;
};

/// Occluded region size for a p x q map: ceil(fraction * p * q) entries laid
/// out column-major in a near-square block of height x width.
struct OcclusionGeometry
{
  Index count;
  Index height;
  Index width;
};

OcclusionGeometry occlusion_geometry(double fraction, Index rows, Index cols);

/// Smooth deterministic texture (bilinear upsampling of a seeded coarse grid).
Matrix<double> structured_texture(Index rows, Index cols, double amplitude, std::uint64_t seed);

/// Overwrites one block per map, at a seeded random position per map.
MatrixFeatureSet<double> occlude(const MatrixFeatureSet<double>& set, const OcclusionSpec& spec);

/// Deterministic engine for (seed, purpose, a, b).
std::mt19937_64 derived_engine(std::uint64_t seed, std::uint64_t purpose, std::uint64_t a,
                               std::uint64_t b = 0);

} // namespace fsrl
