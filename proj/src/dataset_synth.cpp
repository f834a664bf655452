#include "fsrl/dataset_synth.hpp"

#include <cmath>

namespace fsrl {

namespace {

enum Purpose : std::uint64_t
{
  prototype_stream = 1,
  gallery_stream = 2,
  query_stream = 3,
  occlusion_position = 4,
  occlusion_texture = 5,
};

Matrix<double> gaussian(std::mt19937_64& rng, Index rows, Index cols, double scale)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<double> m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i)
      m(i, j) = scale * normal(rng);
  return m;
}

} // namespace

std::mt19937_64 derived_engine(std::uint64_t seed, std::uint64_t purpose, std::uint64_t a,
                               std::uint64_t b)
{
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{ lo(seed), hi(seed), lo(purpose), lo(a), hi(a), lo(b), hi(b) };
  return std::mt19937_64(seq);
}

void SynthConfig::check() const
{
  if (num_classes < 1 || maps_per_class < 1 || rows < 1 || cols < 1)
    throw InvalidParameterError("synth counts and map shape must be at least 1");
  if (!(noise_sigma >= 0.0) || !(separation >= 0.0))
    throw InvalidParameterError("noise_sigma and separation must be nonnegative");
  if (prototype_rank < 0)
    throw InvalidParameterError("prototype_rank must be nonnegative");
}

Matrix<double> gen_prototype(const SynthConfig& config, Index class_id)
{
  config.check();
  if (class_id < 0 || class_id >= config.num_classes)
    throw InvalidParameterError("class id " + std::to_string(class_id) + " out of range");
  auto rng = derived_engine(config.seed, prototype_stream, static_cast<std::uint64_t>(class_id));
  if (config.prototype_rank == 0)
    return gaussian(rng, config.rows, config.cols, config.separation);
  const Index r = config.prototype_rank;
  const Matrix<double> U = gaussian(rng, config.rows, r, 1.0);
  const Matrix<double> V = gaussian(rng, config.cols, r, 1.0);
  return (config.separation / std::sqrt(static_cast<double>(r))) * U * V.transpose();
}

SynthGallery gen_gallery(const SynthConfig& config)
{
  config.check();
  SynthGallery out{ Gallery<double>(0, 0, {}, {}), {} };
  std::vector<LabeledSet<MatrixFeatureSet<double>>> classes;
  classes.reserve(static_cast<std::size_t>(config.num_classes));
  for (Index k = 0; k < config.num_classes; ++k) {
    Matrix<double> proto = gen_prototype(config, k);
    auto rng = derived_engine(config.seed, gallery_stream, static_cast<std::uint64_t>(k));
    Matrix<double> stack(config.rows * config.cols, config.maps_per_class);
    for (Index m = 0; m < config.maps_per_class; ++m) {
      Matrix<double> map = proto;
      if (config.noise_sigma > 0.0)
        map += gaussian(rng, config.rows, config.cols, config.noise_sigma);
      stack.col(m) = map.reshaped();
    }
    classes.push_back({ k, MatrixFeatureSet<double>(config.rows, config.cols, std::move(stack)) });
    out.prototypes.push_back(std::move(proto));
  }
  out.gallery = concat_gallery(classes);
  return out;
}

MatrixFeatureSet<double> gen_query(const SynthConfig& config, Index class_id, Index n_a,
                                   std::uint64_t draw)
{
  if (n_a < 1)
    throw InvalidParameterError("query needs at least one map");
  const Matrix<double> proto = gen_prototype(config, class_id);
  auto rng = derived_engine(config.seed, query_stream, static_cast<std::uint64_t>(class_id), draw);
  Matrix<double> stack(config.rows * config.cols, n_a);
  for (Index m = 0; m < n_a; ++m) {
    Matrix<double> map = proto;
    if (config.noise_sigma > 0.0)
      map += gaussian(rng, config.rows, config.cols, config.noise_sigma);
    stack.col(m) = map.reshaped();
  }
  return MatrixFeatureSet<double>(config.rows, config.cols, std::move(stack));
}

void OcclusionSpec::check() const
{
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw InvalidParameterError("occlusion fraction must lie in [0, 1]");
  if (!std::isfinite(value))
    throw InvalidParameterError("occlusion fill value must be finite");
}

OcclusionGeometry occlusion_geometry(double fraction, Index rows, Index cols)
{
  const Index total = rows * cols;
  // the small slack keeps e.g. 0.1 * 100 = 10.000000000000002 at 10
  auto count = static_cast<Index>(std::ceil(fraction * static_cast<double>(total) - 1e-9));
  count = std::clamp<Index>(count, 0, total);
  if (count == 0)
    return { 0, 0, 0 };
  Index side = static_cast<Index>(std::sqrt(static_cast<double>(count)));
  while (side * side < count)
    ++side;
  while (side > 1 && (side - 1) * (side - 1) >= count)
    --side;
  Index height = std::min(rows, side);
  Index width = (count + height - 1) / height;
  if (width > cols) {
    width = cols;
    height = (count + cols - 1) / cols;
  }
  return { count, height, width };
}

Matrix<double> structured_texture(Index rows, Index cols, double amplitude, std::uint64_t seed)
{
  constexpr Index grid = 3;
  auto rng = derived_engine(seed, occlusion_texture, 0);
  const Matrix<double> coarse = gaussian(rng, grid, grid, amplitude);
  Matrix<double> out(rows, cols);
  auto coord = [](Index i, Index n) {
    return n > 1 ? static_cast<double>(i) * (grid - 1) / static_cast<double>(n - 1) : 0.0;
  };
  for (Index j = 0; j < cols; ++j) {
    const double y = coord(j, cols);
    const Index j0 = std::min<Index>(static_cast<Index>(y), grid - 2);
    const double ty = y - static_cast<double>(j0);
    for (Index i = 0; i < rows; ++i) {
      const double x = coord(i, rows);
      const Index i0 = std::min<Index>(static_cast<Index>(x), grid - 2);
      const double tx = x - static_cast<double>(i0);
      out(i, j) = (1 - tx) * (1 - ty) * coarse(i0, j0) + tx * (1 - ty) * coarse(i0 + 1, j0) +
                  (1 - tx) * ty * coarse(i0, j0 + 1) + tx * ty * coarse(i0 + 1, j0 + 1);
    }
  }
  return out;
}

MatrixFeatureSet<double> occlude(const MatrixFeatureSet<double>& set, const OcclusionSpec& spec)
{
  spec.check();
  const Index rows = set.map_rows();
  const Index cols = set.map_cols();
  const auto geo = occlusion_geometry(spec.fraction, rows, cols);
  if (geo.count == 0)
    return set;

  const Matrix<double> texture = spec.fill == FillKind::structured
                                   ? structured_texture(geo.height, geo.width, spec.value, spec.seed)
                                   : Matrix<double>::Constant(geo.height, geo.width, spec.value);
  Matrix<double> stack = set.stack();
  for (Index k = 0; k < set.size(); ++k) {
    auto rng = derived_engine(spec.seed, occlusion_position, static_cast<std::uint64_t>(k));
    std::uniform_int_distribution<Index> top_dist(0, rows - geo.height);
    std::uniform_int_distribution<Index> left_dist(0, cols - geo.width);
    const Index top = top_dist(rng);
    const Index left = left_dist(rng);
    auto map = stack.col(k).reshaped(rows, cols);
    for (Index e = 0; e < geo.count; ++e) {
      const Index i = e % geo.height;
      const Index j = e / geo.height;
      map(top + i, left + j) = texture(i, j);
    }
  }
  return MatrixFeatureSet<double>(rows, cols, std::move(stack));
}

} // namespace fsrl
