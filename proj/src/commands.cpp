#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "fsrl/harness.hpp"
#include "json.hpp"

namespace fsrl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t stage_seed_stream = 100;
constexpr std::uint64_t probe_occlusion_stream = 101;
constexpr std::uint64_t validation_occlusion_stream = 102;
constexpr std::uint64_t validation_draw_offset = std::uint64_t{ 1 } << 40;

std::string fmt(const char* pattern, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::vector<StageId> resolve_stages(const ExperimentConfig& config, const GalleryManifest& manifest)
{
  std::vector<StageId> stages = config.stages;
  if (stages.empty())
    for (const auto& s : manifest.stages)
      stages.push_back(s.stage);
  if (stages.empty())
    throw StageMismatchError("gallery manifest lists no stages");
  std::set<StageId> seen;
  for (StageId id : stages) {
    if (!seen.insert(id).second)
      throw StageMismatchError("stage " + std::to_string(id) + " requested twice");
    manifest.stage(id);
  }
  return stages;
}

std::vector<StageModel> load_models(const ExperimentConfig& config, const GalleryManifest& manifest,
                                    const std::vector<StageId>& stages)
{
  std::vector<StageModel> models;
  for (StageId id : stages)
    models.push_back({ id, load_stage_gallery(manifest.stage(id)), params_for_stage(config, id) });
  return models;
}

/// Position in `probes.stages` of each requested stage.
std::vector<std::size_t> probe_columns(const std::vector<StageId>& stages, const ProbeManifest& probes)
{
  std::vector<std::size_t> cols;
  for (StageId id : stages) {
    auto it = std::find(probes.stages.begin(), probes.stages.end(), id);
    if (it == probes.stages.end())
      throw StageMismatchError("probe manifest has no files for stage " + std::to_string(id));
    cols.push_back(static_cast<std::size_t>(it - probes.stages.begin()));
  }
  return cols;
}

void check_label_sets(const std::vector<StageModel>& models, const ProbeManifest& probes)
{
  const auto reference = models.front().gallery.labels();
  const std::set<Label> labels(reference.begin(), reference.end());
  for (const auto& m : models) {
    const auto l = m.gallery.labels();
    if (std::set<Label>(l.begin(), l.end()) != labels)
      throw LabelSetMismatchError("stage " + std::to_string(m.stage) +
                                  " gallery has a different label set than stage " +
                                  std::to_string(models.front().stage));
  }
  for (const auto& p : probes.probes)
    if (!labels.contains(p.label))
      throw LabelSetMismatchError("probe '" + p.name + "' has label " + std::to_string(p.label) +
                                  " which no gallery class carries");
}

std::vector<std::vector<MatrixFeatureSet<double>>> load_probes(const ProbeManifest& probes,
                                                               const std::vector<std::size_t>& cols)
{
  std::vector<std::vector<MatrixFeatureSet<double>>> out;
  out.reserve(probes.probes.size());
  for (const auto& p : probes.probes) {
    std::vector<MatrixFeatureSet<double>> row;
    for (std::size_t c : cols)
      row.push_back(read_fset_f64(p.files[c]));
    out.push_back(std::move(row));
  }
  return out;
}

LabelVector truth_of(const ProbeManifest& probes)
{
  LabelVector z(static_cast<Index>(probes.probes.size()));
  for (std::size_t i = 0; i < probes.probes.size(); ++i)
    z[static_cast<Index>(i)] = probes.probes[i].label;
  return z;
}

void check_weight_stages(const WeightsFile& w, const std::vector<StageId>& stages)
{
  if (w.stages != stages)
    throw StageMismatchError("weights were trained for a different stage list");
}

void write_set(const MatrixFeatureSet<double>& set, Dtype dtype, const fs::path& path)
{
  if (dtype == Dtype::f32)
    write_fset(MatrixFeatureSet<float>(set.map_rows(), set.map_cols(), set.stack().cast<float>()),
               path);
  else
    write_fset(set, path);
}

} // namespace

LabelMatrix predict_all(const std::vector<StageModel>& stages,
                        const std::vector<std::vector<MatrixFeatureSet<double>>>& probes, int threads)
{
  const auto n = static_cast<Index>(probes.size());
  const auto s = static_cast<Index>(stages.size());
  for (const auto& row : probes)
    if (static_cast<Index>(row.size()) != s)
      throw StageMismatchError("every probe needs one feature set per stage");

  LabelMatrix out(n, s);
  const Index jobs = n * s;
  std::atomic<Index> next{ 0 };
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (Index job = next++; job < jobs; job = next++) {
      const Index i = job / s;
      const Index k = job % s;
      try {
        const auto& m = stages[static_cast<std::size_t>(k)];
        out(i, k) = classify(probes[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)],
                             m.gallery, m.params)
                      .label;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
        next = jobs;
      }
    }
  };

  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<Index>(jobs, 1))));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t)
      pool.emplace_back(work);
  }
  if (failure)
    std::rethrow_exception(failure);
  return out;
}

double accuracy(const LabelVector& predicted, const LabelVector& truth)
{
  if (predicted.size() != truth.size())
    throw DimensionMismatchError("accuracy: prediction and truth lengths differ");
  if (truth.size() == 0)
    throw ZeroDimensionError("accuracy of an empty set");
  return static_cast<double>((predicted.array() == truth.array()).count()) /
         static_cast<double>(truth.size());
}

LabelVector fuse_all(const LabelMatrix& predictions, const ScaleWeights& weights)
{
  LabelVector out(predictions.rows());
  std::vector<Label> row(static_cast<std::size_t>(predictions.cols()));
  for (Index i = 0; i < predictions.rows(); ++i) {
    for (Index k = 0; k < predictions.cols(); ++k)
      row[static_cast<std::size_t>(k)] = predictions(i, k);
    out[i] = fuse(row, weights);
  }
  return out;
}

SynthResult cmd_synth(const ExperimentConfig& config, const fs::path& out_dir)
{
  const SynthPlan& plan = config.synth;
  std::vector<SynthStage> stages = plan.stages;
  if (stages.empty())
    stages.push_back(SynthStage{});

  SynthResult result;
  GalleryManifest gallery_manifest;
  ProbeManifest probe_manifest;
  ProbeManifest validation_manifest;
  const Index probes_total = plan.num_classes * plan.probes_per_class;
  const Index validation_total = plan.num_classes * plan.validation_per_class;
  probe_manifest.probes.resize(static_cast<std::size_t>(probes_total));
  validation_manifest.probes.resize(static_cast<std::size_t>(validation_total));

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

  for (const auto& st : stages) {
    SynthConfig sc;
    sc.num_classes = plan.num_classes;
    sc.maps_per_class = plan.gallery_images * plan.maps_per_image;
    sc.rows = st.rows;
    sc.cols = st.cols;
    sc.noise_sigma = st.noise_sigma;
    sc.separation = st.separation;
    sc.prototype_rank = plan.prototype_rank;
    sc.seed = derived_engine(config.seed, stage_seed_stream, static_cast<std::uint64_t>(st.stage))();
    try {
      sc.check();
    } catch (const InvalidParameterError& e) {
      throw ConfigError(e.what());
    }

    const std::string tag = "stage" + std::to_string(st.stage);
    for (const char* sub : { "gallery", "probes", "validation" }) {
      fs::create_directories(out_dir / sub / tag, ec);
      if (ec)
        throw IoError("cannot create '" + (out_dir / sub / tag).string() + "': " + ec.message());
    }

    const auto synth = gen_gallery(sc);
    ManifestStage ms;
    ms.stage = st.stage;
    for (Index c = 0; c < plan.num_classes; ++c) {
      ManifestClass mc;
      mc.label = synth.gallery.range(c).label;
      mc.name = "class" + std::to_string(c);
      const Matrix<double> cls = synth.gallery.class_stack(c);
      for (Index img = 0; img < plan.gallery_images; ++img) {
        const fs::path file = out_dir / "gallery" / tag /
                              ("class" + std::to_string(c) + "_img" + std::to_string(img) + ".fset");
        write_set(MatrixFeatureSet<double>(
                            sc.rows, sc.cols,
                            cls.middleCols(img * plan.maps_per_image, plan.maps_per_image)),
                          plan.dtype, file);
        mc.files.push_back(file);
        ++result.files_written;
      }
      ms.classes.push_back(std::move(mc));
    }
    gallery_manifest.stages.push_back(std::move(ms));

    auto emit = [&](ProbeManifest& manifest, const char* sub, const char* prefix, Index per_class,
                    std::uint64_t draw_offset, std::uint64_t occlusion_stream) {
      manifest.stages.push_back(st.stage);
      for (Index c = 0; c < plan.num_classes; ++c) {
        for (Index j = 0; j < per_class; ++j) {
          const Index idx = c * per_class + j;
          auto query = gen_query(sc, c, plan.query_maps, draw_offset + static_cast<std::uint64_t>(j));
          if (plan.occlusion) {
            OcclusionSpec spec = *plan.occlusion;
            spec.seed = derived_engine(config.seed, occlusion_stream,
                                       static_cast<std::uint64_t>(st.stage),
                                       static_cast<std::uint64_t>(idx))();
            query = occlude(query, spec);
          }
          const std::string name = std::string(prefix) + std::to_string(idx);
          const fs::path file = out_dir / sub / tag / (name + ".fset");
          write_set(query, plan.dtype, file);
          ++result.files_written;
          auto& entry = manifest.probes[static_cast<std::size_t>(idx)];
          entry.label = c;
          entry.name = name;
          entry.files.push_back(file);
        }
      }
    };
    emit(probe_manifest, "probes", "probe", plan.probes_per_class, 0, probe_occlusion_stream);
    emit(validation_manifest, "validation", "val", plan.validation_per_class, validation_draw_offset,
         validation_occlusion_stream);
  }

  result.gallery_manifest = out_dir / "gallery.json";
  result.probe_manifest = out_dir / "probes.json";
  result.validation_manifest = out_dir / "validation.json";
  write_gallery_manifest(gallery_manifest, result.gallery_manifest);
  write_probe_manifest(probe_manifest, result.probe_manifest);
  write_probe_manifest(validation_manifest, result.validation_manifest);
  return result;
}

std::string ClassifyReport::to_json() const
{
  json out;
  out["seed"] = seed;
  json per = json::array();
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const auto& p = per_stage[k];
    json residuals = json::array();
    for (std::size_t c = 0; c < residual_labels[k].size(); ++c) {
      const double r = p.residuals[static_cast<Index>(c)];
      residuals.push_back({ { "label", residual_labels[k][c] },
                            { "residual", std::isfinite(r) ? json(r) : json(nullptr) } });
    }
    per.push_back({ { "stage", stages[k] },
                    { "label", p.label },
                    { "residuals", residuals },
                    { "converged", p.converged },
                    { "iterations", p.iterations } });
  }
  out["stages"] = per;
  out["fused"] = fused ? json(*fused) : json(nullptr);
  return out.dump(2);
}

ClassifyReport cmd_classify(const ExperimentConfig& config, const GalleryManifest& manifest,
                            const std::vector<fs::path>& query_files,
                            const std::optional<WeightsFile>& weights, bool fuse_stages)
{
  const auto stages = resolve_stages(config, manifest);
  if (query_files.size() != stages.size())
    throw StageMismatchError("got " + std::to_string(query_files.size()) + " query files for " +
                             std::to_string(stages.size()) + " stages");
  if (fuse_stages && !weights)
    throw MissingWeightsError("fusion requested but no weights file was given");
  if (fuse_stages)
    check_weight_stages(*weights, stages);

  ClassifyReport report;
  report.stages = stages;
  report.seed = config.seed;
  std::vector<Label> labels;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const auto gallery = load_stage_gallery(manifest.stage(stages[k]));
    const auto query = read_fset_f64(query_files[k]);
    const auto decision = classify(query, gallery, params_for_stage(config, stages[k]));
    report.residual_labels.push_back(gallery.labels());
    report.per_stage.push_back({ decision.label, decision.residuals,
                                 decision.solution.diagnostics.converged,
                                 decision.solution.diagnostics.iterations });
    labels.push_back(decision.label);
  }
  if (fuse_stages)
    report.fused = fuse(labels, weights->weights);
  return report;
}

WeightsFile cmd_fuse_train(const ExperimentConfig& config, const GalleryManifest& manifest,
                           const ProbeManifest& validation)
{
  if (validation.probes.empty())
    throw EmptyValidationSetError("validation manifest lists no queries");
  const auto stages = resolve_stages(config, manifest);
  const auto cols = probe_columns(stages, validation);
  const auto models = load_models(config, manifest, stages);
  check_label_sets(models, validation);

  PredictionTable table{ predict_all(models, load_probes(validation, cols), config.threads),
                         truth_of(validation) };
  const auto D = build_decision_matrix(table);
  FusionOptions options;
  options.floor = config.weight_floor;

  WeightsFile out;
  out.stages = stages;
  out.floor = config.weight_floor;
  out.weights = learn_scale_weights(D, config.tau, options);
  return out;
}

double EvalReport::stage_accuracy(std::size_t k) const
{
  return total > 0 ? static_cast<double>(correct.at(k)) / static_cast<double>(total) : 0.0;
}

std::optional<double> EvalReport::fused_accuracy() const
{
  if (!fused_correct || total == 0)
    return std::nullopt;
  return static_cast<double>(*fused_correct) / static_cast<double>(total);
}

std::string EvalReport::to_text() const
{
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %10s %8s %8s%s\n", "stage", "accuracy", "correct", "total",
                sigma ? "      weight" : "");
  out << line;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    std::snprintf(line, sizeof line, "%-8d %10.4f %8lld %8lld", stages[k], stage_accuracy(k),
                  static_cast<long long>(correct[k]), static_cast<long long>(total));
    out << line;
    if (sigma)
      out << fmt(" %11.6g", (*sigma)[static_cast<Index>(k)]);
    out << '\n';
  }
  if (auto f = fused_accuracy()) {
    std::snprintf(line, sizeof line, "%-8s %10.4f %8lld %8lld\n", "fused", *f,
                  static_cast<long long>(*fused_correct), static_cast<long long>(total));
    out << line;
  }
  return out.str();
}

std::string EvalReport::to_csv() const
{
  std::ostringstream out;
  out << "stage,accuracy,correct,total\n";
  for (std::size_t k = 0; k < stages.size(); ++k)
    out << stages[k] << ',' << fmt("%.17g", stage_accuracy(k)) << ',' << correct[k] << ','
        << total << '\n';
  if (auto f = fused_accuracy())
    out << "fused," << fmt("%.17g", *f) << ',' << *fused_correct << ',' << total << '\n';
  return out.str();
}

EvalReport cmd_eval(const ExperimentConfig& config, const GalleryManifest& manifest,
                    const ProbeManifest& probes, const std::optional<WeightsFile>& weights)
{
  if (probes.probes.empty())
    throw ZeroDimensionError("probe manifest lists no probes");
  const auto stages = resolve_stages(config, manifest);
  const auto cols = probe_columns(stages, probes);
  if (weights)
    check_weight_stages(*weights, stages);
  const auto models = load_models(config, manifest, stages);
  check_label_sets(models, probes);

  const LabelMatrix predicted = predict_all(models, load_probes(probes, cols), config.threads);
  const LabelVector truth = truth_of(probes);

  EvalReport report;
  report.stages = stages;
  report.total = truth.size();
  for (Index k = 0; k < predicted.cols(); ++k)
    report.correct.push_back((predicted.col(k).array() == truth.array()).count());
  if (weights) {
    report.fused_correct = (fuse_all(predicted, weights->weights).array() == truth.array()).count();
    report.sigma = weights->weights.sigma;
  }
  return report;
}

} // namespace fsrl
