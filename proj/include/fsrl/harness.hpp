#pragma once

// Experiment plumbing: JSON config, gallery/probe manifests, fusion weight
// files, and the synth / classify / fuse-train / eval commands. Everything
// here is deterministic given inputs, seeds and config.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsrl/dataset_synth.hpp"
#include "fsrl/fset_io.hpp"
#include "fsrl/residual_classifier.hpp"
#include "fsrl/scale_fusion.hpp"

namespace fsrl {

using StageId = int;

struct StageOverride
{
  std::optional<SolverKind> solver;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<double> mu;
};

struct SynthStage
{
  StageId stage = 1;
  double noise_sigma = 0.1;
  double separation = 1.0;
  Index rows = 8;
  Index cols = 8;
};

struct SynthPlan
{
  Index num_classes = 10;
  Index gallery_images = 1;
  Index maps_per_image = 4;
  Index query_maps = 4;
  Index probes_per_class = 10;
  Index validation_per_class = 5;
  Index prototype_rank = 0;
  Dtype dtype = Dtype::f64;
  std::vector<SynthStage> stages;
  std::optional<OcclusionSpec> occlusion; // applied to probe and validation queries
};

struct ExperimentConfig
{
  SolverKind solver = SolverKind::vector;
  double lambda1 = 1e-3;
  double lambda2 = 1e-3;
  double mu = 1.0;
  double epsilon = 1e-6;
  int max_iter = 500;
  double sum_tolerance = 1e-5;
  double dual_epsilon = 1e-9;
  bool adaptive_mu = false;
  double tau = 0.01;
  double weight_floor = 0.0;
  std::vector<StageId> stages; // empty: every stage in the gallery manifest
  std::uint64_t seed = 0;
  std::string output;
  int threads = 0; // 0: hardware concurrency
  std::map<StageId, StageOverride> stage_overrides;
  SynthPlan synth;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

/// Shared parameters with any per-stage override applied.
ClassifierParams params_for_stage(const ExperimentConfig& config, StageId stage);

struct ManifestClass
{
  Label label = 0;
  std::string name;
  std::vector<std::filesystem::path> files;
};

struct ManifestStage
{
  StageId stage = 1;
  std::vector<ManifestClass> classes;
};

/// File paths are stored relative to the manifest's directory and resolved on load.
struct GalleryManifest
{
  std::vector<ManifestStage> stages;

  const ManifestStage& stage(StageId id) const;
};

struct ProbeEntry
{
  Label label = 0;
  std::string name;
  std::vector<std::filesystem::path> files; // one per manifest stage, same order
};

struct ProbeManifest
{
  std::vector<StageId> stages;
  std::vector<ProbeEntry> probes;
};

GalleryManifest read_gallery_manifest(const std::filesystem::path& path);
void write_gallery_manifest(const GalleryManifest& manifest, const std::filesystem::path& path);
ProbeManifest read_probe_manifest(const std::filesystem::path& path);
void write_probe_manifest(const ProbeManifest& manifest, const std::filesystem::path& path);

/// Reads and concatenates every class's files for one stage.
Gallery<double> load_stage_gallery(const ManifestStage& stage);

struct WeightsFile
{
  std::vector<StageId> stages;
  ScaleWeights weights;
  double floor = 0.0;
};

WeightsFile read_weights(const std::filesystem::path& path);
void write_weights(const WeightsFile& weights, const std::filesystem::path& path);

// ---- in-memory pipeline ----------------------------------------------------

struct StageModel
{
  StageId stage;
  Gallery<double> gallery;
  ClassifierParams params;
};

struct StagePrediction
{
  Label label = 0;
  Eigen::VectorXd residuals;
  bool converged = true;
  int iterations = 0;
};

/// probes[i][k] is probe i's feature set at stages[k]. Returns n x s predicted
/// labels. Work is spread over `threads` workers; output order is input order.
LabelMatrix predict_all(const std::vector<StageModel>& stages,
                        const std::vector<std::vector<MatrixFeatureSet<double>>>& probes,
                        int threads);

double accuracy(const LabelVector& predicted, const LabelVector& truth);
LabelVector fuse_all(const LabelMatrix& predictions, const ScaleWeights& weights);

// ---- commands ---------------------------------------------------------------

struct SynthResult
{
  std::filesystem::path gallery_manifest;
  std::filesystem::path probe_manifest;
  std::filesystem::path validation_manifest;
  std::size_t files_written = 0;
};

SynthResult cmd_synth(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct ClassifyReport
{
  std::vector<StageId> stages;
  std::vector<std::vector<Label>> residual_labels; // gallery class order per stage
  std::vector<StagePrediction> per_stage;
  std::optional<Label> fused;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

ClassifyReport cmd_classify(const ExperimentConfig& config, const GalleryManifest& manifest,
                            const std::vector<std::filesystem::path>& query_files,
                            const std::optional<WeightsFile>& weights, bool fuse);

WeightsFile cmd_fuse_train(const ExperimentConfig& config, const GalleryManifest& manifest,
                           const ProbeManifest& validation);

struct EvalReport
{
  std::vector<StageId> stages;
  std::vector<Index> correct; // per stage
  std::optional<Index> fused_correct;
  std::optional<Eigen::VectorXd> sigma;
  Index total = 0;

  double stage_accuracy(std::size_t k) const;
  std::optional<double> fused_accuracy() const;
  std::string to_text() const;
  std::string to_csv() const;
};

EvalReport cmd_eval(const ExperimentConfig& config, const GalleryManifest& manifest,
                    const ProbeManifest& probes, const std::optional<WeightsFile>& weights);

/// Process exit code for an error category (0 is success).
int exit_code_for(ErrorCategory category);

} // namespace fsrl
