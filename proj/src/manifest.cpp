#include <fstream>
#include <set>
#include <sstream>

#include "fsrl/harness.hpp"
#include "json.hpp"

namespace fsrl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* gallery_format = "fsrl-gallery";
constexpr const char* probe_format = "fsrl-probes";
constexpr const char* weights_format = "fsrl-weights";
constexpr int manifest_version = 1;

json load_json(const fs::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ManifestError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void save_json(const json& j, const fs::path& path)
{
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out)
    throw IoError("failed writing '" + path.string() + "'");
}

void expect_header(const json& j, const char* format, const fs::path& path)
{
  if (!j.is_object() || j.value("format", "") != format)
    throw ManifestError("'" + path.string() + "' is not an " + format + " document");
  if (j.value("version", 0) != manifest_version)
    throw ManifestError("'" + path.string() + "' has unsupported version");
}

fs::path resolve(const fs::path& base, const std::string& p)
{
  fs::path file(p);
  return file.is_absolute() ? file : base / file;
}

std::string relative_to(const fs::path& file, const fs::path& base)
{
  const fs::path rel = fs::absolute(file).lexically_normal().lexically_relative(
    fs::absolute(base).lexically_normal());
  return (rel.empty() ? file : rel).generic_string();
}

template<typename F>
auto guarded(const fs::path& path, F&& f)
{
  try {
    return f();
  } catch (const json::exception& e) {
    throw ManifestError("malformed '" + path.string() + "': " + e.what());
  }
}

} // namespace

const ManifestStage& GalleryManifest::stage(StageId id) const
{
  for (const auto& s : stages)
    if (s.stage == id)
      return s;
  throw StageMismatchError("stage " + std::to_string(id) + " is not in the gallery manifest");
}

GalleryManifest read_gallery_manifest(const fs::path& path)
{
  const json j = load_json(path);
  expect_header(j, gallery_format, path);
  const fs::path base = path.parent_path();
  return guarded(path, [&] {
    GalleryManifest m;
    std::set<StageId> seen;
    for (const auto& s : j.at("stages")) {
      ManifestStage stage;
      stage.stage = s.at("stage").get<StageId>();
      if (!seen.insert(stage.stage).second)
        throw ManifestError("stage " + std::to_string(stage.stage) + " listed twice");
      for (const auto& c : s.at("classes")) {
        ManifestClass cls;
        cls.label = c.at("label").get<Label>();
        cls.name = c.value("name", "");
        for (const auto& f : c.at("files"))
          cls.files.push_back(resolve(base, f.get<std::string>()));
        stage.classes.push_back(std::move(cls));
      }
      m.stages.push_back(std::move(stage));
    }
    return m;
  });
}

void write_gallery_manifest(const GalleryManifest& m, const fs::path& path)
{
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  json stages = json::array();
  for (const auto& s : m.stages) {
    json classes = json::array();
    for (const auto& c : s.classes) {
      json files = json::array();
      for (const auto& f : c.files)
        files.push_back(relative_to(f, base));
      classes.push_back({ { "label", c.label }, { "name", c.name }, { "files", files } });
    }
    stages.push_back({ { "stage", s.stage }, { "classes", classes } });
  }
  save_json({ { "format", gallery_format }, { "version", manifest_version }, { "stages", stages } },
            path);
}

ProbeManifest read_probe_manifest(const fs::path& path)
{
  const json j = load_json(path);
  expect_header(j, probe_format, path);
  const fs::path base = path.parent_path();
  return guarded(path, [&] {
    ProbeManifest m;
    m.stages = j.at("stages").get<std::vector<StageId>>();
    for (const auto& p : j.at("probes")) {
      ProbeEntry e;
      e.label = p.at("label").get<Label>();
      e.name = p.value("name", "");
      for (const auto& f : p.at("files"))
        e.files.push_back(resolve(base, f.get<std::string>()));
      if (e.files.size() != m.stages.size())
        throw ManifestError("probe '" + e.name + "' lists " + std::to_string(e.files.size()) +
                            " files for " + std::to_string(m.stages.size()) + " stages");
      m.probes.push_back(std::move(e));
    }
    return m;
  });
}

void write_probe_manifest(const ProbeManifest& m, const fs::path& path)
{
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  json probes = json::array();
  for (const auto& p : m.probes) {
    json files = json::array();
    for (const auto& f : p.files)
      files.push_back(relative_to(f, base));
    probes.push_back({ { "label", p.label }, { "name", p.name }, { "files", files } });
  }
  save_json({ { "format", probe_format },
              { "version", manifest_version },
              { "stages", m.stages },
              { "probes", probes } },
            path);
}

Gallery<double> load_stage_gallery(const ManifestStage& stage)
{
  std::vector<LabeledSet<MatrixFeatureSet<double>>> classes;
  classes.reserve(stage.classes.size());
  for (const auto& c : stage.classes) {
    if (c.files.empty())
      throw EmptyClassError("class " + std::to_string(c.label) + " lists no files");
    std::vector<MatrixFeatureSet<double>> parts;
    Index total = 0;
    for (const auto& f : c.files) {
      parts.push_back(read_fset_f64(f));
      if (parts.back().map_rows() != parts.front().map_rows() ||
          parts.back().map_cols() != parts.front().map_cols())
        throw DimensionMismatchError("'" + f.string() + "' map shape differs from class " +
                                     std::to_string(c.label) + "'s other files");
      total += parts.back().size();
    }
    Matrix<double> stack(parts.front().stack().rows(), total);
    Index at = 0;
    for (const auto& p : parts) {
      stack.middleCols(at, p.size()) = p.stack();
      at += p.size();
    }
    classes.push_back(
      { c.label, MatrixFeatureSet<double>(parts.front().map_rows(), parts.front().map_cols(),
                                          std::move(stack)) });
  }
  return concat_gallery(classes);
}

WeightsFile read_weights(const fs::path& path)
{
  const json j = load_json(path);
  expect_header(j, weights_format, path);
  return guarded(path, [&] {
    WeightsFile w;
    w.stages = j.at("stages").get<std::vector<StageId>>();
    const auto sigma = j.at("sigma").get<std::vector<double>>();
    if (sigma.size() != w.stages.size())
      throw ManifestError("weights file has " + std::to_string(sigma.size()) + " weights for " +
                          std::to_string(w.stages.size()) + " stages");
    w.weights.sigma = Eigen::Map<const Eigen::VectorXd>(sigma.data(), static_cast<Index>(sigma.size()));
    w.weights.tau = j.at("tau").get<double>();
    w.weights.iterations = j.value("iterations", 0);
    w.weights.converged = j.value("converged", true);
    w.floor = j.value("floor", 0.0);
    for (double s : sigma)
      if (!std::isfinite(s) || s < 0.0)
        throw ManifestError("weights must be finite and nonnegative");
    return w;
  });
}

void write_weights(const WeightsFile& w, const fs::path& path)
{
  // nlohmann prints the shortest decimal that round-trips each double exactly
  std::vector<double> sigma(w.weights.sigma.data(), w.weights.sigma.data() + w.weights.sigma.size());
  save_json({ { "format", weights_format },
              { "version", manifest_version },
              { "stages", w.stages },
              { "sigma", sigma },
              { "tau", w.weights.tau },
              { "floor", w.floor },
              { "iterations", w.weights.iterations },
              { "converged", w.weights.converged } },
            path);
}

} // namespace fsrl
