#include <fstream>
#include <set>
#include <sstream>

#include "fsrl/harness.hpp"
#include "json.hpp"

namespace fsrl {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where)
{
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

template<typename T>
void read_opt(const json& obj, const char* key, T& into)
{
  if (auto it = obj.find(key); it != obj.end()) {
    try {
      into = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

FillKind parse_fill(const std::string& s)
{
  if (s == "constant")
    return FillKind::constant;
  if (s == "structured")
    return FillKind::structured;
  throw ConfigError("occlusion fill must be 'constant' or 'structured', got '" + s + "'");
}

Dtype parse_dtype(const std::string& s)
{
  if (s == "f32")
    return Dtype::f32;
  if (s == "f64")
    return Dtype::f64;
  throw ConfigError("dtype must be 'f32' or 'f64', got '" + s + "'");
}

SolverKind solver_from(const json& v)
{
  try {
    return parse_solver_kind(v.get<std::string>());
  } catch (const InvalidParameterError& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("solver must be a string: ") + e.what());
  }
}

SynthPlan parse_synth(const json& j)
{
  reject_unknown(j,
                 { "num_classes", "gallery_images", "maps_per_image", "query_maps",
                   "probes_per_class", "validation_per_class", "prototype_rank", "dtype",
                   "stages", "occlusion" },
                 "synth");
  SynthPlan plan;
  read_opt(j, "num_classes", plan.num_classes);
  read_opt(j, "gallery_images", plan.gallery_images);
  read_opt(j, "maps_per_image", plan.maps_per_image);
  read_opt(j, "query_maps", plan.query_maps);
  read_opt(j, "probes_per_class", plan.probes_per_class);
  read_opt(j, "validation_per_class", plan.validation_per_class);
  read_opt(j, "prototype_rank", plan.prototype_rank);
  if (j.contains("dtype"))
    plan.dtype = parse_dtype(j.at("dtype").get<std::string>());
  if (j.contains("stages")) {
    for (const auto& s : j.at("stages")) {
      reject_unknown(s, { "stage", "noise_sigma", "separation", "rows", "cols" }, "synth stage");
      SynthStage st;
      read_opt(s, "stage", st.stage);
      read_opt(s, "noise_sigma", st.noise_sigma);
      read_opt(s, "separation", st.separation);
      read_opt(s, "rows", st.rows);
      read_opt(s, "cols", st.cols);
      plan.stages.push_back(st);
    }
  }
  if (j.contains("occlusion")) {
    const auto& o = j.at("occlusion");
    reject_unknown(o, { "fraction", "fill", "value" }, "occlusion");
    OcclusionSpec spec;
    read_opt(o, "fraction", spec.fraction);
    read_opt(o, "value", spec.value);
    if (o.contains("fill"))
      spec.fill = parse_fill(o.at("fill").get<std::string>());
    try {
      spec.check();
    } catch (const InvalidParameterError& e) {
      throw ConfigError(e.what());
    }
    plan.occlusion = spec;
  }
  if (plan.num_classes < 1 || plan.gallery_images < 1 || plan.maps_per_image < 1 ||
      plan.query_maps < 1 || plan.probes_per_class < 0 || plan.validation_per_class < 0)
    throw ConfigError("synth counts must be positive");
  return plan;
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text)
{
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object())
    throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 { "solver", "lambda1", "lambda2", "mu", "epsilon", "max_iter", "sum_tolerance",
                   "dual_epsilon", "adaptive_mu", "tau", "weight_floor", "stages", "seed",
                   "output", "threads", "stage_overrides", "synth" },
                 "config");

  ExperimentConfig c;
  if (j.contains("solver"))
    c.solver = solver_from(j.at("solver"));
  read_opt(j, "lambda1", c.lambda1);
  read_opt(j, "lambda2", c.lambda2);
  read_opt(j, "mu", c.mu);
  read_opt(j, "epsilon", c.epsilon);
  read_opt(j, "max_iter", c.max_iter);
  read_opt(j, "sum_tolerance", c.sum_tolerance);
  read_opt(j, "dual_epsilon", c.dual_epsilon);
  read_opt(j, "adaptive_mu", c.adaptive_mu);
  read_opt(j, "tau", c.tau);
  read_opt(j, "weight_floor", c.weight_floor);
  read_opt(j, "stages", c.stages);
  read_opt(j, "seed", c.seed);
  read_opt(j, "output", c.output);
  read_opt(j, "threads", c.threads);

  if (j.contains("stage_overrides")) {
    for (const auto& [key, o] : j.at("stage_overrides").items()) {
      reject_unknown(o, { "solver", "lambda1", "lambda2", "mu" }, "stage override " + key);
      StageId id = 0;
      try {
        id = std::stoi(key);
      } catch (const std::exception&) {
        throw ConfigError("stage override key '" + key + "' is not a stage id");
      }
      StageOverride ov;
      if (o.contains("solver"))
        ov.solver = solver_from(o.at("solver"));
      auto number = [&](const char* k, std::optional<double>& into) {
        if (o.contains(k)) {
          double v = 0.0;
          read_opt(o, k, v);
          into = v;
        }
      };
      number("lambda1", ov.lambda1);
      number("lambda2", ov.lambda2);
      number("mu", ov.mu);
      c.stage_overrides[id] = ov;
    }
  }
  if (j.contains("synth"))
    c.synth = parse_synth(j.at("synth"));

  if (!(c.tau >= 0.0))
    throw ConfigError("tau must be nonnegative");
  if (!(c.weight_floor >= 0.0))
    throw ConfigError("weight_floor must be nonnegative");
  if (c.threads < 0)
    throw ConfigError("threads must be nonnegative");
  try {
    params_for_stage(c, 0);
    for (const auto& [stage, _] : c.stage_overrides)
      params_for_stage(c, stage);
  } catch (const InvalidParameterError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const ExperimentConfig& c)
{
  json j;
  j["solver"] = std::string(to_string(c.solver));
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["mu"] = c.mu;
  j["epsilon"] = c.epsilon;
  j["max_iter"] = c.max_iter;
  j["sum_tolerance"] = c.sum_tolerance;
  j["dual_epsilon"] = c.dual_epsilon;
  j["adaptive_mu"] = c.adaptive_mu;
  j["tau"] = c.tau;
  j["weight_floor"] = c.weight_floor;
  j["stages"] = c.stages;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["threads"] = c.threads;
  return j.dump(2);
}

ClassifierParams params_for_stage(const ExperimentConfig& c, StageId stage)
{
  ClassifierParams p;
  p.solver = c.solver;
  p.vector.lambda1 = c.lambda1;
  p.vector.lambda2 = c.lambda2;
  p.matrix.lambda1 = c.lambda1;
  p.matrix.lambda2 = c.lambda2;
  p.matrix.mu = c.mu;
  p.matrix.epsilon = c.epsilon;
  p.matrix.max_iter = c.max_iter;
  p.matrix.sum_tolerance = c.sum_tolerance;
  p.matrix.dual_epsilon = c.dual_epsilon;
  p.matrix.adaptive_mu = c.adaptive_mu;
  if (auto it = c.stage_overrides.find(stage); it != c.stage_overrides.end()) {
    const auto& o = it->second;
    if (o.solver)
      p.solver = *o.solver;
    if (o.lambda1)
      p.vector.lambda1 = p.matrix.lambda1 = *o.lambda1;
    if (o.lambda2)
      p.vector.lambda2 = p.matrix.lambda2 = *o.lambda2;
    if (o.mu)
      p.matrix.mu = *o.mu;
  }
  p.vector.check();
  p.matrix.check();
  return p;
}

int exit_code_for(ErrorCategory category)
{
  switch (category) {
    case ErrorCategory::config:
      return 2;
    case ErrorCategory::io:
      return 3;
    case ErrorCategory::format:
      return 4;
    case ErrorCategory::divergence:
      return 5;
    case ErrorCategory::invalid_input:
      return 6;
    case ErrorCategory::solver:
      return 7;
  }
  return 1;
}

} // namespace fsrl
