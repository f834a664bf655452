#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "fsrl/harness.hpp"

namespace {

namespace fs = std::filesystem;

struct Common
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required)
{
  cmd->add_option("--config", c.config, "experiment config (JSON)");
  cmd->add_option("--seed", c.seed, "override the config seed");
  auto* out = cmd->add_option("--out", c.out, "output path");
  if (out_required)
    out->required();
}

fsrl::ExperimentConfig config_of(const Common& c)
{
  auto cfg = c.config.empty() ? fsrl::ExperimentConfig{} : fsrl::load_config(c.config);
  if (c.seed)
    cfg.seed = *c.seed;
  if (!c.out.empty())
    cfg.output = c.out;
  return cfg;
}

void write_text(const std::string& text, const fs::path& path)
{
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw fsrl::IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out)
    throw fsrl::IoError("failed writing '" + path.string() + "'");
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "fsrl: feature-set representation learning experiments" };
  app.require_subcommand(1);

  Common synth_opts;
  auto* synth = app.add_subcommand("synth", "generate a synthetic gallery, probes and validation set");
  add_common(synth, synth_opts, true);

  Common classify_opts;
  std::string classify_gallery;
  std::vector<std::string> queries;
  std::string classify_weights;
  bool fuse = false;
  auto* classify = app.add_subcommand("classify", "classify one query (one file per stage)");
  add_common(classify, classify_opts, false);
  classify->add_option("--gallery", classify_gallery, "gallery manifest")->required();
  classify->add_option("--query", queries, "query FSET file, one per stage in order")->required();
  classify->add_option("--weights", classify_weights, "fusion weights file");
  classify->add_flag("--fuse", fuse, "fuse per-stage labels with the weights file");

  Common train_opts;
  std::string train_gallery;
  std::string validation;
  std::optional<double> tau;
  auto* train = app.add_subcommand("fuse-train", "learn per-stage fusion weights");
  add_common(train, train_opts, true);
  train->add_option("--gallery", train_gallery, "gallery manifest")->required();
  train->add_option("--validation", validation, "validation probe manifest")->required();
  train->add_option("--tau", tau, "sparsity weight (overrides config)");

  Common eval_opts;
  std::string eval_gallery;
  std::string probes;
  std::string eval_weights;
  auto* eval = app.add_subcommand("eval", "per-stage and fused accuracy on a probe set");
  add_common(eval, eval_opts, false);
  eval->add_option("--gallery", eval_gallery, "gallery manifest")->required();
  eval->add_option("--probes", probes, "probe manifest")->required();
  eval->add_option("--weights", eval_weights, "fusion weights file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fsrl::exit_code_for(fsrl::ErrorCategory::config);
  }

  try {
    if (synth->parsed()) {
      const auto r = fsrl::cmd_synth(config_of(synth_opts), synth_opts.out);
      std::cout << "wrote " << r.files_written << " feature files\n"
                << "gallery:    " << r.gallery_manifest.string() << '\n'
                << "probes:     " << r.probe_manifest.string() << '\n'
                << "validation: " << r.validation_manifest.string() << '\n';
    } else if (classify->parsed()) {
      std::optional<fsrl::WeightsFile> weights;
      if (!classify_weights.empty())
        weights = fsrl::read_weights(classify_weights);
      std::vector<fs::path> files(queries.begin(), queries.end());
      const auto report = fsrl::cmd_classify(config_of(classify_opts),
                                             fsrl::read_gallery_manifest(classify_gallery), files,
                                             weights, fuse);
      const std::string text = report.to_json() + "\n";
      if (classify_opts.out.empty())
        std::cout << text;
      else
        write_text(text, classify_opts.out);
    } else if (train->parsed()) {
      auto cfg = config_of(train_opts);
      if (tau) {
        if (!(*tau >= 0.0))
          throw fsrl::ConfigError("--tau must be nonnegative");
        cfg.tau = *tau;
      }
      const auto w = fsrl::cmd_fuse_train(cfg, fsrl::read_gallery_manifest(train_gallery),
                                          fsrl::read_probe_manifest(validation));
      fsrl::write_weights(w, train_opts.out);
      std::cout << "sigma:";
      for (double s : w.weights.sigma)
        std::cout << ' ' << s;
      std::cout << '\n';
    } else if (eval->parsed()) {
      std::optional<fsrl::WeightsFile> weights;
      if (!eval_weights.empty())
        weights = fsrl::read_weights(eval_weights);
      const auto report = fsrl::cmd_eval(config_of(eval_opts), fsrl::read_gallery_manifest(eval_gallery),
                                         fsrl::read_probe_manifest(probes), weights);
      std::cout << report.to_text();
      if (!eval_opts.out.empty()) {
        fs::path text_path = eval_opts.out;
        fs::path csv_path = text_path;
        csv_path.replace_extension(".csv");
        if (csv_path == text_path)
          text_path.replace_extension(".txt");
        write_text(report.to_text(), text_path);
        write_text(report.to_csv(), csv_path);
      }
    }
  } catch (const fsrl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fsrl::exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
