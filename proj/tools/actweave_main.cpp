#include <CLI11.hpp>
#include <iostream>

#include "actweave/common.hpp"
#include "actweave/config.hpp"
#include "actweave/pipeline.hpp"
#include "actweave/synth.hpp"

namespace fs = std::filesystem;
using namespace actweave;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::vector<std::string> overrides;
  std::string data_dir;
  std::string corpus, features, embeddings, taxonomy, categories, truth, lexicon;
  // synth
  int n_topics = 3;
  int n_images = 60;
  int n_test = 10;
  double noise = 0.2;
};

void add_common(CLI::App* cmd, Options& o, bool with_inputs) {
  cmd->add_option("--config", o.config_path, "TOML-style config file");
  cmd->add_option("--seed", o.seed, "Random seed (overrides the config)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--set", o.overrides, "Config override KEY=VAL (repeatable)");
  if (!with_inputs) return;
  cmd->add_option("--data", o.data_dir, "Directory laid out like `synth` output");
  cmd->add_option("--corpus", o.corpus, "corpus.jsonl");
  cmd->add_option("--features", o.features, "features.tsv");
  cmd->add_option("--embeddings", o.embeddings, "embeddings.vec");
  cmd->add_option("--taxonomy", o.taxonomy, "taxonomy.tsv");
  cmd->add_option("--categories", o.categories, "categories.txt");
  cmd->add_option("--truth", o.truth, "truth.json");
  cmd->add_option("--lexicon", o.lexicon, "Lexicon directory");
}

PipelineConfig make_config(const Options& o) {
  PipelineConfig config = o.config_path.empty() ? PipelineConfig{} : load_config(o.config_path);
  apply_overrides(config, o.overrides);
  if (o.seed) config.seed = *o.seed;
  config.validate();
  return config;
}

InputPaths make_inputs(const Options& o) {
  InputPaths in = o.data_dir.empty() ? InputPaths{} : InputPaths::from_data_dir(o.data_dir);
  auto pick = [](fs::path& slot, const std::string& flag) {
    if (!flag.empty()) slot = flag;
  };
  pick(in.corpus, o.corpus);
  pick(in.features, o.features);
  pick(in.embeddings, o.embeddings);
  pick(in.taxonomy, o.taxonomy);
  pick(in.categories, o.categories);
  pick(in.truth, o.truth);
  pick(in.lexicon, o.lexicon);
  if (in.taxonomy.empty()) in.taxonomy = default_taxonomy();
  if (in.lexicon.empty()) in.lexicon = default_lexicon_dir();
  return in;
}

using Command = void (*)(const PipelineConfig&, const InputPaths&, const fs::path&, RunManifest&);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Action concept discovery and image-text alignment"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  add_common(synth, o, false);
  synth->add_option("--topics", o.n_topics, "Number of latent topics (2-4)");
  synth->add_option("--images", o.n_images, "Training images per topic");
  synth->add_option("--test-images", o.n_test, "Test images per topic");
  synth->add_option("--noise", o.noise, "Feature noise standard deviation");
  synth->add_option("--lexicon", o.lexicon, "Lexicon directory");

  const std::vector<std::pair<const char*, Command>> commands = {
      {"discover", cmd_discover}, {"train", cmd_train},     {"match", cmd_match}, {"finetune", cmd_finetune},
      {"predict", cmd_predict},   {"eval", cmd_eval},       {"run-all", cmd_run_all},
  };
  std::vector<std::pair<CLI::App*, Command>> handlers;
  for (const auto& [name, fn] : commands) {
    auto* cmd = app.add_subcommand(name, std::string("Run ") + name);
    add_common(cmd, o, true);
    handlers.emplace_back(cmd, fn);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const PipelineConfig config = make_config(o);
    if (synth->parsed()) {
      SynthOptions so;
      so.seed = config.seed;
      so.n_topics = o.n_topics;
      so.train_per_topic = o.n_images;
      so.test_per_topic = o.n_test;
      so.noise = o.noise;
      so.d_img = config.d_img;
      so.d_w2v = config.d_w2v;
      const Lexicon lexicon = Lexicon::load(o.lexicon.empty() ? default_lexicon_dir() : fs::path(o.lexicon));
      write_synth(make_synth(so, lexicon), default_taxonomy(), o.out);
      return 0;
    }
    for (const auto& [cmd, fn] : handlers) {
      if (!cmd->parsed()) continue;
      RunManifest manifest;
      fn(config, make_inputs(o), o.out, manifest);
      manifest.write(cmd->get_name(), config, o.out);
    }
    return 0;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const EmptyResultError& e) {
    std::cerr << "empty result: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
