#include "actweave/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "actweave/common.hpp"
#include "actweave/concept_discovery.hpp"
#include "actweave/eval.hpp"
#include "actweave/persistence.hpp"
#include "actweave/stage2.hpp"
#include "actweave/taxonomy.hpp"

namespace actweave {
namespace fs = std::filesystem;

namespace {

class StageTimer {
 public:
  StageTimer(RunManifest& manifest, std::string stage)
      : manifest_(manifest), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
    manifest_.add_timing(stage_, d.count());
  }

 private:
  RunManifest& manifest_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

fs::path require_file(const fs::path& path, const std::string& what) {
  if (path.empty()) throw InputError("no path given for " + what);
  if (!fs::exists(path)) throw InputError("missing " + what + ": " + path.string());
  return path;
}

fs::path upstream(const fs::path& out, const char* name, const char* producer) {
  const fs::path p = out / name;
  if (!fs::exists(p)) {
    throw InputError("missing upstream artifact " + p.string() + " (run `" + producer + "` first)");
  }
  return p;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(ss.str())));
  return buf;
}

struct Loaded {
  Lexicon lexicon;
  std::vector<ImagedDescription> corpus;
  FeatureTable features;
  EmbeddingTable embeddings{0, 0};
};

Lexicon load_lexicon(const InputPaths& in, RunManifest& manifest) {
  const fs::path dir = in.lexicon.empty() ? default_lexicon_dir() : in.lexicon;
  if (!fs::is_directory(dir)) throw InputError("missing lexicon directory: " + dir.string());
  manifest.add_input("lexicon", dir);
  return Lexicon::load(dir);
}

FeatureTable load_checked_features(const PipelineConfig& config, const InputPaths& in, RunManifest& manifest) {
  manifest.add_input("features", require_file(in.features, "features"));
  FeatureTable features = load_features(in.features);
  if (features.dim() != config.d_img) {
    throw InputError(in.features.string() + ": feature dimension " + std::to_string(features.dim()) +
                     " does not match d_img = " + std::to_string(config.d_img));
  }
  return features;
}

EmbeddingTable load_checked_embeddings(const PipelineConfig& config, const InputPaths& in, RunManifest& manifest) {
  manifest.add_input("embeddings", require_file(in.embeddings, "embeddings"));
  EmbeddingTable embeddings = load_embeddings(in.embeddings, config.seed);
  if (embeddings.dim() != config.d_w2v) {
    throw InputError(in.embeddings.string() + ": embedding dimension " + std::to_string(embeddings.dim()) +
                     " does not match d_w2v = " + std::to_string(config.d_w2v));
  }
  return embeddings;
}

std::vector<ImagedDescription> load_checked_corpus(const InputPaths& in, RunManifest& manifest) {
  manifest.add_input("corpus", require_file(in.corpus, "corpus"));
  return load_corpus(in.corpus);
}

std::vector<TargetCategory> load_checked_categories(const InputPaths& in, const Lexicon& lexicon,
                                                    RunManifest& manifest) {
  manifest.add_input("categories", require_file(in.categories, "categories"));
  return load_categories(in.categories, lexicon);
}

void write_json(const nlohmann::ordered_json& j, const fs::path& path) { write_file_atomic(path, j.dump(2) + "\n"); }

}  // namespace

InputPaths InputPaths::from_data_dir(const fs::path& dir) {
  InputPaths p;
  p.corpus = dir / "corpus.jsonl";
  p.features = dir / "features.tsv";
  p.embeddings = dir / "embeddings.vec";
  p.taxonomy = fs::exists(dir / "taxonomy.tsv") ? dir / "taxonomy.tsv" : default_taxonomy();
  p.categories = dir / "categories.txt";
  p.truth = dir / "truth.json";
  p.lexicon = fs::is_directory(dir / "lexicon") ? dir / "lexicon" : default_lexicon_dir();
  return p;
}

fs::path default_lexicon_dir() { return fs::path(ACTWEAVE_DATA_DIR) / "lexicon"; }
fs::path default_taxonomy() { return fs::path(ACTWEAVE_DATA_DIR) / "taxonomy.tsv"; }

void RunManifest::add_input(const std::string& role, const fs::path& path) {
  for (const auto& [r, d] : inputs_) {
    if (r == role) return;
  }
  std::string digest = fs::is_directory(path) ? "directory" : file_digest(path);
  inputs_.emplace_back(role, path.string() + " fnv1a64:" + digest);
}
void RunManifest::add_output(const fs::path& path) { outputs_.push_back(path.string()); }
void RunManifest::add_timing(const std::string& stage, double seconds) { timings_.emplace_back(stage, seconds); }
void RunManifest::add_metric(const std::string& name, double value) { metrics_.emplace_back(name, value); }

void RunManifest::write(const std::string& command, const PipelineConfig& config, const fs::path& out_dir) const {
  nlohmann::ordered_json j;
  j["command"] = command;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : config.entries()) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& [role, desc] : inputs_) inputs[role] = desc;
  j["inputs"] = inputs;
  j["outputs"] = outputs_;
  nlohmann::ordered_json timings = nlohmann::ordered_json::object();
  for (const auto& [stage, s] : timings_) timings[stage] = s;
  j["timings_seconds"] = timings;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [name, v] : metrics_) metrics[name] = v;
  j["metrics"] = metrics;
  fs::create_directories(out_dir);
  write_json(j, out_dir / artifacts::kManifest);
}

std::vector<TextItem> make_text_items(const std::vector<ImagedDescription>& corpus, Split split,
                                      const Lexicon& lexicon, const EmbeddingTable& embeddings, int max_seq_len) {
  std::vector<TextItem> items;
  for (const auto& rec : corpus) {
    if (rec.split != split) continue;
    auto tokens = content_tokens(rec.description, lexicon);
    if (tokens.empty()) continue;
    if (tokens.size() > static_cast<std::size_t>(max_seq_len)) tokens.resize(static_cast<std::size_t>(max_seq_len));
    std::string key;
    for (const auto& p : extract_vo(rec.description, lexicon)) key += p.str() + ";";
    if (key.empty()) {
      for (const auto& t : tokens) key += t + " ";
    }
    items.push_back({rec.image_id, embeddings.embed(tokens), key});
  }
  return items;
}

void cmd_discover(const PipelineConfig& config, const InputPaths& in, const fs::path& out, RunManifest& manifest) {
  StageTimer timer(manifest, "discover");
  fs::create_directories(out);
  const Lexicon lexicon = load_lexicon(in, manifest);
  const auto corpus = load_checked_corpus(in, manifest);
  const FeatureTable features = load_checked_features(config, in, manifest);
  const EmbeddingTable embeddings = load_checked_embeddings(config, in, manifest);
  manifest.add_input("taxonomy", require_file(in.taxonomy, "taxonomy"));
  const HypernymGraph graph = HypernymGraph::load(in.taxonomy);

  auto concepts = gather_concepts(corpus, lexicon, config.min_concept_samples);
  if (concepts.empty()) {
    throw EmptyResultError("no concepts: no VO pair with a human subject reached " +
                           std::to_string(config.min_concept_samples) + " training images");
  }
  score_visualness(concepts, features, config);
  save_concepts_report(concepts, config.visualness_threshold, out / artifacts::kConceptsReport);
  manifest.add_output(out / artifacts::kConceptsReport);
  std::erase_if(concepts, [&](const ActionConcept& c) { return c.visualness_ap < config.visualness_threshold; });
  if (concepts.empty()) {
    throw EmptyResultError("no concepts passed the visualness threshold " + format_real(config.visualness_threshold));
  }
  for (auto& c : concepts) c.representation = build_representation(c, features, embeddings);
  const ActTree tree = build_act(similarity_matrix(concepts), concepts, graph, config.c_nn);
  save_act(tree, out / artifacts::kAct);
  manifest.add_output(out / artifacts::kAct);
  manifest.add_metric("n_concepts", static_cast<double>(concepts.size()));
  manifest.add_metric("n_top_level_nodes", static_cast<double>(tree.root().children.size()));
}

void cmd_train(const PipelineConfig& config, const InputPaths& in, const fs::path& out, RunManifest& manifest) {
  StageTimer timer(manifest, "train");
  fs::create_directories(out);
  const Lexicon lexicon = load_lexicon(in, manifest);
  const auto corpus = load_checked_corpus(in, manifest);
  const FeatureTable features = load_checked_features(config, in, manifest);
  const EmbeddingTable embeddings = load_checked_embeddings(config, in, manifest);

  const auto items = make_text_items(corpus, Split::kTrain, lexicon, embeddings, config.max_seq_len);
  AsaModel model = AsaModel::initialize(ModelDims::from(config), config.seed);
  AsaOptimizer optimizer = AsaOptimizer::from(config);
  const auto trace = train_stage1(items, features, model, optimizer, config, config.stage1_steps);
  save_checkpoint(model, optimizer, out / artifacts::kStage1Checkpoint);
  save_trace(trace, out / artifacts::kTrainTrace);
  manifest.add_output(out / artifacts::kStage1Checkpoint);
  manifest.add_output(out / artifacts::kTrainTrace);

  // Retrieval is measured on held-out descriptions when the corpus has them.
  auto held_out = make_text_items(corpus, Split::kTest, lexicon, embeddings, config.max_seq_len);
  const bool has_held_out = held_out.size() >= 2;
  const auto& eval_items = has_held_out ? held_out : items;
  const double retrieval = within_batch_retrieval(model, eval_items, features,
                                                  static_cast<std::size_t>(config.batch_size), config.seed ^ 0x7e57ULL);
  nlohmann::ordered_json metrics;
  metrics["retrieval_split"] = has_held_out ? "test" : "train";
  metrics["retrieval_accuracy"] = retrieval;
  metrics["n_train_items"] = items.size();
  metrics["first_loss"] = trace.empty() ? 0.0 : trace.front().loss;
  metrics["last_loss"] = trace.empty() ? 0.0 : trace.back().loss;
  write_json(metrics, out / artifacts::kStage1Metrics);
  manifest.add_output(out / artifacts::kStage1Metrics);
  manifest.add_metric("stage1_retrieval_accuracy", retrieval);
}

void cmd_match(const PipelineConfig& config, const InputPaths& in, const fs::path& out, RunManifest& manifest) {
  StageTimer timer(manifest, "match");
  const Lexicon lexicon = load_lexicon(in, manifest);
  const FeatureTable features = load_checked_features(config, in, manifest);
  const EmbeddingTable embeddings = load_checked_embeddings(config, in, manifest);
  const auto categories = load_checked_categories(in, lexicon, manifest);
  const ActTree tree = load_act(upstream(out, artifacts::kAct, "discover"));
  const Checkpoint ckpt = load_checkpoint(upstream(out, artifacts::kStage1Checkpoint, "train"), ModelDims::from(config));

  const auto matches = match_categories(categories, tree, asa_scorer(ckpt.model, features, embeddings, categories),
                                        MatchOptions{config.theta_init, false});
  save_matches(matches, categories, tree, out / artifacts::kMatches);
  manifest.add_output(out / artifacts::kMatches);
  std::size_t n_images = 0;
  for (const auto& m : matches) n_images += m.training_images.size();
  manifest.add_metric("n_finetune_samples", static_cast<double>(n_images));
}

void cmd_finetune(const PipelineConfig& config, const InputPaths& in, const fs::path& out, RunManifest& manifest) {
  StageTimer timer(manifest, "finetune");
  const Lexicon lexicon = load_lexicon(in, manifest);
  const FeatureTable features = load_checked_features(config, in, manifest);
  const EmbeddingTable embeddings = load_checked_embeddings(config, in, manifest);
  const auto categories = load_checked_categories(in, lexicon, manifest);
  const auto matches = load_matches(upstream(out, artifacts::kMatches, "match"), categories.size());
  Checkpoint ckpt = load_checkpoint(upstream(out, artifacts::kStage1Checkpoint, "train"), ModelDims::from(config));

  AsaOptimizer optimizer = AsaOptimizer::from(config);
  const auto trace = finetune(matches, categories, ckpt.model, optimizer, features, embeddings, config);
  save_checkpoint(ckpt.model, optimizer, out / artifacts::kModelCheckpoint);
  save_trace(trace, out / artifacts::kFinetuneTrace);
  manifest.add_output(out / artifacts::kModelCheckpoint);
  manifest.add_output(out / artifacts::kFinetuneTrace);
}

void cmd_predict(const PipelineConfig& config, const InputPaths& in, const fs::path& out, RunManifest& manifest) {
  StageTimer timer(manifest, "predict");
  const Lexicon lexicon = load_lexicon(in, manifest);
  const auto corpus = load_checked_corpus(in, manifest);
  const FeatureTable features = load_checked_features(config, in, manifest);
  const EmbeddingTable embeddings = load_checked_embeddings(config, in, manifest);
  const auto categories = load_checked_categories(in, lexicon, manifest);
  const Checkpoint ckpt = load_checkpoint(upstream(out, artifacts::kModelCheckpoint, "finetune"), ModelDims::from(config));

  std::set<std::string> ids;
  for (const auto& rec : corpus) {
    if (rec.split == Split::kTest) ids.insert(rec.image_id);
  }
  if (ids.empty()) throw InputError(in.corpus.string() + ": no test-split images to score");
  const ScoreTable scores = score_images(ckpt.model, features, embeddings, categories, {ids.begin(), ids.end()});
  save_scores(scores, out / artifacts::kScores);
  manifest.add_output(out / artifacts::kScores);
}

void cmd_eval(const PipelineConfig&, const InputPaths& in, const fs::path& out, RunManifest& manifest) {
  StageTimer timer(manifest, "eval");
  const Lexicon lexicon = load_lexicon(in, manifest);
  const auto categories = load_checked_categories(in, lexicon, manifest);
  manifest.add_input("truth", require_file(in.truth, "ground truth"));
  const GroundTruth truth = load_truth(in.truth);
  const ScoreTable scores = load_scores(upstream(out, artifacts::kScores, "predict"));
  for (const auto& [id, s] : scores) {
    if (s.size() != static_cast<Eigen::Index>(categories.size())) {
      throw InputError("scores.tsv: image " + id + " has " + std::to_string(s.size()) + " scores for " +
                       std::to_string(categories.size()) + " categories");
    }
  }
  const EvalReport report = evaluate(scores, truth, {1, 5});
  std::vector<std::string> names;
  for (const auto& c : categories) names.push_back(c.name);
  save_report(report, names, out / artifacts::kReport);
  manifest.add_output(out / artifacts::kReport);
  manifest.add_metric("mAP", report.mean_ap);
  for (const auto& [k, r] : report.recall_at) manifest.add_metric("R@" + std::to_string(k), r);
}

void cmd_run_all(const PipelineConfig& config, const InputPaths& in, const fs::path& out, RunManifest& manifest) {
  cmd_discover(config, in, out, manifest);
  cmd_train(config, in, out, manifest);
  cmd_match(config, in, out, manifest);
  cmd_finetune(config, in, out, manifest);
  cmd_predict(config, in, out, manifest);
  cmd_eval(config, in, out, manifest);
}

}  // namespace actweave
