#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "actweave/config.hpp"
#include "actweave/corpus_io.hpp"
#include "actweave/training.hpp"
#include "actweave/vo_extract.hpp"

namespace actweave {

/// Input files of a run. `from_data_dir` uses the layout written by `synth`.
struct InputPaths {
  std::filesystem::path corpus;
  std::filesystem::path features;
  std::filesystem::path embeddings;
  std::filesystem::path taxonomy;
  std::filesystem::path categories;
  std::filesystem::path truth;
  std::filesystem::path lexicon;

  static InputPaths from_data_dir(const std::filesystem::path& dir);
};

/// Shipped lexicon and taxonomy.
std::filesystem::path default_lexicon_dir();
std::filesystem::path default_taxonomy();

/// Records what a command read, wrote and how long each stage took.
class RunManifest {
 public:
  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void add_timing(const std::string& stage, double seconds);
  void add_metric(const std::string& name, double value);
  /// manifest.json in `out_dir`, written atomically.
  void write(const std::string& command, const PipelineConfig& config, const std::filesystem::path& out_dir) const;

 private:
  std::vector<std::pair<std::string, std::string>> inputs_;  // role -> "path fnv"
  std::vector<std::string> outputs_;
  std::vector<std::pair<std::string, double>> timings_;
  std::vector<std::pair<std::string, double>> metrics_;
};

/// Encoder inputs for the records of one split: content lemmas, keyed by the
/// description's VO pairs (or its content when it has none).
std::vector<TextItem> make_text_items(const std::vector<ImagedDescription>& corpus, Split split,
                                      const Lexicon& lexicon, const EmbeddingTable& embeddings, int max_seq_len);

/// Each command reads its inputs (and upstream artifacts from `out`) and
/// writes its artifacts into `out`.
void cmd_discover(const PipelineConfig& config, const InputPaths& in, const std::filesystem::path& out,
                  RunManifest& manifest);
void cmd_train(const PipelineConfig& config, const InputPaths& in, const std::filesystem::path& out,
               RunManifest& manifest);
void cmd_match(const PipelineConfig& config, const InputPaths& in, const std::filesystem::path& out,
               RunManifest& manifest);
void cmd_finetune(const PipelineConfig& config, const InputPaths& in, const std::filesystem::path& out,
                  RunManifest& manifest);
void cmd_predict(const PipelineConfig& config, const InputPaths& in, const std::filesystem::path& out,
                 RunManifest& manifest);
void cmd_eval(const PipelineConfig& config, const InputPaths& in, const std::filesystem::path& out,
              RunManifest& manifest);
/// discover, train, match, finetune, predict and eval in order.
void cmd_run_all(const PipelineConfig& config, const InputPaths& in, const std::filesystem::path& out,
                 RunManifest& manifest);

/// Artifact names inside the output directory.
namespace artifacts {
inline constexpr const char* kAct = "act.json";
inline constexpr const char* kConceptsReport = "concepts_report.tsv";
inline constexpr const char* kStage1Checkpoint = "stage1.ckpt";
inline constexpr const char* kTrainTrace = "train_trace.tsv";
inline constexpr const char* kStage1Metrics = "stage1_metrics.json";
inline constexpr const char* kMatches = "matches.json";
inline constexpr const char* kModelCheckpoint = "model.ckpt";
inline constexpr const char* kFinetuneTrace = "finetune_trace.tsv";
inline constexpr const char* kScores = "scores.tsv";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifacts

}  // namespace actweave
