#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "actweave/act_tree.hpp"
#include "actweave/asa_model.hpp"
#include "actweave/config.hpp"
#include "actweave/corpus_io.hpp"
#include "actweave/eval.hpp"
#include "actweave/training.hpp"
#include "actweave/vo_extract.hpp"

namespace actweave {

/// A target action category. `description` is the token sequence fed to
/// the encoder (verb lemma, then object lemmas). A one-word category has an
/// empty object and never matches a node name.
struct TargetCategory {
  int index = 0;
  std::string name;
  VOPair pair;
  std::vector<std::string> description;
};

/// categories.txt: one category per line, index = line order.
std::vector<TargetCategory> load_categories(const std::filesystem::path& path, const Lexicon& lexicon);
TargetCategory make_category(int index, const std::string& line, const Lexicon& lexicon);

/// Score of one image against one category.
using PairScorer = std::function<double(std::size_t category, const std::string& image_id)>;

/// ASA scores: encodes every category description once.
PairScorer asa_scorer(const AsaModel& model, const FeatureTable& features, const EmbeddingTable& embeddings,
                      const std::vector<TargetCategory>& categories);

/// Mean score of the category against the node's images. Throws on an
/// empty image set.
double node_category_similarity(std::size_t category, const ActNode& node, const PairScorer& scorer);

struct NodeScore {
  std::size_t node = 0;
  double score = 0.0;
};

struct MatchResult {
  std::size_t category = 0;
  std::optional<NodeScore> exact_match;
  std::optional<NodeScore> best;
  double theta = 0.0;
  std::vector<std::size_t> matched_nodes;
  std::vector<std::string> training_images;  // union of matched nodes' images, sorted
};

struct MatchOptions {
  double theta_init = 0.0;
  /// Match against leaves only (the flat-concept variant).
  bool leaves_only = false;
};

/// Keyword pass for an exact (verb, object) name match in pre-order, which
/// sets theta from its score; otherwise theta = theta_init. Then the best
/// other node is matched too when its score reaches theta. The root is a
/// container, not a concept node, and is never matched.
std::vector<MatchResult> match_categories(const std::vector<TargetCategory>& categories, const ActTree& tree,
                                          const PairScorer& scorer, const MatchOptions& options);

struct LabeledImage {
  std::string image_id;
  int label = 0;
};

/// One sample per (category, training image); an image matched to two
/// categories appears once per category.
std::vector<LabeledImage> finetune_samples(const std::vector<MatchResult>& matches);

/// Stage-2 fine-tuning from the current model. Throws EmptyResultError when
/// no category received training images.
std::vector<TraceEntry> finetune(const std::vector<MatchResult>& matches, const std::vector<TargetCategory>& categories,
                                 AsaModel& model, AsaOptimizer& optimizer, const FeatureTable& features,
                                 const EmbeddingTable& embeddings, const PipelineConfig& config);

struct Prediction {
  int index = 0;
  Eigen::VectorXd scores;
};

/// Argmax over category scores, ties to the lowest index.
Prediction predict(const Eigen::VectorXd& image, const AsaModel& model, const Eigen::MatrixXd& encoded_categories);
Prediction predict_from_scores(const Eigen::VectorXd& scores);

Eigen::MatrixXd encode_categories(const AsaModel& model, const EmbeddingTable& embeddings,
                                  const std::vector<TargetCategory>& categories);

/// Score vectors for the given images.
ScoreTable score_images(const AsaModel& model, const FeatureTable& features, const EmbeddingTable& embeddings,
                        const std::vector<TargetCategory>& categories, const std::vector<std::string>& image_ids);

void save_matches(const std::vector<MatchResult>& matches, const std::vector<TargetCategory>& categories,
                  const ActTree& tree, const std::filesystem::path& path);

/// Reads back the category index, theta and training images of each match.
std::vector<MatchResult> load_matches(const std::filesystem::path& path, std::size_t n_categories);

/// scores.tsv: image_id then one score per category.
void save_scores(const ScoreTable& scores, const std::filesystem::path& path);
ScoreTable load_scores(const std::filesystem::path& path);

}  // namespace actweave
