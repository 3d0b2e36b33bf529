#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "actweave/act_tree.hpp"
#include "actweave/config.hpp"
#include "actweave/corpus_io.hpp"
#include "actweave/taxonomy.hpp"
#include "actweave/vo_extract.hpp"

namespace actweave {

/// Pairwise concept similarities: symmetric, unit diagonal, values in [-1, 1].
class SimilarityMatrix {
 public:
  /// Throws InputError if the invariants do not hold.
  explicit SimilarityMatrix(Eigen::MatrixXd values);

  Eigen::Index size() const { return values_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
  const Eigen::MatrixXd& values() const { return values_; }

  /// Rows and columns `members`, in the given order.
  SimilarityMatrix submatrix(const std::vector<std::size_t>& members) const;

 private:
  Eigen::MatrixXd values_;
};

/// One concept per distinct VO pair seen on at least `min_samples` distinct
/// training images whose descriptions pass the human-subject filter. Sorted
/// by pair.
std::vector<ActionConcept> gather_concepts(const std::vector<ImagedDescription>& corpus,
                                           const Lexicon& lexicon, int min_samples);

/// Sets visualness_ap on every concept: two-fold cross-validated AP of a
/// least-squares linear scorer against an equal-size sample of other
/// concepts' images. Does not filter.
void score_visualness(std::vector<ActionConcept>& concepts, const FeatureTable& features,
                      const PipelineConfig& config);

/// score_visualness followed by dropping concepts below the threshold.
std::vector<ActionConcept> verify_visualness(std::vector<ActionConcept> concepts,
                                             const FeatureTable& features, const PipelineConfig& config);

/// Unit mean image feature concatenated with the unit mean of the verb and
/// object embeddings.
Eigen::VectorXd build_representation(const ActionConcept& action, const FeatureTable& features,
                                     const EmbeddingTable& embeddings);

/// Cosine similarities of concept representations.
SimilarityMatrix similarity_matrix(const std::vector<ActionConcept>& concepts);

/// Connected components of the mutual k-nearest-neighbour graph with
/// k = min(C, l - 1). Ties at the k-th place go to the lower index.
/// Clusters are ordered by their smallest member; members ascend.
std::vector<std::vector<std::size_t>> nn_clustering(const SimilarityMatrix& similarity, int c);

/// Hierarchical concept discovery: cluster, then re-cluster every cluster on
/// its own sub-matrix until a fixed point (one cluster equal to the input)
/// or a cluster of at most two concepts. Nodes are named from their leaves
/// and carry the union of their leaves' images.
ActTree build_act(const SimilarityMatrix& similarity, const std::vector<ActionConcept>& concepts,
                  const HypernymGraph& graph, int c);

/// concepts_report.tsv: verb object n_images visualness_ap kept
void save_concepts_report(const std::vector<ActionConcept>& scored, double threshold,
                          const std::filesystem::path& path);

}  // namespace actweave
