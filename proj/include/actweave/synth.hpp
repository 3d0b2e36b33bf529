#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "actweave/corpus_io.hpp"
#include "actweave/eval.hpp"
#include "actweave/vo_extract.hpp"

namespace actweave {

/// A latent topic: a shared feature centroid and a set of verb-object
/// concepts that only this topic uses.
struct SynthTopic {
  std::vector<VOPair> concepts;
  /// The target category of the topic (one of its concepts).
  std::string category;
};

/// Built-in topics; the first `n` are used for an n-topic corpus.
const std::vector<SynthTopic>& synth_topics();

struct SynthOptions {
  std::uint64_t seed = 0;
  int n_topics = 3;
  int train_per_topic = 60;
  int test_per_topic = 10;
  double noise = 0.2;
  int d_img = 64;
  int d_w2v = 32;
};

struct SynthData {
  std::vector<ImagedDescription> corpus;
  FeatureTable features;
  EmbeddingTable embeddings{0, 0};
  std::vector<std::string> categories;
  GroundTruth truth;
  /// image id -> the concept its description names.
  std::map<std::string, VOPair> image_concept;
  /// concept -> its noise-free feature centroid.
  std::map<VOPair, Eigen::VectorXd> centroids;
};

/// Templated human-subject descriptions over the topics' concepts. Images of
/// one concept share a centroid (topic centre plus concept offset); features
/// add Gaussian noise. Test images are labelled with their topic's category.
SynthData make_synth(const SynthOptions& options, const Lexicon& lexicon);

/// Writes corpus.jsonl, features.tsv, embeddings.vec, taxonomy.tsv (a copy of
/// `taxonomy_source`), categories.txt and truth.json into `dir`.
void write_synth(const SynthData& data, const std::filesystem::path& taxonomy_source, const std::filesystem::path& dir);

}  // namespace actweave
