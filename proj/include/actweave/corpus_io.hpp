#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace actweave {

enum class Split { kTrain, kTest };

struct ImagedDescription {
  std::string image_id;
  std::string description;
  Split split = Split::kTrain;
};

/// Image id -> fixed-length feature vector. Immutable once loaded.
class FeatureTable {
 public:
  explicit FeatureTable(int dim = 0) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& id) const { return entries_.count(id) != 0; }

  /// Throws InputError for unknown ids.
  const Eigen::VectorXd& at(const std::string& id) const;

  /// Throws InputError on dimension mismatch or non-finite values.
  void insert(const std::string& id, Eigen::VectorXd v);

  const std::map<std::string, Eigen::VectorXd>& entries() const { return entries_; }

 private:
  int dim_;
  std::map<std::string, Eigen::VectorXd> entries_;
};

/// Frozen word vectors. Out-of-vocabulary words get a deterministic unit
/// vector derived from a hash of the word and the run seed.
class EmbeddingTable {
 public:
  EmbeddingTable(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

  int dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& word) const { return entries_.count(word) != 0; }

  void insert(const std::string& word, Eigen::VectorXd v);
  Eigen::VectorXd lookup(const std::string& word) const;

  /// Column t holds the embedding of tokens[t].
  Eigen::MatrixXd embed(const std::vector<std::string>& tokens) const;

  const std::map<std::string, Eigen::VectorXd>& entries() const { return entries_; }

 private:
  int dim_;
  std::uint64_t seed_;
  std::map<std::string, Eigen::VectorXd> entries_;
};

/// Line-delimited JSON records. Errors carry the 1-based line number.
std::vector<ImagedDescription> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::vector<ImagedDescription>& corpus, const std::filesystem::path& path);

/// `image_id<TAB>f_0<TAB>...`; dimension taken from the first row.
FeatureTable load_features(const std::filesystem::path& path);
void save_features(const FeatureTable& table, const std::filesystem::path& path);

/// word2vec text format with optional `<count> <dim>` header.
EmbeddingTable load_embeddings(const std::filesystem::path& path, std::uint64_t seed);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

/// Throws InputError listing up to a few ids missing from the table.
void require_features(const FeatureTable& table, const std::vector<std::string>& ids,
                      const std::string& context);

/// Shortest decimal text that parses back to the same double.
std::string format_real(double v);

}  // namespace actweave
