#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "actweave/asa_model.hpp"
#include "actweave/config.hpp"
#include "actweave/corpus_io.hpp"

namespace actweave {

/// An image paired with its embedded description. `key` identifies the
/// description's content for retrieval scoring (equal keys are
/// interchangeable matches).
struct TextItem {
  std::string image_id;
  Eigen::MatrixXd text;
  std::string key;
};

struct TraceEntry {
  std::int64_t step = 0;  // 1-based
  double loss = 0.0;
  bool singleton_batch = false;
};

/// Indices of the items in batch `step` (0-based, counted across epochs).
/// Each epoch is a fresh seeded permutation; the last batch may be short.
std::vector<std::size_t> batch_indices(std::size_t n_items, std::size_t batch_size, std::uint64_t seed,
                                       std::int64_t step);

/// Runs `n_steps` stage-1 steps continuing from optimizer.encoder.steps(),
/// so a restored checkpoint resumes the same batch schedule.
std::vector<TraceEntry> train_stage1(const std::vector<TextItem>& items, const FeatureTable& features,
                                     AsaModel& model, AsaOptimizer& optimizer, const PipelineConfig& config,
                                     int n_steps);

/// Fraction of items whose best-scoring description within their batch
/// carries the same key.
double within_batch_retrieval(const AsaModel& model, const std::vector<TextItem>& items,
                              const FeatureTable& features, std::size_t batch_size, std::uint64_t seed);

/// Throws NumericError if the loss is not finite.
void check_finite_loss(double loss, std::int64_t step);

void save_trace(const std::vector<TraceEntry>& trace, const std::filesystem::path& path);

}  // namespace actweave
