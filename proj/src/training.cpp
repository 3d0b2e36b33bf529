#include "actweave/training.hpp"

#include <fstream>
#include <numeric>

#include "actweave/common.hpp"

namespace actweave {

std::vector<std::size_t> batch_indices(std::size_t n_items, std::size_t batch_size, std::uint64_t seed,
                                       std::int64_t step) {
  if (n_items == 0 || batch_size == 0) throw InputError("batch_indices: nothing to batch");
  const std::size_t per_epoch = (n_items + batch_size - 1) / batch_size;
  const auto epoch = static_cast<std::uint64_t>(step) / per_epoch;
  const std::size_t b = static_cast<std::size_t>(static_cast<std::uint64_t>(step) % per_epoch);
  std::vector<std::size_t> order(n_items);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
  rng.shuffle(order);
  const std::size_t begin = b * batch_size;
  const std::size_t end = std::min(n_items, begin + batch_size);
  return {order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(end)};
}

void check_finite_loss(double loss, std::int64_t step) {
  if (!std::isfinite(loss)) throw NumericError("non-finite loss at step " + std::to_string(step));
}

std::vector<TraceEntry> train_stage1(const std::vector<TextItem>& items, const FeatureTable& features,
                                     AsaModel& model, AsaOptimizer& optimizer, const PipelineConfig& config,
                                     int n_steps) {
  if (items.size() < 2) throw InputError("stage-1 training needs at least 2 image-description pairs");
  std::vector<std::string> ids;
  for (const auto& it : items) ids.push_back(it.image_id);
  require_features(features, ids, "stage-1 training");

  const LossWeights weights{config.alpha_c, config.alpha_w};
  std::vector<TraceEntry> trace;
  AsaParams grads;
  for (int k = 0; k < n_steps; ++k) {
    const std::int64_t step = optimizer.encoder.steps();
    const auto members = batch_indices(items.size(), static_cast<std::size_t>(config.batch_size), config.seed, step);
    Batch batch;
    batch.images.resize(model.dims().d_img, static_cast<Eigen::Index>(members.size()));
    for (std::size_t b = 0; b < members.size(); ++b) {
      batch.images.col(static_cast<Eigen::Index>(b)) = features.at(items[members[b]].image_id);
      batch.texts.push_back(items[members[b]].text);
    }
    const double loss = forward_backward(model, batch, LossKind::kStage1, weights, grads);
    check_finite_loss(loss, step + 1);
    optimizer.step(model.params(), grads);
    trace.push_back({step + 1, loss, members.size() == 1});
  }
  return trace;
}

double within_batch_retrieval(const AsaModel& model, const std::vector<TextItem>& items,
                              const FeatureTable& features, std::size_t batch_size, std::uint64_t seed) {
  if (items.empty()) throw InputError("within_batch_retrieval: no items");
  const std::size_t n_batches = (items.size() + batch_size - 1) / batch_size;
  std::size_t hits = 0;
  for (std::size_t b = 0; b < n_batches; ++b) {
    const auto members = batch_indices(items.size(), batch_size, seed, static_cast<std::int64_t>(b));
    Eigen::MatrixXd images(model.dims().d_img, static_cast<Eigen::Index>(members.size()));
    std::vector<Eigen::MatrixXd> texts;
    for (std::size_t k = 0; k < members.size(); ++k) {
      images.col(static_cast<Eigen::Index>(k)) = features.at(items[members[k]].image_id);
      texts.push_back(items[members[k]].text);
    }
    const Eigen::MatrixXd cs = model.score_matrix(images, texts);
    for (Eigen::Index i = 0; i < cs.rows(); ++i) {
      Eigen::Index best = 0;
      cs.row(i).maxCoeff(&best);
      if (items[members[static_cast<std::size_t>(best)]].key == items[members[static_cast<std::size_t>(i)]].key) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(items.size());
}

void save_trace(const std::vector<TraceEntry>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << "step\tloss\n";
  for (const auto& e : trace) {
    out << e.step << '\t' << format_real(e.loss);
    if (e.singleton_batch) out << "\t# single-item batch";
    out << '\n';
  }
}

}  // namespace actweave
