#include "actweave/stage2.hpp"

#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "actweave/common.hpp"
#include "actweave/persistence.hpp"

namespace actweave {

TargetCategory make_category(int index, const std::string& line, const Lexicon& lexicon) {
  TargetCategory cat;
  cat.index = index;
  cat.name = trim(line);
  for (const auto& w : tokenize(cat.name)) cat.description.push_back(lemmatize(w, lexicon));
  if (cat.description.empty()) throw InputError("category " + std::to_string(index) + " is empty");
  cat.pair.verb = cat.description.front();
  for (std::size_t i = 1; i < cat.description.size(); ++i) {
    if (i > 1) cat.pair.object += ' ';
    cat.pair.object += cat.description[i];
  }
  return cat;
}

std::vector<TargetCategory> load_categories(const std::filesystem::path& path, const Lexicon& lexicon) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<TargetCategory> categories;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    categories.push_back(make_category(static_cast<int>(categories.size()), line, lexicon));
  }
  if (categories.empty()) throw InputError(path.string() + ": no categories");
  return categories;
}

Eigen::MatrixXd encode_categories(const AsaModel& model, const EmbeddingTable& embeddings,
                                  const std::vector<TargetCategory>& categories) {
  Eigen::MatrixXd encoded(model.dims().d_text, static_cast<Eigen::Index>(categories.size()));
  for (std::size_t j = 0; j < categories.size(); ++j) {
    encoded.col(static_cast<Eigen::Index>(j)) = model.encode_text(embeddings.embed(categories[j].description));
  }
  return encoded;
}

PairScorer asa_scorer(const AsaModel& model, const FeatureTable& features, const EmbeddingTable& embeddings,
                      const std::vector<TargetCategory>& categories) {
  Eigen::MatrixXd encoded = encode_categories(model, embeddings, categories);
  return [&model, &features, encoded = std::move(encoded)](std::size_t category, const std::string& image_id) {
    return model.align_score(features.at(image_id), encoded.col(static_cast<Eigen::Index>(category)));
  };
}

double node_category_similarity(std::size_t category, const ActNode& node, const PairScorer& scorer) {
  if (node.images.empty()) throw InputError("node '" + node.name.str() + "' has no images");
  double sum = 0.0;
  for (const auto& id : node.images) sum += scorer(category, id);
  return sum / static_cast<double>(node.images.size());
}

std::vector<MatchResult> match_categories(const std::vector<TargetCategory>& categories, const ActTree& tree,
                                          const PairScorer& scorer, const MatchOptions& options) {
  if (tree.nodes.empty()) throw InputError("match_categories: empty tree");
  std::vector<std::size_t> candidates;
  for (std::size_t n : tree.preorder()) {
    if (n == ActTree::kRoot) continue;
    if (options.leaves_only && !tree.nodes[n].is_leaf()) continue;
    candidates.push_back(n);
  }

  std::vector<MatchResult> results(categories.size());
  parallel_for(categories.size(), [&](std::size_t c) {
    // Each image is scored once per category and shared by every node holding it.
    std::map<std::string, double> cache;
    auto cached = [&](std::size_t cat, const std::string& id) {
      auto [it, inserted] = cache.try_emplace(id, 0.0);
      if (inserted) it->second = scorer(cat, id);
      return it->second;
    };
    MatchResult& r = results[c];
    r.category = c;
    r.theta = options.theta_init;
    for (std::size_t n : candidates) {
      if (tree.nodes[n].name == categories[c].pair) {
        r.exact_match = NodeScore{n, node_category_similarity(c, tree.nodes[n], cached)};
        r.theta = r.exact_match->score;
        break;
      }
    }
    for (std::size_t n : candidates) {
      if (r.exact_match && r.exact_match->node == n) continue;
      const double s = node_category_similarity(c, tree.nodes[n], cached);
      if (!r.best || s > r.best->score) r.best = NodeScore{n, s};
    }
    if (r.exact_match) r.matched_nodes.push_back(r.exact_match->node);
    if (r.best && r.best->score >= r.theta) r.matched_nodes.push_back(r.best->node);
    std::set<std::string> images;
    for (std::size_t n : r.matched_nodes) images.insert(tree.nodes[n].images.begin(), tree.nodes[n].images.end());
    r.training_images.assign(images.begin(), images.end());
  });
  return results;
}

std::vector<LabeledImage> finetune_samples(const std::vector<MatchResult>& matches) {
  std::vector<LabeledImage> samples;
  for (const auto& m : matches) {
    for (const auto& id : m.training_images) samples.push_back({id, static_cast<int>(m.category)});
  }
  return samples;
}

std::vector<TraceEntry> finetune(const std::vector<MatchResult>& matches, const std::vector<TargetCategory>& categories,
                                 AsaModel& model, AsaOptimizer& optimizer, const FeatureTable& features,
                                 const EmbeddingTable& embeddings, const PipelineConfig& config) {
  const auto samples = finetune_samples(matches);
  if (samples.empty()) {
    throw EmptyResultError("no category received training images; try a lower theta_init");
  }
  std::vector<std::string> ids;
  for (const auto& s : samples) ids.push_back(s.image_id);
  require_features(features, ids, "fine-tuning");

  std::vector<Eigen::MatrixXd> texts;
  for (const auto& c : categories) texts.push_back(embeddings.embed(c.description));

  const LossWeights weights{config.alpha_c, config.alpha_w};
  std::vector<TraceEntry> trace;
  AsaParams grads;
  const std::uint64_t schedule_seed = config.seed ^ 0xf1e2d3c4b5a69788ULL;
  for (int k = 0; k < config.finetune_steps; ++k) {
    const std::int64_t step = optimizer.encoder.steps();
    const auto members = batch_indices(samples.size(), static_cast<std::size_t>(config.batch_size), schedule_seed, step);
    Batch batch;
    batch.images.resize(model.dims().d_img, static_cast<Eigen::Index>(members.size()));
    for (std::size_t b = 0; b < members.size(); ++b) {
      batch.images.col(static_cast<Eigen::Index>(b)) = features.at(samples[members[b]].image_id);
      batch.labels.push_back(samples[members[b]].label);
    }
    batch.texts = texts;
    const double loss = forward_backward(model, batch, LossKind::kStage2, weights, grads);
    check_finite_loss(loss, step + 1);
    optimizer.step(model.params(), grads);
    trace.push_back({step + 1, loss, members.size() == 1});
  }
  return trace;
}

Prediction predict_from_scores(const Eigen::VectorXd& scores) {
  if (scores.size() < 1) throw InputError("predict: no categories");
  Prediction p;
  Eigen::Index best = 0;
  scores.maxCoeff(&best);
  p.index = static_cast<int>(best);
  p.scores = scores;
  return p;
}

Prediction predict(const Eigen::VectorXd& image, const AsaModel& model, const Eigen::MatrixXd& encoded_categories) {
  Eigen::MatrixXd single(image.size(), 1);
  single.col(0) = image;
  return predict_from_scores(model.score_encoded(single, encoded_categories).row(0).transpose());
}

ScoreTable score_images(const AsaModel& model, const FeatureTable& features, const EmbeddingTable& embeddings,
                        const std::vector<TargetCategory>& categories, const std::vector<std::string>& image_ids) {
  require_features(features, image_ids, "prediction");
  const Eigen::MatrixXd encoded = encode_categories(model, embeddings, categories);
  std::vector<Eigen::VectorXd> rows(image_ids.size());
  parallel_for(image_ids.size(), [&](std::size_t i) {
    rows[i] = predict(features.at(image_ids[i]), model, encoded).scores;
  });
  ScoreTable table;
  for (std::size_t i = 0; i < image_ids.size(); ++i) table[image_ids[i]] = std::move(rows[i]);
  return table;
}

void save_matches(const std::vector<MatchResult>& matches, const std::vector<TargetCategory>& categories,
                  const ActTree& tree, const std::filesystem::path& path) {
  using ordered_json = nlohmann::ordered_json;
  auto node_json = [&](const std::optional<NodeScore>& ns) -> ordered_json {
    if (!ns) return nullptr;
    return ordered_json{{"node", tree.nodes[ns->node].name.str()}, {"score", ns->score},
                        {"n_images", tree.nodes[ns->node].images.size()}};
  };
  ordered_json arr = ordered_json::array();
  for (const auto& m : matches) {
    ordered_json j;
    j["category"] = categories[m.category].name;
    j["index"] = m.category;
    j["theta"] = m.theta;
    j["exact_match"] = node_json(m.exact_match);
    j["best_node"] = node_json(m.best);
    ordered_json matched = ordered_json::array();
    for (std::size_t n : m.matched_nodes) matched.push_back(tree.nodes[n].name.str());
    j["matched_nodes"] = matched;
    j["n_training_images"] = m.training_images.size();
    j["training_images"] = m.training_images;
    arr.push_back(j);
  }
  write_file_atomic(path, ordered_json{{"matches", arr}}.dump(2) + "\n");
}

std::vector<MatchResult> load_matches(const std::filesystem::path& path, std::size_t n_categories) {
  std::ifstream in(path);
  if (!in) throw InputError("missing upstream artifact " + path.string() + " (run `match` first)");
  std::vector<MatchResult> results;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& e : j.at("matches")) {
      MatchResult r;
      r.category = e.at("index").get<std::size_t>();
      if (r.category >= n_categories) throw InputError(path.string() + ": category index out of range");
      r.theta = e.at("theta").get<double>();
      r.training_images = e.at("training_images").get<std::vector<std::string>>();
      results.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(path.string() + ": " + ex.what());
  }
  if (results.size() != n_categories) throw InputError(path.string() + ": expected one entry per category");
  return results;
}

void save_scores(const ScoreTable& scores, const std::filesystem::path& path) {
  std::string text;
  for (const auto& [id, s] : scores) {
    text += id;
    for (Eigen::Index j = 0; j < s.size(); ++j) text += '\t' + format_real(s[j]);
    text += '\n';
  }
  write_file_atomic(path, text);
}

ScoreTable load_scores(const std::filesystem::path& path) {
  const FeatureTable raw = load_features(path);
  ScoreTable table;
  for (const auto& [id, v] : raw.entries()) table[id] = v;
  return table;
}

}  // namespace actweave
