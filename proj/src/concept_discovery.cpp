#include "actweave/concept_discovery.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "actweave/common.hpp"
#include "actweave/eval.hpp"

namespace actweave {

SimilarityMatrix::SimilarityMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols() || values_.rows() == 0) {
    throw InputError("similarity matrix must be square and non-empty");
  }
  constexpr double kTol = 1e-12;
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    if (std::abs(values_(i, i) - 1.0) > kTol) throw InputError("similarity matrix diagonal must be 1");
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      const double v = values_(i, j);
      if (!std::isfinite(v) || v < -1.0 - kTol || v > 1.0 + kTol) {
        throw InputError("similarity values must lie in [-1, 1]");
      }
      if (std::abs(v - values_(j, i)) > kTol) throw InputError("similarity matrix must be symmetric");
    }
  }
}

SimilarityMatrix SimilarityMatrix::submatrix(const std::vector<std::size_t>& members) const {
  const auto n = static_cast<Eigen::Index>(members.size());
  Eigen::MatrixXd sub(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      sub(a, b) = values_(static_cast<Eigen::Index>(members[a]), static_cast<Eigen::Index>(members[b]));
    }
  }
  return SimilarityMatrix(std::move(sub));
}

std::vector<ActionConcept> gather_concepts(const std::vector<ImagedDescription>& corpus,
                                           const Lexicon& lexicon, int min_samples) {
  std::map<VOPair, std::set<std::string>> images;
  for (const auto& rec : corpus) {
    if (rec.split != Split::kTrain) continue;
    if (!has_human_subject(rec.description, lexicon)) continue;
    for (auto& pair : extract_vo(rec.description, lexicon)) images[std::move(pair)].insert(rec.image_id);
  }
  std::vector<ActionConcept> concepts;
  for (auto& [pair, ids] : images) {
    if (static_cast<int>(ids.size()) < min_samples) continue;
    ActionConcept c;
    c.pair = pair;
    c.image_ids.assign(ids.begin(), ids.end());
    concepts.push_back(std::move(c));
  }
  return concepts;
}

namespace {

struct Fold {
  std::vector<std::string> train_pos, train_neg, test_pos, test_neg;
};

double fold_ap(const Fold& fold, const FeatureTable& features) {
  const int d = features.dim();
  const auto n_train = static_cast<Eigen::Index>(fold.train_pos.size() + fold.train_neg.size());
  Eigen::MatrixXd x(n_train, d + 1);
  Eigen::VectorXd y(n_train);
  Eigen::Index row = 0;
  for (const auto* ids : {&fold.train_pos, &fold.train_neg}) {
    const double target = ids == &fold.train_pos ? 1.0 : -1.0;
    for (const auto& id : *ids) {
      x.row(row).head(d) = features.at(id).transpose();
      x(row, d) = 1.0;
      y[row++] = target;
    }
  }
  const Eigen::VectorXd w = x.completeOrthogonalDecomposition().solve(y);

  std::vector<std::pair<std::string, double>> scored;
  std::set<std::string> positives(fold.test_pos.begin(), fold.test_pos.end());
  for (const auto* ids : {&fold.test_pos, &fold.test_neg}) {
    for (const auto& id : *ids) scored.emplace_back(id, features.at(id).dot(w.head(d)) + w[d]);
  }
  std::vector<bool> relevance;
  for (const auto& id : rank_by_score(std::move(scored))) relevance.push_back(positives.count(id) != 0);
  return average_precision(relevance);
}

}  // namespace

void score_visualness(std::vector<ActionConcept>& concepts, const FeatureTable& features,
                      const PipelineConfig& config) {
  for (const auto& c : concepts) {
    if (c.image_ids.size() < 2) {
      throw InputError("visualness: concept '" + c.pair.str() + "' has fewer than 2 images");
    }
    require_features(features, c.image_ids, "visualness for '" + c.pair.str() + "'");
  }
  parallel_for(concepts.size(), [&](std::size_t k) {
    ActionConcept& action = concepts[k];
    Rng rng(config.seed ^ fnv1a64(action.pair.str()));

    std::vector<std::string> pos = action.image_ids;
    rng.shuffle(pos);

    const std::set<std::string> own(action.image_ids.begin(), action.image_ids.end());
    std::set<std::string> pool_set;
    for (std::size_t o = 0; o < concepts.size(); ++o) {
      if (o == k) continue;
      for (const auto& id : concepts[o].image_ids) {
        if (!own.count(id)) pool_set.insert(id);
      }
    }
    std::vector<std::string> neg(pool_set.begin(), pool_set.end());
    rng.shuffle(neg);
    if (neg.size() > pos.size()) neg.resize(pos.size());

    const std::size_t pos_half = pos.size() / 2;
    const std::size_t neg_half = neg.size() / 2;
    Fold a{{pos.begin(), pos.begin() + pos_half}, {neg.begin(), neg.begin() + neg_half},
           {pos.begin() + pos_half, pos.end()}, {neg.begin() + neg_half, neg.end()}};
    Fold b{a.test_pos, a.test_neg, a.train_pos, a.train_neg};
    action.visualness_ap = 0.5 * (fold_ap(a, features) + fold_ap(b, features));
  });
}

std::vector<ActionConcept> verify_visualness(std::vector<ActionConcept> concepts,
                                             const FeatureTable& features, const PipelineConfig& config) {
  score_visualness(concepts, features, config);
  std::erase_if(concepts, [&](const ActionConcept& c) { return c.visualness_ap < config.visualness_threshold; });
  return concepts;
}

Eigen::VectorXd build_representation(const ActionConcept& action, const FeatureTable& features,
                                     const EmbeddingTable& embeddings) {
  Eigen::VectorXd visual = Eigen::VectorXd::Zero(features.dim());
  for (const auto& id : action.image_ids) visual += features.at(id);
  if (!action.image_ids.empty()) visual /= static_cast<double>(action.image_ids.size());
  if (const double n = visual.norm(); n > 0.0) visual /= n;

  Eigen::VectorXd text = 0.5 * (embeddings.lookup(action.pair.verb) + embeddings.lookup(action.pair.object));
  if (const double n = text.norm(); n > 0.0) text /= n;

  Eigen::VectorXd rep(visual.size() + text.size());
  rep << visual, text;
  return rep;
}

SimilarityMatrix similarity_matrix(const std::vector<ActionConcept>& concepts) {
  const auto l = static_cast<Eigen::Index>(concepts.size());
  if (l == 0) throw InputError("similarity_matrix: no concepts");
  const Eigen::Index dim = concepts.front().representation.size();
  Eigen::MatrixXd units(dim, l);
  for (Eigen::Index i = 0; i < l; ++i) {
    const auto& rep = concepts[static_cast<std::size_t>(i)].representation;
    if (rep.size() != dim) throw InputError("similarity_matrix: representations differ in length");
    const double n = rep.norm();
    if (!(n > 0.0)) {
      throw InputError("similarity_matrix: zero-norm representation for '" +
                       concepts[static_cast<std::size_t>(i)].pair.str() + "'");
    }
    units.col(i) = rep / n;
  }
  Eigen::MatrixXd m = units.transpose() * units;
  for (Eigen::Index i = 0; i < l; ++i) {
    m(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < l; ++j) {
      const double v = std::clamp(0.5 * (m(i, j) + m(j, i)), -1.0, 1.0);
      m(i, j) = m(j, i) = v;
    }
  }
  return SimilarityMatrix(std::move(m));
}

std::vector<std::vector<std::size_t>> nn_clustering(const SimilarityMatrix& similarity, int c) {
  const auto l = static_cast<std::size_t>(similarity.size());
  if (l == 0) throw InputError("nn_clustering: empty concept list");
  if (c < 1) throw InputError("nn_clustering: C must be >= 1");
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(c), l - 1);

  // neighbours[i][j]: j is among i's k most similar concepts.
  std::vector<std::vector<bool>> neighbours(l, std::vector<bool>(l, false));
  for (std::size_t i = 0; i < l; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < l; ++j) {
      if (j != i) others.push_back(j);
    }
    std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
      return similarity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) >
             similarity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
    });
    for (std::size_t r = 0; r < k; ++r) neighbours[i][others[r]] = true;
  }

  std::vector<std::size_t> label(l, l);
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t s = 0; s < l; ++s) {
    if (label[s] != l) continue;
    const std::size_t id = clusters.size();
    clusters.emplace_back();
    std::deque<std::size_t> frontier{s};
    label[s] = id;
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop_front();
      clusters[id].push_back(u);
      for (std::size_t v = 0; v < l; ++v) {
        if (label[v] == l && neighbours[u][v] && neighbours[v][u]) {
          label[v] = id;
          frontier.push_back(v);
        }
      }
    }
    std::sort(clusters[id].begin(), clusters[id].end());
  }
  return clusters;
}

namespace {

std::size_t add_leaf(ActTree& tree, const ActionConcept& action) {
  ActNode node;
  node.name = action.pair;
  node.action = action;
  node.images = action.image_ids;
  tree.nodes.push_back(std::move(node));
  return tree.nodes.size() - 1;
}

void finish_node(ActTree& tree, std::size_t index, const HypernymGraph& graph) {
  ActNode& node = tree.nodes[index];
  if (node.is_leaf()) return;
  for (std::size_t c : node.children) finish_node(tree, c, graph);
  std::set<std::string> pooled;
  for (std::size_t c : tree.nodes[index].children) {
    pooled.insert(tree.nodes[c].images.begin(), tree.nodes[c].images.end());
  }
  tree.nodes[index].images.assign(pooled.begin(), pooled.end());
  tree.nodes[index].name = name_node(tree.leaf_names(index), graph);
}

}  // namespace

ActTree build_act(const SimilarityMatrix& similarity, const std::vector<ActionConcept>& concepts,
                  const HypernymGraph& graph, int c) {
  if (static_cast<std::size_t>(similarity.size()) != concepts.size()) {
    throw InputError("build_act: similarity matrix and concept list differ in size");
  }
  ActTree tree;
  tree.nodes.emplace_back();

  struct Pending {
    std::size_t node;
    std::vector<std::size_t> members;  // indices into `concepts`
  };
  std::deque<Pending> queue;

  auto attach = [&](std::size_t parent, const std::vector<std::size_t>& cluster) {
    if (cluster.size() == 1) {
      const std::size_t leaf = add_leaf(tree, concepts[cluster.front()]);
      tree.nodes[parent].children.push_back(leaf);
      return;
    }
    tree.nodes.emplace_back();
    const std::size_t node = tree.nodes.size() - 1;
    tree.nodes[parent].children.push_back(node);
    queue.push_back({node, cluster});
  };

  for (const auto& cluster : nn_clustering(similarity, c)) attach(ActTree::kRoot, cluster);

  while (!queue.empty()) {
    Pending item = std::move(queue.front());
    queue.pop_front();
    std::vector<std::vector<std::size_t>> sub;
    if (item.members.size() > 2) {
      for (const auto& local : nn_clustering(similarity.submatrix(item.members), c)) {
        std::vector<std::size_t> global;
        for (std::size_t i : local) global.push_back(item.members[i]);
        sub.push_back(std::move(global));
      }
    }
    if (sub.size() <= 1) {
      // Fixed point or a pair: the members become leaves of this node.
      for (std::size_t m : item.members) {
        const std::size_t leaf = add_leaf(tree, concepts[m]);
        tree.nodes[item.node].children.push_back(leaf);
      }
      continue;
    }
    for (const auto& cluster : sub) attach(item.node, cluster);
  }

  finish_node(tree, ActTree::kRoot, graph);
  return tree;
}

void save_concepts_report(const std::vector<ActionConcept>& scored, double threshold,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << "verb\tobject\tn_images\tvisualness_ap\tkept\n";
  for (const auto& c : scored) {
    out << c.pair.verb << '\t' << c.pair.object << '\t' << c.image_ids.size() << '\t'
        << format_real(c.visualness_ap) << '\t' << (c.visualness_ap >= threshold ? "yes" : "no") << '\n';
  }
}

}  // namespace actweave
