// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "actweave/common.hpp"
#include "actweave/concept_discovery.hpp"
#include "actweave/eval.hpp"
#include "actweave/persistence.hpp"
#include "actweave/pipeline.hpp"
#include "actweave/stage2.hpp"
#include "actweave/synth.hpp"
#include "actweave/taxonomy.hpp"
#include "actweave/training.hpp"
#include "oracles.hpp"

using namespace actweave;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

PipelineConfig desk_config() { return load_config(fs::path(ACTWEAVE_SOURCE_DIR) / "configs" / "desk.toml"); }

const Lexicon& lexicon() {
  static const Lexicon lex = Lexicon::load(default_lexicon_dir());
  return lex;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("actweave_acceptance_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run(const std::string& args) {
  const std::string cmd = std::string(ACTWEAVE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelDims dims = ModelDims::from(desk_config());
  const LossWeights weights{1.0, 0.01};
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    AsaModel model = AsaModel::initialize(dims, seed);
    Rng rng(seed * 7919);
    // Non-zero biases so every coordinate carries gradient.
    model.params().for_each([&](const char*, Eigen::MatrixXd& p) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        for (Eigen::Index i = 0; i < p.rows(); ++i) p(i, j) += 0.05 * rng.normal();
      }
    });
    auto random_text = [&]() {
      Eigen::MatrixXd t(dims.d_w2v, 2 + static_cast<Eigen::Index>(rng.index(2)));
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = rng.normal();
        t.col(j).normalize();
      }
      return t;
    };
    for (LossKind kind : {LossKind::kStage1, LossKind::kStage2}) {
      Batch batch;
      batch.images.resize(dims.d_img, 2);
      for (Eigen::Index j = 0; j < 2; ++j) {
        for (Eigen::Index i = 0; i < dims.d_img; ++i) batch.images(i, j) = rng.normal();
      }
      batch.texts = {random_text(), random_text()};
      if (kind == LossKind::kStage2) {
        batch.texts.push_back(random_text());
        batch.labels = {static_cast<int>(rng.index(3)), static_cast<int>(rng.index(3))};
      }
      AsaParams grads;
      forward_backward(model, batch, kind, weights, grads);
      std::vector<Eigen::MatrixXd*> params;
      std::vector<const Eigen::MatrixXd*> analytic;
      model.params().for_each([&](const char*, Eigen::MatrixXd& p) { params.push_back(&p); });
      grads.for_each([&](const char*, const Eigen::MatrixXd& g) { analytic.push_back(&g); });
      for (std::size_t k = 0; k < params.size(); ++k) {
        for (Eigen::Index c = 0; c < params[k]->cols(); ++c) {
          for (Eigen::Index r = 0; r < params[k]->rows(); ++r) {
            const double num = oracle::finite_difference(model, batch, kind, weights, *params[k], r, c, 1e-5);
            worst = std::max(worst, oracle::relative_error((*analytic[k])(r, c), num, 1e-6));
            ++checked;
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 30.0, std::to_string(checked) + " coordinates, max relative error " +
                                            fmt("%.2e", worst) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome loss_closed_forms() {
  const double ln2 = std::log(2.0);
  const double a = stage1_loss(Eigen::MatrixXd::Zero(1, 1), 1.0, 0.01);
  const double b = stage1_loss(Eigen::MatrixXd::Zero(2, 2), 1.0, 0.01);
  const double c = stage2_loss(Eigen::MatrixXd::Zero(1, 2), {0}, 1.0, 0.01);
  const double err = std::max({std::abs(a - ln2), std::abs(b - 2.02 * ln2), std::abs(c - 1.01 * ln2)});
  return {err <= 1e-9, "max deviation " + fmt("%.1e", err)};
}

Outcome clustering_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const HypernymGraph graph = HypernymGraph::load(default_taxonomy());
  Rng rng(20240);
  int mismatches = 0, bad_trees = 0;
  const char* verbs[] = {"ride", "hold", "eat", "throw", "walk"};
  const char* objects[] = {"bike", "horse", "pizza", "frisbee", "dog", "kite", "cup", "bus"};
  for (int trial = 0; trial < 100; ++trial) {
    const int l = 1 + static_cast<int>(rng.index(8));
    Eigen::MatrixXd sim(l, l);
    for (int i = 0; i < l; ++i) {
      sim(i, i) = 1.0;
      for (int j = i + 1; j < l; ++j) {
        // Coarse values so ties occur regularly.
        sim(i, j) = sim(j, i) = std::round(rng.uniform(-1.0, 1.0) * 4.0) / 4.0;
      }
    }
    const int c = 1 + static_cast<int>(rng.index(5));
    if (nn_clustering(SimilarityMatrix(sim), c) != oracle::mutual_knn_clusters(sim, c)) ++mismatches;

    std::vector<ActionConcept> concepts;
    std::set<VOPair> used;
    while (static_cast<int>(concepts.size()) < l) {
      ActionConcept a;
      a.pair = {verbs[rng.index(5)], objects[rng.index(8)]};
      if (!used.insert(a.pair).second) continue;
      a.image_ids = {"img" + std::to_string(concepts.size())};
      a.representation = Eigen::VectorXd::Ones(2);
      concepts.push_back(a);
    }
    const ActTree tree = build_act(SimilarityMatrix(sim), concepts, graph, c);
    tree.validate();
    std::multiset<VOPair> leaves, expected;
    for (std::size_t n : tree.leaves()) leaves.insert(tree.nodes[n].action->pair);
    for (const auto& a : concepts) expected.insert(a.pair);
    if (leaves != expected) ++bad_trees;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && bad_trees == 0 && secs < 10.0,
          std::to_string(mismatches) + " clustering mismatches, " + std::to_string(bad_trees) +
              " trees with wrong leaves over 100 trials, " + fmt("%.2f", secs) + " s"};
}

Outcome taxonomy_oracle() {
  const HypernymGraph graph = HypernymGraph::load(default_taxonomy());
  std::vector<std::pair<std::string, std::string>> edges;
  {
    std::ifstream in(default_taxonomy());
    std::string line;
    while (std::getline(in, line)) {
      if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
      if (trim(line).empty()) continue;
      const auto f = split(line, '\t');
      edges.emplace_back(trim(f[0]), trim(f[1]));
    }
  }
  const auto nodes = graph.nodes();
  Rng rng(777);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> words;
    for (std::size_t i = 0, n = 1 + rng.index(5); i < n; ++i) words.push_back(nodes[rng.index(nodes.size())]);
    if (graph.lowest_common_hypernym(words) != oracle::lowest_common_hypernym(edges, graph.root(), words)) ++mismatches;
  }
  const bool ex1 = graph.lowest_common_hypernym({"dish", "pan"}) == "container";
  const bool ex2 = graph.lowest_common_hypernym({"bike", "bicycle", "motorcycle"}) == "wheeled vehicle";
  const VOPair frisbee =
      name_node({{"catch", "frisbee"}, {"hold", "frisbee"}, {"play", "frisbee"}, {"throw", "frisbee"}}, graph);
  const bool ex3 = frisbee.str() == "interact with frisbee";
  return {mismatches == 0 && ex1 && ex2 && ex3,
          std::to_string(graph.size()) + "-node graph, " + std::to_string(mismatches) +
              " mismatches in 200 subsets, examples " + (ex1 ? "ok" : "wrong") + "/" + (ex2 ? "ok" : "wrong") + "/" +
              (ex3 ? "ok" : "wrong")};
}

Outcome metric_oracle() {
  Rng rng(4242);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(6)), m = 1 + static_cast<int>(rng.index(4));
    ScoreTable scores;
    GroundTruth truth;
    for (int i = 0; i < n; ++i) {
      const std::string id = "i" + std::to_string(i);
      Eigen::VectorXd s(m);
      for (int j = 0; j < m; ++j) s(j) = trial % 2 ? static_cast<double>(rng.index(3)) : rng.normal();
      scores[id] = s;
      truth[id].insert(static_cast<int>(rng.index(static_cast<std::size_t>(m))));
      if (rng.uniform() < 0.25) truth[id].insert(static_cast<int>(rng.index(static_cast<std::size_t>(m))));
    }
    const auto got = evaluate(scores, truth, {1, 2, 5});
    const auto want = oracle::evaluate(scores, truth, {1, 2, 5});
    worst = std::max(worst, std::abs(got.mean_ap - want.mean_ap));
    for (int j = 0; j < m; ++j) {
      const auto& g = got.per_category_ap[static_cast<std::size_t>(j)];
      const double w = want.ap[static_cast<std::size_t>(j)];
      if (std::isnan(w) != !g.has_value()) worst = INFINITY;
      else if (g) worst = std::max(worst, std::abs(*g - w));
    }
    for (int k : {1, 2, 5}) worst = std::max(worst, std::abs(got.recall_at.at(k) - want.recall.at(k)));
  }
  // Scores derived from the truth itself.
  ScoreTable perfect;
  GroundTruth truth;
  for (int i = 0; i < 20; ++i) {
    const std::string id = "p" + std::to_string(i);
    truth[id] = {i % 4};
    Eigen::VectorXd s = Eigen::VectorXd::Zero(4);
    s(i % 4) = 1.0;
    perfect[id] = s;
  }
  const auto r = evaluate(perfect, truth, {1});
  const bool ideal = r.mean_ap == 1.0 && r.recall_at.at(1) == 1.0;
  return {worst <= 1e-12 && ideal, "max deviation " + fmt("%.1e", worst) + ", oracle-score mAP " +
                                       fmt("%.3f", r.mean_ap) + " R@1 " + fmt("%.3f", r.recall_at.at(1))};
}

struct RunAll {
  fs::path data, out;
  int status = -1;
  double seconds = 0.0;
};

RunAll run_all(const fs::path& root, const std::string& name) {
  RunAll r;
  r.data = root / "data";
  r.out = root / name;
  const std::string desk = (fs::path(ACTWEAVE_SOURCE_DIR) / "configs" / "desk.toml").string();
  const auto t0 = std::chrono::steady_clock::now();
  if (!fs::exists(r.data / "corpus.jsonl")) {
    if (run("synth --config " + desk + " --topics 3 --images 60 --test-images 10 --out " + r.data.string()) != 0) {
      return r;
    }
  }
  r.status = run("run-all --config " + desk + " --data " + r.data.string() + " --out " + r.out.string());
  r.seconds = seconds_since(t0);
  return r;
}

Outcome end_to_end(const RunAll& r) {
  if (r.status != 0) return {false, "run-all exited with status " + std::to_string(r.status)};
  const auto metrics = nlohmann::json::parse(read_file(r.out / artifacts::kStage1Metrics));
  const auto report = nlohmann::json::parse(read_file(r.out / artifacts::kReport));
  const double retrieval = metrics.at("retrieval_accuracy").get<double>();
  const double map = report.at("mAP").get<double>();
  const double r1 = report.at("recall").at("1").get<double>();

  std::map<VOPair, int> topic_of;
  for (int t = 0; t < 3; ++t) {
    for (const auto& c : synth_topics()[static_cast<std::size_t>(t)].concepts) topic_of[c] = t;
  }
  const ActTree tree = load_act(r.out / artifacts::kAct);
  std::set<int> covered;
  bool pure = tree.root().children.size() == 3;
  for (std::size_t child : tree.root().children) {
    std::set<int> topics;
    for (const auto& name : tree.leaf_names(child)) topics.insert(topic_of.count(name) ? topic_of.at(name) : -1);
    if (topics.size() != 1 || *topics.begin() < 0) pure = false;
    covered.insert(topics.begin(), topics.end());
  }
  const bool grouped = pure && covered.size() == 3;
  const bool ok = retrieval >= 0.9 && grouped && r1 >= 0.9 && map >= 0.9 && r.seconds < 300.0;
  return {ok, "retrieval " + fmt("%.3f", retrieval) + ", " + std::to_string(tree.root().children.size()) +
                  " top-level subtrees" + (grouped ? " (one per topic)" : " (mixed)") + ", R@1 " + fmt("%.3f", r1) +
                  ", mAP " + fmt("%.3f", map) + ", " + fmt("%.1f", r.seconds) + " s"};
}

Outcome determinism(const RunAll& a, const RunAll& b) {
  if (a.status != 0 || b.status != 0) return {false, "a run-all invocation failed"};
  std::string differing;
  for (const char* f : {artifacts::kAct, artifacts::kStage1Checkpoint, artifacts::kModelCheckpoint, artifacts::kReport}) {
    const std::string x = read_file(a.out / f), y = read_file(b.out / f);
    if (x.empty() || x != y) differing += std::string(" ") + f;
  }
  return {differing.empty(), differing.empty() ? "act.json, stage1.ckpt, model.ckpt, report.json identical"
                                               : "differs:" + differing};
}

/// The category's exact leaf holds its 5 lowest-scoring training images;
/// four sibling leaves each hold those 5 plus 5 further images of the same
/// concept, so the parent holds 25. The topic's other concepts sit in a
/// separate subtree.
Outcome ablation() {
  PipelineConfig config = desk_config();
  const HypernymGraph graph = HypernymGraph::load(default_taxonomy());
  SynthOptions so;
  so.seed = 11;
  so.n_topics = 3;
  so.train_per_topic = 150;
  so.test_per_topic = 10;
  so.d_img = config.d_img;
  so.d_w2v = config.d_w2v;
  const SynthData data = make_synth(so, lexicon());

  std::vector<TextItem> items = make_text_items(data.corpus, Split::kTrain, lexicon(), data.embeddings, config.max_seq_len);
  AsaModel stage1 = AsaModel::initialize(ModelDims::from(config), config.seed);
  AsaOptimizer opt = AsaOptimizer::from(config);
  train_stage1(items, data.features, stage1, opt, config, config.stage1_steps);

  std::vector<TargetCategory> cats;
  for (const auto& name : data.categories) cats.push_back(make_category(static_cast<int>(cats.size()), name, lexicon()));
  const PairScorer scorer = asa_scorer(stage1, data.features, data.embeddings, cats);

  std::map<VOPair, std::vector<std::string>> by_concept;
  for (const auto& rec : data.corpus) {
    if (rec.split == Split::kTrain) by_concept[data.image_concept.at(rec.image_id)].push_back(rec.image_id);
  }
  auto sorted_by_score = [&](std::vector<std::string> ids) {
    std::stable_sort(ids.begin(), ids.end(),
                     [&](const std::string& x, const std::string& y) { return scorer(0, x) < scorer(0, y); });
    return ids;
  };

  ActTree tree;
  tree.nodes.emplace_back();
  auto add = [&](std::size_t parent, const VOPair& name, std::vector<std::string> images, bool leaf) {
    ActNode n;
    n.name = name;
    std::sort(images.begin(), images.end());
    images.erase(std::unique(images.begin(), images.end()), images.end());
    n.images = images;
    if (leaf) {
      ActionConcept a;
      a.pair = name;
      a.image_ids = images;
      a.representation = Eigen::VectorXd::Ones(1);
      n.action = a;
    }
    tree.nodes.push_back(n);
    tree.nodes[parent].children.push_back(tree.nodes.size() - 1);
    return tree.nodes.size() - 1;
  };

  const auto& ride = synth_topics()[0];
  const VOPair target = cats[0].pair;
  const auto ranked = sorted_by_score(by_concept.at(target));
  const std::vector<std::string> low(ranked.begin(), ranked.begin() + 5);
  const std::size_t parent = add(0, {"interact with", target.object}, {}, false);
  add(parent, target, low, true);
  const char* sibling_verbs[] = {"pedal", "push", "park", "fix"};
  std::vector<std::vector<std::string>> sibling_images(4, low);
  // Ranks 5..24 dealt round-robin so the siblings' means stay close.
  for (std::size_t r = 5; r < 25; ++r) sibling_images[(r - 5) % 4].push_back(ranked[r]);
  std::vector<std::string> parent_images(ranked.begin(), ranked.begin() + 25);
  for (std::size_t k = 0; k < 4; ++k) add(parent, {sibling_verbs[k], target.object}, sibling_images[k], true);
  std::sort(parent_images.begin(), parent_images.end());
  tree.nodes[parent].images = parent_images;
  {
    std::vector<VOPair> others;
    for (const auto& c : ride.concepts) {
      if (c != target) others.push_back(c);
    }
    const std::size_t p = add(0, name_node(others, graph), {}, false);
    std::vector<std::string> all;
    for (const auto& c : others) {
      add(p, c, by_concept.at(c), true);
      all.insert(all.end(), by_concept.at(c).begin(), by_concept.at(c).end());
    }
    std::sort(all.begin(), all.end());
    tree.nodes[p].images = all;
  }
  for (std::size_t t = 1; t < 3; ++t) {
    const std::size_t p = add(0, name_node(synth_topics()[t].concepts, graph), {}, false);
    std::vector<std::string> all;
    for (const auto& c : synth_topics()[t].concepts) {
      add(p, c, by_concept.at(c), true);
      all.insert(all.end(), by_concept.at(c).begin(), by_concept.at(c).end());
    }
    std::sort(all.begin(), all.end());
    tree.nodes[p].images = all;
  }
  std::set<std::string> root_images;
  for (std::size_t c : tree.nodes[0].children) root_images.insert(tree.nodes[c].images.begin(), tree.nodes[c].images.end());
  tree.nodes[0].images.assign(root_images.begin(), root_images.end());
  tree.nodes[0].name = name_node(tree.leaf_names(0), graph);
  tree.validate();

  std::vector<std::string> test_ids;
  for (const auto& rec : data.corpus) {
    if (rec.split == Split::kTest) test_ids.push_back(rec.image_id);
  }
  struct Variant {
    std::size_t n_images = 0;
    double ap = 0.0;
    std::string matched;
  };
  auto run_variant = [&](bool leaves_only) {
    MatchOptions mo;
    mo.theta_init = config.theta_init;
    mo.leaves_only = leaves_only;
    const auto matches = match_categories(cats, tree, scorer, mo);
    Variant v;
    v.n_images = matches[0].training_images.size();
    for (std::size_t n : matches[0].matched_nodes) v.matched += (v.matched.empty() ? "" : "+") + tree.nodes[n].name.str();
    AsaModel model = stage1;
    AsaOptimizer fresh = AsaOptimizer::from(config);
    finetune(matches, cats, model, fresh, data.features, data.embeddings, config);
    const auto report = evaluate(score_images(model, data.features, data.embeddings, cats, test_ids), data.truth, {1});
    v.ap = report.per_category_ap[0].value_or(0.0);
    return v;
  };
  if (std::getenv("ACTWEAVE_ABLATION_DEBUG")) {
    auto mean = [&](const std::vector<std::string>& ids) {
      double m = 0;
      for (const auto& id : ids) m += scorer(0, id);
      return m / static_cast<double>(ids.size());
    };
    for (std::size_t n = 1; n < tree.nodes.size(); ++n) {
      std::printf("  %-28s %3zu images  mean %.4f\n", tree.nodes[n].name.str().c_str(), tree.nodes[n].images.size(),
                  mean(tree.nodes[n].images));
    }
  }
  const Variant full = run_variant(false);
  const Variant flat = run_variant(true);
  const bool ok = full.n_images > flat.n_images && full.ap >= flat.ap;
  return {ok, "full tree: " + std::to_string(full.n_images) + " images (" + full.matched + "), AP " +
                  fmt("%.4f", full.ap) + "; leaves only: " + std::to_string(flat.n_images) + " images (" +
                  flat.matched + "), AP " + fmt("%.4f", flat.ap)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };

  report("gradient-correctness", gradient_correctness);
  report("loss-closed-forms", loss_closed_forms);
  report("clustering-oracle", clustering_oracle);
  report("taxonomy-oracle", taxonomy_oracle);
  report("metric-oracle", metric_oracle);

  const fs::path root = fresh_dir("runs");
  RunAll first, second;
  report("end-to-end-synthetic", [&] {
    first = run_all(root, "run1");
    return end_to_end(first);
  });
  report("ablation-direction", ablation);
  report("determinism", [&] {
    second = run_all(root, "run2");
    return determinism(first, second);
  });
  return failures;
}
