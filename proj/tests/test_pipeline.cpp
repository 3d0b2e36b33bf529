#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include "actweave/common.hpp"
#include "actweave/concept_discovery.hpp"
#include "actweave/persistence.hpp"
#include "actweave/pipeline.hpp"
#include "actweave/stage2.hpp"
#include "actweave/synth.hpp"
#include "test_support.hpp"

using namespace actweave;
using testing_support::read_text;
using testing_support::scratch_dir;
using testing_support::shipped_lexicon;

namespace fs = std::filesystem;

namespace {

PipelineConfig desk_config() { return load_config(fs::path(ACTWEAVE_SOURCE_DIR) / "configs" / "desk.toml"); }

SynthOptions small_synth(std::uint64_t seed) {
  SynthOptions o;
  o.seed = seed;
  o.train_per_topic = 30;
  o.test_per_topic = 5;
  return o;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ACTWEAVE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Synth, NoiseFreeFeaturesSitOnCentroids) {
  SynthOptions o = small_synth(1);
  o.noise = 0.0;
  const SynthData d = make_synth(o, shipped_lexicon());
  for (const auto& [id, concept_pair] : d.image_concept) {
    EXPECT_EQ(d.features.at(id), d.centroids.at(concept_pair)) << id;
  }
}

TEST(Synth, DescriptionsYieldTheirConcept) {
  const SynthData d = make_synth(small_synth(2), shipped_lexicon());
  ASSERT_EQ(d.corpus.size(), 3u * 35u);
  for (const auto& rec : d.corpus) {
    EXPECT_TRUE(has_human_subject(rec.description, shipped_lexicon())) << rec.description;
    const auto pairs = extract_vo(rec.description, shipped_lexicon());
    ASSERT_EQ(pairs.size(), 1u) << rec.description;
    EXPECT_EQ(pairs[0], d.image_concept.at(rec.image_id)) << rec.description;
  }
}

TEST(Synth, SplitsTruthAndCategories) {
  const SynthData d = make_synth(small_synth(3), shipped_lexicon());
  EXPECT_EQ(d.categories, (std::vector<std::string>{"ride bike", "throw frisbee", "eat pizza"}));
  std::size_t n_test = 0;
  for (const auto& rec : d.corpus) {
    if (rec.split != Split::kTest) continue;
    ++n_test;
    ASSERT_TRUE(d.truth.count(rec.image_id));
    EXPECT_EQ(d.truth.at(rec.image_id).size(), 1u);
  }
  EXPECT_EQ(n_test, 15u);
  EXPECT_EQ(d.truth.size(), 15u);
}

TEST(Synth, SameSeedSameFiles) {
  const auto a = scratch_dir("synth_a"), b = scratch_dir("synth_b"), c = scratch_dir("synth_c");
  write_synth(make_synth(small_synth(4), shipped_lexicon()), default_taxonomy(), a);
  write_synth(make_synth(small_synth(4), shipped_lexicon()), default_taxonomy(), b);
  write_synth(make_synth(small_synth(5), shipped_lexicon()), default_taxonomy(), c);
  for (const char* f : {"corpus.jsonl", "features.tsv", "embeddings.vec", "taxonomy.tsv", "categories.txt", "truth.json"}) {
    EXPECT_EQ(read_text(a / f), read_text(b / f)) << f;
  }
  EXPECT_NE(read_text(a / "features.tsv"), read_text(c / "features.tsv"));
}

TEST(Synth, TopicCountLimits) {
  SynthOptions o = small_synth(1);
  o.n_topics = 1;
  EXPECT_THROW(make_synth(o, shipped_lexicon()), InputError);
  o.n_topics = 5;
  EXPECT_THROW(make_synth(o, shipped_lexicon()), InputError);
  o.n_topics = 4;
  EXPECT_EQ(make_synth(o, shipped_lexicon()).categories.size(), 4u);
}

TEST(Pipeline, DiscoverSeparatesTopicsAtTheTopLevel) {
  const auto data = scratch_dir("pipe_discover_data"), out = scratch_dir("pipe_discover_out");
  const SynthData d = make_synth(small_synth(6), shipped_lexicon());
  write_synth(d, default_taxonomy(), data);
  RunManifest manifest;
  cmd_discover(desk_config(), InputPaths::from_data_dir(data), out, manifest);
  const ActTree tree = load_act(out / artifacts::kAct);

  std::map<VOPair, int> topic_of;
  for (std::size_t t = 0; t < 3; ++t) {
    for (const auto& c : synth_topics()[t].concepts) topic_of[c] = static_cast<int>(t);
  }
  ASSERT_EQ(tree.root().children.size(), 3u);
  std::set<int> seen;
  for (std::size_t child : tree.root().children) {
    std::set<int> topics;
    for (const auto& name : tree.leaf_names(child)) topics.insert(topic_of.at(name));
    ASSERT_EQ(topics.size(), 1u);
    seen.insert(*topics.begin());
  }
  EXPECT_EQ(seen.size(), 3u);
  EXPECT_TRUE(fs::exists(out / artifacts::kConceptsReport));
}

TEST(Pipeline, NoHumanSubjectsMeansNoConcepts) {
  const auto data = scratch_dir("pipe_empty_data"), out = scratch_dir("pipe_empty_out");
  SynthData d = make_synth(small_synth(7), shipped_lexicon());
  for (auto& rec : d.corpus) rec.description = "A bike leans on a wall.";
  write_synth(d, default_taxonomy(), data);
  RunManifest manifest;
  try {
    cmd_discover(desk_config(), InputPaths::from_data_dir(data), out, manifest);
    FAIL();
  } catch (const EmptyResultError& e) {
    EXPECT_NE(std::string(e.what()).find("no concepts"), std::string::npos);
  }
}

TEST(Pipeline, MissingUpstreamArtifactNamesTheCommand) {
  const auto data = scratch_dir("pipe_missing_data"), out = scratch_dir("pipe_missing_out");
  write_synth(make_synth(small_synth(8), shipped_lexicon()), default_taxonomy(), data);
  RunManifest manifest;
  try {
    cmd_match(desk_config(), InputPaths::from_data_dir(data), out, manifest);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("discover"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, EvalOfTruthDerivedScoresIsPerfect) {
  const auto data = scratch_dir("pipe_eval_data"), out = scratch_dir("pipe_eval_out");
  const SynthData d = make_synth(small_synth(9), shipped_lexicon());
  write_synth(d, default_taxonomy(), data);
  ScoreTable scores;
  for (const auto& [id, labels] : d.truth) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(3);
    for (int l : labels) s(l) = 1.0;
    scores[id] = s;
  }
  save_scores(scores, out / artifacts::kScores);
  RunManifest manifest;
  cmd_eval(desk_config(), InputPaths::from_data_dir(data), out, manifest);
  const std::string report = read_text(out / artifacts::kReport);
  EXPECT_NE(report.find("\"mAP\": 1.0"), std::string::npos) << report;
  EXPECT_NE(report.find("\"1\": 1.0"), std::string::npos) << report;
}

TEST(Pipeline, TextItemsUseContentLemmasKeyedByPairs) {
  EmbeddingTable emb(4, 1);
  const std::vector<ImagedDescription> corpus = {
      {"a", "A man rides a bike.", Split::kTrain},
      {"b", "A red bike on a wall.", Split::kTrain},
      {"c", "A woman eats a pizza.", Split::kTest},
  };
  const auto items = make_text_items(corpus, Split::kTrain, shipped_lexicon(), emb, 6);
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[0].key, "ride bike;");
  EXPECT_EQ(items[0].text.cols(), static_cast<Eigen::Index>(content_tokens(corpus[0].description, shipped_lexicon()).size()));
  EXPECT_EQ(items[0].text.col(0), emb.lookup(content_tokens(corpus[0].description, shipped_lexicon())[0]));
  EXPECT_FALSE(items[1].key.empty());
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("cli");
  const std::string data = (dir / "data").string(), out = (dir / "out").string();
  const std::string desk = (fs::path(ACTWEAVE_SOURCE_DIR) / "configs" / "desk.toml").string();
  EXPECT_EQ(run_cli("synth --config " + desk + " --seed 3 --images 20 --test-images 4 --out " + data), 0);
  EXPECT_TRUE(fs::exists(fs::path(data) / "corpus.jsonl"));
  EXPECT_EQ(run_cli("discover --config " + desk + " --data " + data + " --out " + out), 0);
  EXPECT_TRUE(fs::exists(fs::path(out) / "act.json"));
  EXPECT_TRUE(fs::exists(fs::path(out) / "manifest.json"));
  // Upstream artifact missing.
  EXPECT_EQ(run_cli("finetune --config " + desk + " --data " + data + " --out " + out), 2);
  // Unknown flag, unknown config key, missing input.
  EXPECT_EQ(run_cli("discover --bogus"), 2);
  EXPECT_EQ(run_cli("discover --config " + desk + " --set nope=1 --data " + data + " --out " + out), 2);
  EXPECT_EQ(run_cli("discover --config " + desk + " --data " + (dir / "absent").string() + " --out " + out), 2);
  // No description has a human subject.
  auto corpus = load_corpus(fs::path(data) / "corpus.jsonl");
  for (auto& rec : corpus) rec.description = "A kite in the sky.";
  save_corpus(corpus, fs::path(data) / "corpus.jsonl");
  EXPECT_EQ(run_cli("discover --config " + desk + " --data " + data + " --out " + out), 4);
}
