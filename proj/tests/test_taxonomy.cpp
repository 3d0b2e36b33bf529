#include <gtest/gtest.h>

#include <fstream>

#include "actweave/common.hpp"
#include "actweave/taxonomy.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace actweave;

namespace {

std::vector<std::pair<std::string, std::string>> read_edges(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (trim(line).empty()) continue;
    const auto f = split(line, '\t');
    edges.emplace_back(trim(f[0]), trim(f[1]));
  }
  return edges;
}

const HypernymGraph& shipped() {
  static const HypernymGraph g = HypernymGraph::load(testing_support::shipped_taxonomy());
  return g;
}

}  // namespace

TEST(Taxonomy, ShippedGraphShape) {
  const auto& g = shipped();
  EXPECT_EQ(g.root(), "entity");
  EXPECT_EQ(g.depth("entity"), 0);
  EXPECT_GE(g.size(), 250u);
  for (const auto& n : g.nodes()) {
    if (n != g.root()) {
      EXPECT_GE(g.depth(n), 1) << n;
    }
  }
}

TEST(Taxonomy, NamingExamples) {
  const auto& g = shipped();
  EXPECT_EQ(g.lowest_common_hypernym({"dish", "pan"}), "container");
  EXPECT_EQ(g.lowest_common_hypernym({"bike", "bicycle", "motorcycle"}), "wheeled vehicle");
  EXPECT_EQ(g.lowest_common_hypernym({"horse"}), "horse");
}

TEST(Taxonomy, EmptyInputIsAnError) { EXPECT_THROW(shipped().lowest_common_hypernym({}), InputError); }

TEST(Taxonomy, UnknownWordsResolveToRoot) {
  EXPECT_EQ(shipped().resolve("flibbertigibbet"), "entity");
  EXPECT_EQ(shipped().lowest_common_hypernym({"horse", "flibbertigibbet"}), "entity");
}

TEST(Taxonomy, MatchesBruteForceOnShippedGraph) {
  const auto edges = read_edges(testing_support::shipped_taxonomy());
  const auto nodes = shipped().nodes();
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> words;
    const std::size_t n = 1 + rng.index(4);
    for (std::size_t i = 0; i < n; ++i) words.push_back(nodes[rng.index(nodes.size())]);
    EXPECT_EQ(shipped().lowest_common_hypernym(words), oracle::lowest_common_hypernym(edges, "entity", words));
  }
}

TEST(Taxonomy, CommutativeAndIdempotent) {
  const auto& g = shipped();
  const auto nodes = g.nodes();
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> s = {nodes[rng.index(nodes.size())], nodes[rng.index(nodes.size())],
                                  nodes[rng.index(nodes.size())]};
    const std::string l = g.lowest_common_hypernym(s);
    std::vector<std::string> rev(s.rbegin(), s.rend());
    EXPECT_EQ(g.lowest_common_hypernym(rev), l);
    s.push_back(l);
    EXPECT_EQ(g.lowest_common_hypernym(s), l);
  }
}

TEST(Taxonomy, SmallRandomDagsMatchOracle) {
  // Random DAGs: node i may have parents among 0..i-1, node 0 is the root.
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 5 + static_cast<int>(rng.index(45));
    std::vector<std::pair<std::string, std::string>> edges;
    for (int i = 1; i < n; ++i) {
      const int n_parents = 1 + static_cast<int>(rng.index(2));
      std::set<int> ps;
      for (int k = 0; k < n_parents; ++k) ps.insert(static_cast<int>(rng.index(static_cast<std::size_t>(i))));
      for (int p : ps) edges.emplace_back("n" + std::to_string(i), "n" + std::to_string(p));
    }
    const HypernymGraph g(edges);
    for (int q = 0; q < 10; ++q) {
      std::vector<std::string> words;
      for (std::size_t k = 0, m = 1 + rng.index(3); k < m; ++k) words.push_back("n" + std::to_string(rng.index(static_cast<std::size_t>(n))));
      EXPECT_EQ(g.lowest_common_hypernym(words), oracle::lowest_common_hypernym(edges, "n0", words));
    }
  }
}

TEST(Taxonomy, RejectsCyclesAndMultipleRoots) {
  EXPECT_THROW(HypernymGraph({{"a", "b"}, {"b", "c"}, {"c", "a"}, {"d", "root"}}), InputError);
  EXPECT_THROW(HypernymGraph({{"a", "r1"}, {"b", "r2"}}), InputError);
  EXPECT_THROW(HypernymGraph(std::vector<std::pair<std::string, std::string>>{{"a", "a"}}), InputError);
}

TEST(NameNode, WorkedExamples) {
  const auto& g = shipped();
  EXPECT_EQ(name_node({{"hold", "dish"}, {"hold", "pan"}}, g), (VOPair{"hold", "container"}));
  EXPECT_EQ(name_node({{"catch", "frisbee"}, {"hold", "frisbee"}, {"play", "frisbee"}, {"throw", "frisbee"}}, g),
            (VOPair{"interact with", "frisbee"}));
  EXPECT_EQ(name_node({{"ride", "bike"}}, g), (VOPair{"ride", "bike"}));
  EXPECT_EQ(name_node({{"ride", "motorcycle"}, {"ride", "bicycle"}, {"ride", "bike"}}, g),
            (VOPair{"ride", "wheeled vehicle"}));
  EXPECT_THROW(name_node({}, g), InputError);
}

TEST(NameNode, NeverInventsAVerb) {
  const auto& g = shipped();
  const std::vector<VOPair> kids = {{"eat", "pizza"}, {"cut", "pizza"}};
  const VOPair n = name_node(kids, g);
  EXPECT_EQ(n.verb, kMixedVerb);
  EXPECT_EQ(n.object, "pizza");
}
