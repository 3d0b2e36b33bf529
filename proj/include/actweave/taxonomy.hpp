#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "actweave/vo_extract.hpp"

namespace actweave {

/// Hypernym DAG over nouns with a single root. Each noun has one node
/// (no sense disambiguation); a node may have several parents.
class HypernymGraph {
 public:
  /// Builds from (child, parent) edges. Throws InputError if the graph has
  /// a cycle, several roots, or nodes that cannot reach the root.
  explicit HypernymGraph(const std::vector<std::pair<std::string, std::string>>& edges);

  static HypernymGraph load(const std::filesystem::path& path);

  const std::string& root() const { return root_; }
  bool contains(const std::string& word) const { return depth_.count(word) != 0; }
  std::size_t size() const { return depth_.size(); }

  /// Minimum edge distance from the root.
  int depth(const std::string& node) const;
  const std::set<std::string>& parents(const std::string& node) const;
  std::vector<std::string> nodes() const;

  /// Unknown words resolve to the root.
  const std::string& resolve(const std::string& word) const;

  /// Deepest node that is an ancestor-or-self of every word; ties go to the
  /// lexicographically smallest name. Unknown words count as the root.
  std::string lowest_common_hypernym(const std::vector<std::string>& words) const;

 private:
  std::string root_;
  std::map<std::string, std::set<std::string>> parents_;
  std::map<std::string, int> depth_;
};

inline constexpr const char* kMixedVerb = "interact with";

/// Verb part: the shared verb, else "interact with". Object part: the
/// lowest common hypernym of the child objects.
VOPair name_node(const std::vector<VOPair>& children, const HypernymGraph& graph);

}  // namespace actweave
