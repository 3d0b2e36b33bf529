#include "actweave/taxonomy.hpp"

#include <deque>
#include <fstream>

#include "actweave/common.hpp"

namespace actweave {

HypernymGraph::HypernymGraph(const std::vector<std::pair<std::string, std::string>>& edges) {
  std::map<std::string, std::set<std::string>> children;
  for (const auto& [child, parent] : edges) {
    if (child == parent) throw InputError("taxonomy: self loop at '" + child + "'");
    parents_[child].insert(parent);
    parents_.try_emplace(parent);
    children[parent].insert(child);
  }
  std::vector<std::string> roots;
  for (const auto& [node, ps] : parents_) {
    if (ps.empty()) roots.push_back(node);
  }
  if (roots.size() != 1) {
    throw InputError("taxonomy: expected exactly one root, found " + std::to_string(roots.size()));
  }
  root_ = roots.front();

  // Breadth-first from the root gives minimum depths and reachability.
  std::deque<std::string> queue{root_};
  depth_[root_] = 0;
  while (!queue.empty()) {
    const std::string node = queue.front();
    queue.pop_front();
    for (const auto& c : children[node]) {
      if (depth_.try_emplace(c, depth_[node] + 1).second) queue.push_back(c);
    }
  }
  if (depth_.size() != parents_.size()) throw InputError("taxonomy: some nodes do not reach the root");

  // Kahn's algorithm for cycle detection.
  std::map<std::string, std::size_t> pending;
  for (const auto& [node, ps] : parents_) pending[node] = ps.size();
  std::deque<std::string> ready{root_};
  std::size_t visited = 0;
  while (!ready.empty()) {
    const std::string node = ready.front();
    ready.pop_front();
    ++visited;
    for (const auto& c : children[node]) {
      if (--pending[c] == 0) ready.push_back(c);
    }
  }
  if (visited != parents_.size()) throw InputError("taxonomy: hypernym graph has a cycle");
}

HypernymGraph HypernymGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("taxonomy: cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.front() == '#') continue;
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected child<TAB>parent");
    }
    edges.emplace_back(to_lower(trim(fields[0])), to_lower(trim(fields[1])));
  }
  return HypernymGraph(edges);
}

int HypernymGraph::depth(const std::string& node) const {
  auto it = depth_.find(node);
  if (it == depth_.end()) throw InputError("taxonomy: unknown node '" + node + "'");
  return it->second;
}

const std::set<std::string>& HypernymGraph::parents(const std::string& node) const {
  auto it = parents_.find(node);
  if (it == parents_.end()) throw InputError("taxonomy: unknown node '" + node + "'");
  return it->second;
}

std::vector<std::string> HypernymGraph::nodes() const {
  std::vector<std::string> out;
  out.reserve(depth_.size());
  for (const auto& [n, d] : depth_) out.push_back(n);
  return out;
}

const std::string& HypernymGraph::resolve(const std::string& word) const {
  auto it = depth_.find(word);
  return it == depth_.end() ? root_ : it->first;
}

std::string HypernymGraph::lowest_common_hypernym(const std::vector<std::string>& words) const {
  if (words.empty()) throw InputError("lowest_common_hypernym: empty word set");
  std::set<std::string> distinct;
  for (const auto& w : words) distinct.insert(resolve(w));

  // Count, for every node, how many input words reach it going upward.
  std::map<std::string, std::size_t> hits;
  for (const auto& w : distinct) {
    std::set<std::string> seen{w};
    std::deque<std::string> frontier{w};
    while (!frontier.empty()) {
      const std::string node = frontier.front();
      frontier.pop_front();
      ++hits[node];
      for (const auto& p : parents_.at(node)) {
        if (seen.insert(p).second) frontier.push_back(p);
      }
    }
  }
  const std::string* best = nullptr;
  int best_depth = -1;
  for (const auto& [node, count] : hits) {
    if (count != distinct.size()) continue;
    const int d = depth_.at(node);
    // std::map iterates in name order, so the first node at a depth wins ties.
    if (d > best_depth) {
      best = &node;
      best_depth = d;
    }
  }
  return *best;
}

VOPair name_node(const std::vector<VOPair>& children, const HypernymGraph& graph) {
  if (children.empty()) throw InputError("name_node: no children");
  bool same_verb = true;
  bool same_object = true;
  std::vector<std::string> objects;
  for (const auto& c : children) {
    same_verb = same_verb && c.verb == children.front().verb;
    same_object = same_object && c.object == children.front().object;
    objects.push_back(c.object);
  }
  VOPair name;
  name.verb = same_verb ? children.front().verb : kMixedVerb;
  name.object = same_object ? children.front().object : graph.lowest_common_hypernym(objects);
  return name;
}

}  // namespace actweave
