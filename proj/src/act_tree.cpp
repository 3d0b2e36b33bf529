#include "actweave/act_tree.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "actweave/common.hpp"

namespace actweave {

std::vector<std::size_t> ActTree::preorder() const {
  std::vector<std::size_t> order;
  if (nodes.empty()) return order;
  std::vector<std::size_t> stack{kRoot};
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    order.push_back(n);
    const auto& ch = nodes[n].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

std::vector<std::size_t> ActTree::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t n : preorder()) {
    if (nodes[n].is_leaf()) out.push_back(n);
  }
  return out;
}

int ActTree::depth() const {
  std::function<int(std::size_t)> rec = [&](std::size_t n) {
    int d = 0;
    for (std::size_t c : nodes[n].children) d = std::max(d, 1 + rec(c));
    return d;
  };
  return nodes.empty() ? 0 : rec(kRoot);
}

std::vector<VOPair> ActTree::leaf_names(std::size_t node) const {
  std::vector<VOPair> names;
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    if (nodes[n].is_leaf()) names.push_back(nodes[n].action->pair);
    const auto& ch = nodes[n].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return names;
}

void ActTree::validate() const {
  if (nodes.empty()) throw InputError("ACT: empty tree");
  std::vector<int> parent_count(nodes.size(), 0);
  for (const auto& node : nodes) {
    for (std::size_t c : node.children) {
      if (c >= nodes.size() || c == kRoot) throw InputError("ACT: bad child index");
      ++parent_count[c];
    }
  }
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (parent_count[i] != 1) throw InputError("ACT: node is not attached exactly once");
  }
  if (preorder().size() != nodes.size()) throw InputError("ACT: tree is not connected");
  for (const auto& node : nodes) {
    if (node.is_leaf() != node.children.empty()) {
      throw InputError("ACT: node '" + node.name.str() + "' must be a leaf iff it carries a concept");
    }
    if (!std::is_sorted(node.images.begin(), node.images.end()) ||
        std::adjacent_find(node.images.begin(), node.images.end()) != node.images.end()) {
      throw InputError("ACT: image list of '" + node.name.str() + "' is not sorted and unique");
    }
    if (node.is_leaf()) {
      if (node.images != node.action->image_ids) {
        throw InputError("ACT: leaf '" + node.name.str() + "' images differ from its concept");
      }
      continue;
    }
    std::set<std::string> pooled;
    for (std::size_t c : node.children) pooled.insert(nodes[c].images.begin(), nodes[c].images.end());
    if (!std::equal(pooled.begin(), pooled.end(), node.images.begin(), node.images.end())) {
      throw InputError("ACT: images of '" + node.name.str() + "' are not the union of its children");
    }
  }
}

bool ActTree::operator==(const ActTree& other) const {
  const auto a = preorder();
  const auto b = other.preorder();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const ActNode& x = nodes[a[i]];
    const ActNode& y = other.nodes[b[i]];
    if (!(x.name == y.name) || x.images != y.images || x.action != y.action ||
        x.children.size() != y.children.size()) {
      return false;
    }
  }
  return true;
}

}  // namespace actweave
