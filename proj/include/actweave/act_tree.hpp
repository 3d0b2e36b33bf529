#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "actweave/vo_extract.hpp"

namespace actweave {

struct ActionConcept {
  VOPair pair;
  std::vector<std::string> image_ids;  // sorted, unique
  Eigen::VectorXd representation;
  double visualness_ap = 0.0;

  bool operator==(const ActionConcept& other) const {
    return pair == other.pair && image_ids == other.image_ids &&
           representation.size() == other.representation.size() &&
           representation == other.representation && visualness_ap == other.visualness_ap;
  }
};

struct ActNode {
  VOPair name;
  std::vector<std::size_t> children;      // indices into ActTree::nodes
  std::optional<ActionConcept> action;    // present exactly on leaves
  std::vector<std::string> images;        // P_j, sorted and unique

  bool is_leaf() const { return action.has_value(); }
  bool operator==(const ActNode&) const = default;
};

/// Action Concept Tree stored as an arena; nodes[0] is the root. The root is
/// a container for the top-level clusters.
struct ActTree {
  std::vector<ActNode> nodes;

  static constexpr std::size_t kRoot = 0;

  const ActNode& root() const { return nodes.at(kRoot); }

  /// Node indices in pre-order, children in stored order.
  std::vector<std::size_t> preorder() const;
  std::vector<std::size_t> leaves() const;
  /// Edge count of the longest root-to-leaf path.
  int depth() const;
  std::vector<VOPair> leaf_names(std::size_t node) const;

  /// Throws InputError naming the first violated structural invariant.
  void validate() const;

  /// Structural equality: same shape in pre-order, same names, images and concepts.
  bool operator==(const ActTree& other) const;
};

}  // namespace actweave
