#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "phishsim/ncd.hpp"

namespace phishsim {

enum class Linkage { Single, Average, Complete };

Linkage parse_linkage(std::string_view name);
std::string to_string(Linkage linkage);

/// Binary dendrogram node: a leaf carries a document id, an internal node
/// a merge height. Merge heights are non-decreasing from leaves to root
/// for the supported linkages.
struct DendrogramNode {
    std::string id;  // leaves only
    double height = 0.0;
    std::unique_ptr<DendrogramNode> left;
    std::unique_ptr<DendrogramNode> right;

    bool is_leaf() const { return !left && !right; }
    std::size_t leaf_count() const;
    /// Smallest leaf id in the subtree (canonical ordering key).
    const std::string& min_leaf() const;
};

/// Agglomerative clustering over a symmetric distance matrix. Children of
/// every merge are ordered by smallest leaf id and ties in the merge
/// agenda resolve by the same key, so permuting the input yields an
/// identical canonical tree. Throws std::invalid_argument on asymmetric
/// input or fewer than 2 items.
DendrogramNode agglomerate(const NcdMatrix& matrix, Linkage linkage = Linkage::Average);

/// Newick serialization; branch lengths are parent merge height minus
/// child merge height (leaves sit at height 0).
std::string to_newick(const DendrogramNode& tree);

/// Parses the subset of Newick emitted by to_newick (used for round-trip
/// verification). Branch lengths reconstruct the merge heights.
DendrogramNode parse_newick(std::string_view text);

/// Merge rows "left,right,height,size": representative (smallest) leaf id
/// of each child, the merge height, and the merged leaf count. n leaves
/// produce n-1 rows, bottom-up.
std::string to_linkage_csv(const DendrogramNode& tree);

/// Matrix CSV with an id header row/column.
std::string matrix_to_csv(const NcdMatrix& matrix);

}  // namespace phishsim
