#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rssgh {

/// Undirected adjacency over regions 0..r-1. Immutable after construction.
class RegionGraph {
 public:
  /// Edges are 0-based unordered pairs; duplicates and reversed copies are
  /// merged. Self loops and out-of-range indices throw GraphError, as does
  /// a graph with more than one connected component.
  RegionGraph(std::size_t regions, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

  std::size_t size() const noexcept { return neighbors_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  /// Each unordered edge once, with first < second.
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t k) const { return neighbors_.at(k); }
  std::size_t degree(std::size_t k) const { return neighbors_.at(k).size(); }
  std::vector<std::size_t> degrees() const;

  Eigen::MatrixXd adjacency() const;
  /// D - A
  Eigen::MatrixXd laplacian() const;

 private:
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

/// Connected components as sorted lists of region indices.
std::vector<std::vector<std::size_t>> connected_components(
    std::size_t regions, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

}  // namespace rssgh
