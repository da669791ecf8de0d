#include "rssgh/graph.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "rssgh/errors.hpp"

namespace rssgh {

std::vector<std::vector<std::size_t>> connected_components(
    std::size_t regions, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::size_t> parent(regions);
  for (std::size_t i = 0; i < regions; ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto [a, b] : edges) {
    if (a < regions && b < regions) parent[find(a)] = find(b);
  }
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> slot(regions, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < regions; ++i) {
    const std::size_t root = find(i);
    if (slot[root] == static_cast<std::size_t>(-1)) {
      slot[root] = groups.size();
      groups.emplace_back();
    }
    groups[slot[root]].push_back(i);
  }
  return groups;
}

RegionGraph::RegionGraph(std::size_t regions,
                         const std::vector<std::pair<std::size_t, std::size_t>>& edges)
    : neighbors_(regions) {
  if (regions == 0) throw GraphError("region graph needs at least one region");
  std::set<std::pair<std::size_t, std::size_t>> unique;
  for (auto [a, b] : edges) {
    if (a >= regions || b >= regions) {
      throw GraphError("edge (" + std::to_string(a + 1) + ", " + std::to_string(b + 1) +
                       ") references a region outside 1.." + std::to_string(regions));
    }
    if (a == b) throw GraphError("self loop on region " + std::to_string(a + 1));
    unique.insert({std::min(a, b), std::max(a, b)});
  }
  edges_.assign(unique.begin(), unique.end());
  for (auto [a, b] : edges_) {
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
  for (auto& n : neighbors_) std::sort(n.begin(), n.end());

  const auto parts = connected_components(regions, edges_);
  if (parts.size() > 1) {
    std::string msg = "region graph is disconnected; components:";
    for (const auto& part : parts) {
      msg += " {";
      for (std::size_t i = 0; i < part.size(); ++i) {
        if (i) msg += ",";
        msg += std::to_string(part[i] + 1);
      }
      msg += "}";
    }
    throw GraphError(msg);
  }
}

std::vector<std::size_t> RegionGraph::degrees() const {
  std::vector<std::size_t> d(size());
  for (std::size_t k = 0; k < size(); ++k) d[k] = neighbors_[k].size();
  return d;
}

Eigen::MatrixXd RegionGraph::adjacency() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size(), size());
  for (auto [k, l] : edges_) a(k, l) = a(l, k) = 1.0;
  return a;
}

Eigen::MatrixXd RegionGraph::laplacian() const {
  Eigen::MatrixXd q = -adjacency();
  for (std::size_t k = 0; k < size(); ++k) q(k, k) = static_cast<double>(degree(k));
  return q;
}

}  // namespace rssgh
