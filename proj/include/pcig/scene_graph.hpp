#pragma once

#include <span>
#include <string>
#include <vector>

#include "pcig/scene_model.hpp"

namespace pcig {

// Knowledge graph over a prompt: one node per SceneObject, one directed edge
// per relation triple. Degree is undirected and counts duplicate edges.
class SceneGraph {
 public:
  SceneGraph() = default;

  const std::vector<int>& node_ids() const { return node_ids_; }
  const std::vector<RelationTriple>& edges() const { return edges_; }
  // Neighbor multiset per node (index == object id), one entry per incident edge.
  const std::vector<std::vector<int>>& adjacency() const { return adjacency_; }

  std::size_t node_count() const { return node_ids_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  int degree(int node) const;

  friend SceneGraph build_graph(std::span<const SceneObject> objects,
                                std::span<const RelationTriple> triples);

 private:
  std::vector<int> node_ids_;
  std::vector<RelationTriple> edges_;
  std::vector<std::vector<int>> adjacency_;
};

// Throws kDanglingEdge when a triple endpoint is outside [0, objects.size()).
SceneGraph build_graph(std::span<const SceneObject> objects,
                       std::span<const RelationTriple> triples);

// Max-degree node, smallest index on ties. Throws kEmptyGraph for |V| = 0.
int select_anchor(const SceneGraph& graph);

// Graphviz rendering for debugging; labels come from captions.
std::string to_dot(const SceneGraph& graph, std::span<const SceneObject> objects);

}  // namespace pcig
