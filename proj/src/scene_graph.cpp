#include "pcig/scene_graph.hpp"

#include <sstream>

#include "pcig/error.hpp"

namespace pcig {

int SceneGraph::degree(int node) const {
  if (node < 0 || static_cast<std::size_t>(node) >= adjacency_.size()) return 0;
  return static_cast<int>(adjacency_[static_cast<std::size_t>(node)].size());
}

SceneGraph build_graph(std::span<const SceneObject> objects,
                       std::span<const RelationTriple> triples) {
  SceneGraph graph;
  const int n = static_cast<int>(objects.size());
  graph.node_ids_.reserve(objects.size());
  for (int i = 0; i < n; ++i) graph.node_ids_.push_back(i);
  graph.adjacency_.assign(objects.size(), {});

  for (std::size_t k = 0; k < triples.size(); ++k) {
    const auto& t = triples[k];
    if (t.subject_id < 0 || t.subject_id >= n || t.object_id < 0 || t.object_id >= n) {
      throw Error(ErrorCode::kDanglingEdge,
                  "triple endpoint out of range (" + std::to_string(t.subject_id) + ", " +
                      std::to_string(t.object_id) + ") with " + std::to_string(n) + " objects",
                  "/triples/" + std::to_string(k));
    }
    graph.edges_.push_back(t);
    graph.adjacency_[static_cast<std::size_t>(t.subject_id)].push_back(t.object_id);
    graph.adjacency_[static_cast<std::size_t>(t.object_id)].push_back(t.subject_id);
  }
  return graph;
}

int select_anchor(const SceneGraph& graph) {
  if (graph.node_count() == 0) {
    throw Error(ErrorCode::kEmptyGraph, "cannot select an anchor in a graph without nodes");
  }
  int best = graph.node_ids().front();
  int best_degree = graph.degree(best);
  for (int node : graph.node_ids()) {
    const int d = graph.degree(node);
    if (d > best_degree) {
      best = node;
      best_degree = d;
    }
  }
  return best;
}

namespace {

std::string dot_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string to_dot(const SceneGraph& graph, std::span<const SceneObject> objects) {
  std::ostringstream os;
  os << "digraph scene {\n";
  for (int id : graph.node_ids()) {
    std::string label = std::to_string(id);
    if (static_cast<std::size_t>(id) < objects.size()) {
      const auto& obj = objects[static_cast<std::size_t>(id)];
      label = obj.caption + " [" + std::string(category_name(obj.category)) + "]";
    }
    os << "  n" << id << " [label=\"" << dot_escape(label) << "\"];\n";
  }
  for (const auto& e : graph.edges()) {
    os << "  n" << e.subject_id << " -> n" << e.object_id << " [label=\"" << dot_escape(e.predicate)
       << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace pcig
