#pragma once

#include <set>
#include <string>
#include <vector>

namespace semco {

struct GraphEdge {
  std::string term_a;
  std::string term_b;
  std::string relation;
  double weight = 1.0;
};

struct KnowledgeGraph {
  std::vector<GraphEdge> edges;
};

// TSV columns: relation <TAB> term_a <TAB> term_b [<TAB> weight].
// Missing weight defaults to 1.0; weights must be positive.
KnowledgeGraph load_graph_file(const std::string& path);

// Keeps edges whose relation is whitelisted, preserving order and weights.
// Self-loops are dropped. The whitelist must be non-empty.
KnowledgeGraph filter_graph(const KnowledgeGraph& graph,
                            const std::set<std::string>& relation_whitelist);

// Relations that imply visual similarity; the default whitelist.
const std::set<std::string>& similarity_relations();

}  // namespace semco
