#include "semco/graph.hpp"

#include <fstream>
#include <sstream>

#include "semco/error.hpp"

namespace semco {

KnowledgeGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open graph file: " + path);
  KnowledgeGraph g;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::string col;
    std::istringstream ss(line);
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 3 || cols.size() > 4)
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": expected 3 or 4 tab-separated columns");
    GraphEdge e;
    e.relation = cols[0];
    e.term_a = cols[1];
    e.term_b = cols[2];
    if (cols.size() == 4) {
      try {
        size_t pos = 0;
        e.weight = std::stod(cols[3], &pos);
        if (pos != cols[3].size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw data_error(path + ":" + std::to_string(lineno) +
                         ": bad weight '" + cols[3] + "'");
      }
    }
    if (e.weight <= 0.0)
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": weight must be positive");
    g.edges.push_back(std::move(e));
  }
  return g;
}

KnowledgeGraph filter_graph(const KnowledgeGraph& graph,
                            const std::set<std::string>& relation_whitelist) {
  if (relation_whitelist.empty())
    throw data_error("relation whitelist is empty");
  KnowledgeGraph out;
  for (const auto& e : graph.edges) {
    if (e.term_a == e.term_b) continue;
    if (relation_whitelist.count(e.relation)) out.edges.push_back(e);
  }
  return out;
}

const std::set<std::string>& similarity_relations() {
  static const std::set<std::string> rels = {
      "SimilarTo",  "InstanceOf", "IsA",
      "FormOf",     "Synonym",    "EtymologicallyRelatedTo",
      "DefinedAs"};
  return rels;
}

}  // namespace semco
