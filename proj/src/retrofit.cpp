#include "semco/retrofit.hpp"

#include <queue>
#include <unordered_map>

#include "semco/error.hpp"

namespace semco {

namespace {

struct Neighbor {
  int idx;
  double weight;
};

// Union vocab (original order first, then new graph terms in edge order)
// plus an adjacency list with self-loops dropped.
struct Problem {
  std::vector<std::string> vocab;
  std::vector<std::vector<Neighbor>> adj;
  int n_original;  // terms [0, n_original) carry an anchor vector
};

Problem build_problem(const EmbeddingMatrix& emb, const KnowledgeGraph& graph) {
  Problem p;
  p.vocab = emb.vocab;
  p.n_original = emb.size();
  std::unordered_map<std::string, int> index;
  index.reserve(p.vocab.size() * 2);
  for (size_t i = 0; i < p.vocab.size(); ++i)
    index.emplace(p.vocab[i], static_cast<int>(i));

  auto intern = [&](const std::string& term) {
    auto it = index.find(term);
    if (it != index.end()) return it->second;
    int id = static_cast<int>(p.vocab.size());
    p.vocab.push_back(term);
    index.emplace(term, id);
    return id;
  };

  for (const auto& e : graph.edges) {
    int a = intern(e.term_a);
    int b = intern(e.term_b);
    if (a == b) continue;
    if (static_cast<int>(p.adj.size()) < static_cast<int>(p.vocab.size()))
      p.adj.resize(p.vocab.size());
    p.adj[a].push_back({b, e.weight});
    p.adj[b].push_back({a, e.weight});
  }
  p.adj.resize(p.vocab.size());
  return p;
}

// Every connected component that contains an unanchored term must also
// contain an anchored one, otherwise its stationarity system is singular.
void check_anchoring(const Problem& p) {
  const int n = static_cast<int>(p.vocab.size());
  std::vector<char> seen(n, 0);
  for (int start = 0; start < n; ++start) {
    if (seen[start] || p.adj[start].empty()) continue;
    std::vector<int> comp;
    std::queue<int> q;
    q.push(start);
    seen[start] = 1;
    bool anchored = false;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      comp.push_back(u);
      if (u < p.n_original) anchored = true;
      for (const auto& nb : p.adj[u]) {
        if (!seen[nb.idx]) {
          seen[nb.idx] = 1;
          q.push(nb.idx);
        }
      }
    }
    if (!anchored)
      throw data_error("unanchored component containing term '" +
                       p.vocab[comp.front()] + "'");
  }
  // Isolated unanchored terms cannot occur: new terms only come from edges.
}

}  // namespace

EmbeddingMatrix retrofit(const EmbeddingMatrix& emb, const KnowledgeGraph& graph,
                         const RetrofitConfig& cfg) {
  if (cfg.max_iters < 1) throw data_error("max_iters must be >= 1");
  if (cfg.tol < 0.0) throw data_error("tol must be >= 0");

  Problem p = build_problem(emb, graph);
  check_anchoring(p);

  const int n = static_cast<int>(p.vocab.size());
  const int d = emb.dim();
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, d);
  v.topRows(p.n_original) = emb.vectors;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    double max_disp = 0.0;
    for (int i = 0; i < n; ++i) {
      const double alpha = i < p.n_original ? cfg.alpha_present : 0.0;
      double denom = alpha;
      Eigen::RowVectorXd num = Eigen::RowVectorXd::Zero(d);
      if (alpha > 0.0) num = alpha * emb.vectors.row(i);
      for (const auto& nb : p.adj[i]) {
        num += nb.weight * v.row(nb.idx);
        denom += nb.weight;
      }
      if (denom == 0.0) continue;  // isolated term with alpha = 0 is excluded above
      Eigen::RowVectorXd updated = num / denom;
      max_disp = std::max(max_disp, (updated - v.row(i)).norm());
      v.row(i) = updated;
    }
    if (max_disp <= cfg.tol) break;
  }

  EmbeddingMatrix out;
  out.vocab = std::move(p.vocab);
  out.vectors = std::move(v);
  out.rebuild_index();
  return out;
}

double retrofit_objective(const EmbeddingMatrix& original,
                          const KnowledgeGraph& graph,
                          const EmbeddingMatrix& candidate,
                          double alpha_present) {
  double e = 0.0;
  for (int i = 0; i < original.size(); ++i) {
    int j = candidate.find(original.vocab[i]);
    if (j < 0)
      throw data_error("candidate is missing term '" + original.vocab[i] + "'");
    e += alpha_present *
         (candidate.vectors.row(j) - original.vectors.row(i)).squaredNorm();
  }
  for (const auto& edge : graph.edges) {
    if (edge.term_a == edge.term_b) continue;
    int a = candidate.find(edge.term_a);
    int b = candidate.find(edge.term_b);
    if (a < 0 || b < 0)
      throw data_error("candidate is missing a graph term");
    e += edge.weight *
         (candidate.vectors.row(a) - candidate.vectors.row(b)).squaredNorm();
  }
  return e;
}

}  // namespace semco
