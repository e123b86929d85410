#pragma once

#include "semco/embedding.hpp"
#include "semco/graph.hpp"

namespace semco {

struct RetrofitConfig {
  double alpha_present = 1.0;  // anchor weight for terms with an original vector
  int max_iters = 10;
  double tol = 1e-6;  // stop when the max per-vector displacement falls below
};

// Adjusts word vectors to agree with a knowledge graph by minimizing
//   E(v) = sum_i [ alpha_i |v_i - v0_i|^2 + sum_{(i,j) in E} beta_ij |v_i - v_j|^2 ]
// via Gauss-Seidel coordinate sweeps
//   v_i <- (alpha_i v0_i + sum_j beta_ij v_j) / (alpha_i + sum_j beta_ij).
// Graph terms absent from the vocabulary get alpha = 0 and join the output.
// A connected component with no anchored term is an error.
EmbeddingMatrix retrofit(const EmbeddingMatrix& emb, const KnowledgeGraph& graph,
                         const RetrofitConfig& cfg = {});

// The objective above, evaluated for a candidate solution whose vocab extends
// the original's. Used to verify that sweeps never increase E.
double retrofit_objective(const EmbeddingMatrix& original,
                          const KnowledgeGraph& graph,
                          const EmbeddingMatrix& candidate,
                          double alpha_present = 1.0);

}  // namespace semco
