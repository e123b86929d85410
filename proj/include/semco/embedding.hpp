#pragma once

#include <Eigen/Dense>
#include <string>
#include <unordered_map>
#include <vector>

namespace semco {

// Vocabulary-indexed table of d-dimensional vectors. Rows align with vocab.
struct EmbeddingMatrix {
  std::vector<std::string> vocab;
  Eigen::MatrixXd vectors;  // vocab.size() x dim

  int dim() const { return static_cast<int>(vectors.cols()); }
  int size() const { return static_cast<int>(vocab.size()); }

  // Index of a term, -1 if absent. Duplicate terms map to the first row.
  int find(const std::string& term) const {
    auto it = index_.find(term);
    return it == index_.end() ? -1 : it->second;
  }
  bool contains(const std::string& term) const { return find(term) >= 0; }

  void rebuild_index() {
    index_.clear();
    index_.reserve(vocab.size());
    for (size_t i = 0; i < vocab.size(); ++i)
      index_.emplace(vocab[i], static_cast<int>(i));
  }

 private:
  std::unordered_map<std::string, int> index_;
};

// Text format: one `term v1 v2 ... vd` line per row, optional `N d` header.
// Rejects duplicate terms, non-finite values and all-zero rows.
EmbeddingMatrix load_embedding_file(const std::string& path);
void save_embedding_file(const EmbeddingMatrix& emb, const std::string& path);

// Resolution cascade for class labels missing from the vocabulary:
// exact -> lowercase -> separators-to-space -> mean of all tokens ->
// mean of the resolvable tokens -> error.
Eigen::VectorXd lookup_label(const EmbeddingMatrix& emb,
                             const std::string& label);

// Row k = lookup_label(labels[k]) normalized to unit L2 norm.
// Duplicate labels are allowed and produce identical rows.
EmbeddingMatrix build_label_matrix(const EmbeddingMatrix& emb,
                                   const std::vector<std::string>& labels);

}  // namespace semco
