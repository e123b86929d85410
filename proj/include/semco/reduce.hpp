#pragma once

#include "semco/embedding.hpp"

namespace semco {

// Merges two embedding sets into one space. On the common vocabulary the
// output row is the column-concatenation [a | b] projected onto the top
// target_dim right singular directions of the concatenated common-vocab
// matrix. Terms present in only one source are projected through the same
// directions, with the missing block padded by that source's common-vocab
// column means.
EmbeddingMatrix merge_embeddings(const EmbeddingMatrix& emb_a,
                                 const EmbeddingMatrix& emb_b, int target_dim);

// Rows of `attributes` projected onto the top `dim` principal components of
// the mean-centered matrix, ordered by decreasing explained variance.
// Errors when dim exceeds the numerical rank of the centered matrix.
Eigen::MatrixXd pca_reduce(const Eigen::MatrixXd& attributes, int dim);

// CSV with the label name in the first column and real attributes after it.
// Returns the attribute matrix and the label names in file order.
std::pair<Eigen::MatrixXd, std::vector<std::string>> load_attribute_csv(
    const std::string& path);

}  // namespace semco
