#include "semco/reduce.hpp"

#include <Eigen/SVD>
#include <fstream>
#include <sstream>

#include "semco/error.hpp"

namespace semco {

EmbeddingMatrix merge_embeddings(const EmbeddingMatrix& emb_a,
                                 const EmbeddingMatrix& emb_b, int target_dim) {
  const int da = emb_a.dim();
  const int db = emb_b.dim();
  if (target_dim < 1 || target_dim > da + db)
    throw data_error("target_dim must be in [1, d_a + d_b]");

  std::vector<int> common_a, common_b;
  for (int i = 0; i < emb_a.size(); ++i) {
    int j = emb_b.find(emb_a.vocab[i]);
    if (j >= 0) {
      common_a.push_back(i);
      common_b.push_back(j);
    }
  }
  if (common_a.empty()) throw data_error("no common vocabulary");

  const int nc = static_cast<int>(common_a.size());
  Eigen::MatrixXd concat(nc, da + db);
  for (int r = 0; r < nc; ++r) {
    concat.row(r).head(da) = emb_a.vectors.row(common_a[r]);
    concat.row(r).tail(db) = emb_b.vectors.row(common_b[r]);
  }

  // Full V so the projection is defined for any target_dim up to d_a + d_b.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(concat, Eigen::ComputeFullV);
  Eigen::MatrixXd proj = svd.matrixV().leftCols(target_dim);

  // Column means over the common block stand in for a missing source.
  Eigen::RowVectorXd mean_a = Eigen::RowVectorXd::Zero(da);
  Eigen::RowVectorXd mean_b = Eigen::RowVectorXd::Zero(db);
  for (int r = 0; r < nc; ++r) {
    mean_a += emb_a.vectors.row(common_a[r]);
    mean_b += emb_b.vectors.row(common_b[r]);
  }
  mean_a /= nc;
  mean_b /= nc;

  EmbeddingMatrix out;
  out.vocab = emb_a.vocab;
  for (int j = 0; j < emb_b.size(); ++j)
    if (!emb_a.contains(emb_b.vocab[j])) out.vocab.push_back(emb_b.vocab[j]);

  out.vectors.resize(static_cast<int>(out.vocab.size()), target_dim);
  Eigen::RowVectorXd row(da + db);
  for (size_t t = 0; t < out.vocab.size(); ++t) {
    int ia = emb_a.find(out.vocab[t]);
    int ib = emb_b.find(out.vocab[t]);
    row.head(da) = ia >= 0 ? emb_a.vectors.row(ia) : mean_a;
    row.tail(db) = ib >= 0 ? emb_b.vectors.row(ib) : mean_b;
    out.vectors.row(static_cast<int>(t)) = row * proj;
  }
  out.rebuild_index();
  return out;
}

Eigen::MatrixXd pca_reduce(const Eigen::MatrixXd& attributes, int dim) {
  const int k = static_cast<int>(attributes.rows());
  const int a = static_cast<int>(attributes.cols());
  if (dim < 1 || dim > std::min(k, a))
    throw data_error("dim must be in [1, min(K, A)]");

  Eigen::MatrixXd centered = attributes.rowwise() - attributes.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double rank_tol =
      sv.size() > 0 ? sv(0) * std::max(k, a) * 1e-15 : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > rank_tol) ++rank;
  if (dim > rank)
    throw data_error("dim " + std::to_string(dim) +
                     " exceeds rank of centered matrix (" +
                     std::to_string(rank) + ")");

  return centered * svd.matrixV().leftCols(dim);
}

std::pair<Eigen::MatrixXd, std::vector<std::string>> load_attribute_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open attribute file: " + path);
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2)
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": expected label plus attributes");
    std::vector<double> vals;
    for (size_t i = 1; i < cells.size(); ++i) {
      try {
        vals.push_back(std::stod(cells[i]));
      } catch (const std::exception&) {
        throw data_error(path + ":" + std::to_string(lineno) +
                         ": bad attribute value '" + cells[i] + "'");
      }
    }
    if (width == 0) width = vals.size();
    if (vals.size() != width)
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": inconsistent attribute count");
    labels.push_back(cells[0]);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw data_error("empty attribute file: " + path);
  Eigen::MatrixXd m(static_cast<int>(rows.size()), static_cast<int>(width));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < width; ++j)
      m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return {m, labels};
}

}  // namespace semco
