#include "semco/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "semco/error.hpp"

namespace semco {

Eigen::MatrixXd LabelGrouping::matrix_G() const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(num_labels(), num_groups);
  for (int k = 0; k < num_labels(); ++k) g(k, assignments[k]) = 1.0;
  return g;
}

std::vector<std::vector<int>> LabelGrouping::groups() const {
  std::vector<std::vector<int>> out(num_groups);
  for (int k = 0; k < num_labels(); ++k) out[assignments[k]].push_back(k);
  return out;
}

LabelGrouping group_labels(const Eigen::MatrixXd& label_matrix, double eps) {
  const int k = static_cast<int>(label_matrix.rows());
  if (k < 1) throw data_error("label matrix must have at least one row");
  if (eps < 0.0 || eps > 2.0) throw data_error("eps must be in [0, 2]");
  if (!label_matrix.allFinite())
    throw data_error("label matrix has non-finite entries");

  // Cosine distance on normalized rows.
  Eigen::MatrixXd unit = label_matrix;
  for (int i = 0; i < k; ++i) {
    double n = unit.row(i).norm();
    if (n == 0.0) throw data_error("label matrix has an all-zero row");
    unit.row(i) /= n;
  }
  Eigen::MatrixXd sim = unit * unit.transpose();

  auto within = [&](int a, int b) { return 1.0 - sim(a, b) <= eps; };

  // Epsilon-neighborhoods, the point itself included.
  std::vector<std::vector<int>> nbrs(k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      if (a == b || within(a, b)) nbrs[a].push_back(b);

  const int min_pts = 2;
  std::vector<char> core(k, 0);
  for (int a = 0; a < k; ++a)
    core[a] = static_cast<int>(nbrs[a].size()) >= min_pts;

  // Clusters = components of the core graph, expanded in index order so a
  // border point reachable from several clusters joins the one whose
  // adjacent core has the lowest index.
  std::vector<int> cluster(k, -1);
  int next = 0;
  for (int seed = 0; seed < k; ++seed) {
    if (!core[seed] || cluster[seed] >= 0) continue;
    int id = next++;
    std::queue<int> q;
    cluster[seed] = id;
    q.push(seed);
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v : nbrs[u]) {
        if (cluster[v] >= 0) continue;
        cluster[v] = id;
        if (core[v]) q.push(v);
      }
    }
  }
  for (int a = 0; a < k; ++a)
    if (cluster[a] < 0) cluster[a] = next++;  // noise becomes a singleton

  // Relabel by ascending smallest member index.
  std::vector<int> first_member(next, k);
  for (int a = 0; a < k; ++a)
    first_member[cluster[a]] = std::min(first_member[cluster[a]], a);
  std::vector<int> order(next);
  for (int i = 0; i < next; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return first_member[x] < first_member[y]; });
  std::vector<int> relabel(next);
  for (int i = 0; i < next; ++i) relabel[order[i]] = i;

  LabelGrouping g;
  g.eps = eps;
  g.num_groups = next;
  g.assignments.resize(k);
  for (int a = 0; a < k; ++a) g.assignments[a] = relabel[cluster[a]];
  return g;
}

Eigen::VectorXd group_scores(const Eigen::VectorXd& p,
                             const LabelGrouping& grouping) {
  if (p.size() != grouping.num_labels())
    throw data_error("class score length does not match grouping");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(grouping.num_groups);
  for (int k = 0; k < grouping.num_labels(); ++k)
    g(grouping.assignments[k]) += p(k);
  return g;
}

}  // namespace semco
