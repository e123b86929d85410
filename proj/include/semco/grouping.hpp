#pragma once

#include <Eigen/Dense>
#include <vector>

namespace semco {

// Partition of K class labels into Q groups of visually similar classes.
struct LabelGrouping {
  std::vector<int> assignments;  // length K, group ids in [0, Q)
  int num_groups = 0;
  double eps = 0.0;

  int num_labels() const { return static_cast<int>(assignments.size()); }

  // K x Q binary assignment matrix; row k has a single 1 at its group.
  Eigen::MatrixXd matrix_G() const;

  // Member indices per group, ordered by group id.
  std::vector<std::vector<int>> groups() const;
};

// Density clustering of the label embedding rows under cosine distance
// d(a,b) = 1 - cos(a,b), with min_pts = 2. Points with no neighbor inside
// eps become singleton groups, so every label is assigned. Group ids are
// ordered by each group's smallest member index.
LabelGrouping group_labels(const Eigen::MatrixXd& label_matrix, double eps);

// g = G^T p: sums class scores over each group's members.
Eigen::VectorXd group_scores(const Eigen::VectorXd& p,
                             const LabelGrouping& grouping);

}  // namespace semco
