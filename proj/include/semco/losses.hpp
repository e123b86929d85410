#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "semco/grouping.hpp"

namespace semco {

// Per-sample pseudo-labeling outcome for an unlabeled image, computed from
// its weakly augmented view.
struct UnlabeledOutcome {
  Eigen::VectorXd p;  // semantic-head class scores, simplex over K
  Eigen::VectorXd g;  // group scores, G^T p
  bool eta_sc = false;
  bool eta_oh = false;
  std::optional<Eigen::VectorXd> pseudo_emb;  // present iff eta_sc
  std::optional<int> pseudo_class;            // one-hot head label, iff eta_oh
  int sc_argmax = 0;                          // argmax of p
};

struct LossBreakdown {
  double l_sc_s = 0.0;
  double l_sc_u = 0.0;
  double l_oh_s = 0.0;
  double l_oh_u = 0.0;
  double l_co_sc = 0.0;  // co-training term that reaches the semantic head
  double l_co_oh = 0.0;  // co-training term that reaches the one-hot head
  double l_co = 0.0;     // l_co_sc + l_co_oh
  double total = 0.0;
  double lambda_u = 1.0;
  double lambda_co = 1.0;
  double sc_scale = 3.0;
};

// 1 - cosine similarity, in [0, 2]. Errors on zero vectors. When d_zhat is
// given it receives the gradient with respect to z_hat.
double cosine_loss(const Eigen::VectorXd& z, const Eigen::VectorXd& z_hat,
                   Eigen::VectorXd* d_zhat = nullptr);

// Softmax over cosine similarities between q and the rows of M, at the given
// temperature. M rows are expected unit-norm.
Eigen::VectorXd class_scores(const Eigen::VectorXd& q, const Eigen::MatrixXd& M,
                             double temp);

// max(g) >= tau, inclusive.
bool semantic_mask(const Eigen::VectorXd& g, double tau_e);
bool onehot_mask(const Eigen::VectorXd& p_weak, double tau_o);

// Weighted average of the winning group's member embeddings, weights being
// the class scores renormalized within the group.
Eigen::VectorXd pseudo_embedding(const Eigen::VectorXd& p,
                                 const LabelGrouping& grouping,
                                 const Eigen::MatrixXd& M);

UnlabeledOutcome evaluate_unlabeled(const Eigen::VectorXd& emb_weak,
                                    const Eigen::VectorXd& logits_weak,
                                    const Eigen::MatrixXd& M,
                                    const LabelGrouping& grouping, double tau_e,
                                    double tau_o, double temp);

// Mean cosine loss between true label embeddings and predicted embeddings.
double semantic_sup_loss(const Eigen::MatrixXd& M, const std::vector<int>& labels,
                         const Eigen::MatrixXd& emb_preds,
                         Eigen::MatrixXd* d_emb = nullptr);

// Masked mean over the full unlabeled batch size of the cosine loss against
// pseudo-label embeddings.
double semantic_unsup_loss(const std::vector<UnlabeledOutcome>& outcomes,
                           const Eigen::MatrixXd& emb_preds_strong,
                           Eigen::MatrixXd* d_emb = nullptr);

// Mean softmax cross-entropy.
double onehot_sup_loss(const std::vector<int>& labels,
                       const Eigen::MatrixXd& logits,
                       Eigen::MatrixXd* d_logits = nullptr);

double onehot_unsup_loss(const std::vector<UnlabeledOutcome>& outcomes,
                         const Eigen::MatrixXd& logits_strong,
                         Eigen::MatrixXd* d_logits = nullptr);

// Cross-classifier consistency: each head learns from the other head's
// confident hard pseudo-label. A sample confidently (and differently)
// labeled by both heads contributes through both terms.
struct CotrainLoss {
  double sc_term = 0.0;  // cosine losses against the one-hot head's labels
  double oh_term = 0.0;  // cross-entropies against the semantic head's labels
};
CotrainLoss cotrain_loss(const std::vector<UnlabeledOutcome>& outcomes,
                         const Eigen::MatrixXd& M,
                         const Eigen::MatrixXd& emb_preds_strong,
                         const Eigen::MatrixXd& logits_strong,
                         Eigen::MatrixXd* d_emb = nullptr,
                         Eigen::MatrixXd* d_logits = nullptr);

// total = s*l_sc_s + l_oh_s + lambda_u*(s*l_sc_u + l_oh_u)
//         + lambda_co*(s*l_co_sc + l_co_oh),  s = sc_scale.
LossBreakdown total_loss(double l_sc_s, double l_sc_u, double l_oh_s,
                         double l_oh_u, double l_co_sc, double l_co_oh,
                         double lambda_u, double lambda_co, double sc_scale);

// Softmax with the max subtracted; safe for large logits.
Eigen::VectorXd stable_softmax(const Eigen::VectorXd& logits);

}  // namespace semco
