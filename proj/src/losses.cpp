#include "semco/losses.hpp"

#include <cmath>

#include "semco/error.hpp"

namespace semco {

Eigen::VectorXd stable_softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

double cosine_loss(const Eigen::VectorXd& z, const Eigen::VectorXd& z_hat,
                   Eigen::VectorXd* d_zhat) {
  const double nz = z.norm();
  const double nh = z_hat.norm();
  if (nz == 0.0 || nh == 0.0)
    throw numeric_error("cosine loss on a zero vector");
  const double dot = z.dot(z_hat);
  const double cos = dot / (nz * nh);
  if (d_zhat) {
    // dC/dz_hat = -(z/(|z||zh|) - dot * zh/(|z||zh|^3))
    *d_zhat = -(z / (nz * nh) - (dot / (nz * nh * nh * nh)) * z_hat);
  }
  return 1.0 - cos;
}

Eigen::VectorXd class_scores(const Eigen::VectorXd& q, const Eigen::MatrixXd& M,
                             double temp) {
  if (temp <= 0.0) throw numeric_error("temperature must be positive");
  const double nq = q.norm();
  if (nq == 0.0) throw numeric_error("class scores on a zero vector");
  Eigen::VectorXd cos(M.rows());
  for (int k = 0; k < M.rows(); ++k) {
    double nm = M.row(k).norm();
    if (nm == 0.0) throw numeric_error("label matrix has a zero row");
    cos(k) = M.row(k).dot(q) / (nm * nq);
  }
  return stable_softmax(cos / temp);
}

bool semantic_mask(const Eigen::VectorXd& g, double tau_e) {
  return g.maxCoeff() >= tau_e;
}

bool onehot_mask(const Eigen::VectorXd& p_weak, double tau_o) {
  return p_weak.maxCoeff() >= tau_o;
}

Eigen::VectorXd pseudo_embedding(const Eigen::VectorXd& p,
                                 const LabelGrouping& grouping,
                                 const Eigen::MatrixXd& M) {
  if (p.size() != grouping.num_labels() || M.rows() != p.size())
    throw data_error("pseudo_embedding: dimension mismatch");
  Eigen::VectorXd g = group_scores(p, grouping);
  int winner = 0;
  g.maxCoeff(&winner);
  double denom = g(winner);
  if (denom <= 0.0)
    throw numeric_error("winning group has zero total score");
  Eigen::VectorXd emb = Eigen::VectorXd::Zero(M.cols());
  for (int k = 0; k < p.size(); ++k)
    if (grouping.assignments[k] == winner)
      emb += (p(k) / denom) * M.row(k).transpose();
  return emb;
}

UnlabeledOutcome evaluate_unlabeled(const Eigen::VectorXd& emb_weak,
                                    const Eigen::VectorXd& logits_weak,
                                    const Eigen::MatrixXd& M,
                                    const LabelGrouping& grouping, double tau_e,
                                    double tau_o, double temp) {
  UnlabeledOutcome out;
  out.p = class_scores(emb_weak, M, temp);
  out.g = group_scores(out.p, grouping);
  out.p.maxCoeff(&out.sc_argmax);
  out.eta_sc = semantic_mask(out.g, tau_e);
  if (out.eta_sc) out.pseudo_emb = pseudo_embedding(out.p, grouping, M);

  Eigen::VectorXd oh_probs = stable_softmax(logits_weak);
  out.eta_oh = onehot_mask(oh_probs, tau_o);
  if (out.eta_oh) {
    int arg = 0;
    oh_probs.maxCoeff(&arg);
    out.pseudo_class = arg;
  }
  return out;
}

double semantic_sup_loss(const Eigen::MatrixXd& M, const std::vector<int>& labels,
                         const Eigen::MatrixXd& emb_preds,
                         Eigen::MatrixXd* d_emb) {
  const int n = static_cast<int>(labels.size());
  if (n == 0 || emb_preds.rows() != n)
    throw data_error("semantic_sup_loss: batch mismatch");
  if (d_emb) d_emb->setZero(emb_preds.rows(), emb_preds.cols());
  double total = 0.0;
  Eigen::VectorXd grad;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd target = M.row(labels[i]).transpose();
    total += cosine_loss(target, emb_preds.row(i).transpose(),
                         d_emb ? &grad : nullptr);
    if (d_emb) d_emb->row(i) = grad.transpose() / n;
  }
  return total / n;
}

double semantic_unsup_loss(const std::vector<UnlabeledOutcome>& outcomes,
                           const Eigen::MatrixXd& emb_preds_strong,
                           Eigen::MatrixXd* d_emb) {
  const int n = static_cast<int>(outcomes.size());
  if (emb_preds_strong.rows() != n)
    throw data_error("semantic_unsup_loss: batch mismatch");
  if (d_emb) d_emb->setZero(emb_preds_strong.rows(), emb_preds_strong.cols());
  if (n == 0) return 0.0;
  double total = 0.0;
  Eigen::VectorXd grad;
  for (int i = 0; i < n; ++i) {
    if (!outcomes[i].eta_sc) continue;
    total += cosine_loss(*outcomes[i].pseudo_emb,
                         emb_preds_strong.row(i).transpose(),
                         d_emb ? &grad : nullptr);
    if (d_emb) d_emb->row(i) = grad.transpose() / n;
  }
  return total / n;  // denominator is the full unlabeled batch size
}

namespace {

// Cross-entropy of a hard label against softmax(logits), with gradient
// softmax - onehot.
double cross_entropy(int label, const Eigen::VectorXd& logits,
                     Eigen::VectorXd* d_logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  if (d_logits) {
    *d_logits = stable_softmax(logits);
    (*d_logits)(label) -= 1.0;
  }
  return lse - logits(label);
}

}  // namespace

double onehot_sup_loss(const std::vector<int>& labels,
                       const Eigen::MatrixXd& logits,
                       Eigen::MatrixXd* d_logits) {
  const int n = static_cast<int>(labels.size());
  if (n == 0 || logits.rows() != n)
    throw data_error("onehot_sup_loss: batch mismatch");
  if (d_logits) d_logits->setZero(logits.rows(), logits.cols());
  double total = 0.0;
  Eigen::VectorXd grad;
  for (int i = 0; i < n; ++i) {
    total += cross_entropy(labels[i], logits.row(i).transpose(),
                           d_logits ? &grad : nullptr);
    if (d_logits) d_logits->row(i) = grad.transpose() / n;
  }
  return total / n;
}

double onehot_unsup_loss(const std::vector<UnlabeledOutcome>& outcomes,
                         const Eigen::MatrixXd& logits_strong,
                         Eigen::MatrixXd* d_logits) {
  const int n = static_cast<int>(outcomes.size());
  if (logits_strong.rows() != n)
    throw data_error("onehot_unsup_loss: batch mismatch");
  if (d_logits) d_logits->setZero(logits_strong.rows(), logits_strong.cols());
  if (n == 0) return 0.0;
  double total = 0.0;
  Eigen::VectorXd grad;
  for (int i = 0; i < n; ++i) {
    if (!outcomes[i].eta_oh) continue;
    total += cross_entropy(*outcomes[i].pseudo_class,
                           logits_strong.row(i).transpose(),
                           d_logits ? &grad : nullptr);
    if (d_logits) d_logits->row(i) = grad.transpose() / n;
  }
  return total / n;
}

CotrainLoss cotrain_loss(const std::vector<UnlabeledOutcome>& outcomes,
                         const Eigen::MatrixXd& M,
                         const Eigen::MatrixXd& emb_preds_strong,
                         const Eigen::MatrixXd& logits_strong,
                         Eigen::MatrixXd* d_emb, Eigen::MatrixXd* d_logits) {
  const int n = static_cast<int>(outcomes.size());
  if (emb_preds_strong.rows() != n || logits_strong.rows() != n)
    throw data_error("cotrain_loss: batch mismatch");
  if (d_emb) d_emb->setZero(emb_preds_strong.rows(), emb_preds_strong.cols());
  if (d_logits) d_logits->setZero(logits_strong.rows(), logits_strong.cols());
  CotrainLoss loss;
  if (n == 0) return loss;
  Eigen::VectorXd grad;
  for (int i = 0; i < n; ++i) {
    if (outcomes[i].eta_oh) {
      const Eigen::VectorXd target =
          M.row(*outcomes[i].pseudo_class).transpose();
      loss.sc_term += cosine_loss(target, emb_preds_strong.row(i).transpose(),
                                  d_emb ? &grad : nullptr);
      if (d_emb) d_emb->row(i) = grad.transpose() / n;
    }
    if (outcomes[i].eta_sc) {
      loss.oh_term += cross_entropy(outcomes[i].sc_argmax,
                                    logits_strong.row(i).transpose(),
                                    d_logits ? &grad : nullptr);
      if (d_logits) d_logits->row(i) = grad.transpose() / n;
    }
  }
  loss.sc_term /= n;
  loss.oh_term /= n;
  return loss;
}

LossBreakdown total_loss(double l_sc_s, double l_sc_u, double l_oh_s,
                         double l_oh_u, double l_co_sc, double l_co_oh,
                         double lambda_u, double lambda_co, double sc_scale) {
  LossBreakdown b;
  b.l_sc_s = l_sc_s;
  b.l_sc_u = l_sc_u;
  b.l_oh_s = l_oh_s;
  b.l_oh_u = l_oh_u;
  b.l_co_sc = l_co_sc;
  b.l_co_oh = l_co_oh;
  b.l_co = l_co_sc + l_co_oh;
  b.lambda_u = lambda_u;
  b.lambda_co = lambda_co;
  b.sc_scale = sc_scale;
  b.total = sc_scale * l_sc_s + l_oh_s +
            lambda_u * (sc_scale * l_sc_u + l_oh_u) +
            lambda_co * (sc_scale * l_co_sc + l_co_oh);
  if (!std::isfinite(b.total)) throw numeric_error("non-finite total loss");
  return b;
}

}  // namespace semco
