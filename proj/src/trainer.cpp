#include "semco/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "semco/augment.hpp"
#include "semco/embedding.hpp"
#include "semco/error.hpp"
#include "semco/rng.hpp"

namespace semco {

double lr_schedule(int64_t step, const RunConfig& cfg) {
  if (step < 0) throw data_error("negative step");
  const int64_t total =
      static_cast<int64_t>(cfg.epochs) * cfg.steps_per_epoch;
  int64_t warm = static_cast<int64_t>(cfg.warmup_epochs) * cfg.steps_per_epoch;
  warm = std::min(warm, total);
  if (warm > 0 && step < warm)
    return cfg.lr_max * static_cast<double>(step) / static_cast<double>(warm);
  if (total <= warm) return cfg.lr_max;
  const double progress =
      std::min(1.0, static_cast<double>(step - warm) /
                        static_cast<double>(total - warm));
  return cfg.lr_max * std::cos(M_PI / 2.0 * progress);
}

StepRecord train_step(ModelState& state, const Dataset& ds,
                      const std::vector<int>& labeled_idx,
                      const std::vector<int>& unlabeled_idx,
                      const Eigen::MatrixXd& M, const LabelGrouping& grouping,
                      const RunConfig& cfg, int64_t global_step) {
  if (labeled_idx.empty()) throw data_error("train_step needs labeled samples");
  const int nl = static_cast<int>(labeled_idx.size());
  const int nu = static_cast<int>(unlabeled_idx.size());

  // Weak views of the labeled batch plus weak and strong views of the
  // unlabeled batch, each from its own (sample, step) stream.
  std::vector<ImageTensor> labeled_weak;
  std::vector<int> labels;
  labeled_weak.reserve(nl);
  for (int idx : labeled_idx) {
    ImageTensor img = ds.train_image(idx);
    Rng rng(mix_seed(cfg.seed, "aug-weak", static_cast<uint64_t>(idx),
                     static_cast<uint64_t>(global_step)));
    labeled_weak.push_back(weak_augment(img, rng));
    labels.push_back(ds.train_labels[idx]);
  }

  StepRecord rec;
  std::vector<ImageTensor> unlabeled_strong;
  unlabeled_strong.reserve(nu);
  if (nu > 0) {
    std::vector<ImageTensor> unlabeled_weak;
    unlabeled_weak.reserve(nu);
    for (int idx : unlabeled_idx) {
      ImageTensor img = ds.train_image(idx);
      Rng wrng(mix_seed(cfg.seed, "aug-weak", static_cast<uint64_t>(idx),
                        static_cast<uint64_t>(global_step)));
      unlabeled_weak.push_back(weak_augment(img, wrng));
      Rng srng(mix_seed(cfg.seed, "aug-strong", static_cast<uint64_t>(idx),
                        static_cast<uint64_t>(global_step)));
      unlabeled_strong.push_back(
          strong_augment(img, srng, cfg.n_ops, cfg.magnitude, cfg.cutout));
      rec.unlabeled_true.push_back(ds.train_labels[idx]);
    }
    // Pseudo-labels come from the weak views of the live model, no gradient.
    const ForwardResult weak = forward(state, unlabeled_weak, false);
    rec.outcomes.reserve(nu);
    for (int j = 0; j < nu; ++j)
      rec.outcomes.push_back(evaluate_unlabeled(
          weak.emb.row(j).transpose(), weak.logits.row(j).transpose(), M,
          grouping, cfg.tau_e, cfg.tau_o, cfg.temp));
  }

  // One traced pass over [labeled weak | unlabeled strong].
  std::vector<ImageTensor> combined = labeled_weak;
  combined.insert(combined.end(), unlabeled_strong.begin(),
                  unlabeled_strong.end());

  LossBreakdown breakdown;
  auto loss_fn = [&](const Eigen::MatrixXd& emb, const Eigen::MatrixXd& logits,
                     Eigen::MatrixXd* d_emb, Eigen::MatrixXd* d_logits) {
    const Eigen::MatrixXd emb_l = emb.topRows(nl);
    const Eigen::MatrixXd logits_l = logits.topRows(nl);
    Eigen::MatrixXd d_emb_l, d_logits_l;
    const double l_sc_s =
        semantic_sup_loss(M, labels, emb_l, d_emb ? &d_emb_l : nullptr);
    const double l_oh_s =
        onehot_sup_loss(labels, logits_l, d_logits ? &d_logits_l : nullptr);

    double l_sc_u = 0.0, l_oh_u = 0.0;
    CotrainLoss co;
    Eigen::MatrixXd d_emb_u, d_logits_u, d_emb_co, d_logits_co;
    if (nu > 0) {
      const Eigen::MatrixXd emb_u = emb.bottomRows(nu);
      const Eigen::MatrixXd logits_u = logits.bottomRows(nu);
      l_sc_u =
          semantic_unsup_loss(rec.outcomes, emb_u, d_emb ? &d_emb_u : nullptr);
      l_oh_u = onehot_unsup_loss(rec.outcomes, logits_u,
                                 d_logits ? &d_logits_u : nullptr);
      co = cotrain_loss(rec.outcomes, M, emb_u, logits_u,
                        d_emb ? &d_emb_co : nullptr,
                        d_logits ? &d_logits_co : nullptr);
    }
    breakdown = total_loss(l_sc_s, l_sc_u, l_oh_s, l_oh_u, co.sc_term,
                           co.oh_term, cfg.lambda_u, cfg.lambda_co,
                           cfg.sc_scale);
    if (d_emb) {
      d_emb->setZero(emb.rows(), emb.cols());
      d_emb->topRows(nl) = cfg.sc_scale * d_emb_l;
      if (nu > 0)
        d_emb->bottomRows(nu) = cfg.lambda_u * cfg.sc_scale * d_emb_u +
                                cfg.lambda_co * cfg.sc_scale * d_emb_co;
    }
    if (d_logits) {
      d_logits->setZero(logits.rows(), logits.cols());
      d_logits->topRows(nl) = d_logits_l;
      if (nu > 0)
        d_logits->bottomRows(nu) =
            cfg.lambda_u * d_logits_u + cfg.lambda_co * d_logits_co;
    }
    return breakdown.total;
  };

  std::vector<double> grads;
  gradients(state, combined, loss_fn, &grads);

  rec.lr = lr_schedule(global_step, cfg);
  sgd_step(state, grads, rec.lr, cfg.momentum, cfg.weight_decay);
  ema_update(state, cfg.ema_decay);
  rec.losses = breakdown;
  return rec;
}

double evaluate(const ModelState& state, const Dataset& ds) {
  if (ds.test_size() == 0) throw data_error("empty test set");
  const size_t n = ds.test_size();
  size_t wrong = 0;
  const size_t chunk = 128;
  std::vector<ImageTensor> batch;
  for (size_t start = 0; start < n; start += chunk) {
    const size_t stop = std::min(n, start + chunk);
    batch.clear();
    for (size_t i = start; i < stop; ++i) batch.push_back(ds.test_image(i));
    const ForwardResult out = forward(state, batch, /*use_ema=*/true);
    for (size_t i = start; i < stop; ++i) {
      int arg = 0;
      out.logits.row(static_cast<int>(i - start)).maxCoeff(&arg);
      if (arg != ds.test_labels[i]) ++wrong;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(n);
}

void PseudoStatsAccum::reset(int num_classes) {
  seen.assign(num_classes, 0);
  sc_kept.assign(num_classes, 0);
  sc_correct.assign(num_classes, 0);
  oh_kept.assign(num_classes, 0);
  oh_correct.assign(num_classes, 0);
  co_confident = 0;
  co_disagree = 0;
}

void PseudoStatsAccum::add(const UnlabeledOutcome& o, int true_label) {
  if (true_label < 0 || true_label >= static_cast<int>(seen.size()))
    throw data_error("true label out of range");
  ++seen[true_label];
  if (o.eta_sc) {
    ++sc_kept[true_label];
    if (o.sc_argmax == true_label) ++sc_correct[true_label];
  }
  if (o.eta_oh) {
    ++oh_kept[true_label];
    if (*o.pseudo_class == true_label) ++oh_correct[true_label];
  }
  if (o.eta_sc && o.eta_oh) {
    ++co_confident;
    if (o.sc_argmax != *o.pseudo_class) ++co_disagree;
  }
}

PseudoStats pseudo_stats(const PseudoStatsAccum& a) {
  PseudoStats s;
  const size_t k = a.seen.size();
  s.ratio_sc.resize(k);
  s.acc_sc.resize(k);
  s.ratio_oh.resize(k);
  s.acc_oh.resize(k);
  for (size_t c = 0; c < k; ++c) {
    if (a.seen[c] > 0) {
      s.ratio_sc[c] = static_cast<double>(a.sc_kept[c]) / a.seen[c];
      s.ratio_oh[c] = static_cast<double>(a.oh_kept[c]) / a.seen[c];
    }
    if (a.sc_kept[c] > 0)
      s.acc_sc[c] = static_cast<double>(a.sc_correct[c]) / a.sc_kept[c];
    if (a.oh_kept[c] > 0)
      s.acc_oh[c] = static_cast<double>(a.oh_correct[c]) / a.oh_kept[c];
  }
  if (a.co_confident > 0)
    s.disagreement = static_cast<double>(a.co_disagree) / a.co_confident;
  return s;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write metrics file: " + path);
  out << "step,epoch,split,metric,class,value\n";
  char buf[48];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.10g", r.value);
    out << r.step << ',' << r.epoch << ',' << r.split << ',' << r.metric << ','
        << r.cls << ',' << buf << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open metrics file: " + path);
  std::vector<MetricsRow> rows;
  std::string line;
  bool first = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("step,", 0) == 0) continue;
    }
    std::vector<std::string> cols;
    std::string col;
    std::istringstream ss(line);
    while (std::getline(ss, col, ',')) cols.push_back(col);
    while (cols.size() < 6) cols.push_back("");
    if (cols.size() != 6)
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": expected 6 columns");
    MetricsRow r;
    try {
      r.step = std::stoll(cols[0]);
      r.epoch = std::stoi(cols[1]);
      r.value = std::stod(cols[5]);
    } catch (const std::exception&) {
      throw data_error(path + ":" + std::to_string(lineno) + ": bad number");
    }
    r.split = cols[2];
    r.metric = cols[3];
    r.cls = cols[4];
    rows.push_back(std::move(r));
  }
  return rows;
}

Dataset dataset_from_config(const RunConfig& cfg) {
  if (cfg.dataset == "synthetic") {
    SynthConfig sc;
    sc.train_per_class = cfg.synth_train_per_class;
    sc.test_per_class = cfg.synth_test_per_class;
    sc.size = cfg.synth_size;
    sc.seed = cfg.seed;
    sc.color_delta = cfg.synth_color_delta;
    sc.fg_noise = cfg.synth_fg_noise;
    sc.bg_level = cfg.synth_bg_level;
    return make_synthetic(sc);
  }
  if (cfg.dataset == "cifar10") return load_cifar10(cfg.data_dir);
  if (cfg.dataset == "cifar100") return load_cifar100(cfg.data_dir);
  if (cfg.dataset == "rawdir")
    return load_raw_dir(cfg.data_dir, cfg.img_height, cfg.img_width,
                        cfg.img_channels);
  throw data_error("unknown dataset '" + cfg.dataset + "'");
}

Eigen::MatrixXd label_matrix_from_config(const RunConfig& cfg,
                                         const Dataset& ds) {
  if (cfg.embeddings.empty()) {
    if (cfg.dataset != "synthetic")
      throw data_error("dataset '" + cfg.dataset +
                       "' needs an embeddings file");
    return synthetic_label_matrix(cfg.emb_dim >= 13 ? cfg.emb_dim : 16);
  }
  const EmbeddingMatrix emb = load_embedding_file(cfg.embeddings);
  return build_label_matrix(emb, ds.class_names).vectors;
}

Trainer::Trainer(const RunConfig& cfg, Dataset ds, Eigen::MatrixXd M)
    : cfg_(cfg), ds_(std::move(ds)), M_(std::move(M)) {
  if (M_.rows() != ds_.num_classes)
    throw data_error("label matrix rows do not match the class count");
  grouping_ = group_labels(M_, cfg_.eps);
  splits_ = make_splits(ds_, cfg_.n_labeled, cfg_.seed);
  ModelConfig mc;
  mc.backbone = cfg_.backbone;
  mc.in_channels = ds_.channels;
  mc.height = ds_.height;
  mc.width = ds_.width;
  mc.conv1_channels = cfg_.conv1_channels;
  mc.conv2_channels = cfg_.conv2_channels;
  mc.hidden = cfg_.hidden;
  mc.emb_dim = static_cast<int>(M_.cols());
  mc.num_classes = ds_.num_classes;
  state_ = init_model(mc, cfg_.seed);
}

TrainResult Trainer::run(bool write_outputs) {
  TrainResult result;
  result.num_groups = grouping_.num_groups;
  std::vector<MetricsRow>& rows = result.metrics;

  const int k = ds_.num_classes;
  const int unlabeled_per_step = cfg_.mu * cfg_.batch_size;
  std::vector<int> unlabeled_order;
  size_t cursor = 0;
  uint64_t refill = 0;
  auto next_unlabeled = [&](std::vector<int>* out) {
    out->clear();
    if (splits_.unlabeled.empty()) return;
    for (int i = 0; i < unlabeled_per_step; ++i) {
      if (cursor >= unlabeled_order.size()) {
        unlabeled_order = splits_.unlabeled;
        Rng rng(mix_seed(cfg_.seed, "unlabeled-order", refill++));
        for (size_t j = unlabeled_order.size() - 1; j > 0; --j) {
          size_t l = static_cast<size_t>(
              rng.uniform_int(static_cast<int>(j + 1)));
          std::swap(unlabeled_order[j], unlabeled_order[l]);
        }
        cursor = 0;
      }
      out->push_back(unlabeled_order[cursor++]);
    }
  };

  int64_t step = 0;
  std::vector<int> labeled_batch, unlabeled_batch;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    PseudoStatsAccum accum(k);
    LossBreakdown sum;
    double lr_last = 0.0;
    for (int s = 0; s < cfg_.steps_per_epoch; ++s, ++step) {
      labeled_batch.clear();
      Rng brng(mix_seed(cfg_.seed, "labeled-batch",
                        static_cast<uint64_t>(step)));
      for (int i = 0; i < cfg_.batch_size; ++i)
        labeled_batch.push_back(splits_.labeled[brng.uniform_int(
            static_cast<int>(splits_.labeled.size()))]);
      next_unlabeled(&unlabeled_batch);

      StepRecord rec;
      try {
        rec = train_step(state_, ds_, labeled_batch, unlabeled_batch, M_,
                         grouping_, cfg_, step);
      } catch (const numeric_error& e) {
        throw numeric_error("step " + std::to_string(step) + " (epoch " +
                            std::to_string(epoch) + "): " + e.what());
      }
      for (size_t j = 0; j < rec.outcomes.size(); ++j)
        accum.add(rec.outcomes[j], rec.unlabeled_true[j]);
      sum.l_sc_s += rec.losses.l_sc_s;
      sum.l_sc_u += rec.losses.l_sc_u;
      sum.l_oh_s += rec.losses.l_oh_s;
      sum.l_oh_u += rec.losses.l_oh_u;
      sum.l_co += rec.losses.l_co;
      sum.total += rec.losses.total;
      lr_last = rec.lr;
    }

    const double inv = 1.0 / cfg_.steps_per_epoch;
    auto push = [&](const std::string& split, const std::string& metric,
                    const std::string& cls, double value) {
      rows.push_back({step, epoch, split, metric, cls, value});
    };
    push("train", "lr", "", lr_last);
    push("train", "loss_total", "", sum.total * inv);
    push("train", "loss_sc_s", "", sum.l_sc_s * inv);
    push("train", "loss_sc_u", "", sum.l_sc_u * inv);
    push("train", "loss_oh_s", "", sum.l_oh_s * inv);
    push("train", "loss_oh_u", "", sum.l_oh_u * inv);
    push("train", "loss_co", "", sum.l_co * inv);

    const PseudoStats ps = pseudo_stats(accum);
    for (int c = 0; c < k; ++c) {
      if (ps.ratio_sc[c]) push("train", "pl_ratio_sc", ds_.class_names[c], *ps.ratio_sc[c]);
      if (ps.acc_sc[c]) push("train", "pl_acc_sc", ds_.class_names[c], *ps.acc_sc[c]);
      if (ps.ratio_oh[c]) push("train", "pl_ratio_oh", ds_.class_names[c], *ps.ratio_oh[c]);
      if (ps.acc_oh[c]) push("train", "pl_acc_oh", ds_.class_names[c], *ps.acc_oh[c]);
    }
    if (ps.disagreement) push("train", "disagreement", "", *ps.disagreement);

    const double err = evaluate(state_, ds_);
    result.test_errors.push_back(err);
    push("test", "error_rate", "", err);
  }

  result.final_test_error =
      result.test_errors.empty() ? 1.0 : result.test_errors.back();

  if (write_outputs) {
    std::filesystem::create_directories(cfg_.out_dir);
    write_metrics_csv(rows, cfg_.out_dir + "/metrics.csv");
    save_checkpoint(state_, cfg_.out_dir + "/checkpoint.json",
                    config_to_string(cfg_));
    nlohmann::json summary;
    summary["final_test_error"] = result.final_test_error;
    summary["epochs"] = cfg_.epochs;
    summary["steps"] = step;
    summary["num_groups"] = grouping_.num_groups;
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : grouping_.groups()) {
      nlohmann::json members = nlohmann::json::array();
      for (int idx : g) members.push_back(ds_.class_names[idx]);
      groups.push_back(members);
    }
    summary["groups"] = groups;
    nlohmann::json cfgj;
    for (const auto& [key, value] : config_items(cfg_)) cfgj[key] = value;
    summary["config"] = cfgj;
    std::ofstream out(cfg_.out_dir + "/summary.json");
    if (!out) throw data_error("cannot write summary under " + cfg_.out_dir);
    out << summary.dump(2) << "\n";
  }
  return result;
}

}  // namespace semco
