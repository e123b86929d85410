#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semco/config.hpp"
#include "semco/dataset.hpp"
#include "semco/grouping.hpp"
#include "semco/losses.hpp"
#include "semco/model.hpp"

namespace semco {

double lr_schedule(int64_t step, const RunConfig& cfg);

struct StepRecord {
  LossBreakdown losses;
  double lr = 0.0;
  std::vector<UnlabeledOutcome> outcomes;  // aligned with the unlabeled batch
  std::vector<int> unlabeled_true;         // held back, used only for statistics
};

// One optimization step: weak/strong views, pseudo-labeling, the five loss
// terms, their combined gradient, an SGD step and an EMA update.
StepRecord train_step(ModelState& state, const Dataset& ds,
                      const std::vector<int>& labeled_idx,
                      const std::vector<int>& unlabeled_idx,
                      const Eigen::MatrixXd& M, const LabelGrouping& grouping,
                      const RunConfig& cfg, int64_t global_step);

// Error rate of the one-hot head's argmax under the EMA parameters.
double evaluate(const ModelState& state, const Dataset& ds);

// Per-class pseudo-labeling counters, accumulated over an epoch.
struct PseudoStatsAccum {
  std::vector<int64_t> seen, sc_kept, sc_correct, oh_kept, oh_correct;
  int64_t co_confident = 0;
  int64_t co_disagree = 0;

  explicit PseudoStatsAccum(int num_classes = 0) { reset(num_classes); }
  void reset(int num_classes);
  void add(const UnlabeledOutcome& outcome, int true_label);
};

struct PseudoStats {
  // ratio = kept / seen; accuracy = correct / kept, absent when kept = 0.
  std::vector<std::optional<double>> ratio_sc, acc_sc, ratio_oh, acc_oh;
  std::optional<double> disagreement;
};

PseudoStats pseudo_stats(const PseudoStatsAccum& accum);

struct MetricsRow {
  int64_t step = 0;
  int epoch = 0;
  std::string split;
  std::string metric;
  std::string cls;
  double value = 0.0;
};

// CSV with header `step,epoch,split,metric,class,value`.
void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::string& path);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

struct TrainResult {
  double final_test_error = 1.0;
  std::vector<double> test_errors;  // one per epoch
  std::vector<MetricsRow> metrics;
  int num_groups = 0;
};

class Trainer {
 public:
  // M rows must align with the dataset's class ids.
  Trainer(const RunConfig& cfg, Dataset ds, Eigen::MatrixXd M);

  // Full training loop. Writes metrics.csv, checkpoint.json and summary.json
  // under cfg.out_dir when write_outputs is set.
  TrainResult run(bool write_outputs = true);

  const LabelGrouping& grouping() const { return grouping_; }
  const Splits& splits() const { return splits_; }
  ModelState& state() { return state_; }
  const Dataset& dataset() const { return ds_; }

 private:
  RunConfig cfg_;
  Dataset ds_;
  Eigen::MatrixXd M_;
  LabelGrouping grouping_;
  Splits splits_;
  ModelState state_;
};

// Assembles the dataset and label matrix a run config describes.
Dataset dataset_from_config(const RunConfig& cfg);
Eigen::MatrixXd label_matrix_from_config(const RunConfig& cfg,
                                         const Dataset& ds);

}  // namespace semco
