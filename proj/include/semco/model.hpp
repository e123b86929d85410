#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "semco/image.hpp"

namespace semco {

struct ModelConfig {
  std::string backbone = "conv";  // conv | mlp
  int in_channels = 3;
  int height = 32;
  int width = 32;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int hidden = 64;
  int emb_dim = 128;   // semantic head output size d
  int num_classes = 10;

  bool operator==(const ModelConfig&) const = default;
};

// Shared backbone plus two linear heads. Parameters, EMA shadow and momentum
// buffers live in flat vectors of identical shape.
struct ModelState {
  ModelConfig cfg;
  std::vector<double> params;
  std::vector<double> ema;
  std::vector<double> momentum;
  int64_t step = 0;

  size_t param_count() const { return params.size(); }
};

ModelState init_model(const ModelConfig& cfg, uint64_t seed);

struct ForwardResult {
  Eigen::MatrixXd emb;     // n x d
  Eigen::MatrixXd logits;  // n x K
};

ForwardResult forward(const ModelState& state,
                      const std::vector<ImageTensor>& batch,
                      bool use_ema = false);

// Scalar loss of the two head outputs; fills the gradients with respect to
// them when the pointers are non-null.
using HeadLossFn =
    std::function<double(const Eigen::MatrixXd& emb, const Eigen::MatrixXd& logits,
                         Eigen::MatrixXd* d_emb, Eigen::MatrixXd* d_logits)>;

// Smallest distance of any relu pre-activation or pooling winner from its
// switching point over the batch. Finite-difference probes are only reliable
// when the probe step cannot cross this margin.
double kink_margin(const ModelState& state,
                   const std::vector<ImageTensor>& batch);

// Exact reverse-mode gradient of loss_fn(forward(batch)) with respect to the
// live parameters. Returns the loss value.
double gradients(const ModelState& state, const std::vector<ImageTensor>& batch,
                 const HeadLossFn& loss_fn, std::vector<double>* grad_out);

// Nesterov-momentum SGD with L2 weight decay added to the gradients.
void sgd_step(ModelState& state, const std::vector<double>& grads, double lr,
              double momentum, double weight_decay);

// ema <- decay * ema + (1 - decay) * live
void ema_update(ModelState& state, double decay);

void save_checkpoint(const ModelState& state, const std::string& path,
                     const std::string& run_config_text = "");
ModelState load_checkpoint(const std::string& path,
                           std::string* run_config_text = nullptr);

}  // namespace semco
