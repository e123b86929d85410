#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace semco {

// Flat run configuration. File format is `key = value` lines with `#`
// comments; CLI flags override file values.
struct RunConfig {
  int n_labeled = 250;
  int mu = 3;
  int batch_size = 64;
  int epochs = 300;
  int steps_per_epoch = 1024;
  double lr_max = 0.03;
  int warmup_epochs = 10;
  double momentum = 0.90;
  double weight_decay = 5e-4;
  double ema_decay = 0.999;
  double tau_e = 0.70;
  double tau_o = 0.95;
  double lambda_u = 1.0;
  double lambda_co = 1.0;
  double sc_scale = 3.0;
  double eps = 0.20;
  double temp = 0.10;
  uint64_t seed = 1;

  std::string dataset = "synthetic";  // synthetic | cifar10 | cifar100 | rawdir
  std::string data_dir;
  std::string embeddings;  // label-vector file; empty + synthetic = built-in
  std::string out_dir = "run_out";

  std::string backbone = "conv";
  int conv1_channels = 8;
  int conv2_channels = 16;
  int hidden = 64;
  int emb_dim = 128;  // dimension of the built-in synthetic label matrix

  int n_ops = 2;
  int magnitude = 10;
  bool cutout = false;

  int img_height = 32;  // rawdir datasets only
  int img_width = 32;
  int img_channels = 3;

  int synth_train_per_class = 254;
  int synth_test_per_class = 25;
  int synth_size = 16;
  double synth_color_delta = 0.0;
  double synth_fg_noise = 0.16;
  double synth_bg_level = 0.25;
};

// Assigns one key; unknown keys or unparsable values raise data_error.
void set_config_key(RunConfig& cfg, const std::string& key,
                    const std::string& value);

RunConfig load_config_file(const std::string& path);

// All keys with current values, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_items(
    const RunConfig& cfg);

std::string config_to_string(const RunConfig& cfg);

uint64_t config_hash(const RunConfig& cfg);

}  // namespace semco
