#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "semco/image.hpp"

namespace semco {

// In-memory image classification dataset. Pixels are stored as uint8 in
// planar channel-major rows and converted to [0,1] doubles on access.
struct Dataset {
  int height = 0;
  int width = 0;
  int channels = 0;
  int num_classes = 0;
  std::vector<std::string> class_names;

  std::vector<uint8_t> train_pixels;
  std::vector<int> train_labels;
  std::vector<uint8_t> test_pixels;
  std::vector<int> test_labels;

  size_t train_size() const { return train_labels.size(); }
  size_t test_size() const { return test_labels.size(); }
  size_t image_bytes() const {
    return static_cast<size_t>(height) * width * channels;
  }
  ImageTensor train_image(size_t i) const;
  ImageTensor test_image(size_t i) const;
};

// CIFAR binary batches: one leading label byte (two for the 100-class set,
// the fine label second) followed by 3072 planar RGB bytes per row.
Dataset load_cifar10(const std::string& dir);
Dataset load_cifar100(const std::string& dir);

// Directory of raw tensors: <dir>/<class>/<file>.bin, each file exactly
// height*width*channels bytes, planar channel-major. Class names are the
// subdirectory names, sorted; all images land in the train split.
Dataset load_raw_dir(const std::string& dir, int height, int width,
                     int channels);

// Built-in 8-class task: four pairs of visually similar classes (shared
// shape, subtly different color), used for desk-scale experiments.
struct SynthConfig {
  int train_per_class = 254;
  int test_per_class = 25;
  int size = 16;
  uint64_t seed = 7;
  double color_delta = 0.0;  // extra within-pair color separation
  double fg_noise = 0.16;    // foreground pixel noise sigma
  double bg_level = 0.25;    // background uniform noise ceiling
};
Dataset make_synthetic(const SynthConfig& cfg);
const std::vector<std::string>& synthetic_class_names();

// Label embeddings matching the synthetic task: pair members share most of
// their direction (cosine 0.85), distinct pairs overlap weakly (0.40).
Eigen::MatrixXd synthetic_label_matrix(int emb_dim = 16);

struct Splits {
  std::vector<int> labeled;
  std::vector<int> unlabeled;
};

// Stratified labeled/unlabeled split of the train set: exactly n_labeled/K
// per class, chosen uniformly under the seed. n_labeled must divide evenly.
Splits make_splits(const Dataset& ds, int n_labeled, uint64_t seed);

}  // namespace semco
