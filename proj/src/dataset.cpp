#include "semco/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "semco/error.hpp"
#include "semco/rng.hpp"

namespace fs = std::filesystem;

namespace semco {

namespace {

const std::vector<std::string> kCifar10Names = {
    "airplane", "automobile", "bird",  "cat",  "deer",
    "dog",      "frog",       "horse", "ship", "truck"};

const std::vector<std::string> kCifar100Names = {
    "apple",      "aquarium_fish", "baby",         "bear",       "beaver",
    "bed",        "bee",           "beetle",       "bicycle",    "bottle",
    "bowl",       "boy",           "bridge",       "bus",        "butterfly",
    "camel",      "can",           "castle",       "caterpillar", "cattle",
    "chair",      "chimpanzee",    "clock",        "cloud",      "cockroach",
    "couch",      "crab",          "crocodile",    "cup",        "dinosaur",
    "dolphin",    "elephant",      "flatfish",     "forest",     "fox",
    "girl",       "hamster",       "house",        "kangaroo",   "keyboard",
    "lamp",       "lawn_mower",    "leopard",      "lion",       "lizard",
    "lobster",    "man",           "maple_tree",   "motorcycle", "mountain",
    "mouse",      "mushroom",      "oak_tree",     "orange",     "orchid",
    "otter",      "palm_tree",     "pear",         "pickup_truck", "pine_tree",
    "plain",      "plate",         "poppy",        "porcupine",  "possum",
    "rabbit",     "raccoon",       "ray",          "road",       "rocket",
    "rose",       "sea",           "seal",         "shark",      "shrew",
    "skunk",      "skyscraper",    "snail",        "snake",      "spider",
    "squirrel",   "streetcar",     "sunflower",    "sweet_pepper", "table",
    "tank",       "telephone",     "television",   "tiger",      "tractor",
    "train",      "trout",         "tulip",        "turtle",     "wardrobe",
    "whale",      "willow_tree",   "wolf",         "woman",      "worm"};

ImageTensor to_tensor(const std::vector<uint8_t>& pixels, size_t index,
                      int c, int h, int w) {
  ImageTensor img(c, h, w, static_cast<int64_t>(index));
  const size_t bytes = static_cast<size_t>(c) * h * w;
  const uint8_t* src = pixels.data() + index * bytes;
  for (size_t i = 0; i < bytes; ++i) img.data[i] = src[i] / 255.0;
  return img;
}

void read_cifar_file(const std::string& path, int label_bytes,
                     std::vector<uint8_t>* pixels, std::vector<int>* labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open dataset file: " + path);
  const size_t row = static_cast<size_t>(label_bytes) + 3072;
  std::vector<char> buf(row);
  while (in.read(buf.data(), static_cast<std::streamsize>(row))) {
    // fine label is the last label byte
    labels->push_back(static_cast<uint8_t>(buf[label_bytes - 1]));
    pixels->insert(pixels->end(), buf.begin() + label_bytes, buf.end());
  }
  if (in.gcount() != 0)
    throw data_error(path + ": truncated row (" + std::to_string(in.gcount()) +
                     " trailing bytes)");
}

}  // namespace

ImageTensor Dataset::train_image(size_t i) const {
  return to_tensor(train_pixels, i, channels, height, width);
}

ImageTensor Dataset::test_image(size_t i) const {
  return to_tensor(test_pixels, i, channels, height, width);
}

Dataset load_cifar10(const std::string& dir) {
  Dataset ds;
  ds.height = ds.width = 32;
  ds.channels = 3;
  ds.num_classes = 10;
  ds.class_names = kCifar10Names;
  bool any = false;
  for (int b = 1; b <= 5; ++b) {
    const std::string path = dir + "/data_batch_" + std::to_string(b) + ".bin";
    if (fs::exists(path)) {
      read_cifar_file(path, 1, &ds.train_pixels, &ds.train_labels);
      any = true;
    }
  }
  if (!any) throw data_error("no data_batch_*.bin files under " + dir);
  const std::string test = dir + "/test_batch.bin";
  if (fs::exists(test)) read_cifar_file(test, 1, &ds.test_pixels, &ds.test_labels);
  return ds;
}

Dataset load_cifar100(const std::string& dir) {
  Dataset ds;
  ds.height = ds.width = 32;
  ds.channels = 3;
  ds.num_classes = 100;
  ds.class_names = kCifar100Names;
  const std::string train = dir + "/train.bin";
  if (!fs::exists(train)) throw data_error("missing " + train);
  read_cifar_file(train, 2, &ds.train_pixels, &ds.train_labels);
  const std::string test = dir + "/test.bin";
  if (fs::exists(test)) read_cifar_file(test, 2, &ds.test_pixels, &ds.test_labels);
  return ds;
}

Dataset load_raw_dir(const std::string& dir, int height, int width,
                     int channels) {
  if (!fs::is_directory(dir)) throw data_error("not a directory: " + dir);
  Dataset ds;
  ds.height = height;
  ds.width = width;
  ds.channels = channels;
  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory()) classes.push_back(entry.path().filename());
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw data_error("no class subdirectories in " + dir);
  ds.num_classes = static_cast<int>(classes.size());
  ds.class_names = classes;
  const size_t bytes = ds.image_bytes();
  for (int label = 0; label < ds.num_classes; ++label) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir + "/" + classes[label]))
      if (entry.is_regular_file()) files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f, std::ios::binary);
      std::vector<char> buf(bytes);
      if (!in.read(buf.data(), static_cast<std::streamsize>(bytes)) ||
          in.peek() != EOF)
        throw data_error(f + ": expected exactly " + std::to_string(bytes) +
                         " bytes");
      ds.train_pixels.insert(ds.train_pixels.end(), buf.begin(), buf.end());
      ds.train_labels.push_back(label);
    }
  }
  if (ds.train_labels.empty()) throw data_error("no images under " + dir);
  return ds;
}

const std::vector<std::string>& synthetic_class_names() {
  static const std::vector<std::string> names = {
      "vbar_red",  "vbar_orange",  "hbar_green",   "hbar_lime",
      "disc_blue", "disc_cyan",    "check_yellow", "check_cream"};
  return names;
}

namespace {

// Base colors per pair; the second member shifts one channel by color_delta.
const double kSynthBase[4][3] = {
    {0.90, 0.25, 0.25},  // vertical bar
    {0.25, 0.90, 0.25},  // horizontal bar
    {0.25, 0.30, 0.90},  // disc
    {0.85, 0.85, 0.30},  // checkerboard
};
const int kSynthDeltaChannel[4] = {1, 0, 1, 2};

// Pair members share the shape family and color; they differ in a subtle
// geometric attribute that survives the photometric strong transforms.
bool synth_foreground(int cls, int y, int x, int size, int dy, int dx) {
  const int pair = cls / 2;
  const bool second = cls % 2 == 1;
  const int cy = size / 2 + dy, cx = size / 2 + dx;
  switch (pair) {
    case 0: {  // vertical bar, thin vs wide
      const int lo = second ? cx - 3 : cx - 1;
      const int hi = second ? cx + 2 : cx + 1;
      return x >= lo && x <= hi;
    }
    case 1: {  // horizontal bar, thin vs wide
      const int lo = second ? cy - 3 : cy - 1;
      const int hi = second ? cy + 2 : cy + 1;
      return y >= lo && y <= hi;
    }
    case 2: {  // filled disc vs ring with a wide hole
      const int r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
      const int outer = size * 5 / 16;
      if (r2 > outer * outer) return false;
      if (!second) return true;
      const int inner = size * 2 / 16;
      return r2 > inner * inner;
    }
    default: {  // checkerboard, coarse vs fine tiles
      const int tile = std::max(1, second ? size / 8 : size / 4);
      return (((y + dy + 4 * size) / tile) + ((x + dx + 4 * size) / tile)) % 2 ==
             0;
    }
  }
}

void render_synthetic(int cls, const SynthConfig& cfg, Rng& rng,
                      std::vector<uint8_t>* out) {
  const int size = cfg.size;
  const int pair = cls / 2;
  const int dy = rng.uniform_int(5) - 2;
  const int dx = rng.uniform_int(5) - 2;
  double color[3] = {kSynthBase[pair][0], kSynthBase[pair][1],
                     kSynthBase[pair][2]};
  if (cls % 2 == 1) color[kSynthDeltaChannel[pair]] += cfg.color_delta;
  for (double& c : color) c = std::min(1.0, c);
  std::vector<double> img(static_cast<size_t>(3) * size * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const bool fg = synth_foreground(cls, y, x, size, dy, dx);
      for (int c = 0; c < 3; ++c) {
        double v = fg ? color[c] + cfg.fg_noise * rng.normal()
                      : rng.uniform(0.0, cfg.bg_level);
        img[(static_cast<size_t>(c) * size + y) * size + x] =
            std::min(1.0, std::max(0.0, v));
      }
    }
  for (double v : img)
    out->push_back(static_cast<uint8_t>(std::lround(v * 255.0)));
}

}  // namespace

Dataset make_synthetic(const SynthConfig& cfg) {
  if (cfg.size % 4 != 0) throw data_error("synthetic size must be divisible by 4");
  Dataset ds;
  ds.height = ds.width = cfg.size;
  ds.channels = 3;
  ds.num_classes = 8;
  ds.class_names = synthetic_class_names();
  Rng train_rng(mix_seed(cfg.seed, "synthetic-train"));
  Rng test_rng(mix_seed(cfg.seed, "synthetic-test"));
  for (int i = 0; i < cfg.train_per_class; ++i)
    for (int cls = 0; cls < 8; ++cls) {
      render_synthetic(cls, cfg, train_rng, &ds.train_pixels);
      ds.train_labels.push_back(cls);
    }
  for (int i = 0; i < cfg.test_per_class; ++i)
    for (int cls = 0; cls < 8; ++cls) {
      render_synthetic(cls, cfg, test_rng, &ds.test_pixels);
      ds.test_labels.push_back(cls);
    }
  return ds;
}

Eigen::MatrixXd synthetic_label_matrix(int emb_dim) {
  if (emb_dim < 13)
    throw data_error("synthetic label matrix needs emb_dim >= 13");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(8, emb_dim);
  const double a = std::sqrt(0.40);   // shared by all classes
  const double b = std::sqrt(0.45);   // shared within a pair
  const double e = std::sqrt(0.15);   // unique
  for (int k = 0; k < 8; ++k) {
    m(k, 0) = a;
    m(k, 1 + k / 2) = b;
    m(k, 5 + k) = e;
  }
  return m;
}

Splits make_splits(const Dataset& ds, int n_labeled, uint64_t seed) {
  const int k = ds.num_classes;
  if (k < 1 || ds.train_size() == 0) throw data_error("empty dataset");
  if (n_labeled < k || n_labeled % k != 0)
    throw data_error("n_labeled must be a positive multiple of the class count");
  if (static_cast<size_t>(n_labeled) > ds.train_size())
    throw data_error("n_labeled exceeds the train set size");
  const int per_class = n_labeled / k;

  std::vector<std::vector<int>> by_class(k);
  for (size_t i = 0; i < ds.train_size(); ++i)
    by_class[ds.train_labels[i]].push_back(static_cast<int>(i));

  std::vector<char> is_labeled(ds.train_size(), 0);
  for (int c = 0; c < k; ++c) {
    auto& pool = by_class[c];
    if (static_cast<int>(pool.size()) < per_class)
      throw data_error("class '" + ds.class_names[c] + "' has only " +
                       std::to_string(pool.size()) + " samples, need " +
                       std::to_string(per_class));
    Rng rng(mix_seed(seed, "split", static_cast<uint64_t>(c)));
    for (size_t i = pool.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int>(i + 1)));
      std::swap(pool[i], pool[j]);
    }
    for (int i = 0; i < per_class; ++i) is_labeled[pool[i]] = 1;
  }

  Splits s;
  for (size_t i = 0; i < ds.train_size(); ++i)
    (is_labeled[i] ? s.labeled : s.unlabeled).push_back(static_cast<int>(i));
  return s;
}

}  // namespace semco
