// Generates the bundled label-embedding fixtures: toy distributional
// embedding sources for the CIFAR vocabularies, a toy similarity graph, and
// the merged label-vector files produced by running the full pipeline
// (relation filter -> retrofit x2 -> SVD merge -> label resolution). The
// generated files are checked in so every test runs offline; rerun this tool
// only to regenerate them.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "semco/embedding.hpp"
#include "semco/error.hpp"
#include "semco/graph.hpp"
#include "semco/grouping.hpp"
#include "semco/reduce.hpp"
#include "semco/retrofit.hpp"
#include "semco/rng.hpp"

using namespace semco;

namespace {

const std::vector<std::string> kCifar10 = {
    "airplane", "automobile", "bird",  "cat",  "deer",
    "dog",      "frog",       "horse", "ship", "truck"};

const std::vector<std::string> kCifar100 = {
    "apple",      "aquarium_fish", "baby",        "bear",         "beaver",
    "bed",        "bee",           "beetle",      "bicycle",      "bottle",
    "bowl",       "boy",           "bridge",      "bus",          "butterfly",
    "camel",      "can",           "castle",      "caterpillar",  "cattle",
    "chair",      "chimpanzee",    "clock",       "cloud",        "cockroach",
    "couch",      "crab",          "crocodile",   "cup",          "dinosaur",
    "dolphin",    "elephant",      "flatfish",    "forest",       "fox",
    "girl",       "hamster",       "house",       "kangaroo",     "keyboard",
    "lamp",       "lawn_mower",    "leopard",     "lion",         "lizard",
    "lobster",    "man",           "maple_tree",  "motorcycle",   "mountain",
    "mouse",      "mushroom",      "oak_tree",    "orange",       "orchid",
    "otter",      "palm_tree",     "pear",        "pickup_truck", "pine_tree",
    "plain",      "plate",         "poppy",       "porcupine",    "possum",
    "rabbit",     "raccoon",       "ray",         "road",         "rocket",
    "rose",       "sea",           "seal",        "shark",        "shrew",
    "skunk",      "skyscraper",    "snail",       "snake",        "spider",
    "squirrel",   "streetcar",     "sunflower",   "sweet_pepper", "table",
    "tank",       "telephone",     "television",  "tiger",        "tractor",
    "train",      "trout",         "tulip",       "turtle",       "wardrobe",
    "whale",      "willow_tree",   "wolf",        "woman",        "worm"};

// Visually similar CIFAR-100 groups the fixtures must reproduce at eps 0.2.
const std::vector<std::vector<std::string>> kTargetGroups = {
    {"aquarium_fish", "flatfish", "trout"},
    {"bicycle", "motorcycle"},
    {"boy", "girl"},
    {"crab", "lobster"},
    {"dolphin", "whale"},
    {"man", "woman"},
    {"oak_tree", "pine_tree"},
};

const std::vector<std::string> kExtras = {
    "animal", "vehicle", "plant",   "machine", "furniture", "feline",
    "canine", "kitten",  "puppy",   "pickup",  "mat",       "water",
    "grass",  "sky",     "metal",   "wood",    "stone",     "fruit",
    "flower", "insect",  "reptile", "mammal",  "tool",      "building",
    "device", "garment", "liquid",  "mineral", "berry",     "melon"};

// Terms deliberately missing from one source to exercise the alignment path.
const std::set<std::string> kOnlyInGlove = {"berry", "melon", "mineral"};
const std::set<std::string> kOnlyInW2v = {"device", "garment"};

struct SourceSpec {
  std::vector<std::string> vocab;        // full term list
  std::map<std::string, int> group_of;   // term -> pair-group id, -1 if none
};

SourceSpec make_spec() {
  SourceSpec spec;
  std::set<std::string> seen;
  auto push = [&](const std::string& t) {
    if (seen.insert(t).second) spec.vocab.push_back(t);
  };
  for (const auto& t : kCifar100)
    if (t != "pickup_truck") push(t);  // resolved via its tokens instead
  for (const auto& t : kCifar10) push(t);
  for (const auto& t : kExtras) push(t);

  for (const auto& t : spec.vocab) spec.group_of[t] = -1;
  for (size_t g = 0; g < kTargetGroups.size(); ++g)
    for (const auto& t : kTargetGroups[g])
      spec.group_of[t] = static_cast<int>(g);
  return spec;
}

// Cone construction: every term shares a common direction, pair-group members
// additionally share a group direction, the remainder is term-specific.
EmbeddingMatrix make_source(const SourceSpec& spec, int dim, uint64_t seed,
                            const std::set<std::string>& skip) {
  Rng rng(seed);
  auto unit = [&](Eigen::VectorXd& v) {
    for (int i = 0; i < v.size(); ++i) v(i) = rng.normal();
    v /= v.norm();
  };
  Eigen::VectorXd common(dim);
  unit(common);
  std::vector<Eigen::VectorXd> group_dirs(kTargetGroups.size(),
                                          Eigen::VectorXd(dim));
  for (auto& g : group_dirs) unit(g);

  const double a = std::sqrt(0.45);
  const double b = std::sqrt(0.42), e_pair = std::sqrt(0.13);
  const double e_single = std::sqrt(0.55);

  EmbeddingMatrix emb;
  std::vector<Eigen::VectorXd> rows;
  for (const auto& term : spec.vocab) {
    if (skip.count(term)) continue;
    Eigen::VectorXd u(dim), jitter(dim);
    unit(u);
    unit(jitter);
    const int g = spec.group_of.at(term);
    Eigen::VectorXd v =
        g >= 0 ? (a * common + b * group_dirs[g] + e_pair * u).eval()
               : (a * common + e_single * u).eval();
    v += 0.02 * jitter;
    v /= v.norm();
    emb.vocab.push_back(term);
    rows.push_back(v);
  }
  emb.vectors.resize(static_cast<int>(rows.size()), dim);
  for (size_t i = 0; i < rows.size(); ++i)
    emb.vectors.row(static_cast<int>(i)) = rows[i].transpose();
  emb.rebuild_index();
  return emb;
}

void write_graph(const std::string& path) {
  std::ofstream out(path);
  out << "# toy similarity graph for the fixture vocabulary\n";
  // pair-group edges with whitelisted relations
  out << "SimilarTo\taquarium_fish\tflatfish\t1.5\n";
  out << "SimilarTo\tflatfish\ttrout\t1.5\n";
  out << "IsA\taquarium_fish\ttrout\t1.0\n";
  out << "SimilarTo\tbicycle\tmotorcycle\t1.8\n";
  out << "SimilarTo\tboy\tgirl\t1.6\n";
  out << "SimilarTo\tcrab\tlobster\t1.7\n";
  out << "SimilarTo\tdolphin\twhale\t1.6\n";
  out << "SimilarTo\tman\twoman\t1.6\n";
  out << "SimilarTo\toak_tree\tpine_tree\t1.8\n";
  // out-of-vocabulary term joins through its neighbor
  out << "Synonym\tvelocipede\tbicycle\t2.0\n";
  // relations outside the whitelist; dropped by the filter
  out << "AtLocation\tcat\tmat\t2.4\n";
  out << "AtLocation\ttrout\twater\t1.2\n";
  out << "UsedFor\tbicycle\tgrass\t0.8\n";
  out << "HasA\thouse\ttelevision\t1.1\n";
  out << "Antonym\tman\twoman\t2.1\n";
}

void write_labels(const std::vector<std::string>& labels,
                  const std::string& path) {
  std::ofstream out(path);
  for (const auto& l : labels) out << l << "\n";
}

void write_tiny_fixtures(const std::string& dir) {
  std::ofstream emb(dir + "/tiny_embeddings.txt");
  emb << "5 4\n";  // header line, tolerated by the loader
  emb << "cat 0.9 0.1 0.0 0.2\n";
  emb << "dog 0.8 0.3 0.1 0.0\n";
  emb << "pickup 0.1 0.9 0.2 0.1\n";
  emb << "truck 0.0 0.8 0.4 0.1\n";
  emb << "automobile 0.1 0.7 0.5 0.3\n";
  std::ofstream graph(dir + "/tiny_graph.tsv");
  graph << "SimilarTo\tcat\tdog\t1.0\n";
  graph << "SimilarTo\tpickup\ttruck\t1.5\n";
  graph << "AtLocation\tcat\tmat\n";
}

std::set<std::vector<std::string>> grouping_as_names(
    const LabelGrouping& grouping, const std::vector<std::string>& labels,
    bool multi_only) {
  std::set<std::vector<std::string>> out;
  for (const auto& g : grouping.groups()) {
    if (multi_only && g.size() < 2) continue;
    std::vector<std::string> names;
    for (int idx : g) names.push_back(labels[idx]);
    std::sort(names.begin(), names.end());
    out.insert(names);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "fixtures";
  std::filesystem::create_directories(dir);

  const SourceSpec spec = make_spec();
  EmbeddingMatrix glove = make_source(spec, 96, 2001, kOnlyInW2v);
  EmbeddingMatrix w2v = make_source(spec, 64, 4242, kOnlyInGlove);
  save_embedding_file(glove, dir + "/toy_glove.txt");
  save_embedding_file(w2v, dir + "/toy_w2v.txt");
  write_graph(dir + "/toy_graph.tsv");
  write_labels(kCifar10, dir + "/cifar10_labels.txt");
  write_labels(kCifar100, dir + "/cifar100_labels.txt");
  write_tiny_fixtures(dir);

  // run the pipeline exactly as the CLI does, from the written files
  EmbeddingMatrix glove_in = load_embedding_file(dir + "/toy_glove.txt");
  EmbeddingMatrix w2v_in = load_embedding_file(dir + "/toy_w2v.txt");
  KnowledgeGraph graph = load_graph_file(dir + "/toy_graph.tsv");
  KnowledgeGraph filtered = filter_graph(graph, similarity_relations());
  EmbeddingMatrix merged =
      merge_embeddings(retrofit(glove_in, filtered), retrofit(w2v_in, filtered),
                       128);
  std::printf("merged space: %d terms x %d dims\n", merged.size(), merged.dim());

  EmbeddingMatrix m100 = build_label_matrix(merged, kCifar100);
  EmbeddingMatrix m10 = build_label_matrix(merged, kCifar10);
  save_embedding_file(m100, dir + "/cifar100_label_vecs.txt");
  save_embedding_file(m10, dir + "/cifar10_label_vecs.txt");

  // verify the shipped fixtures reproduce the expected structure
  int failures = 0;
  {
    EmbeddingMatrix check = load_embedding_file(dir + "/cifar100_label_vecs.txt");
    LabelGrouping g02 = group_labels(check.vectors, 0.2);
    std::set<std::vector<std::string>> expect;
    for (const auto& grp : kTargetGroups) {
      std::vector<std::string> sorted = grp;
      std::sort(sorted.begin(), sorted.end());
      expect.insert(sorted);
    }
    const auto got = grouping_as_names(g02, kCifar100, true);
    if (got != expect) {
      ++failures;
      std::printf("FAIL: cifar100 multi-member groups at eps 0.2:\n");
      for (const auto& grp : got) {
        std::printf("  {");
        for (const auto& t : grp) std::printf(" %s", t.c_str());
        std::printf(" }\n");
      }
    } else {
      std::printf("ok: cifar100 eps 0.2 gives exactly the %zu expected pairs "
                  "(+ %d singletons)\n",
                  expect.size(), g02.num_groups - static_cast<int>(expect.size()));
    }
    LabelGrouping g075 = group_labels(check.vectors, 0.75);
    if (g075.num_groups != 1) {
      ++failures;
      std::printf("FAIL: cifar100 eps 0.75 gives %d groups, want 1\n",
                  g075.num_groups);
    } else {
      std::printf("ok: cifar100 eps 0.75 gives a single group\n");
    }
  }
  {
    EmbeddingMatrix check = load_embedding_file(dir + "/cifar10_label_vecs.txt");
    LabelGrouping g = group_labels(check.vectors, 0.2);
    if (g.num_groups != 10) {
      ++failures;
      std::printf("FAIL: cifar10 eps 0.2 gives %d groups, want 10 singletons\n",
                  g.num_groups);
    } else {
      std::printf("ok: cifar10 eps 0.2 gives 10 singleton groups\n");
    }
  }
  if (failures) {
    std::printf("%d fixture checks failed\n", failures);
    return 1;
  }
  std::printf("fixtures written to %s\n", dir.c_str());
  return 0;
}
