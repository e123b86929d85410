#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "semco/config.hpp"
#include "semco/embedding.hpp"
#include "semco/error.hpp"
#include "semco/graph.hpp"
#include "semco/grouping.hpp"
#include "semco/reduce.hpp"
#include "semco/retrofit.hpp"
#include "semco/trainer.hpp"

using namespace semco;

namespace {

// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::vector<std::string> read_label_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open label file: " + path);
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (!line.empty()) labels.push_back(line);
  }
  if (labels.empty()) throw data_error("empty label file: " + path);
  return labels;
}

int cmd_build_embeddings(const std::string& glove_path,
                         const std::string& w2v_path,
                         const std::string& graph_path,
                         const std::vector<std::string>& relations, int dim,
                         const std::string& out_path) {
  EmbeddingMatrix glove = load_embedding_file(glove_path);
  EmbeddingMatrix w2v = load_embedding_file(w2v_path);
  KnowledgeGraph graph = load_graph_file(graph_path);

  std::set<std::string> whitelist(relations.begin(), relations.end());
  KnowledgeGraph filtered = filter_graph(graph, whitelist);
  std::fprintf(stderr, "graph: %zu edges, %zu after relation filter\n",
               graph.edges.size(), filtered.edges.size());

  RetrofitConfig rc;
  EmbeddingMatrix glove_retro = retrofit(glove, filtered, rc);
  EmbeddingMatrix w2v_retro = retrofit(w2v, filtered, rc);
  EmbeddingMatrix merged = merge_embeddings(glove_retro, w2v_retro, dim);
  save_embedding_file(merged, out_path);
  std::printf("wrote %d terms x %d dims to %s\n", merged.size(), merged.dim(),
              out_path.c_str());
  return 0;
}

int cmd_group(const std::string& emb_path, const std::string& labels_path,
              double eps) {
  EmbeddingMatrix emb = load_embedding_file(emb_path);
  std::vector<std::string> labels = read_label_file(labels_path);
  EmbeddingMatrix m = build_label_matrix(emb, labels);
  LabelGrouping grouping = group_labels(m.vectors, eps);

  // multi-member groups first, members sorted, deterministic order
  std::vector<std::vector<std::string>> named;
  for (const auto& g : grouping.groups()) {
    std::vector<std::string> members;
    for (int idx : g) members.push_back(labels[idx]);
    std::sort(members.begin(), members.end());
    named.push_back(std::move(members));
  }
  std::stable_sort(named.begin(), named.end(),
                   [](const auto& a, const auto& b) {
                     if ((a.size() > 1) != (b.size() > 1)) return a.size() > 1;
                     return a.front() < b.front();
                   });
  nlohmann::json out;
  out["eps"] = eps;
  out["num_groups"] = grouping.num_groups;
  out["groups"] = named;
  std::cout << out.dump(2) << "\n";
  return 0;
}

RunConfig config_with_overrides(const std::string& config_path,
                                const std::vector<std::string>& overrides) {
  RunConfig cfg =
      config_path.empty() ? RunConfig{} : load_config_file(config_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw data_error("override must be key=value, got '" + kv + "'");
    set_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

int cmd_train(const RunConfig& cfg) {
  Dataset ds = dataset_from_config(cfg);
  Eigen::MatrixXd m = label_matrix_from_config(cfg, ds);
  Trainer trainer(cfg, std::move(ds), m);
  std::fprintf(stderr,
               "K=%d classes in %d groups, %zu labeled / %zu unlabeled\n",
               trainer.dataset().num_classes, trainer.grouping().num_groups,
               trainer.splits().labeled.size(),
               trainer.splits().unlabeled.size());
  TrainResult result = trainer.run(true);
  std::printf("final test error %.4f after %d epochs; outputs in %s\n",
              result.final_test_error, cfg.epochs, cfg.out_dir.c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data,
             const std::string& embeddings_override) {
  std::string cfg_text;
  ModelState state = load_checkpoint(checkpoint_path, &cfg_text);

  RunConfig cfg;
  std::istringstream ss(cfg_text);
  std::string line;
  while (std::getline(ss, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    set_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  if (!data.empty()) cfg.data_dir = data;
  if (!embeddings_override.empty()) cfg.embeddings = embeddings_override;

  Dataset ds = dataset_from_config(cfg);
  if (ds.test_size() == 0) {
    // directory datasets carry everything in the train split
    ds.test_pixels = ds.train_pixels;
    ds.test_labels = ds.train_labels;
  }
  const double err = evaluate(state, ds);
  std::printf("error_rate %.6f over %zu samples\n", err, ds.test_size());
  return 0;
}

int cmd_stats(const std::string& metrics_path,
              const std::vector<std::string>& classes) {
  std::vector<MetricsRow> rows = read_metrics_csv(metrics_path);
  const std::set<std::string> wanted(classes.begin(), classes.end());

  // epoch -> class -> (metric -> value)
  std::map<int, std::map<std::string, std::map<std::string, double>>> table;
  for (const auto& r : rows) {
    if (r.cls.empty()) continue;
    if (!wanted.empty() && !wanted.count(r.cls)) continue;
    if (r.metric.rfind("pl_", 0) != 0) continue;
    table[r.epoch][r.cls][r.metric] = r.value;
  }
  std::printf("%-6s %-16s %10s %10s %10s %10s\n", "epoch", "class", "acc_sc",
              "ratio_sc", "acc_oh", "ratio_oh");
  for (const auto& [epoch, by_class] : table) {
    for (const auto& [cls, metrics] : by_class) {
      auto cell = [&](const char* name) {
        auto it = metrics.find(name);
        if (it == metrics.end()) return std::string("-");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", it->second);
        return std::string(buf);
      };
      std::printf("%-6d %-16s %10s %10s %10s %10s\n", epoch, cls.c_str(),
                  cell("pl_acc_sc").c_str(), cell("pl_ratio_sc").c_str(),
                  cell("pl_acc_oh").c_str(), cell("pl_ratio_oh").c_str());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "semco: semi-supervised image classification with label-semantics-aware"
      " pseudo-labeling and co-trained semantic/one-hot heads"};
  app.require_subcommand(1);

  auto* build = app.add_subcommand(
      "build-embeddings",
      "Filter a knowledge graph, retrofit two word-embedding sets and merge "
      "them into one label-embedding space");
  std::string glove_path, w2v_path, graph_path, out_path = "embeddings.txt";
  std::vector<std::string> relations(similarity_relations().begin(),
                                     similarity_relations().end());
  int dim = 128;
  build->add_option("--glove", glove_path, "first embedding file")->required();
  build->add_option("--w2v", w2v_path, "second embedding file")->required();
  build->add_option("--graph", graph_path, "knowledge graph TSV")->required();
  build->add_option("--relations", relations,
                    "relation whitelist (default: the similarity relations)");
  build->add_option("--dim", dim, "merged dimensionality (default 128)");
  build->add_option("--out", out_path, "output embedding file");

  auto* group = app.add_subcommand(
      "group", "Cluster class labels into visually similar groups");
  std::string emb_path, labels_path;
  double eps = 0.2;
  group->add_option("--embeddings", emb_path, "embedding file")->required();
  group->add_option("--labels", labels_path, "one class label per line")
      ->required();
  group->add_option("--eps", eps,
                    "cosine-distance neighborhood radius (default 0.2)");

  auto* train = app.add_subcommand("train", "Run semi-supervised training");
  std::string config_path;
  std::vector<std::string> overrides;
  train->add_option("--config", config_path, "key = value config file");
  train->add_option("--set", overrides,
                    "config override as key=value (repeatable)");
  {
    // every config key becomes a documented --key flag overriding the file
    RunConfig defaults;
    for (const auto& [key, value] : config_items(defaults))
      train->add_option_function<std::string>(
          "--" + key,
          [key, &overrides](const std::string& v) {
            overrides.push_back(key + "=" + v);
          },
          "config key (default " + (value.empty() ? "empty" : value) + ")");
  }

  auto* eval_cmd = app.add_subcommand(
      "eval", "Evaluate a checkpoint with its EMA parameters");
  std::string checkpoint_path, data_path, eval_embeddings;
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint.json")
      ->required();
  eval_cmd->add_option("--data", data_path,
                       "dataset directory override (defaults to the "
                       "checkpoint's data_dir)");
  eval_cmd->add_option("--embeddings", eval_embeddings,
                       "label embedding file override");

  auto* stats = app.add_subcommand(
      "stats",
      "Per-class pseudo-labeling accuracy/ratio table from a metrics CSV");
  std::string metrics_path;
  std::vector<std::string> stat_classes;
  stats->add_option("--metrics", metrics_path, "metrics.csv path")->required();
  stats->add_option("--classes", stat_classes, "restrict to these class names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (build->parsed())
      return cmd_build_embeddings(glove_path, w2v_path, graph_path, relations,
                                  dim, out_path);
    if (group->parsed()) return cmd_group(emb_path, labels_path, eps);
    if (train->parsed())
      return cmd_train(config_with_overrides(config_path, overrides));
    if (eval_cmd->parsed())
      return cmd_eval(checkpoint_path, data_path, eval_embeddings);
    if (stats->parsed()) return cmd_stats(metrics_path, stat_classes);
  } catch (const data_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
