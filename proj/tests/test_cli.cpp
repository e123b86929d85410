#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "semco/embedding.hpp"

#ifndef SEMCO_BIN
#define SEMCO_BIN "semco"
#endif
#ifndef SEMCO_FIXTURES
#define SEMCO_FIXTURES "fixtures"
#endif

namespace {

struct CmdResult {
  int exit_code;
  std::string out;
};

CmdResult run_cli(const std::string& args) {
  const std::string out_path =
      (std::filesystem::temp_directory_path() / "semco_cli_out.txt").string();
  const std::string cmd =
      std::string(SEMCO_BIN) + " " + args + " > " + out_path + " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  std::ifstream in(out_path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::remove(out_path.c_str());
  return {WEXITSTATUS(rc), text};
}

std::string fixture(const std::string& name) {
  return std::string(SEMCO_FIXTURES) + "/" + name;
}

}  // namespace

TEST_CASE("cli usage errors exit with code 1") {
  CHECK(run_cli("").exit_code == 1);
  CHECK(run_cli("no-such-command").exit_code == 1);
  CHECK(run_cli("group --embeddings x").exit_code == 1);  // missing --labels
  CHECK(run_cli("train --set epochs").exit_code == 2);    // malformed override
}

TEST_CASE("cli --help lists subcommands and config keys") {
  CmdResult help = run_cli("--help");
  CHECK(help.exit_code == 0);
  for (const char* want : {"build-embeddings", "group", "train", "eval", "stats"})
    CHECK(help.out.find(want) != std::string::npos);
  CmdResult thelp = run_cli("train --help");
  for (const char* key : {"--tau_e", "--tau_o", "--lambda_u", "--mu",
                          "--ema_decay", "--eps", "--sc_scale"})
    CHECK(thelp.out.find(key) != std::string::npos);
  // table defaults surface in the help text
  CHECK(thelp.out.find("0.7") != std::string::npos);
  CHECK(thelp.out.find("0.95") != std::string::npos);
}

TEST_CASE("cli missing input file names the path and exits 2") {
  const std::string out =
      (std::filesystem::temp_directory_path() / "semco_cli_e.txt").string();
  const std::string cmd = std::string(SEMCO_BIN) +
                          " build-embeddings --glove /nonexistent/g.txt"
                          " --w2v /nonexistent/w.txt --graph /nonexistent/k.tsv"
                          " 2> " +
                          out;
  const int rc = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 2);
  std::ifstream in(out);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("/nonexistent/g.txt") != std::string::npos);
  std::remove(out.c_str());
}

TEST_CASE("cli build-embeddings output is loadable and resolvable") {
  const std::string out =
      (std::filesystem::temp_directory_path() / "semco_cli_emb.txt").string();
  CmdResult r = run_cli("build-embeddings --glove " + fixture("tiny_embeddings.txt") +
                        " --w2v " + fixture("tiny_embeddings.txt") +
                        " --graph " + fixture("tiny_graph.tsv") +
                        " --dim 4 --out " + out);
  REQUIRE(r.exit_code == 0);
  semco::EmbeddingMatrix emb = semco::load_embedding_file(out);
  CHECK(emb.dim() == 4);
  CHECK(emb.contains("cat"));
  // the tiny graph links pickup and truck, so pickup_truck resolves
  CHECK(semco::lookup_label(emb, "pickup_truck").size() == 4);
  std::remove(out.c_str());
}

TEST_CASE("cli group reproduces the fixture pairs and eps extremes") {
  CmdResult r = run_cli("group --embeddings " + fixture("cifar100_label_vecs.txt") +
                        " --labels " + fixture("cifar100_labels.txt") +
                        " --eps 0.2");
  REQUIRE(r.exit_code == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j["eps"] == 0.2);
  auto has_group = [&](std::vector<std::string> want) {
    for (const auto& g : j["groups"])
      if (g.get<std::vector<std::string>>() == want) return true;
    return false;
  };
  CHECK(has_group({"boy", "girl"}));
  CHECK(has_group({"bicycle", "motorcycle"}));
  CHECK(has_group({"man", "woman"}));
  CHECK(has_group({"oak_tree", "pine_tree"}));
  // multi-member groups lead the listing
  CHECK(j["groups"][0].size() > 1);

  CmdResult zero = run_cli("group --embeddings " + fixture("cifar100_label_vecs.txt") +
                           " --labels " + fixture("cifar100_labels.txt") +
                           " --eps 0");
  nlohmann::json jz = nlohmann::json::parse(zero.out);
  CHECK(jz["num_groups"] == 100);

  CmdResult one = run_cli("group --embeddings " + fixture("cifar100_label_vecs.txt") +
                          " --labels " + fixture("cifar100_labels.txt") +
                          " --eps 0.75");
  nlohmann::json jo = nlohmann::json::parse(one.out);
  CHECK(jo["num_groups"] == 1);
}

TEST_CASE("cli group rejects unresolvable labels naming them") {
  const std::string labels =
      (std::filesystem::temp_directory_path() / "semco_cli_labels.txt").string();
  {
    std::ofstream out(labels);
    out << "cat\nzzqx\n";
  }
  const std::string err =
      (std::filesystem::temp_directory_path() / "semco_cli_err.txt").string();
  const std::string cmd = std::string(SEMCO_BIN) + " group --embeddings " +
                          fixture("tiny_embeddings.txt") + " --labels " +
                          labels + " 2> " + err;
  const int rc = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 2);
  std::ifstream in(err);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("zzqx") != std::string::npos);
  std::remove(labels.c_str());
  std::remove(err.c_str());
}

TEST_CASE("cli train/eval/stats round trip on a tiny synthetic run") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "semco_cli_run").string();
  fs::remove_all(dir);
  CmdResult train = run_cli(
      "train --epochs 2 --steps_per_epoch 3 --batch_size 4 --n_labeled 16"
      " --mu 2 --synth_train_per_class 10 --synth_test_per_class 4"
      " --emb_dim 16 --warmup_epochs 1 --seed 11 --out_dir " + dir);
  REQUIRE(train.exit_code == 0);
  CHECK(fs::exists(dir + "/metrics.csv"));
  CHECK(fs::exists(dir + "/checkpoint.json"));
  CHECK(fs::exists(dir + "/summary.json"));

  CmdResult eval = run_cli("eval --checkpoint " + dir + "/checkpoint.json");
  REQUIRE(eval.exit_code == 0);
  CHECK(eval.out.find("error_rate") != std::string::npos);

  CmdResult stats = run_cli("stats --metrics " + dir + "/metrics.csv");
  REQUIRE(stats.exit_code == 0);
  CHECK(stats.out.find("ratio_sc") != std::string::npos);

  // stats on an effectively empty metrics file: header only, exit 0
  const std::string empty =
      (fs::temp_directory_path() / "semco_cli_empty.csv").string();
  {
    std::ofstream out(empty);
    out << "step,epoch,split,metric,class,value\n";
  }
  CmdResult es = run_cli("stats --metrics " + empty);
  CHECK(es.exit_code == 0);
  std::remove(empty.c_str());
  fs::remove_all(dir);
}

TEST_CASE("cli train rejects unknown config keys, enumerating them") {
  const std::string err =
      (std::filesystem::temp_directory_path() / "semco_cli_badkey.txt").string();
  const std::string cmd = std::string(SEMCO_BIN) +
                          " train --set bogus_key=1 2> " + err;
  const int rc = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 2);
  std::ifstream in(err);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("bogus_key") != std::string::npos);
  CHECK(text.find("tau_e") != std::string::npos);  // known keys listed
  std::remove(err.c_str());
}
