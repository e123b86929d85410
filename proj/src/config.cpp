#include "semco/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "semco/error.hpp"

namespace semco {

namespace {

struct FieldOps {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw data_error("config key '" + key + "': bad integer '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw data_error("config key '" + key + "': bad number '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw data_error("config key '" + key + "': bad boolean '" + v + "'");
}

// Definition order is the emission order of config_items.
const std::vector<std::pair<std::string, FieldOps>>& field_table() {
  static const std::vector<std::pair<std::string, FieldOps>> table = [] {
    std::vector<std::pair<std::string, FieldOps>> t;
    auto add_int = [&t](const char* name, int RunConfig::*f) {
      t.push_back({name,
                   {[name, f](RunConfig& c, const std::string& v) {
                      c.*f = parse_int(name, v);
                    },
                    [f](const RunConfig& c) { return std::to_string(c.*f); }}});
    };
    auto add_double = [&t](const char* name, double RunConfig::*f) {
      t.push_back({name,
                   {[name, f](RunConfig& c, const std::string& v) {
                      c.*f = parse_double(name, v);
                    },
                    [f](const RunConfig& c) { return fmt_double(c.*f); }}});
    };
    auto add_string = [&t](const char* name, std::string RunConfig::*f) {
      t.push_back(
          {name,
           {[f](RunConfig& c, const std::string& v) { c.*f = v; },
            [f](const RunConfig& c) { return c.*f; }}});
    };
    auto add_bool = [&t](const char* name, bool RunConfig::*f) {
      t.push_back({name,
                   {[name, f](RunConfig& c, const std::string& v) {
                      c.*f = parse_bool(name, v);
                    },
                    [f](const RunConfig& c) {
                      return std::string(c.*f ? "true" : "false");
                    }}});
    };

    add_int("n_labeled", &RunConfig::n_labeled);
    add_int("mu", &RunConfig::mu);
    add_int("batch_size", &RunConfig::batch_size);
    add_int("epochs", &RunConfig::epochs);
    add_int("steps_per_epoch", &RunConfig::steps_per_epoch);
    add_double("lr_max", &RunConfig::lr_max);
    add_int("warmup_epochs", &RunConfig::warmup_epochs);
    add_double("momentum", &RunConfig::momentum);
    add_double("weight_decay", &RunConfig::weight_decay);
    add_double("ema_decay", &RunConfig::ema_decay);
    add_double("tau_e", &RunConfig::tau_e);
    add_double("tau_o", &RunConfig::tau_o);
    add_double("lambda_u", &RunConfig::lambda_u);
    add_double("lambda_co", &RunConfig::lambda_co);
    add_double("sc_scale", &RunConfig::sc_scale);
    add_double("eps", &RunConfig::eps);
    add_double("temp", &RunConfig::temp);
    t.push_back({"seed",
                 {[](RunConfig& c, const std::string& v) {
                    try {
                      c.seed = std::stoull(v);
                    } catch (const std::exception&) {
                      throw data_error("config key 'seed': bad integer '" + v +
                                       "'");
                    }
                  },
                  [](const RunConfig& c) { return std::to_string(c.seed); }}});
    add_string("dataset", &RunConfig::dataset);
    add_string("data_dir", &RunConfig::data_dir);
    add_string("embeddings", &RunConfig::embeddings);
    add_string("out_dir", &RunConfig::out_dir);
    add_string("backbone", &RunConfig::backbone);
    add_int("conv1_channels", &RunConfig::conv1_channels);
    add_int("conv2_channels", &RunConfig::conv2_channels);
    add_int("hidden", &RunConfig::hidden);
    add_int("emb_dim", &RunConfig::emb_dim);
    add_int("n_ops", &RunConfig::n_ops);
    add_int("magnitude", &RunConfig::magnitude);
    add_bool("cutout", &RunConfig::cutout);
    add_int("img_height", &RunConfig::img_height);
    add_int("img_width", &RunConfig::img_width);
    add_int("img_channels", &RunConfig::img_channels);
    add_int("synth_train_per_class", &RunConfig::synth_train_per_class);
    add_int("synth_test_per_class", &RunConfig::synth_test_per_class);
    add_int("synth_size", &RunConfig::synth_size);
    add_double("synth_color_delta", &RunConfig::synth_color_delta);
    add_double("synth_fg_noise", &RunConfig::synth_fg_noise);
    add_double("synth_bg_level", &RunConfig::synth_bg_level);
    return t;
  }();
  return table;
}

}  // namespace

void set_config_key(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  for (const auto& [name, ops] : field_table()) {
    if (name == key) {
      ops.set(cfg, value);
      return;
    }
  }
  std::string known;
  for (const auto& [name, ops] : field_table()) {
    if (!known.empty()) known += ", ";
    known += name;
  }
  throw data_error("unknown config key '" + key + "' (known keys: " + known +
                   ")");
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": expected key = value");
    try {
      set_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const data_error& e) {
      throw data_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

std::vector<std::pair<std::string, std::string>> config_items(
    const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, ops] : field_table()) out.push_back({name, ops.get(cfg)});
  return out;
}

std::string config_to_string(const RunConfig& cfg) {
  std::ostringstream ss;
  for (const auto& [k, v] : config_items(cfg)) ss << k << " = " << v << "\n";
  return ss.str();
}

uint64_t config_hash(const RunConfig& cfg) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : config_to_string(cfg)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace semco
