#include "semco/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "semco/error.hpp"
#include "semco/rng.hpp"

namespace semco {

namespace {

// Flat parameter layout. The conv backbone is two 3x3 same-padding conv
// blocks with 2x2 max pooling, global average pooling and a hidden layer;
// the mlp backbone flattens straight into the hidden layer.
struct Layout {
  // conv only
  int conv1_w = 0, conv1_b = 0, conv2_w = 0, conv2_b = 0;
  // shared
  int fc_w = 0, fc_b = 0, sc_w = 0, sc_b = 0, oh_w = 0, oh_b = 0;
  int total = 0;
  int fc_in = 0;  // features entering the hidden layer
};

Layout make_layout(const ModelConfig& c) {
  Layout l;
  int off = 0;
  auto claim = [&off](int count) {
    int at = off;
    off += count;
    return at;
  };
  if (c.backbone == "conv") {
    l.conv1_w = claim(c.conv1_channels * c.in_channels * 9);
    l.conv1_b = claim(c.conv1_channels);
    l.conv2_w = claim(c.conv2_channels * c.conv1_channels * 9);
    l.conv2_b = claim(c.conv2_channels);
    l.fc_in = c.conv2_channels;
  } else if (c.backbone == "mlp") {
    l.fc_in = c.in_channels * c.height * c.width;
  } else {
    throw data_error("unknown backbone: " + c.backbone);
  }
  l.fc_w = claim(c.hidden * l.fc_in);
  l.fc_b = claim(c.hidden);
  l.sc_w = claim(c.emb_dim * c.hidden);
  l.sc_b = claim(c.emb_dim);
  l.oh_w = claim(c.num_classes * c.hidden);
  l.oh_b = claim(c.num_classes);
  l.total = off;
  return l;
}

void check_batch(const ModelConfig& c, const std::vector<ImageTensor>& batch) {
  if (batch.empty()) throw data_error("empty batch");
  for (const auto& img : batch)
    if (img.channels != c.in_channels || img.height != c.height ||
        img.width != c.width)
      throw data_error("image shape does not match model configuration");
}

// Per-sample activations kept for the backward pass.
struct Trace {
  std::vector<double> conv1_out;  // post-relu, F1 x H x W
  std::vector<int> pool1_arg;     // F1 x H/2 x W/2
  std::vector<double> pool1_out;
  std::vector<double> conv2_out;  // post-relu, F2 x H/2 x W/2
  std::vector<int> pool2_arg;
  std::vector<double> pool2_out;  // F2 x H/4 x W/4
  std::vector<double> fc_in;      // features entering fc (gap output or flat image)
  std::vector<double> hidden;     // post-relu
};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Distance of the nearest relu pre-activation or pool win from its switching
// point; finite differences are only trustworthy when this is well above the
// probe step.
thread_local double* g_margin = nullptr;

inline void note_margin(double distance) {
  if (g_margin && distance < *g_margin) *g_margin = distance;
}

void conv3x3(const double* in, int cin, int h, int w, const double* weights,
             const double* bias, int cout, double* out) {
  for (int f = 0; f < cout; ++f) {
    const double* wf = weights + static_cast<size_t>(f) * cin * 9;
    double* of = out + static_cast<size_t>(f) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) of[y * w + x] = bias[f];
    for (int c = 0; c < cin; ++c) {
      const double* ic = in + static_cast<size_t>(c) * h * w;
      const double* wc = wf + c * 9;
      for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - 1), y1 = std::min(h - 1, y + 1);
        for (int x = 0; x < w; ++x) {
          const int x0 = std::max(0, x - 1), x1 = std::min(w - 1, x + 1);
          double acc = 0.0;
          for (int iy = y0; iy <= y1; ++iy)
            for (int ix = x0; ix <= x1; ++ix)
              acc += wc[(iy - y + 1) * 3 + (ix - x + 1)] * ic[iy * w + ix];
          of[y * w + x] += acc;
        }
      }
    }
  }
}

void maxpool2(const double* in, int c, int h, int w, double* out, int* argmax) {
  const int oh = h / 2, ow = w / 2;
  for (int f = 0; f < c; ++f) {
    const double* ic = in + static_cast<size_t>(f) * h * w;
    double* oc = out + static_cast<size_t>(f) * oh * ow;
    int* ac = argmax + static_cast<size_t>(f) * oh * ow;
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        int base = (2 * y) * w + 2 * x;
        int best = base;
        double bv = ic[base];
        double second = -std::numeric_limits<double>::infinity();
        const int cand[3] = {base + 1, base + w, base + w + 1};
        for (int k = 0; k < 3; ++k) {
          if (ic[cand[k]] > bv) {
            second = bv;
            bv = ic[cand[k]];
            best = cand[k];
          } else if (ic[cand[k]] > second) {
            second = ic[cand[k]];
          }
        }
        // tied relu zeros are a plateau, not a switch; the relu margins
        // already guard those units
        if (second > 0.0) note_margin(bv - second);
        oc[y * ow + x] = bv;
        ac[y * ow + x] = best;
      }
  }
}

// Forward for one image; fills the trace when given.
void forward_one(const ModelConfig& c, const Layout& l, const double* p,
                 const ImageTensor& img, double* emb_out, double* logit_out,
                 Trace* tr) {
  const int h = c.height, w = c.width;
  std::vector<double> fc_in;
  Trace local;
  Trace& t = tr ? *tr : local;

  if (c.backbone == "conv") {
    const int f1 = c.conv1_channels, f2 = c.conv2_channels;
    t.conv1_out.assign(static_cast<size_t>(f1) * h * w, 0.0);
    conv3x3(img.data.data(), c.in_channels, h, w, p + l.conv1_w, p + l.conv1_b,
            f1, t.conv1_out.data());
    for (double& v : t.conv1_out) {
      note_margin(std::fabs(v));
      v = relu(v);
    }

    const int h2 = h / 2, w2 = w / 2;
    t.pool1_out.assign(static_cast<size_t>(f1) * h2 * w2, 0.0);
    t.pool1_arg.assign(static_cast<size_t>(f1) * h2 * w2, 0);
    maxpool2(t.conv1_out.data(), f1, h, w, t.pool1_out.data(),
             t.pool1_arg.data());

    t.conv2_out.assign(static_cast<size_t>(f2) * h2 * w2, 0.0);
    conv3x3(t.pool1_out.data(), f1, h2, w2, p + l.conv2_w, p + l.conv2_b, f2,
            t.conv2_out.data());
    for (double& v : t.conv2_out) {
      note_margin(std::fabs(v));
      v = relu(v);
    }

    const int h4 = h2 / 2, w4 = w2 / 2;
    t.pool2_out.assign(static_cast<size_t>(f2) * h4 * w4, 0.0);
    t.pool2_arg.assign(static_cast<size_t>(f2) * h4 * w4, 0);
    maxpool2(t.conv2_out.data(), f2, h2, w2, t.pool2_out.data(),
             t.pool2_arg.data());

    t.fc_in.assign(f2, 0.0);
    const double inv = 1.0 / (h4 * w4);
    for (int f = 0; f < f2; ++f) {
      double acc = 0.0;
      for (int i = 0; i < h4 * w4; ++i)
        acc += t.pool2_out[static_cast<size_t>(f) * h4 * w4 + i];
      t.fc_in[f] = acc * inv;
    }
  } else {
    t.fc_in = img.data;
  }

  t.hidden.assign(c.hidden, 0.0);
  const double* fw = p + l.fc_w;
  for (int j = 0; j < c.hidden; ++j) {
    double acc = p[l.fc_b + j];
    const double* row = fw + static_cast<size_t>(j) * l.fc_in;
    for (int i = 0; i < l.fc_in; ++i) acc += row[i] * t.fc_in[i];
    note_margin(std::fabs(acc));
    t.hidden[j] = relu(acc);
  }

  for (int j = 0; j < c.emb_dim; ++j) {
    double acc = p[l.sc_b + j];
    const double* row = p + l.sc_w + static_cast<size_t>(j) * c.hidden;
    for (int i = 0; i < c.hidden; ++i) acc += row[i] * t.hidden[i];
    emb_out[j] = acc;
  }
  for (int j = 0; j < c.num_classes; ++j) {
    double acc = p[l.oh_b + j];
    const double* row = p + l.oh_w + static_cast<size_t>(j) * c.hidden;
    for (int i = 0; i < c.hidden; ++i) acc += row[i] * t.hidden[i];
    logit_out[j] = acc;
  }
}

// Reverse pass for one image; accumulates into the flat gradient.
void backward_one(const ModelConfig& c, const Layout& l, const double* p,
                  const ImageTensor& img, const Trace& t, const double* d_emb,
                  const double* d_logits, double* g) {
  // Heads into hidden.
  std::vector<double> d_hidden(c.hidden, 0.0);
  for (int j = 0; j < c.emb_dim; ++j) {
    const double dj = d_emb[j];
    if (dj == 0.0) continue;
    const double* row = p + l.sc_w + static_cast<size_t>(j) * c.hidden;
    double* grow = g + l.sc_w + static_cast<size_t>(j) * c.hidden;
    for (int i = 0; i < c.hidden; ++i) {
      grow[i] += dj * t.hidden[i];
      d_hidden[i] += dj * row[i];
    }
    g[l.sc_b + j] += dj;
  }
  for (int j = 0; j < c.num_classes; ++j) {
    const double dj = d_logits[j];
    if (dj == 0.0) continue;
    const double* row = p + l.oh_w + static_cast<size_t>(j) * c.hidden;
    double* grow = g + l.oh_w + static_cast<size_t>(j) * c.hidden;
    for (int i = 0; i < c.hidden; ++i) {
      grow[i] += dj * t.hidden[i];
      d_hidden[i] += dj * row[i];
    }
    g[l.oh_b + j] += dj;
  }

  // Hidden relu + fc.
  std::vector<double> d_fc_in(l.fc_in, 0.0);
  for (int j = 0; j < c.hidden; ++j) {
    if (t.hidden[j] <= 0.0) continue;  // relu gate
    const double dj = d_hidden[j];
    if (dj == 0.0) continue;
    const double* row = p + l.fc_w + static_cast<size_t>(j) * l.fc_in;
    double* grow = g + l.fc_w + static_cast<size_t>(j) * l.fc_in;
    for (int i = 0; i < l.fc_in; ++i) {
      grow[i] += dj * t.fc_in[i];
      d_fc_in[i] += dj * row[i];
    }
    g[l.fc_b + j] += dj;
  }

  if (c.backbone != "conv") return;

  const int h = c.height, w = c.width;
  const int f1 = c.conv1_channels, f2 = c.conv2_channels;
  const int h2 = h / 2, w2 = w / 2, h4 = h2 / 2, w4 = w2 / 2;

  // Global average pool spreads the feature gradient uniformly.
  std::vector<double> d_conv2(static_cast<size_t>(f2) * h2 * w2, 0.0);
  const double inv = 1.0 / (h4 * w4);
  for (int f = 0; f < f2; ++f) {
    const double df = d_fc_in[f] * inv;
    if (df == 0.0) continue;
    for (int i = 0; i < h4 * w4; ++i) {
      const int src = t.pool2_arg[static_cast<size_t>(f) * h4 * w4 + i];
      d_conv2[static_cast<size_t>(f) * h2 * w2 + src] += df;
    }
  }
  for (size_t i = 0; i < d_conv2.size(); ++i)
    if (t.conv2_out[i] <= 0.0) d_conv2[i] = 0.0;

  // conv2 weight/bias/input gradients.
  std::vector<double> d_pool1(static_cast<size_t>(f1) * h2 * w2, 0.0);
  for (int f = 0; f < f2; ++f) {
    const double* df = d_conv2.data() + static_cast<size_t>(f) * h2 * w2;
    double bacc = 0.0;
    for (int i = 0; i < h2 * w2; ++i) bacc += df[i];
    g[l.conv2_b + f] += bacc;
    for (int cch = 0; cch < f1; ++cch) {
      const double* in = t.pool1_out.data() + static_cast<size_t>(cch) * h2 * w2;
      double* dine = d_pool1.data() + static_cast<size_t>(cch) * h2 * w2;
      const double* wc = p + l.conv2_w + (static_cast<size_t>(f) * f1 + cch) * 9;
      double* gwc = g + l.conv2_w + (static_cast<size_t>(f) * f1 + cch) * 9;
      for (int y = 0; y < h2; ++y) {
        const int y0 = std::max(0, y - 1), y1 = std::min(h2 - 1, y + 1);
        for (int x = 0; x < w2; ++x) {
          const double d = df[y * w2 + x];
          if (d == 0.0) continue;
          const int x0 = std::max(0, x - 1), x1 = std::min(w2 - 1, x + 1);
          for (int iy = y0; iy <= y1; ++iy)
            for (int ix = x0; ix <= x1; ++ix) {
              const int ki = (iy - y + 1) * 3 + (ix - x + 1);
              gwc[ki] += d * in[iy * w2 + ix];
              dine[iy * w2 + ix] += d * wc[ki];
            }
        }
      }
    }
  }

  // Unpool into conv1, gate through its relu.
  std::vector<double> d_conv1(static_cast<size_t>(f1) * h * w, 0.0);
  for (int f = 0; f < f1; ++f)
    for (int i = 0; i < h2 * w2; ++i) {
      const double d = d_pool1[static_cast<size_t>(f) * h2 * w2 + i];
      if (d == 0.0) continue;
      const int src = t.pool1_arg[static_cast<size_t>(f) * h2 * w2 + i];
      d_conv1[static_cast<size_t>(f) * h * w + src] += d;
    }
  for (size_t i = 0; i < d_conv1.size(); ++i)
    if (t.conv1_out[i] <= 0.0) d_conv1[i] = 0.0;

  for (int f = 0; f < f1; ++f) {
    const double* df = d_conv1.data() + static_cast<size_t>(f) * h * w;
    double bacc = 0.0;
    for (int i = 0; i < h * w; ++i) bacc += df[i];
    g[l.conv1_b + f] += bacc;
    for (int cch = 0; cch < c.in_channels; ++cch) {
      const double* in = img.data.data() + static_cast<size_t>(cch) * h * w;
      double* gwc = g + l.conv1_w + (static_cast<size_t>(f) * c.in_channels + cch) * 9;
      for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - 1), y1 = std::min(h - 1, y + 1);
        for (int x = 0; x < w; ++x) {
          const double d = df[y * w + x];
          if (d == 0.0) continue;
          const int x0 = std::max(0, x - 1), x1 = std::min(w - 1, x + 1);
          for (int iy = y0; iy <= y1; ++iy)
            for (int ix = x0; ix <= x1; ++ix)
              gwc[(iy - y + 1) * 3 + (ix - x + 1)] += d * in[iy * w + ix];
        }
      }
    }
  }
}

}  // namespace

ModelState init_model(const ModelConfig& cfg, uint64_t seed) {
  if (cfg.backbone == "conv" && (cfg.height % 4 != 0 || cfg.width % 4 != 0))
    throw data_error("conv backbone needs height and width divisible by 4");
  const Layout l = make_layout(cfg);
  ModelState s;
  s.cfg = cfg;
  s.params.assign(l.total, 0.0);
  Rng rng(mix_seed(seed, "model-init"));

  auto he_fill = [&](int off, int count, int fan_in) {
    const double scale = std::sqrt(2.0 / fan_in);
    for (int i = 0; i < count; ++i) s.params[off + i] = rng.normal() * scale;
  };
  if (cfg.backbone == "conv") {
    he_fill(l.conv1_w, cfg.conv1_channels * cfg.in_channels * 9,
            cfg.in_channels * 9);
    he_fill(l.conv2_w, cfg.conv2_channels * cfg.conv1_channels * 9,
            cfg.conv1_channels * 9);
  }
  he_fill(l.fc_w, cfg.hidden * l.fc_in, l.fc_in);
  he_fill(l.sc_w, cfg.emb_dim * cfg.hidden, cfg.hidden);
  he_fill(l.oh_w, cfg.num_classes * cfg.hidden, cfg.hidden);

  s.ema = s.params;
  s.momentum.assign(l.total, 0.0);
  return s;
}

ForwardResult forward(const ModelState& state,
                      const std::vector<ImageTensor>& batch, bool use_ema) {
  check_batch(state.cfg, batch);
  const Layout l = make_layout(state.cfg);
  const double* p = use_ema ? state.ema.data() : state.params.data();
  const int n = static_cast<int>(batch.size());
  ForwardResult r;
  r.emb.resize(n, state.cfg.emb_dim);
  r.logits.resize(n, state.cfg.num_classes);
  std::vector<double> emb(state.cfg.emb_dim), logits(state.cfg.num_classes);
  for (int i = 0; i < n; ++i) {
    forward_one(state.cfg, l, p, batch[i], emb.data(), logits.data(), nullptr);
    for (int j = 0; j < state.cfg.emb_dim; ++j) r.emb(i, j) = emb[j];
    for (int j = 0; j < state.cfg.num_classes; ++j) r.logits(i, j) = logits[j];
  }
  return r;
}

double kink_margin(const ModelState& state,
                   const std::vector<ImageTensor>& batch) {
  check_batch(state.cfg, batch);
  const Layout l = make_layout(state.cfg);
  double margin = std::numeric_limits<double>::infinity();
  g_margin = &margin;
  std::vector<double> emb(state.cfg.emb_dim), logits(state.cfg.num_classes);
  for (const auto& img : batch)
    forward_one(state.cfg, l, state.params.data(), img, emb.data(),
                logits.data(), nullptr);
  g_margin = nullptr;
  return margin;
}

double gradients(const ModelState& state, const std::vector<ImageTensor>& batch,
                 const HeadLossFn& loss_fn, std::vector<double>* grad_out) {
  check_batch(state.cfg, batch);
  const Layout l = make_layout(state.cfg);
  const double* p = state.params.data();
  const int n = static_cast<int>(batch.size());

  std::vector<Trace> traces(n);
  Eigen::MatrixXd emb(n, state.cfg.emb_dim);
  Eigen::MatrixXd logits(n, state.cfg.num_classes);
  std::vector<double> erow(state.cfg.emb_dim), lrow(state.cfg.num_classes);
  for (int i = 0; i < n; ++i) {
    forward_one(state.cfg, l, p, batch[i], erow.data(), lrow.data(),
                &traces[i]);
    for (int j = 0; j < state.cfg.emb_dim; ++j) emb(i, j) = erow[j];
    for (int j = 0; j < state.cfg.num_classes; ++j) logits(i, j) = lrow[j];
  }

  Eigen::MatrixXd d_emb, d_logits;
  const double loss = loss_fn(emb, logits, &d_emb, &d_logits);
  if (!std::isfinite(loss)) throw numeric_error("non-finite loss");
  if (d_emb.rows() != n || d_logits.rows() != n)
    throw numeric_error("loss gradient shape mismatch");

  grad_out->assign(l.total, 0.0);
  std::vector<double> de(state.cfg.emb_dim), dl(state.cfg.num_classes);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < state.cfg.emb_dim; ++j) de[j] = d_emb(i, j);
    for (int j = 0; j < state.cfg.num_classes; ++j) dl[j] = d_logits(i, j);
    backward_one(state.cfg, l, p, batch[i], traces[i], de.data(), dl.data(),
                 grad_out->data());
  }
  return loss;
}

void sgd_step(ModelState& state, const std::vector<double>& grads, double lr,
              double momentum, double weight_decay) {
  if (grads.size() != state.params.size())
    throw data_error("gradient size mismatch");
  bool ok = true;
  for (size_t i = 0; i < state.params.size(); ++i) {
    const double g = grads[i] + weight_decay * state.params[i];
    const double buf = momentum * state.momentum[i] + g;
    state.momentum[i] = buf;
    state.params[i] -= lr * (g + momentum * buf);
    ok = ok && std::isfinite(state.params[i]);
  }
  state.step += 1;
  if (!ok) throw numeric_error("non-finite parameter after SGD step");
}

void ema_update(ModelState& state, double decay) {
  if (decay < 0.0 || decay > 1.0) throw data_error("ema decay must be in [0,1]");
  for (size_t i = 0; i < state.params.size(); ++i)
    state.ema[i] = decay * state.ema[i] + (1.0 - decay) * state.params[i];
}

void save_checkpoint(const ModelState& state, const std::string& path,
                     const std::string& run_config_text) {
  nlohmann::json j;
  j["format"] = "semco-checkpoint-v1";
  j["step"] = state.step;
  j["model"] = {{"backbone", state.cfg.backbone},
                {"in_channels", state.cfg.in_channels},
                {"height", state.cfg.height},
                {"width", state.cfg.width},
                {"conv1_channels", state.cfg.conv1_channels},
                {"conv2_channels", state.cfg.conv2_channels},
                {"hidden", state.cfg.hidden},
                {"emb_dim", state.cfg.emb_dim},
                {"num_classes", state.cfg.num_classes}};
  j["params"] = state.params;
  j["ema"] = state.ema;
  j["momentum"] = state.momentum;
  j["run_config"] = run_config_text;
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : run_config_text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  char hex[20];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  j["config_hash"] = hex;
  std::ofstream out(path);
  if (!out) throw data_error("cannot write checkpoint: " + path);
  out << j.dump();
}

ModelState load_checkpoint(const std::string& path,
                           std::string* run_config_text) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw data_error("bad checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != "semco-checkpoint-v1")
    throw data_error("unrecognized checkpoint format in " + path);
  ModelState s;
  const auto& m = j.at("model");
  s.cfg.backbone = m.at("backbone").get<std::string>();
  s.cfg.in_channels = m.at("in_channels").get<int>();
  s.cfg.height = m.at("height").get<int>();
  s.cfg.width = m.at("width").get<int>();
  s.cfg.conv1_channels = m.at("conv1_channels").get<int>();
  s.cfg.conv2_channels = m.at("conv2_channels").get<int>();
  s.cfg.hidden = m.at("hidden").get<int>();
  s.cfg.emb_dim = m.at("emb_dim").get<int>();
  s.cfg.num_classes = m.at("num_classes").get<int>();
  s.step = j.at("step").get<int64_t>();
  s.params = j.at("params").get<std::vector<double>>();
  s.ema = j.at("ema").get<std::vector<double>>();
  s.momentum = j.at("momentum").get<std::vector<double>>();
  const Layout l = make_layout(s.cfg);
  if (static_cast<int>(s.params.size()) != l.total ||
      s.ema.size() != s.params.size() || s.momentum.size() != s.params.size())
    throw data_error("checkpoint parameter count does not match model");
  if (run_config_text) *run_config_text = j.value("run_config", "");
  return s;
}

}  // namespace semco
