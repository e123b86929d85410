#include "semco/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "semco/error.hpp"

namespace semco {

namespace {

inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Mirror index into [0, n) without repeating the edge sample.
inline int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

double bilinear(const ImageTensor& img, int c, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  const int ya = reflect(y0, img.height), yb = reflect(y0 + 1, img.height);
  const int xa = reflect(x0, img.width), xb = reflect(x0 + 1, img.width);
  return (1 - fy) * ((1 - fx) * img.at(c, ya, xa) + fx * img.at(c, ya, xb)) +
         fy * ((1 - fx) * img.at(c, yb, xa) + fx * img.at(c, yb, xb));
}

// Inverse-mapped affine about the image center.
ImageTensor affine(const ImageTensor& img, double a, double b, double c,
                   double d) {
  ImageTensor out(img.channels, img.height, img.width, img.sample_id);
  const double cy = (img.height - 1) / 2.0, cx = (img.width - 1) / 2.0;
  for (int ch = 0; ch < img.channels; ++ch)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double dy = y - cy, dx = x - cx;
        const double sy = a * dy + b * dx + cy;
        const double sx = c * dy + d * dx + cx;
        out.at(ch, y, x) = bilinear(img, ch, sy, sx);
      }
  return out;
}

ImageTensor translate(const ImageTensor& img, int dy, int dx) {
  ImageTensor out(img.channels, img.height, img.width, img.sample_id);
  for (int ch = 0; ch < img.channels; ++ch)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(ch, y, x) = img.at(ch, reflect(y - dy, img.height),
                                  reflect(x - dx, img.width));
  return out;
}

// Per-pixel luminance; plain channel mean for non-RGB images.
double luminance(const ImageTensor& img, int y, int x) {
  if (img.channels == 3)
    return 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) +
           0.114 * img.at(2, y, x);
  double s = 0.0;
  for (int c = 0; c < img.channels; ++c) s += img.at(c, y, x);
  return s / img.channels;
}

ImageTensor smooth3x3(const ImageTensor& img) {
  // PIL's SMOOTH kernel.
  static const double k[9] = {1, 1, 1, 1, 5, 1, 1, 1, 1};
  ImageTensor out(img.channels, img.height, img.width, img.sample_id);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            acc += k[(dy + 1) * 3 + dx + 1] *
                   img.at(c, reflect(y + dy, img.height),
                          reflect(x + dx, img.width));
        out.at(c, y, x) = acc / 13.0;
      }
  return out;
}

}  // namespace

const char* strong_op_name(StrongOp op) {
  static const std::array<const char*, kNumStrongOps> names = {
      "autocontrast", "brightness", "color",       "contrast",
      "equalize",     "posterize",  "rotate",      "sharpness",
      "shear_x",      "shear_y",    "solarize",    "translate_x",
      "translate_y"};
  return names[static_cast<int>(op)];
}

ImageTensor weak_augment_at(const ImageTensor& img, int offset_x, int offset_y,
                            bool flip) {
  const int pad_h = static_cast<int>(std::lround(0.125 * img.height));
  const int pad_w = static_cast<int>(std::lround(0.125 * img.width));
  ImageTensor out(img.channels, img.height, img.width, img.sample_id);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const int sy = reflect(y + offset_y - pad_h, img.height);
        const int sx = reflect(x + offset_x - pad_w, img.width);
        const int tx = flip ? img.width - 1 - x : x;
        out.at(c, y, tx) = img.at(c, sy, sx);
      }
  return out;
}

ImageTensor weak_augment(const ImageTensor& img, Rng& rng) {
  const int pad_h = static_cast<int>(std::lround(0.125 * img.height));
  const int pad_w = static_cast<int>(std::lround(0.125 * img.width));
  const int ox = rng.uniform_int(2 * pad_w + 1);
  const int oy = rng.uniform_int(2 * pad_h + 1);
  const bool flip = rng.bernoulli(0.5);
  return weak_augment_at(img, ox, oy, flip);
}

ImageTensor apply_strong_op(const ImageTensor& img, StrongOp op, double level,
                            int sign) {
  const double s = sign >= 0 ? 1.0 : -1.0;
  switch (op) {
    case StrongOp::autocontrast: {
      ImageTensor out = img;
      for (int c = 0; c < img.channels; ++c) {
        double lo = 1.0, hi = 0.0;
        for (int y = 0; y < img.height; ++y)
          for (int x = 0; x < img.width; ++x) {
            lo = std::min(lo, img.at(c, y, x));
            hi = std::max(hi, img.at(c, y, x));
          }
        if (hi - lo < 1e-12) continue;
        for (int y = 0; y < img.height; ++y)
          for (int x = 0; x < img.width; ++x)
            out.at(c, y, x) = clamp01((img.at(c, y, x) - lo) / (hi - lo));
      }
      return out;
    }
    case StrongOp::brightness: {
      const double f = 1.0 + s * 0.9 * level;
      ImageTensor out = img;
      for (double& v : out.data) v = clamp01(v * f);
      return out;
    }
    case StrongOp::color: {
      const double f = 1.0 + s * 0.9 * level;
      ImageTensor out = img;
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          const double g = luminance(img, y, x);
          for (int c = 0; c < img.channels; ++c)
            out.at(c, y, x) = clamp01(g + f * (img.at(c, y, x) - g));
        }
      return out;
    }
    case StrongOp::contrast: {
      const double f = 1.0 + s * 0.9 * level;
      double mu = 0.0;
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) mu += luminance(img, y, x);
      mu /= img.height * img.width;
      ImageTensor out = img;
      for (double& v : out.data) v = clamp01(mu + f * (v - mu));
      return out;
    }
    case StrongOp::equalize: {
      ImageTensor out = img;
      for (int c = 0; c < img.channels; ++c) {
        int hist[256] = {0};
        const int n = img.height * img.width;
        for (int y = 0; y < img.height; ++y)
          for (int x = 0; x < img.width; ++x) {
            int b = static_cast<int>(img.at(c, y, x) * 255.0 + 0.5);
            ++hist[std::min(255, std::max(0, b))];
          }
        int nonzero_last = 0;
        for (int b = 0; b < 256; ++b)
          if (hist[b]) nonzero_last = b;
        const int step = (n - hist[nonzero_last]) / 255;
        if (step == 0) continue;
        int lut[256];
        int acc = step / 2;
        for (int b = 0; b < 256; ++b) {
          lut[b] = std::min(255, acc / step);
          acc += hist[b];
        }
        for (int y = 0; y < img.height; ++y)
          for (int x = 0; x < img.width; ++x) {
            int b = static_cast<int>(img.at(c, y, x) * 255.0 + 0.5);
            out.at(c, y, x) = lut[std::min(255, std::max(0, b))] / 255.0;
          }
      }
      return out;
    }
    case StrongOp::posterize: {
      const int bits = 8 - static_cast<int>(std::lround(4.0 * level));
      const int mask = ~((1 << (8 - bits)) - 1) & 0xFF;
      ImageTensor out = img;
      for (double& v : out.data) {
        int b = static_cast<int>(v * 255.0 + 0.5);
        v = (std::min(255, std::max(0, b)) & mask) / 255.0;
      }
      return out;
    }
    case StrongOp::rotate: {
      const double th = s * level * 30.0 * M_PI / 180.0;
      return affine(img, std::cos(th), -std::sin(th), std::sin(th),
                    std::cos(th));
    }
    case StrongOp::sharpness: {
      const double f = 1.0 + s * 0.9 * level;
      ImageTensor sm = smooth3x3(img);
      ImageTensor out = img;
      for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = clamp01(sm.data[i] + f * (img.data[i] - sm.data[i]));
      return out;
    }
    case StrongOp::shear_x:
      return affine(img, 1.0, 0.0, -s * 0.3 * level, 1.0);
    case StrongOp::shear_y:
      return affine(img, 1.0, -s * 0.3 * level, 0.0, 1.0);
    case StrongOp::solarize: {
      const double threshold = 1.0 - level;
      ImageTensor out = img;
      for (double& v : out.data)
        if (v >= threshold) v = 1.0 - v;
      return out;
    }
    case StrongOp::translate_x:
      return translate(img, 0,
                       static_cast<int>(std::lround(s * 0.3 * level * img.width)));
    case StrongOp::translate_y:
      return translate(
          img, static_cast<int>(std::lround(s * 0.3 * level * img.height)), 0);
  }
  throw data_error("unknown strong op");
}

ImageTensor strong_augment(const ImageTensor& img, Rng& rng, int n_ops,
                           int magnitude, bool cutout) {
  ImageTensor out = img;
  for (int k = 0; k < n_ops; ++k) {
    const StrongOp op = static_cast<StrongOp>(rng.uniform_int(kNumStrongOps));
    const int steps = magnitude > 0 ? 1 + rng.uniform_int(magnitude) : 0;
    const int sign = rng.bernoulli(0.5) ? 1 : -1;
    out = apply_strong_op(out, op, steps / 10.0, sign);
  }
  out = weak_augment(out, rng);
  if (cutout) {
    const int side = std::max(1, static_cast<int>(std::lround(
                                     0.5 * std::min(out.height, out.width))));
    const int cy = rng.uniform_int(out.height);
    const int cx = rng.uniform_int(out.width);
    for (int c = 0; c < out.channels; ++c)
      for (int y = std::max(0, cy - side / 2);
           y < std::min(out.height, cy - side / 2 + side); ++y)
        for (int x = std::max(0, cx - side / 2);
             x < std::min(out.width, cx - side / 2 + side); ++x)
          out.at(c, y, x) = 0.5;
  }
  return out;
}

}  // namespace semco
