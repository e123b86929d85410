#pragma once

#include "semco/image.hpp"
#include "semco/rng.hpp"

namespace semco {

// Transform catalog for the strong policy, in sampling order.
enum class StrongOp {
  autocontrast,
  brightness,
  color,
  contrast,
  equalize,
  posterize,
  rotate,
  sharpness,
  shear_x,
  shear_y,
  solarize,
  translate_x,
  translate_y,
};
constexpr int kNumStrongOps = 13;
const char* strong_op_name(StrongOp op);

// Deterministic core of the weak policy: reflect-pad by 12.5% of each side,
// crop at (offset_x, offset_y), flip horizontally when asked. Offsets equal
// to the pad give back the original image.
ImageTensor weak_augment_at(const ImageTensor& img, int offset_x, int offset_y,
                            bool flip);

// Random crop-pad plus horizontal flip with probability 1/2.
ImageTensor weak_augment(const ImageTensor& img, Rng& rng);

// One catalog transform at level in [0,1]; sign picks the direction of the
// signed geometric/enhancement ops.
ImageTensor apply_strong_op(const ImageTensor& img, StrongOp op, double level,
                            int sign = 1);

// Applies n_ops uniformly sampled catalog transforms, each at a magnitude
// sampled from {1..magnitude}/10, then the weak crop+flip. With n_ops = 0
// the draws match weak_augment exactly.
ImageTensor strong_augment(const ImageTensor& img, Rng& rng, int n_ops,
                           int magnitude, bool cutout = false);

}  // namespace semco
