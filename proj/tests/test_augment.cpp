#include <cmath>

#include "doctest.h"
#include "semco/augment.hpp"
#include "semco/rng.hpp"

using namespace semco;

namespace {

ImageTensor random_image(int c, int h, int w, Rng& rng) {
  ImageTensor img(c, h, w);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

bool images_equal(const ImageTensor& a, const ImageTensor& b) {
  return a.channels == b.channels && a.height == b.height &&
         a.width == b.width && a.data == b.data;
}

bool in_range(const ImageTensor& img) {
  for (double v : img.data)
    if (!(v >= 0.0 && v <= 1.0)) return false;
  return true;
}

}  // namespace

TEST_CASE("weak_augment_at with centered offsets and no flip is the identity") {
  Rng rng(1);
  ImageTensor img = random_image(3, 16, 16, rng);
  const int pad = 2;  // 12.5% of 16
  ImageTensor out = weak_augment_at(img, pad, pad, false);
  CHECK(images_equal(out, img));

  // flipping twice restores it as well
  ImageTensor f1 = weak_augment_at(img, pad, pad, true);
  ImageTensor f2 = weak_augment_at(f1, pad, pad, true);
  CHECK(images_equal(f2, img));
}

TEST_CASE("weak_augment is deterministic given the seed") {
  Rng rng(2);
  ImageTensor img = random_image(3, 32, 32, rng);
  Rng a(77), b(77);
  ImageTensor outa = weak_augment(img, a);
  ImageTensor outb = weak_augment(img, b);
  CHECK(images_equal(outa, outb));
}

TEST_CASE("weak_augment keeps constant images constant") {
  ImageTensor img(3, 16, 16);
  for (double& v : img.data) v = 0.375;
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    ImageTensor out = weak_augment(img, rng);
    CHECK(images_equal(out, img));
  }
}

TEST_CASE("weak_augment keeps shape and range") {
  Rng rng(4);
  ImageTensor img = random_image(3, 16, 16, rng);
  for (int t = 0; t < 50; ++t) {
    ImageTensor out = weak_augment(img, rng);
    CHECK(out.height == 16);
    CHECK(out.width == 16);
    CHECK(out.channels == 3);
    CHECK(in_range(out));
  }
}

TEST_CASE("strong_augment with n_ops = 0 equals the weak path") {
  Rng rng(5);
  ImageTensor img = random_image(3, 16, 16, rng);
  Rng a(123), b(123);
  ImageTensor weak = weak_augment(img, a);
  ImageTensor strong = strong_augment(img, b, 0, 10);
  CHECK(images_equal(weak, strong));
}

TEST_CASE("strong_augment is deterministic given the seed") {
  Rng rng(6);
  ImageTensor img = random_image(3, 16, 16, rng);
  Rng a(9), b(9);
  CHECK(images_equal(strong_augment(img, a, 2, 10),
                     strong_augment(img, b, 2, 10)));
}

TEST_CASE("weak and strong streams from distinct sub-seeds differ") {
  Rng rng(7);
  ImageTensor img = random_image(3, 16, 16, rng);
  const uint64_t run_seed = 42, sample = 3, step = 17;
  Rng w1(mix_seed(run_seed, "aug-weak", sample, step));
  Rng s1(mix_seed(run_seed, "aug-strong", sample, step));
  ImageTensor weak = weak_augment(img, w1);
  ImageTensor strong = strong_augment(img, s1, 2, 10);
  CHECK_FALSE(images_equal(weak, strong));
  // reproducible from the same triple
  Rng w2(mix_seed(run_seed, "aug-weak", sample, step));
  CHECK(images_equal(weak, weak_augment(img, w2)));
}

TEST_CASE("solarize inverts above the threshold") {
  ImageTensor img(1, 4, 4);
  for (double& v : img.data) v = 0.8;
  // level 1 -> threshold 0, everything inverts
  ImageTensor out = apply_strong_op(img, StrongOp::solarize, 1.0);
  for (double v : out.data) CHECK(v == doctest::Approx(0.2));
  // level 0.1 -> threshold 0.9, nothing at 0.8 inverts
  out = apply_strong_op(img, StrongOp::solarize, 0.1);
  for (double v : out.data) CHECK(v == doctest::Approx(0.8));
}

TEST_CASE("posterize quantizes to the reduced bit depth") {
  ImageTensor img(1, 2, 2);
  img.data = {0.0, 0.26, 0.5, 1.0};
  // level 1 -> 4 bits
  ImageTensor out = apply_strong_op(img, StrongOp::posterize, 1.0);
  for (double v : out.data) {
    const int b = static_cast<int>(std::lround(v * 255.0));
    CHECK((b & 0x0F) == 0);
  }
  // level 0 -> 8 bits, snapping to the byte grid only
  out = apply_strong_op(img, StrongOp::posterize, 0.0);
  CHECK(out.data[1] == doctest::Approx(66.0 / 255.0));
}

TEST_CASE("autocontrast stretches to the full range") {
  ImageTensor img(1, 2, 2);
  img.data = {0.2, 0.3, 0.4, 0.6};
  ImageTensor out = apply_strong_op(img, StrongOp::autocontrast, 1.0);
  CHECK(out.data[0] == doctest::Approx(0.0));
  CHECK(out.data[3] == doctest::Approx(1.0));
  // constant channels are left alone
  ImageTensor flat(1, 2, 2);
  for (double& v : flat.data) v = 0.5;
  out = apply_strong_op(flat, StrongOp::autocontrast, 1.0);
  CHECK(images_equal(out, flat));
}

TEST_CASE("every catalog op preserves shape and range") {
  Rng rng(8);
  ImageTensor img = random_image(3, 16, 16, rng);
  for (int opi = 0; opi < kNumStrongOps; ++opi) {
    for (double level : {0.0, 0.3, 1.0}) {
      for (int sign : {1, -1}) {
        ImageTensor out =
            apply_strong_op(img, static_cast<StrongOp>(opi), level, sign);
        CAPTURE(strong_op_name(static_cast<StrongOp>(opi)));
        CHECK(out.height == img.height);
        CHECK(out.width == img.width);
        CHECK(out.channels == img.channels);
        CHECK(in_range(out));
      }
    }
  }
}

TEST_CASE("strong_augment output stays valid over many draws") {
  Rng rng(9);
  ImageTensor img = random_image(3, 16, 16, rng);
  Rng aug(10);
  for (int t = 0; t < 60; ++t) {
    ImageTensor out = strong_augment(img, aug, 2, 10);
    CHECK(out.size() == img.size());
    CHECK(in_range(out));
  }
  // cutout variant stays valid too
  for (int t = 0; t < 20; ++t) {
    ImageTensor out = strong_augment(img, aug, 2, 10, true);
    CHECK(in_range(out));
  }
}

TEST_CASE("rotate at level zero is the identity") {
  Rng rng(11);
  ImageTensor img = random_image(2, 8, 8, rng);
  ImageTensor out = apply_strong_op(img, StrongOp::rotate, 0.0);
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(out.data[i] == doctest::Approx(img.data[i]).epsilon(1e-12));
}
