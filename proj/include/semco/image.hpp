#pragma once

#include <cstdint>
#include <vector>

namespace semco {

// Planar channel-major image, values in [0,1].
struct ImageTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;  // channels * height * width
  int64_t sample_id = 0;

  ImageTensor() = default;
  ImageTensor(int c, int h, int w, int64_t id = 0)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, 0.0), sample_id(id) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t size() const { return data.size(); }
};

}  // namespace semco
