#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace patchservo {

/// Interleaved float raster with intensities in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  float& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

/// Row-major boolean raster.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  bool empty() const { return data.empty(); }
  bool at(int x, int y) const { return data[static_cast<size_t>(y) * width + x] != 0; }
};

/// Luma (Rec. 601 weights) of an RGB image; single-channel input is copied.
Image to_gray(const Image& img);

/// Area-averaging resize (bilinear when enlarging).
Image resize(const Image& img, int width, int height);

/// Nearest-neighbour resize of a mask.
Mask resize(const Mask& mask, int width, int height);

/// Rotates the raster by quarter_turns * 90 degrees about its centre, keeping
/// the canvas size. Pixels with no source are set to `fill`. A positive turn
/// maps the +x image axis onto +y (clockwise on screen, y pointing down).
Image rotate_quarter_turns(const Image& img, int quarter_turns, float fill);

Image load_image(const std::string& path);
void save_image(const std::string& path, const Image& img);
std::vector<uint8_t> encode_png(const Image& img);
Image decode_image(const std::vector<uint8_t>& bytes);

/// Nonzero pixels of a grayscale/RGB file become true.
Mask load_mask(const std::string& path);

}  // namespace patchservo
