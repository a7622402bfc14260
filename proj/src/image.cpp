#include "patchservo/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "patchservo/errors.hpp"

namespace patchservo {
namespace {

cv::Mat as_mat(const Image& img) {
  // OpenCV never writes through this header; the const_cast is for its API.
  return cv::Mat(img.height, img.width, CV_32FC(img.channels), const_cast<float*>(img.data.data()));
}

Image from_mat(const cv::Mat& m) {
  cv::Mat f;
  m.convertTo(f, CV_32F, m.depth() == CV_8U ? 1.0 / 255.0 : (m.depth() == CV_16U ? 1.0 / 65535.0 : 1.0));
  Image out(f.cols, f.rows, f.channels());
  for (int y = 0; y < f.rows; ++y) {
    const float* row = f.ptr<float>(y);
    std::copy(row, row + static_cast<size_t>(f.cols) * f.channels(),
              out.data.begin() + static_cast<size_t>(y) * f.cols * f.channels());
  }
  return out;
}

cv::Mat to_bgr8(const Image& img) {
  cv::Mat f = as_mat(img);
  cv::Mat u8;
  f.convertTo(u8, CV_8U, 255.0);
  if (img.channels == 3) cv::cvtColor(u8, u8, cv::COLOR_RGB2BGR);
  return u8;
}

Image bgr_to_rgb(const cv::Mat& decoded, const std::string& what) {
  if (decoded.empty()) throw ImageIoError("cannot decode " + what);
  cv::Mat rgb;
  if (decoded.channels() == 1) {
    rgb = decoded;
  } else if (decoded.channels() == 4) {
    cv::cvtColor(decoded, rgb, cv::COLOR_BGRA2RGB);
  } else {
    cv::cvtColor(decoded, rgb, cv::COLOR_BGR2RGB);
  }
  return from_mat(rgb);
}

}  // namespace

Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.width, img.height, 1);
  const size_t n = static_cast<size_t>(img.width) * img.height;
  for (size_t i = 0; i < n; ++i) {
    const float* p = &img.data[i * img.channels];
    out.data[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
  }
  return out;
}

Image resize(const Image& img, int width, int height) {
  if (img.empty()) throw EmptyImage("resize of an empty image");
  if (img.width == width && img.height == height) return img;
  cv::Mat dst;
  const bool shrinking = width <= img.width && height <= img.height;
  cv::resize(as_mat(img), dst, cv::Size(width, height), 0.0, 0.0,
             shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  return from_mat(dst);
}

Mask resize(const Mask& mask, int width, int height) {
  Mask out{width, height, std::vector<uint8_t>(static_cast<size_t>(width) * height)};
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(mask.height - 1, static_cast<int>((y + 0.5) * mask.height / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(mask.width - 1, static_cast<int>((x + 0.5) * mask.width / width));
      out.data[static_cast<size_t>(y) * width + x] = mask.at(sx, sy) ? 1 : 0;
    }
  }
  return out;
}

Image rotate_quarter_turns(const Image& img, int quarter_turns, float fill) {
  const int turns = ((quarter_turns % 4) + 4) % 4;
  if (turns == 0) return img;
  static constexpr int kCos[4] = {1, 0, -1, 0};
  static constexpr int kSin[4] = {0, 1, 0, -1};
  const int c = kCos[turns];
  const int s = kSin[turns];
  const double cx = 0.5 * (img.width - 1);
  const double cy = 0.5 * (img.height - 1);
  Image out(img.width, img.height, img.channels, fill);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // source = centre + R^T (dest - centre)
      const double dx = x - cx;
      const double dy = y - cy;
      const int sx = static_cast<int>(std::lround(cx + c * dx + s * dy));
      const int sy = static_cast<int>(std::lround(cy - s * dx + c * dy));
      if (sx < 0 || sy < 0 || sx >= img.width || sy >= img.height) continue;
      for (int ch = 0; ch < img.channels; ++ch) out.at(x, y, ch) = img.at(sx, sy, ch);
    }
  }
  return out;
}

Image load_image(const std::string& path) {
  return bgr_to_rgb(cv::imread(path, cv::IMREAD_UNCHANGED), path);
}

void save_image(const std::string& path, const Image& img) {
  if (!cv::imwrite(path, to_bgr8(img))) throw ImageIoError("cannot write " + path);
}

std::vector<uint8_t> encode_png(const Image& img) {
  std::vector<uint8_t> bytes;
  if (!cv::imencode(".png", to_bgr8(img), bytes)) throw ImageIoError("png encoding failed");
  return bytes;
}

Image decode_image(const std::vector<uint8_t>& bytes) {
  return bgr_to_rgb(cv::imdecode(bytes, cv::IMREAD_UNCHANGED), "in-memory image");
}

Mask load_mask(const std::string& path) {
  const cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw ImageIoError("cannot read mask " + path);
  Mask out{m.cols, m.rows, std::vector<uint8_t>(static_cast<size_t>(m.cols) * m.rows)};
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      out.data[static_cast<size_t>(y) * m.cols + x] = m.at<uint8_t>(y, x) != 0 ? 1 : 0;
    }
  }
  return out;
}

}  // namespace patchservo
