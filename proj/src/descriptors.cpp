#include "patchservo/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "patchservo/bridge.hpp"
#include "patchservo/errors.hpp"

namespace patchservo {

namespace {
constexpr double kDegenerateNorm = 1e-4;
}

size_t DescriptorGrid::eligible_count() const {
  return static_cast<size_t>(std::count(eligible.begin(), eligible.end(), uint8_t{1}));
}

int grid_extent(int resolution, int patch_size, int stride) {
  if (resolution < patch_size) return 0;
  return (resolution - patch_size) / stride + 1;
}

void ProviderConfig::validate() const {
  if (input_resolution < 224 || input_resolution > 518) {
    throw std::invalid_argument("input_resolution must lie in [224, 518]");
  }
  if (binning < 0) throw std::invalid_argument("binning must be non-negative");
  if (kind == ProviderKind::kBridge && bridge.command.empty() && bridge.port <= 0) {
    throw std::invalid_argument("bridge provider needs a port or a command");
  }
}

DescriptorGrid photometric_grid(const Image& gray, int patch_size, int stride) {
  if (gray.empty()) throw EmptyImage("photometric_grid on an empty image");
  if (gray.channels != 1) throw std::invalid_argument("photometric_grid expects a grayscale image");
  if (gray.width != gray.height) throw std::invalid_argument("photometric_grid expects a square image");
  DescriptorGrid grid;
  grid.rows = grid_extent(gray.height, patch_size, stride);
  grid.cols = grid_extent(gray.width, patch_size, stride);
  grid.dim = patch_size * patch_size;
  grid.patch_size = patch_size;
  grid.stride = stride;
  grid.input_resolution = gray.width;
  grid.data.assign(grid.cell_count() * grid.dim, 0.0f);
  grid.eligible.assign(grid.cell_count(), 0);

  std::vector<double> patch(grid.dim);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      double mean = 0.0;
      for (int py = 0; py < patch_size; ++py) {
        for (int px = 0; px < patch_size; ++px) {
          const double v = gray.at(c * stride + px, r * stride + py);
          patch[py * patch_size + px] = v;
          mean += v;
        }
      }
      mean /= grid.dim;
      double norm2 = 0.0;
      for (double& v : patch) {
        v -= mean;
        norm2 += v * v;
      }
      const double norm = std::sqrt(norm2);
      if (norm < kDegenerateNorm) continue;  // stays a zero vector, ineligible
      auto out = grid.cell(r, c);
      for (int i = 0; i < grid.dim; ++i) out[i] = static_cast<float>(patch[i] / norm);
      grid.eligible[grid.index(r, c)] = 1;
    }
  }
  return grid;
}

void apply_mask(DescriptorGrid& grid, const Mask& mask) {
  const Mask scaled = resize(mask, grid.input_resolution, grid.input_resolution);
  const int area = grid.patch_size * grid.patch_size;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      int covered = 0;
      for (int py = 0; py < grid.patch_size; ++py) {
        for (int px = 0; px < grid.patch_size; ++px) {
          covered += scaled.at(c * grid.stride + px, r * grid.stride + py) ? 1 : 0;
        }
      }
      if (2 * covered < area) grid.eligible[grid.index(r, c)] = 0;
    }
  }
}

DescriptorGrid bin_features(const DescriptorGrid& grid, int levels) {
  if (levels < 0) throw std::invalid_argument("binning levels must be non-negative");
  if (levels == 0) return grid;
  DescriptorGrid out = grid;
  out.dim = grid.dim * (levels + 1);
  out.data.assign(out.cell_count() * out.dim, 0.0f);

  std::vector<double> acc(grid.dim);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      auto dst = out.cell(r, c);
      const auto self = grid.cell(r, c);
      std::copy(self.begin(), self.end(), dst.begin());
      for (int ring = 1; ring <= levels; ++ring) {
        std::fill(acc.begin(), acc.end(), 0.0);
        int count = 0;
        for (int rr = r - ring; rr <= r + ring; ++rr) {
          if (rr < 0 || rr >= grid.rows) continue;
          for (int cc = c - ring; cc <= c + ring; ++cc) {
            if (cc < 0 || cc >= grid.cols) continue;
            if (std::max(std::abs(rr - r), std::abs(cc - c)) != ring) continue;
            const auto src = grid.cell(rr, cc);
            for (int i = 0; i < grid.dim; ++i) acc[i] += src[i];
            ++count;
          }
        }
        if (count == 0) continue;
        float* seg = dst.data() + static_cast<size_t>(ring) * grid.dim;
        for (int i = 0; i < grid.dim; ++i) seg[i] = static_cast<float>(acc[i] / count);
      }
    }
  }
  return out;
}

PixelCoord grid_cell_to_pixel(const DescriptorGrid& grid, Cell cell, int camera_width, int camera_height) {
  if (cell.row < 0 || cell.col < 0 || cell.row >= grid.rows || cell.col >= grid.cols) {
    throw CellOutOfBounds("cell (" + std::to_string(cell.row) + "," + std::to_string(cell.col) + ")");
  }
  const double half = 0.5 * grid.patch_size;
  const double sx = static_cast<double>(camera_width) / grid.input_resolution;
  const double sy = static_cast<double>(camera_height) / grid.input_resolution;
  return {(cell.col * grid.stride + half) * sx, (cell.row * grid.stride + half) * sy};
}

Extractor::Extractor(ProviderConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.kind == ProviderKind::kBridge) client_ = BridgeClient::open(config_.bridge);
}

Extractor::Extractor(ProviderConfig config, std::shared_ptr<BridgeClient> client)
    : config_(std::move(config)), client_(std::move(client)) {
  config_.validate();
}

Extractor::~Extractor() = default;
Extractor::Extractor(Extractor&&) noexcept = default;
Extractor& Extractor::operator=(Extractor&&) noexcept = default;

DescriptorGrid Extractor::extract(const Image& image, bool apply_mask_flag) const {
  if (image.empty()) throw EmptyImage("extract on an empty image");
  DescriptorGrid grid;
  if (config_.kind == ProviderKind::kPhotometric) {
    grid = photometric_grid(resize(to_gray(image), config_.input_resolution, config_.input_resolution));
  } else {
    if (!client_) throw BridgeUnavailable("no bridge connection");
    grid = client_->extract(image, config_.input_resolution, config_.layer);
  }
  if (apply_mask_flag && config_.mask) apply_mask(grid, *config_.mask);
  return grid;
}

DescriptorGrid Extractor::describe(const Image& image, bool apply_mask_flag) const {
  return bin_features(extract(image, apply_mask_flag), config_.binning);
}

DescriptorGrid extract(const ProviderConfig& provider, const Image& image) {
  return Extractor(provider).extract(image);
}

}  // namespace patchservo
