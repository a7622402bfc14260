#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchservo/image.hpp"

namespace patchservo {

class BridgeClient;

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

/// Dense field of patch descriptors, rows x cols cells of `dim` floats each.
/// Cells flagged ineligible (degenerate or masked out) take no part in
/// matching in either direction.
struct DescriptorGrid {
  int rows = 0;
  int cols = 0;
  int dim = 0;
  int patch_size = 14;
  int stride = 14;
  /// Side of the square image the grid was computed on.
  int input_resolution = 0;
  std::vector<float> data;
  std::vector<uint8_t> eligible;

  size_t cell_count() const { return static_cast<size_t>(rows) * cols; }
  size_t index(int row, int col) const { return static_cast<size_t>(row) * cols + col; }
  std::span<const float> cell(int row, int col) const {
    return {data.data() + index(row, col) * dim, static_cast<size_t>(dim)};
  }
  std::span<float> cell(int row, int col) {
    return {data.data() + index(row, col) * dim, static_cast<size_t>(dim)};
  }
  bool is_eligible(int row, int col) const { return eligible[index(row, col)] != 0; }
  size_t eligible_count() const;
};

/// Number of patch positions along one axis.
int grid_extent(int resolution, int patch_size, int stride);

enum class ProviderKind { kPhotometric, kBridge };

struct BridgeEndpoint {
  std::string host = "127.0.0.1";
  int port = 0;
  /// When non-empty the bridge is spawned with this argv and spoken to over
  /// its stdin/stdout instead of TCP.
  std::vector<std::string> command;
};

struct ProviderConfig {
  ProviderKind kind = ProviderKind::kPhotometric;
  int input_resolution = 308;
  int binning = 1;
  int layer = 11;
  std::optional<Mask> mask;
  /// Apply the mask to the current image too, not just the desired one.
  bool mask_both = false;
  BridgeEndpoint bridge;

  void validate() const;
};

/// Extracts descriptor grids for one provider configuration. Holds the bridge
/// connection when the provider is remote; a single Extractor must not be
/// used from two threads at once for the bridge provider (the client
/// serialises requests, but callers should own one per trial).
class Extractor {
 public:
  explicit Extractor(ProviderConfig config);
  Extractor(ProviderConfig config, std::shared_ptr<BridgeClient> client);
  ~Extractor();
  Extractor(Extractor&&) noexcept;
  Extractor& operator=(Extractor&&) noexcept;

  /// Raw (unbinned) grid. Applies the configured mask when `apply_mask`.
  DescriptorGrid extract(const Image& image, bool apply_mask = true) const;

  /// extract() followed by bin_features() with the configured hierarchy.
  DescriptorGrid describe(const Image& image, bool apply_mask = true) const;

  const ProviderConfig& config() const { return config_; }

 private:
  ProviderConfig config_;
  std::shared_ptr<BridgeClient> client_;
};

DescriptorGrid extract(const ProviderConfig& provider, const Image& image);

/// Mean-subtracted, L2-normalised grayscale patches of an already resized
/// square grayscale image.
DescriptorGrid photometric_grid(const Image& gray_square, int patch_size = 14, int stride = 14);

/// Marks cells whose patch is less than half covered by `mask` ineligible.
void apply_mask(DescriptorGrid& grid, const Mask& mask);

/// Appends, for each ring r = 1..levels around a cell, the mean descriptor of
/// the in-bounds cells at Chebyshev distance r.
DescriptorGrid bin_features(const DescriptorGrid& grid, int levels);

struct PixelCoord {
  double x;
  double y;
};

/// Centre of a cell's patch expressed in a camera raster of the given size.
PixelCoord grid_cell_to_pixel(const DescriptorGrid& grid, Cell cell, int camera_width, int camera_height);

}  // namespace patchservo
