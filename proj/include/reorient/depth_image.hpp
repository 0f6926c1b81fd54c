#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace reorient {

/**
 * @brief Orthographic camera above the origin looking down the world -z axis.
 *
 * The camera sits at z = distance. Depth is measured along the view ray, so a
 * world point at height z has depth distance - z. The view square spans
 * [-half_extent, half_extent] in world x and y.
 */
struct CameraModel {
  double half_extent = 1.1;
  double distance = 3.0;
  double near_plane = 1.5;
  double far_plane = 4.5;

  /// Throws ConfigError unless near < far, half_extent > 0 and the canonical
  /// unit sphere fits inside the view volume.
  void validate() const;

  /// Metres per quantization step for the [1, 65535] depth code range.
  double depth_scale() const { return (far_plane - near_plane) / 65534.0; }
  /// Metric depth of code 0, so that depth = offset + code * scale.
  double depth_offset() const { return near_plane - depth_scale(); }

  friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

/// Row-major 16-bit depth map; code 0 is background (or occluded).
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> values;
  double depth_scale = 0.0;
  double depth_offset = 0.0;

  DepthImage() = default;
  DepthImage(int w, int h, double scale, double offset)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0),
        depth_scale(scale), depth_offset(offset) {}

  std::uint16_t& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
  std::uint16_t at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * width + col];
  }

  std::size_t count_nonzero() const;
  double metric_depth(std::uint16_t code) const { return depth_offset + code * depth_scale; }

  friend bool operator==(const DepthImage&, const DepthImage&) = default;
};

/// Quantize a metric depth into [1, 65535].
std::uint16_t quantize_depth(double depth, const CameraModel& cam);
double dequantize_depth(std::uint16_t code, const CameraModel& cam);

/// Writes a binary 16-bit PGM (P5, maxval 65535, big-endian samples) plus a
/// JSON sidecar with the depth mapping and camera next to it (same stem,
/// ".json" extension).
void write_depth_image(const DepthImage& img, const CameraModel& cam,
                       const std::filesystem::path& pgm_path);

struct StoredDepthImage {
  DepthImage image;
  CameraModel camera;
};

/// Inverse of write_depth_image; throws IoError on missing or malformed files.
StoredDepthImage read_depth_image(const std::filesystem::path& pgm_path);

/// PGM bytes only (no sidecar); used for golden-file comparisons.
std::vector<unsigned char> encode_pgm(const DepthImage& img);

std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path);

}  // namespace reorient
