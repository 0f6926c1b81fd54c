#pragma once

#include "reorient/depth_image.hpp"
#include "reorient/mesh.hpp"
#include "reorient/quaternion.hpp"

namespace reorient {

struct RenderSize {
  int width = 128;
  int height = 128;
};

/**
 * @brief Z-buffer rasterization of the mesh rotated by `orientation`.
 *
 * Pixels are sampled at their centres; pixels on a shared edge go to exactly
 * one triangle (top-left rule). Uncovered pixels are 0. Throws OutOfFrustum
 * when no pixel is covered inside [near, far].
 */
DepthImage render_depth(const TriangleMesh& mesh, const UnitQuaternion& orientation,
                        const CameraModel& cam, RenderSize size = {});

/// Thin-rectangle occluder in pixels. Defaults target 128-pixel images.
struct OcclusionConfig {
  double min_length = 20.0;
  double max_length = 60.0;
  double min_thickness = 4.0;
  double max_thickness = 10.0;

  /// Same proportions for an image `width` pixels wide.
  OcclusionConfig scaled_for(int width) const;
};

/// Zeroes a randomly rotated thin rectangle centred on a random object pixel.
/// Throws NoObjectPixels on an all-background image.
DepthImage occlude_rectangle(const DepthImage& img, Rng& rng, const OcclusionConfig& cfg = {});

inline constexpr double kDefaultDropout = 0.01;

/// Sets every nonzero pixel to 0 independently with probability p.
DepthImage dropout_pixels(const DepthImage& img, double p, Rng& rng);

/// Back-projects nonzero pixels to camera-frame points (x right, y down the
/// image, z = metric depth). Throws NoObjectPixels on an empty image.
PointCloud to_point_cloud(const DepthImage& img, const CameraModel& cam);

/// Camera frame to world frame: (x, -y, distance - z).
PointCloud camera_to_world(const PointCloud& cloud, const CameraModel& cam);

/// World x/y of a pixel centre.
Eigen::Vector2d pixel_center_world(int row, int col, int width, int height, const CameraModel& cam);

}  // namespace reorient
