#include "reorient/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "reorient/error.hpp"

namespace reorient {

namespace {

struct ScreenVertex {
  double x;  // pixel units, 0 at the left image border
  double y;  // pixel units, 0 at the top image border
  double depth;
};

double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

// Evaluated from a fixed endpoint so that the two triangles sharing an edge
// get exactly opposite values.
double shared_edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  if (a.x < b.x || (a.x == b.x && a.y < b.y)) return edge(a, b, px, py);
  return -edge(b, a, px, py);
}

// With counter-clockwise area > 0, an edge owns its boundary pixels when it
// is a top or left edge. Each shared edge is traversed in opposite directions
// by its two triangles, so exactly one of them claims the tie.
bool owns_boundary(const ScreenVertex& a, const ScreenVertex& b) {
  const double dy = b.y - a.y;
  const double dx = b.x - a.x;
  return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

bool inside(double w, bool owner) { return w > 0.0 || (w == 0.0 && owner); }

}  // namespace

Eigen::Vector2d pixel_center_world(int row, int col, int width, int height, const CameraModel& cam) {
  const double h = cam.half_extent;
  return {-h + (col + 0.5) * (2.0 * h / width), h - (row + 0.5) * (2.0 * h / height)};
}

DepthImage render_depth(const TriangleMesh& mesh, const UnitQuaternion& orientation,
                        const CameraModel& cam, RenderSize size) {
  validate_mesh(mesh);
  if (size.width <= 0 || size.height <= 0) throw ConfigError("render size must be positive");
  const int w = size.width;
  const int hgt = size.height;
  const double h = cam.half_extent;
  const RotationMatrix3 rot = to_matrix(orientation);

  std::vector<ScreenVertex> sv;
  sv.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) {
    const Eigen::Vector3d p = rot * v;
    sv.push_back({(p.x() + h) / (2.0 * h) * w, (h - p.y()) / (2.0 * h) * hgt, cam.distance - p.z()});
  }

  std::vector<double> zbuf(static_cast<std::size_t>(w) * hgt, std::numeric_limits<double>::infinity());
  for (const auto& tri : mesh.triangles) {
    ScreenVertex a = sv[tri[0]];
    ScreenVertex b = sv[tri[1]];
    ScreenVertex c = sv[tri[2]];
    double area = edge(a, b, c.x, c.y);
    if (area == 0.0) continue;
    if (area < 0.0) {
      std::swap(b, c);
      area = -area;
    }
    const bool own_bc = owns_boundary(b, c);
    const bool own_ca = owns_boundary(c, a);
    const bool own_ab = owns_boundary(a, b);

    const int col0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
    const int col1 = std::min(w - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}) - 0.5)));
    const int row0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
    const int row1 = std::min(hgt - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}) - 0.5)));
    for (int row = row0; row <= row1; ++row) {
      const double py = row + 0.5;
      for (int col = col0; col <= col1; ++col) {
        const double px = col + 0.5;
        const double wa = shared_edge(b, c, px, py);
        const double wb = shared_edge(c, a, px, py);
        const double wc = shared_edge(a, b, px, py);
        if (!inside(wa, own_bc) || !inside(wb, own_ca) || !inside(wc, own_ab)) continue;
        const double depth = (wa * a.depth + wb * b.depth + wc * c.depth) / area;
        if (depth < cam.near_plane || depth > cam.far_plane) continue;
        double& z = zbuf[static_cast<std::size_t>(row) * w + col];
        z = std::min(z, depth);
      }
    }
  }

  DepthImage img(w, hgt, cam.depth_scale(), cam.depth_offset());
  bool any = false;
  for (std::size_t i = 0; i < zbuf.size(); ++i) {
    if (std::isfinite(zbuf[i])) {
      img.values[i] = quantize_depth(zbuf[i], cam);
      any = true;
    }
  }
  if (!any) throw OutOfFrustum("no pixel of the mesh falls inside the view volume");
  return img;
}

OcclusionConfig OcclusionConfig::scaled_for(int width) const {
  const double s = width / 128.0;
  return {min_length * s, max_length * s, min_thickness * s, max_thickness * s};
}

DepthImage occlude_rectangle(const DepthImage& img, Rng& rng, const OcclusionConfig& cfg) {
  std::vector<std::size_t> object;
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    if (img.values[i] != 0) object.push_back(i);
  }
  if (object.empty()) throw NoObjectPixels("occlusion needs at least one object pixel");

  std::uniform_int_distribution<std::size_t> pick(0, object.size() - 1);
  const std::size_t centre = object[pick(rng)];
  const double cy = static_cast<double>(centre / img.width) + 0.5;
  const double cx = static_cast<double>(centre % img.width) + 0.5;
  const double length = std::uniform_real_distribution<double>(cfg.min_length, cfg.max_length)(rng);
  const double thick =
      std::uniform_real_distribution<double>(cfg.min_thickness, cfg.max_thickness)(rng);
  const double angle = std::uniform_real_distribution<double>(0.0, kPi)(rng);
  const double ux = std::cos(angle), uy = std::sin(angle);

  DepthImage out = img;
  const double reach = 0.5 * std::hypot(length, thick) + 1.0;
  const int row0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
  const int row1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + reach)));
  const int col0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
  const int col1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + reach)));
  for (int row = row0; row <= row1; ++row) {
    for (int col = col0; col <= col1; ++col) {
      const double dx = col + 0.5 - cx;
      const double dy = row + 0.5 - cy;
      const double along = dx * ux + dy * uy;
      const double across = -dx * uy + dy * ux;
      if (std::abs(along) <= length / 2.0 && std::abs(across) <= thick / 2.0) {
        out.at(row, col) = 0;
      }
    }
  }
  return out;
}

DepthImage dropout_pixels(const DepthImage& img, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("dropout probability must lie in [0, 1]");
  DepthImage out = img;
  std::bernoulli_distribution drop(p);
  for (auto& v : out.values) {
    if (v != 0 && drop(rng)) v = 0;
  }
  return out;
}

PointCloud to_point_cloud(const DepthImage& img, const CameraModel& cam) {
  PointCloud cloud;
  for (int row = 0; row < img.height; ++row) {
    for (int col = 0; col < img.width; ++col) {
      const std::uint16_t v = img.at(row, col);
      if (v == 0) continue;
      const Eigen::Vector2d xy = pixel_center_world(row, col, img.width, img.height, cam);
      cloud.points.emplace_back(xy.x(), -xy.y(), img.metric_depth(v));
    }
  }
  if (cloud.empty()) throw NoObjectPixels("depth image has no object pixels");
  return cloud;
}

PointCloud camera_to_world(const PointCloud& cloud, const CameraModel& cam) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.emplace_back(p.x(), -p.y(), cam.distance - p.z());
  return out;
}

}  // namespace reorient
