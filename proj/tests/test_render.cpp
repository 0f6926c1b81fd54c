#include <cmath>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "reorient/depth_image.hpp"
#include "reorient/error.hpp"
#include "reorient/mesh.hpp"
#include "reorient/render.hpp"
#include "test_support.hpp"

using namespace reorient;
using reorient::testing::TempDir;

namespace {

DepthImage full_image(int w, int h, std::uint16_t code = 1000) {
  const CameraModel cam;
  DepthImage img(w, h, cam.depth_scale(), cam.depth_offset());
  std::fill(img.values.begin(), img.values.end(), code);
  return img;
}

bool subset_of_nonzero(const DepthImage& out, const DepthImage& in) {
  for (std::size_t i = 0; i < in.values.size(); ++i) {
    if (out.values[i] != 0 && out.values[i] != in.values[i]) return false;
  }
  return true;
}

}  // namespace

TEST(Camera, DefaultsValidAndMapping) {
  const CameraModel cam;
  EXPECT_NO_THROW(cam.validate());
  EXPECT_DOUBLE_EQ(cam.depth_offset() + 1 * cam.depth_scale(), cam.near_plane);
  EXPECT_NEAR(cam.depth_offset() + 65535 * cam.depth_scale(), cam.far_plane, 1e-12);
}

TEST(Camera, InvalidFrustum) {
  CameraModel cam;
  cam.near_plane = 5.0;
  EXPECT_THROW(cam.validate(), ConfigError);
  cam = CameraModel{};
  cam.half_extent = 0.5;
  EXPECT_THROW(cam.validate(), ConfigError);
}

TEST(Quantization, RoundTripWithinHalfStep) {
  const CameraModel cam;
  Rng rng(1);
  std::uniform_real_distribution<double> d(cam.near_plane, cam.far_plane);
  for (int n = 0; n < 10000; ++n) {
    const double depth = d(rng);
    const auto code = quantize_depth(depth, cam);
    EXPECT_GE(code, 1);
    EXPECT_LE(std::abs(dequantize_depth(code, cam) - depth), cam.depth_scale() / 2 + 1e-15);
  }
  EXPECT_EQ(quantize_depth(cam.near_plane, cam), 1);
  EXPECT_EQ(quantize_depth(cam.far_plane, cam), 65535);
}

TEST(Render, OutOfFrustumThrows) {
  auto sq = shapes::square(0.5);
  for (auto& v : sq.vertices) v.x() += 10.0;
  EXPECT_THROW(render_depth(sq, {}, CameraModel{}), OutOfFrustum);
  auto far = shapes::square(0.5);
  for (auto& v : far.vertices) v.z() -= 5.0;  // depth 8, beyond the far plane
  EXPECT_THROW(render_depth(far, {}, CameraModel{}), OutOfFrustum);
}

TEST(Render, FlatSquareConstantDepthAndFootprint) {
  const CameraModel cam;
  const double side = 1.0;
  const auto img = render_depth(shapes::square(side), {}, cam);
  std::set<std::uint16_t> codes;
  for (auto v : img.values) {
    if (v) codes.insert(v);
  }
  ASSERT_EQ(codes.size(), 1u);
  EXPECT_EQ(*codes.begin(), quantize_depth(cam.distance, cam));
  const double pixels_per_side = side / (2 * cam.half_extent / img.width);
  const double expected = pixels_per_side * pixels_per_side;
  EXPECT_LE(std::abs(static_cast<double>(img.count_nonzero()) - expected), 4 * pixels_per_side + 4);
}

TEST(Render, SharedEdgesCoveredOnce) {
  // A square split along its diagonal must produce no holes along the
  // diagonal: the covered set is exactly the pixel centres inside the square.
  const CameraModel cam;
  const auto img = render_depth(shapes::square(1.0), {}, cam, {64, 64});
  int inside = 0;
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      const auto xy = pixel_center_world(r, c, 64, 64, cam);
      if (std::abs(xy.x()) < 0.5 && std::abs(xy.y()) < 0.5) ++inside;
    }
  }
  EXPECT_EQ(static_cast<int>(img.count_nonzero()), inside);
}

TEST(Render, SphereDepthAgainstAnalytic) {
  const CameraModel cam;
  const RenderSize size{129, 129};
  const auto img = render_depth(shapes::icosphere(4), {}, cam, size);
  const int mid = 64;
  const auto centre = img.at(mid, mid);
  // The tessellated sphere lies inside the unit sphere, so its depth is never
  // smaller than the analytic sphere's, and close to it near the centre.
  for (int c = mid; c < size.width; ++c) {
    const auto v = img.at(mid, c);
    if (v == 0) break;
    EXPECT_GE(v, centre);
    if (c > mid) {
      EXPECT_GE(v + 1, img.at(mid, c - 1));
    }
    const auto xy = pixel_center_world(mid, c, size.width, size.height, cam);
    const double rho2 = xy.squaredNorm();
    if (rho2 < 0.81) {
      const double analytic = cam.distance - std::sqrt(1.0 - rho2);
      EXPECT_GE(img.metric_depth(v), analytic - cam.depth_scale());
      EXPECT_LT(img.metric_depth(v) - analytic, 0.01);
    }
  }
  EXPECT_NEAR(img.metric_depth(centre), cam.distance - 1.0, 0.01);
}

TEST(Render, Deterministic) {
  Rng rng(2);
  const auto q = sample_uniform_so3(rng);
  EXPECT_EQ(render_depth(shapes::l_bracket(), q, {}), render_depth(shapes::l_bracket(), q, {}));
}

TEST(Render, RotatingVerticesMatchesOrientation) {
  Rng rng(3);
  for (int n = 0; n < 5; ++n) {
    const auto q = sample_uniform_so3(rng);
    auto mesh = shapes::offset_tee();
    const auto img = render_depth(mesh, q, {});
    const auto m = to_matrix(q);
    for (auto& v : mesh.vertices) v = m * v;
    EXPECT_EQ(render_depth(mesh, {}, {}), img);
  }
}

TEST(Occlusion, AllBackgroundThrows) {
  DepthImage img(8, 8, 1.0, 0.0);
  Rng rng(4);
  EXPECT_THROW(occlude_rectangle(img, rng), NoObjectPixels);
}

TEST(Occlusion, InteriorRectangleArea) {
  const auto img = full_image(200, 200);
  Rng rng(5);
  int checked = 0;
  for (int n = 0; n < 200; ++n) {
    const double length = 40.0, thick = 6.0;
    const auto out = occlude_rectangle(img, rng, {length, length, thick, thick});
    EXPECT_TRUE(subset_of_nonzero(out, img));
    bool clipped = false;
    for (int r = 0; r < 200 && !clipped; ++r) {
      for (int c = 0; c < 200; ++c) {
        if ((r == 0 || c == 0 || r == 199 || c == 199) && out.at(r, c) == 0) {
          clipped = true;
          break;
        }
      }
    }
    if (clipped) continue;
    ++checked;
    const double zeroed = static_cast<double>(img.values.size() - out.count_nonzero());
    EXPECT_LE(std::abs(zeroed - length * thick), 2 * (length + thick));
  }
  EXPECT_GT(checked, 100);
}

TEST(Occlusion, NeverAddsPixels) {
  Rng rng(6);
  const auto img = render_depth(shapes::l_bracket(), sample_uniform_so3(rng), {});
  for (int n = 0; n < 20; ++n) {
    const auto out = occlude_rectangle(img, rng);
    EXPECT_TRUE(subset_of_nonzero(out, img));
    EXPECT_LT(out.count_nonzero(), img.count_nonzero());
  }
}

TEST(Occlusion, ScaledConfig) {
  const auto s = OcclusionConfig{}.scaled_for(32);
  EXPECT_DOUBLE_EQ(s.min_length, 5.0);
  EXPECT_DOUBLE_EQ(s.max_length, 15.0);
  EXPECT_DOUBLE_EQ(s.min_thickness, 1.0);
  EXPECT_DOUBLE_EQ(s.max_thickness, 2.5);
}

TEST(Dropout, Extremes) {
  const auto img = full_image(50, 50);
  Rng rng(7);
  EXPECT_EQ(dropout_pixels(img, 0.0, rng), img);
  EXPECT_EQ(dropout_pixels(img, 1.0, rng).count_nonzero(), 0u);
  EXPECT_THROW(dropout_pixels(img, 1.5, rng), ConfigError);
  EXPECT_THROW(dropout_pixels(img, -0.1, rng), ConfigError);
}

TEST(Dropout, BinomialBound) {
  const auto img = full_image(100, 100);
  Rng rng(8);
  const auto out = dropout_pixels(img, 0.1, rng);
  const double zeroed = 10000.0 - static_cast<double>(out.count_nonzero());
  EXPECT_LE(std::abs(zeroed - 1000.0), 4 * 30.0);
  EXPECT_TRUE(subset_of_nonzero(out, img));
}

TEST(PointCloud, CentrePixel) {
  const CameraModel cam;
  DepthImage img(5, 5, cam.depth_scale(), cam.depth_offset());
  img.at(2, 2) = 30000;
  const auto cloud = to_point_cloud(img, cam);
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_NEAR(cloud.points[0].x(), 0.0, 1e-15);
  EXPECT_NEAR(cloud.points[0].y(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(cloud.points[0].z(), cam.depth_offset() + 30000 * cam.depth_scale());
}

TEST(PointCloud, EmptyThrows) {
  DepthImage img(4, 4, 1.0, 0.0);
  EXPECT_THROW(to_point_cloud(img, CameraModel{}), NoObjectPixels);
}

TEST(PointCloud, FlatSquareRoundTrip) {
  const CameraModel cam;
  auto sq = shapes::square(1.2);
  for (auto& v : sq.vertices) v.z() = 0.37;
  const auto cloud = to_point_cloud(render_depth(sq, {}, cam), cam);
  for (const auto& p : cloud.points) EXPECT_LE(std::abs(p.z() - (cam.distance - 0.37)), cam.depth_scale());
}

TEST(PointCloud, WorldFrameLiesOnCubeSurface) {
  const CameraModel cam;
  Rng rng(9);
  const auto q = sample_uniform_so3(rng);
  const auto world = camera_to_world(to_point_cloud(render_depth(shapes::cube(), q, cam), cam), cam);
  const double half = 1.0 / std::sqrt(3.0);
  const auto inv = to_matrix(q).transpose();
  for (const auto& p : world.points) {
    const Eigen::Vector3d local = inv * p;
    // Inside the cube and on (within one depth step of) its surface.
    EXPECT_LE(local.cwiseAbs().maxCoeff(), half + 2 * cam.depth_scale());
    EXPECT_GE(local.cwiseAbs().maxCoeff(), half - 2 * cam.depth_scale());
  }
}

TEST(Pgm, HeaderAndBigEndian) {
  DepthImage img(2, 1, 1.0, 0.0);
  img.values = {0x0102, 0xA0B0};
  const auto bytes = encode_pgm(img);
  const std::string header = "P5\n2 1\n65535\n";
  ASSERT_EQ(bytes.size(), header.size() + 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + header.size()), header);
  EXPECT_EQ(bytes[header.size()], 0x01);
  EXPECT_EQ(bytes[header.size() + 1], 0x02);
  EXPECT_EQ(bytes[header.size() + 2], 0xA0);
  EXPECT_EQ(bytes[header.size() + 3], 0xB0);
}

TEST(Pgm, WriteReadRoundTrip) {
  TempDir dir("pgm");
  const CameraModel cam;
  Rng rng(10);
  const auto img = render_depth(shapes::wedge(), sample_uniform_so3(rng), cam);
  write_depth_image(img, cam, dir / "w.pgm");
  EXPECT_TRUE(std::filesystem::exists(dir / "w.json"));
  const auto back = read_depth_image(dir / "w.pgm");
  EXPECT_EQ(back.image, img);
  EXPECT_EQ(back.camera, cam);
}

TEST(Pgm, ReadErrors) {
  TempDir dir("pgm");
  EXPECT_THROW(read_depth_image(dir / "missing.pgm"), IoError);
  const CameraModel cam;
  const auto img = render_depth(shapes::cube(), {}, cam, {16, 16});
  write_depth_image(img, cam, dir / "c.pgm");
  auto bytes = reorient::testing::read_bytes(dir / "c.pgm");
  bytes.resize(bytes.size() - 3);
  {
    std::ofstream out(dir / "c.pgm", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_THROW(read_depth_image(dir / "c.pgm"), IoError);
  {
    std::ofstream out(dir / "d.pgm", std::ios::binary);
    out << "P2\n1 1\n255\n0\n";
  }
  EXPECT_THROW(read_depth_image(dir / "d.pgm"), IoError);
}

TEST(Golden, CubeIdentityRender) {
  const auto golden = reorient::testing::read_bytes(reorient::testing::source_dir() / "tests/golden/cube_identity.pgm");
  ASSERT_FALSE(golden.empty());
  const CameraModel cam;
  const auto img = render_depth(shapes::cube(), {}, cam);
  EXPECT_EQ(encode_pgm(img), golden);
  const double half = 1.0 / std::sqrt(3.0);
  std::size_t inside = 0;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const auto xy = pixel_center_world(r, c, img.width, img.height, cam);
      if (std::abs(xy.x()) < half && std::abs(xy.y()) < half) {
        ++inside;
        EXPECT_EQ(img.at(r, c), quantize_depth(cam.distance - half, cam));
      }
    }
  }
  EXPECT_EQ(img.count_nonzero(), inside);
}
