#include "reorient/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "reorient/error.hpp"

namespace reorient {

void validate_mesh(const TriangleMesh& mesh) {
  if (mesh.vertices.empty() || mesh.triangles.empty()) {
    throw EmptyMesh("mesh needs at least one vertex and one triangle");
  }
  const int n = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (int idx : t) {
      if (idx < 0 || idx >= n) {
        throw ParseError("triangle index " + std::to_string(idx) + " out of range");
      }
    }
  }
  for (const auto& v : mesh.vertices) {
    if (!v.allFinite()) {
      throw ParseError("non-finite vertex coordinate");
    }
  }
}

TriangleMesh to_canonical_frame(TriangleMesh mesh) {
  validate_mesh(mesh);
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& v : mesh.vertices) centroid += v;
  centroid /= static_cast<double>(mesh.vertices.size());
  double radius = 0.0;
  for (auto& v : mesh.vertices) {
    v -= centroid;
    radius = std::max(radius, v.norm());
  }
  if (radius <= 0.0) {
    throw EmptyMesh("all vertices coincide");
  }
  for (auto& v : mesh.vertices) v /= radius;
  return mesh;
}

namespace {

int parse_face_index(const std::string& token, int vertex_count, int line_no) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoi(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad face index '" + token + "'");
  }
  // OBJ indices are 1-based; negative ones count back from the last vertex.
  const int resolved = idx > 0 ? idx - 1 : vertex_count + idx;
  if (idx == 0 || resolved < 0 || resolved >= vertex_count) {
    throw ParseError("line " + std::to_string(line_no) + ": face index out of range");
  }
  return resolved;
}

}  // namespace

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open " + path.string());
  }
  TriangleMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed vertex");
      }
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      const int n = static_cast<int>(mesh.vertices.size());
      while (ls >> tok) idx.push_back(parse_face_index(tok, n, line_no));
      if (idx.size() < 3) {
        throw ParseError("line " + std::to_string(line_no) + ": face with fewer than 3 vertices");
      }
      for (std::size_t t = 1; t + 1 < idx.size(); ++t) {
        mesh.triangles.push_back({idx[0], idx[t], idx[t + 1]});
      }
    }
    // vn, vt, usemtl, o, g, s, ... are ignored.
  }
  if (mesh.triangles.empty()) {
    throw EmptyMesh(path.string() + " has no faces");
  }
  return to_canonical_frame(std::move(mesh));
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) {
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

PointCloud vertices_of(const TriangleMesh& mesh) { return PointCloud{mesh.vertices}; }

PointCloud sample_vertices(const TriangleMesh& mesh, std::size_t cap, Rng& rng) {
  const std::size_t n = mesh.vertices.size();
  if (n <= cap) {
    return vertices_of(mesh);
  }
  // Partial Fisher-Yates over an index permutation.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < cap; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  PointCloud out;
  out.points.reserve(cap);
  for (std::size_t i = 0; i < cap; ++i) out.points.push_back(mesh.vertices[idx[i]]);
  return out;
}

PointCloud rotate_cloud(const PointCloud& cloud, const UnitQuaternion& q) {
  const RotationMatrix3 m = to_matrix(q);
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(m * p);
  return out;
}

double chamfer_min_term(const Eigen::Vector3d& x, const PointCloud& cloud) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : cloud.points) {
    best = std::min(best, (x - p).squaredNorm());
  }
  return best;
}

namespace {

double directed_mean(const PointCloud& from, const PointCloud& to) {
  double sum = 0.0;
  for (const auto& p : from.points) sum += chamfer_min_term(p, to);
  return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) {
    throw EmptyMesh("chamfer distance of an empty cloud");
  }
  return directed_mean(a, b) + directed_mean(b, a);
}

double symmetry_score(const TriangleMesh& mesh) {
  validate_mesh(mesh);
  const PointCloud cloud = vertices_of(mesh);
  const std::array<Eigen::Vector3d, 3> axes{Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                                            Eigen::Vector3d::UnitZ()};
  double best = std::numeric_limits<double>::infinity();
  for (double deg : {120.0, 180.0}) {
    for (const auto& axis : axes) {
      const auto q = UnitQuaternion::from_axis_angle(axis, deg2rad(deg));
      best = std::min(best, chamfer_distance(cloud, rotate_cloud(cloud, q)));
    }
  }
  return best;
}

bool is_symmetric(double score, double threshold_factor, double radius) {
  return score < threshold_factor * radius * radius;
}

void write_cloud_csv(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << "x,y,z\n" << std::setprecision(17);
  for (const auto& p : cloud.points) out << p.x() << ',' << p.y() << ',' << p.z() << '\n';
}

namespace shapes {

namespace {

void append_box(TriangleMesh& mesh, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  const int base = static_cast<int>(mesh.vertices.size());
  for (int c = 0; c < 8; ++c) {
    mesh.vertices.emplace_back((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(),
                               (c & 4) ? hi.z() : lo.z());
  }
  // Outward-facing quads, each split into two triangles.
  static constexpr std::array<std::array<int, 4>, 6> kQuads{{
      {0, 2, 3, 1},  // -z
      {4, 5, 7, 6},  // +z
      {0, 1, 5, 4},  // -y
      {2, 6, 7, 3},  // +y
      {0, 4, 6, 2},  // -x
      {1, 3, 7, 5},  // +x
  }};
  for (const auto& q : kQuads) {
    mesh.triangles.push_back({base + q[0], base + q[1], base + q[2]});
    mesh.triangles.push_back({base + q[0], base + q[2], base + q[3]});
  }
}

}  // namespace

TriangleMesh box(double sx, double sy, double sz) {
  TriangleMesh mesh;
  const Eigen::Vector3d h(sx / 2, sy / 2, sz / 2);
  append_box(mesh, -h, h);
  return to_canonical_frame(std::move(mesh));
}

TriangleMesh cube() { return box(1.0, 1.0, 1.0); }

TriangleMesh regular_tetrahedron() {
  TriangleMesh mesh;
  mesh.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  mesh.triangles = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  return to_canonical_frame(std::move(mesh));
}

TriangleMesh icosphere(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh mesh;
  mesh.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                   {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : mesh.vertices) v.normalize();
  mesh.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                    {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                    {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                    {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoints.find(key); it != midpoints.end()) return it->second;
      mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
      const int idx = static_cast<int>(mesh.vertices.size()) - 1;
      midpoints.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(mesh.triangles.size() * 4);
    for (const auto& tri : mesh.triangles) {
      const int ab = midpoint(tri[0], tri[1]);
      const int bc = midpoint(tri[1], tri[2]);
      const int ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    mesh.triangles = std::move(next);
  }
  return to_canonical_frame(std::move(mesh));
}

TriangleMesh square(double side) {
  const double h = side / 2.0;
  TriangleMesh mesh;
  mesh.vertices = {{-h, -h, 0}, {h, -h, 0}, {h, h, 0}, {-h, h, 0}};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
  return mesh;
}

TriangleMesh union_of_boxes(
    const std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>>& boxes) {
  TriangleMesh mesh;
  for (const auto& [lo, hi] : boxes) append_box(mesh, lo, hi);
  return to_canonical_frame(std::move(mesh));
}

TriangleMesh l_bracket() {
  return union_of_boxes({{{0, 0, 0}, {3.0, 1.0, 0.8}}, {{0, 1.0, 0}, {1.0, 2.0, 0.8}}});
}

TriangleMesh stepped_block() {
  return union_of_boxes({{{0, 0, 0}, {2.0, 1.2, 0.6}},
                         {{0, 0, 0.6}, {1.2, 1.2, 1.3}},
                         {{0, 0, 1.3}, {0.5, 0.7, 1.9}}});
}

TriangleMesh offset_tee() {
  return union_of_boxes({{{0, 0, 0}, {2.6, 0.6, 0.5}}, {{0.4, 0.6, 0}, {1.0, 2.4, 0.5}},
                         {{0.4, 2.0, 0.5}, {1.0, 2.4, 1.4}}});
}

TriangleMesh wedge() {
  TriangleMesh mesh;
  // Right-triangle prism with a skewed top edge.
  mesh.vertices = {{0, 0, 0}, {2.2, 0, 0}, {0, 1.3, 0}, {0, 0, 0.9}, {2.2, 0, 0.4}, {0, 1.3, 1.5}};
  mesh.triangles = {{0, 2, 1}, {3, 4, 5}, {0, 1, 4}, {0, 4, 3}, {1, 2, 5}, {1, 5, 4},
                    {2, 0, 3}, {2, 3, 5}};
  return to_canonical_frame(std::move(mesh));
}

}  // namespace shapes

}  // namespace reorient
