#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reorient/quaternion.hpp"

namespace reorient {

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> triangles;
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Checks index bounds, finiteness and non-emptiness; throws EmptyMesh or ParseError.
void validate_mesh(const TriangleMesh& mesh);

/// Recentres at the vertex centroid and scales the farthest vertex to radius 1.
TriangleMesh to_canonical_frame(TriangleMesh mesh);

/// Reads the v/f subset of Wavefront OBJ; polygons are fan-triangulated.
/// The result is in the canonical frame.
TriangleMesh load_obj(const std::filesystem::path& path);

/// Writes vertices and faces only (1-based indices, 17 significant digits).
void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

/// All vertices if there are at most `cap`, otherwise `cap` distinct ones
/// drawn uniformly without replacement.
PointCloud sample_vertices(const TriangleMesh& mesh, std::size_t cap, Rng& rng);

PointCloud vertices_of(const TriangleMesh& mesh);

PointCloud rotate_cloud(const PointCloud& cloud, const UnitQuaternion& q);

/// min over the cloud of the squared distance to x (brute force).
double chamfer_min_term(const Eigen::Vector3d& x, const PointCloud& cloud);

/// Mean nearest squared distance a->b plus b->a.
double chamfer_distance(const PointCloud& a, const PointCloud& b);

/// Smallest chamfer distance between the vertex set and its image under
/// 120 and 180 degree rotations about x, y and z. Near zero means symmetric.
double symmetry_score(const TriangleMesh& mesh);

/// Symmetric when score < threshold_factor * radius^2; radius is 1 in the
/// canonical frame. A zero factor never flags.
bool is_symmetric(double score, double threshold_factor = 1e-3, double radius = 1.0);

void write_cloud_csv(const PointCloud& cloud, const std::filesystem::path& path);

/// Procedural shapes used by tests, demos and the bundled corpus. Returned
/// meshes are already in the canonical frame.
namespace shapes {

TriangleMesh box(double sx, double sy, double sz);
TriangleMesh cube();
TriangleMesh regular_tetrahedron();
TriangleMesh icosphere(int subdivisions);
/// Flat square in the z = 0 plane, facing +z, side length `side`. Not canonicalized.
TriangleMesh square(double side);
/// Union of axis-aligned boxes given as (min corner, max corner); faces are
/// not merged, which is fine for rendering and vertex sampling.
TriangleMesh union_of_boxes(const std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>>& boxes);
/// Extruded L profile with unequal arms.
TriangleMesh l_bracket();
/// Asymmetric shapes used for learning experiments.
TriangleMesh stepped_block();
TriangleMesh offset_tee();
TriangleMesh wedge();

}  // namespace shapes

}  // namespace reorient
