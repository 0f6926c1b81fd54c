#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "reorient/config.hpp"
#include "reorient/error.hpp"
#include "reorient/mesh.hpp"
#include "reorient/render.hpp"

namespace reorient {

struct DatasetConfig {
  RenderSize size{};
  CameraModel camera{};
  /// Occluder and pixel dropout on the start image.
  bool randomize = true;
  OcclusionConfig occlusion{};
  double dropout = kDefaultDropout;
  Radians max_angle = kMaxRelativeAngle;
  /// Test hook: relative rotation fixed to the identity.
  bool force_identity = false;

  /// Defaults for the given image size with occluder sizes scaled to match.
  static DatasetConfig for_size(int width, int height);

  KeyValueConfig to_key_values() const;
  /// Reads the keys written by to_key_values; absent keys keep their defaults.
  static DatasetConfig from_key_values(const KeyValueConfig& kv);
};

struct DatasetRecord {
  DepthImage start_image;
  DepthImage goal_image;
  /// Relative rotation sR^g with goal = relative * start.
  UnitQuaternion relative_rotation;
  std::string object_id;
  UnitQuaternion start_orientation;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct NamedMesh {
  std::string id;
  TriangleMesh mesh;
};

/// Samples a start orientation and a constrained relative rotation, renders
/// both views and randomizes the start view.
DatasetRecord generate_record(const TriangleMesh& mesh, const std::string& object_id, Rng& rng,
                              const DatasetConfig& cfg);

/// Seed for record `index` of `object_id`; independent of generation order.
std::uint64_t record_seed(std::uint64_t global_seed, const std::string& object_id,
                          std::uint64_t index);

struct ManifestEntry {
  std::string object_id;
  std::string start_path;  // relative to the manifest directory
  std::string goal_path;
  UnitQuaternion relative_rotation;
  UnitQuaternion start_orientation;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::filesystem::path path;
  std::uint64_t seed = 0;
  DatasetConfig config{};
  std::vector<ManifestEntry> records;
};

inline constexpr const char* kManifestName = "manifest.jsonl";

/**
 * Writes `per_object` records for every mesh under out_dir:
 * `<object>/<i>_s.pgm`, `<object>/<i>_g.pgm` (each with a JSON sidecar),
 * `manifest.jsonl` and `config.txt`. Output depends only on the meshes,
 * the config and the seed, whatever the thread count.
 */
DatasetManifest generate_dataset(const std::vector<NamedMesh>& meshes, int per_object,
                                 std::uint64_t seed, const DatasetConfig& cfg,
                                 const std::filesystem::path& out_dir, int threads = 1);

DatasetManifest read_manifest(const std::filesystem::path& manifest_path);

/// Loads every record and re-checks the rotation constraints.
/// Throws IoError or ConstraintViolation.
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& manifest_path);

/// Object-level split: the first floor(n * fraction) shuffled items train.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_test(std::vector<T> items,
                                                           double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  const std::size_t n = items.size();
  const auto n_train = static_cast<std::size_t>(std::floor(n * train_fraction + 1e-9));
  if (n_train == 0 || n_train >= n) {
    throw TooFewObjects("split of " + std::to_string(n) + " objects leaves one side empty");
  }
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(items[i - 1], items[pick(rng)]);
  }
  std::vector<T> train(std::make_move_iterator(items.begin()),
                       std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(n_train)));
  std::vector<T> test(std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(n_train)),
                      std::make_move_iterator(items.end()));
  return {std::move(train), std::move(test)};
}

/// Loads every *.obj in a directory (sorted by name); ids are file stems.
std::vector<NamedMesh> load_mesh_directory(const std::filesystem::path& dir);

}  // namespace reorient
