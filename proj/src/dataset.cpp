#include "reorient/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "reorient/parallel.hpp"

namespace reorient {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

nlohmann::json quat_json(const UnitQuaternion& q) { return q.to_array(); }

UnitQuaternion quat_from_json(const nlohmann::json& j) {
  const auto q = UnitQuaternion::from_unit_components(j.get<std::array<double, 4>>());
  if (!q) throw ConstraintViolation("stored quaternion is not unit norm");
  return *q;
}

}  // namespace

DatasetConfig DatasetConfig::for_size(int width, int height) {
  DatasetConfig cfg;
  cfg.size = {width, height};
  cfg.occlusion = OcclusionConfig{}.scaled_for(width);
  return cfg;
}

KeyValueConfig DatasetConfig::to_key_values() const {
  KeyValueConfig kv;
  kv.set("image.width", size.width);
  kv.set("image.height", size.height);
  kv.set("camera.half_extent", camera.half_extent);
  kv.set("camera.distance", camera.distance);
  kv.set("camera.near", camera.near_plane);
  kv.set("camera.far", camera.far_plane);
  kv.set("randomize", randomize);
  kv.set("occlusion.min_length", occlusion.min_length);
  kv.set("occlusion.max_length", occlusion.max_length);
  kv.set("occlusion.min_thickness", occlusion.min_thickness);
  kv.set("occlusion.max_thickness", occlusion.max_thickness);
  kv.set("dropout", dropout);
  kv.set("max_angle_rad", max_angle.value);
  return kv;
}

DatasetConfig DatasetConfig::from_key_values(const KeyValueConfig& kv) {
  const int w = static_cast<int>(kv.get_int("image.width", 128));
  const int h = static_cast<int>(kv.get_int("image.height", w));
  DatasetConfig cfg = for_size(w, h);
  cfg.camera.half_extent = kv.get_double("camera.half_extent", cfg.camera.half_extent);
  cfg.camera.distance = kv.get_double("camera.distance", cfg.camera.distance);
  cfg.camera.near_plane = kv.get_double("camera.near", cfg.camera.near_plane);
  cfg.camera.far_plane = kv.get_double("camera.far", cfg.camera.far_plane);
  cfg.randomize = kv.get_bool("randomize", cfg.randomize);
  cfg.occlusion.min_length = kv.get_double("occlusion.min_length", cfg.occlusion.min_length);
  cfg.occlusion.max_length = kv.get_double("occlusion.max_length", cfg.occlusion.max_length);
  cfg.occlusion.min_thickness = kv.get_double("occlusion.min_thickness", cfg.occlusion.min_thickness);
  cfg.occlusion.max_thickness = kv.get_double("occlusion.max_thickness", cfg.occlusion.max_thickness);
  cfg.dropout = kv.get_double("dropout", cfg.dropout);
  cfg.max_angle.value = kv.get_double("max_angle_rad", cfg.max_angle.value);
  if (cfg.max_angle.value <= 0.0 || cfg.max_angle.value > kMaxRelativeAngle.value + 1e-12) {
    throw ConfigError("max_angle_rad must lie in (0, pi/6]");
  }
  cfg.camera.validate();
  return cfg;
}

DatasetRecord generate_record(const TriangleMesh& mesh, const std::string& object_id, Rng& rng,
                              const DatasetConfig& cfg) {
  DatasetRecord rec;
  rec.object_id = object_id;
  rec.start_orientation = sample_uniform_so3(rng);
  rec.relative_rotation =
      cfg.force_identity ? UnitQuaternion::identity() : sample_constrained(rng, cfg.max_angle);
  const UnitQuaternion goal = rec.relative_rotation * rec.start_orientation;
  rec.start_image = render_depth(mesh, rec.start_orientation, cfg.camera, cfg.size);
  rec.goal_image = render_depth(mesh, goal, cfg.camera, cfg.size);
  if (cfg.randomize) {
    rec.start_image = occlude_rectangle(rec.start_image, rng, cfg.occlusion);
    rec.start_image = dropout_pixels(rec.start_image, cfg.dropout, rng);
  }
  return rec;
}

std::uint64_t record_seed(std::uint64_t global_seed, const std::string& object_id,
                          std::uint64_t index) {
  return splitmix64(splitmix64(global_seed ^ fnv1a(object_id)) + index);
}

DatasetManifest generate_dataset(const std::vector<NamedMesh>& meshes, int per_object,
                                 std::uint64_t seed, const DatasetConfig& cfg,
                                 const std::filesystem::path& out_dir, int threads) {
  if (per_object < 1) throw ConfigError("per_object must be at least 1");
  if (meshes.empty()) throw TooFewObjects("no meshes to generate from");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  for (const auto& m : meshes) {
    std::filesystem::create_directories(out_dir / m.id, ec);
    if (ec) throw IoError("cannot create " + (out_dir / m.id).string() + ": " + ec.message());
  }

  DatasetManifest manifest;
  manifest.path = out_dir / kManifestName;
  manifest.seed = seed;
  manifest.config = cfg;
  manifest.records.resize(meshes.size() * static_cast<std::size_t>(per_object));

  parallel_for(manifest.records.size(), threads, [&](std::size_t n) {
    const auto& named = meshes[n / per_object];
    const std::size_t i = n % per_object;
    Rng rng(record_seed(seed, named.id, i));
    const DatasetRecord rec = generate_record(named.mesh, named.id, rng, cfg);
    ManifestEntry e;
    e.object_id = named.id;
    e.start_path = named.id + "/" + std::to_string(i) + "_s.pgm";
    e.goal_path = named.id + "/" + std::to_string(i) + "_g.pgm";
    e.relative_rotation = rec.relative_rotation;
    e.start_orientation = rec.start_orientation;
    write_depth_image(rec.start_image, cfg.camera, out_dir / e.start_path);
    write_depth_image(rec.goal_image, cfg.camera, out_dir / e.goal_path);
    manifest.records[n] = std::move(e);
  });

  const KeyValueConfig kv = cfg.to_key_values();
  kv.write(out_dir / "config.txt");

  std::ofstream out(manifest.path);
  if (!out) throw IoError("cannot write " + manifest.path.string());
  nlohmann::ordered_json header;
  header["format"] = "reorient-dataset";
  header["version"] = 1;
  header["count"] = manifest.records.size();
  header["seed"] = seed;
  header["config"] = kv.entries();
  out << header.dump() << '\n';
  for (const auto& e : manifest.records) {
    nlohmann::ordered_json j;
    j["object_id"] = e.object_id;
    j["start"] = e.start_path;
    j["goal"] = e.goal_path;
    j["q"] = quat_json(e.relative_rotation);
    j["start_orientation"] = quat_json(e.start_orientation);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + manifest.path.string());
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  DatasetManifest manifest;
  manifest.path = manifest_path;
  std::string line;
  std::size_t expected = 0;
  bool have_header = false;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.value("format", "") != "reorient-dataset") {
          throw IoError(manifest_path.string() + " is not a dataset manifest");
        }
        expected = j.at("count").get<std::size_t>();
        manifest.seed = j.at("seed").get<std::uint64_t>();
        KeyValueConfig kv;
        for (const auto& [k, v] : j.at("config").items()) kv.set(k, v.get<std::string>());
        manifest.config = DatasetConfig::from_key_values(kv);
        have_header = true;
        continue;
      }
      ManifestEntry e;
      e.object_id = j.at("object_id").get<std::string>();
      e.start_path = j.at("start").get<std::string>();
      e.goal_path = j.at("goal").get<std::string>();
      e.relative_rotation = quat_from_json(j.at("q"));
      e.start_orientation = quat_from_json(j.at("start_orientation"));
      manifest.records.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!have_header) throw IoError(manifest_path.string() + " has no header line");
  if (manifest.records.size() != expected) {
    throw IoError("manifest lists " + std::to_string(manifest.records.size()) +
                  " records, header says " + std::to_string(expected));
  }
  return manifest;
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& manifest_path) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  const auto root = manifest_path.parent_path();
  std::vector<DatasetRecord> out;
  out.reserve(manifest.records.size());
  for (const auto& e : manifest.records) {
    if (!satisfies_constraints(e.relative_rotation, manifest.config.max_angle)) {
      throw ConstraintViolation("record " + e.start_path + " has an out-of-range rotation");
    }
    DatasetRecord rec;
    rec.object_id = e.object_id;
    rec.relative_rotation = e.relative_rotation;
    rec.start_orientation = e.start_orientation;
    rec.start_image = read_depth_image(root / e.start_path).image;
    rec.goal_image = read_depth_image(root / e.goal_path).image;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<NamedMesh> load_mesh_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw IoError("mesh directory " + dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".obj") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<NamedMesh> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back({f.stem().string(), load_obj(f)});
  return out;
}

}  // namespace reorient
