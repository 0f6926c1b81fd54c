#include "reorient/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "reorient/config.hpp"
#include "reorient/controller.hpp"
#include "reorient/dataset.hpp"
#include "reorient/error.hpp"
#include "reorient/icp.hpp"
#include "reorient/losses.hpp"
#include "reorient/parallel.hpp"
#include "reorient/regressor.hpp"
#include "reorient/training.hpp"

namespace reorient {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  bool force = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Global random seed");
  cmd->add_option("--config", c.config, "key = value configuration file");
  cmd->add_option("--out", c.out, "Output location")->required();
  cmd->add_flag("--force", c.force, "Overwrite existing outputs");
}

template <typename T>
void put(KeyValueConfig& kv, const std::string& key, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_same_v<T, std::string>) {
    kv.set(key, *v);
  } else if constexpr (std::is_floating_point_v<T>) {
    kv.set(key, static_cast<double>(*v));
  } else if constexpr (std::is_same_v<T, bool>) {
    kv.set(key, *v);
  } else {
    kv.set(key, static_cast<std::int64_t>(*v));
  }
}

std::set<std::string> keys_of(const KeyValueConfig& kv) {
  std::set<std::string> out;
  for (const auto& [k, v] : kv.entries()) out.insert(k);
  return out;
}

/// defaults < config file < command-line flags. Unknown keys in the file
/// are rejected; `allowed` always includes the defaults and "seed".
KeyValueConfig resolve(const Common& c, const KeyValueConfig& defaults, const KeyValueConfig& flags,
                       std::set<std::string> allowed) {
  for (const auto& k : keys_of(defaults)) allowed.insert(k);
  allowed.insert("seed");
  KeyValueConfig kv = defaults;
  if (!kv.contains("seed")) kv.set("seed", std::string("0"));
  if (!c.config.empty()) {
    if (!fs::exists(c.config)) throw UsageError("config file not found: " + c.config);
    const KeyValueConfig file = KeyValueConfig::load(c.config);
    file.reject_unknown(allowed);
    kv.merge(file);
  }
  kv.merge(flags);
  if (c.seed) kv.set("seed", std::to_string(*c.seed));
  return kv;
}

std::uint64_t seed_of(const KeyValueConfig& kv) {
  const std::string s = kv.get_string("seed", "0");
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size() || s.find('-') != std::string::npos) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("seed must be a non-negative integer, got '" + s + "'");
  }
}

/// Runs the argument-resolution phase, reporting bad values as usage errors.
template <typename F>
void usage_phase(F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !force) {
      throw IoError(dir.string() + " is not empty (use --force to overwrite)");
    }
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_snapshot(const KeyValueConfig& kv, const fs::path& path, const std::string& command) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# resolved configuration for `reorient " << command << "`\n" << kv.dump();
  if (!out) throw IoError("write failed for " + path.string());
}

CameraModel camera_from(const KeyValueConfig& kv) {
  CameraModel cam;
  cam.half_extent = kv.get_double("camera.half_extent", cam.half_extent);
  cam.distance = kv.get_double("camera.distance", cam.distance);
  cam.near_plane = kv.get_double("camera.near", cam.near_plane);
  cam.far_plane = kv.get_double("camera.far", cam.far_plane);
  cam.validate();
  return cam;
}

void set_camera_defaults(KeyValueConfig& kv) {
  const CameraModel cam;
  kv.set("camera.half_extent", cam.half_extent);
  kv.set("camera.distance", cam.distance);
  kv.set("camera.near", cam.near_plane);
  kv.set("camera.far", cam.far_plane);
}

RenderSize size_from(const KeyValueConfig& kv) {
  RenderSize size;
  size.width = static_cast<int>(kv.get_int("image.width", size.width));
  size.height = static_cast<int>(kv.get_int("image.height", size.width));
  if (size.width < 1 || size.height < 1) throw UsageError("image size must be positive");
  return size;
}

IcpConfig icp_from(const KeyValueConfig& kv) {
  IcpConfig cfg;
  cfg.max_iter = static_cast<int>(kv.get_int("icp.max_iter", cfg.max_iter));
  cfg.tol = kv.get_double("icp.tol", cfg.tol);
  const auto pts = kv.get_int("icp.max_points", static_cast<std::int64_t>(cfg.max_points));
  if (cfg.max_iter < 1 || pts < 3 || cfg.tol < 0.0) throw UsageError("invalid ICP settings");
  cfg.max_points = static_cast<std::size_t>(pts);
  return cfg;
}

void set_icp_defaults(KeyValueConfig& kv) {
  const IcpConfig cfg;
  kv.set("icp.max_iter", cfg.max_iter);
  kv.set("icp.tol", cfg.tol);
  kv.set("icp.max_points", static_cast<std::int64_t>(cfg.max_points));
}

fs::path manifest_path_of(const fs::path& dataset) {
  return fs::is_directory(dataset) ? dataset / kManifestName : dataset;
}

/// Vertex samples per object for ShapeMatch, seeded per object id.
std::map<std::string, PointCloud> mesh_points(const std::vector<NamedMesh>& meshes, std::size_t cap,
                                              std::uint64_t seed) {
  std::map<std::string, PointCloud> out;
  for (const auto& m : meshes) {
    Rng rng(record_seed(seed, m.id, 0));
    out[m.id] = sample_vertices(m.mesh, cap, rng);
  }
  return out;
}

const std::set<std::string> kEstimators{"oracle", "icp", "regressor", "identity"};

// ---------------------------------------------------------------- gen-dataset

struct GenOptions {
  Common c;
  std::optional<std::string> meshes;
  std::optional<int> per_object;
  std::optional<int> size;
};

int cmd_gen_dataset(const GenOptions& o, std::ostream& out) {
  KeyValueConfig defaults = DatasetConfig{}.to_key_values();
  defaults.set("meshes", std::string());
  defaults.set("per_object", 100);
  KeyValueConfig flags;
  put(flags, "meshes", o.meshes);
  put(flags, "per_object", o.per_object);
  put(flags, "image.width", o.size);
  put(flags, "image.height", o.size);

  KeyValueConfig kv;
  DatasetConfig cfg;
  int per_object = 0;
  fs::path mesh_dir;
  std::uint64_t seed = 0;
  usage_phase([&] {
    kv = resolve(o.c, KeyValueConfig{}, flags, keys_of(defaults));
    // Occluder sizes follow the image size unless set explicitly.
    cfg = DatasetConfig::from_key_values(kv);
    per_object = static_cast<int>(kv.get_int("per_object", 100));
    if (per_object < 1) throw UsageError("--per-object must be at least 1");
    mesh_dir = kv.get_string("meshes", "");
    if (mesh_dir.empty()) throw UsageError("--meshes is required");
    seed = seed_of(kv);
  });

  const auto meshes = load_mesh_directory(mesh_dir);
  if (meshes.empty()) throw UsageError("no .obj files in " + mesh_dir.string());
  const fs::path out_dir = o.c.out;
  prepare_output_dir(out_dir, o.c.force);
  const auto manifest = generate_dataset(meshes, per_object, seed, cfg, out_dir, default_thread_count());
  fs::create_directories(out_dir / "meshes");
  for (const auto& m : meshes) write_obj(m.mesh, out_dir / "meshes" / (m.id + ".obj"));

  KeyValueConfig snap = cfg.to_key_values();
  snap.set("meshes", mesh_dir.string());
  snap.set("per_object", per_object);
  snap.set("seed", std::to_string(seed));
  write_snapshot(snap, out_dir / "resolved_config.txt", "gen-dataset");
  out << "manifest: " << manifest.path.string() << '\n' << "records: " << manifest.records.size() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------ symmetry-filter

struct SymmetryOptions {
  Common c;
  std::optional<std::string> meshes;
  std::optional<double> threshold;
};

int cmd_symmetry_filter(const SymmetryOptions& o, std::ostream& out) {
  KeyValueConfig defaults;
  defaults.set("meshes", std::string());
  defaults.set("threshold", 1e-3);
  KeyValueConfig flags;
  put(flags, "meshes", o.meshes);
  put(flags, "threshold", o.threshold);

  KeyValueConfig kv;
  fs::path mesh_dir;
  double threshold = 0.0;
  usage_phase([&] {
    kv = resolve(o.c, defaults, flags, {});
    mesh_dir = kv.get_string("meshes", "");
    if (mesh_dir.empty()) throw UsageError("--meshes is required");
    threshold = kv.get_double("threshold", 1e-3);
    if (!(threshold >= 0.0)) throw UsageError("threshold must be non-negative");
    seed_of(kv);
  });

  const auto meshes = load_mesh_directory(mesh_dir);
  if (meshes.empty()) throw UsageError("no .obj files in " + mesh_dir.string());
  const fs::path out_dir = o.c.out;
  prepare_output_dir(out_dir, o.c.force);

  std::ofstream csv(out_dir / "symmetry.csv");
  std::ofstream kept(out_dir / "kept.txt");
  if (!csv || !kept) throw IoError("cannot write into " + out_dir.string());
  csv << "object_id,score,flagged\n" << std::setprecision(17);
  int flagged = 0;
  for (const auto& m : meshes) {
    const double score = symmetry_score(m.mesh);
    const bool sym = is_symmetric(score, threshold);
    flagged += sym ? 1 : 0;
    csv << m.id << ',' << score << ',' << (sym ? "true" : "false") << '\n';
    if (!sym) kept << m.id << '\n';
  }
  if (!csv || !kept) throw IoError("write failed in " + out_dir.string());
  write_snapshot(kv, out_dir / "resolved_config.txt", "symmetry-filter");
  out << "objects: " << meshes.size() << '\n' << "flagged: " << flagged << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------- train

struct TrainOptions {
  Common c;
  std::optional<std::string> dataset;
  std::optional<std::string> meshes;
  std::optional<std::string> loss;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> val_fraction;
  std::optional<std::string> split;
};

int cmd_train(const TrainOptions& o, std::ostream& out) {
  KeyValueConfig defaults;
  const AdamConfig adam;
  const RegressorShape shape;
  const RegressorModel proto;
  defaults.set("dataset", std::string());
  defaults.set("meshes", std::string());
  defaults.set("loss", std::string("hybrid"));
  defaults.set("epochs", 30);
  defaults.set("batch_size", 32);
  defaults.set("learning_rate", adam.learning_rate);
  defaults.set("lr_decay", adam.decay);
  defaults.set("lr_decay_every", adam.decay_every);
  defaults.set("l2", 1e-9);
  defaults.set("dropout", proto.dropout);
  defaults.set("leaky_slope", proto.leaky_slope);
  defaults.set("input_side", shape.input_side);
  defaults.set("embed", shape.embed);
  defaults.set("hidden", shape.hidden);
  defaults.set("val_fraction", 0.2);
  defaults.set("split", std::string("pair"));
  defaults.set("vertex_cap", 500);
  KeyValueConfig flags;
  put(flags, "dataset", o.dataset);
  put(flags, "meshes", o.meshes);
  put(flags, "loss", o.loss);
  put(flags, "epochs", o.epochs);
  put(flags, "batch_size", o.batch_size);
  put(flags, "val_fraction", o.val_fraction);
  put(flags, "split", o.split);

  KeyValueConfig kv;
  TrainConfig tc;
  RegressorShape model_shape;
  double dropout = 0.0, slope = 0.0, val_fraction = 0.0;
  std::string split;
  fs::path dataset, mesh_dir;
  std::size_t vertex_cap = 0;
  std::uint64_t seed = 0;
  usage_phase([&] {
    kv = resolve(o.c, defaults, flags, {});
    dataset = kv.get_string("dataset", "");
    if (dataset.empty()) throw UsageError("--dataset is required");
    mesh_dir = kv.get_string("meshes", "");
    tc.loss = parse_loss_kind(kv.get_string("loss", "hybrid"));
    tc.epochs = static_cast<int>(kv.get_int("epochs", 30));
    tc.batch_size = static_cast<int>(kv.get_int("batch_size", 32));
    tc.adam.learning_rate = kv.get_double("learning_rate", adam.learning_rate);
    tc.adam.decay = kv.get_double("lr_decay", adam.decay);
    tc.adam.decay_every = static_cast<int>(kv.get_int("lr_decay_every", adam.decay_every));
    tc.l2 = kv.get_double("l2", 1e-9);
    dropout = kv.get_double("dropout", proto.dropout);
    slope = kv.get_double("leaky_slope", proto.leaky_slope);
    model_shape.input_side = static_cast<int>(kv.get_int("input_side", shape.input_side));
    model_shape.embed = static_cast<int>(kv.get_int("embed", shape.embed));
    model_shape.hidden = static_cast<int>(kv.get_int("hidden", shape.hidden));
    val_fraction = kv.get_double("val_fraction", 0.2);
    split = kv.get_string("split", "pair");
    const auto cap = kv.get_int("vertex_cap", 500);
    seed = seed_of(kv);
    if (tc.epochs < 1) throw UsageError("epochs must be at least 1");
    if (tc.batch_size < 1) throw UsageError("batch_size must be at least 1");
    if (tc.adam.learning_rate < 0.0 || tc.adam.decay <= 0.0 || tc.adam.decay_every < 1) {
      throw UsageError("invalid learning-rate schedule");
    }
    if (tc.l2 < 0.0) throw UsageError("l2 must be non-negative");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
    if (model_shape.input_side < 1 || model_shape.embed < 1 || model_shape.hidden < 1) {
      throw UsageError("layer sizes must be positive");
    }
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw UsageError("val_fraction must lie in (0, 1)");
    if (split != "pair" && split != "object") throw UsageError("split must be 'pair' or 'object'");
    if (cap < 1) throw UsageError("vertex_cap must be at least 1");
    vertex_cap = static_cast<std::size_t>(cap);
  });
  tc.seed = record_seed(seed, "shuffle", 0);

  const fs::path manifest = manifest_path_of(dataset);
  if (!fs::exists(manifest)) throw IoError("dataset not found: " + manifest.string());
  auto records = read_dataset(manifest);
  if (records.empty()) throw IoError("dataset " + manifest.string() + " has no records");

  Rng split_rng(record_seed(seed, "split", 0));
  std::vector<DatasetRecord> train_records, val_records;
  if (split == "pair") {
    std::tie(train_records, val_records) = split_train_test(std::move(records), 1.0 - val_fraction, split_rng);
  } else {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.object_id);
    auto [train_ids, val_ids] =
        split_train_test(std::vector<std::string>(ids.begin(), ids.end()), 1.0 - val_fraction, split_rng);
    const std::set<std::string> train_set(train_ids.begin(), train_ids.end());
    for (auto& r : records) (train_set.count(r.object_id) ? train_records : val_records).push_back(std::move(r));
  }

  std::map<std::string, PointCloud> points;
  if (tc.loss != LossKind::Mean) {
    if (mesh_dir.empty()) mesh_dir = manifest.parent_path() / "meshes";
    points = mesh_points(load_mesh_directory(mesh_dir), vertex_cap, record_seed(seed, "vertices", 0));
  }

  const auto train_samples = make_samples(train_records, model_shape.input_side);
  const auto val_samples = make_samples(val_records, model_shape.input_side);
  Rng init_rng(record_seed(seed, "init", 0));
  RegressorModel model = RegressorModel::initialized(model_shape, init_rng);
  model.dropout = dropout;
  model.leaky_slope = slope;

  const fs::path out_dir = o.c.out;
  prepare_output_dir(out_dir, o.c.force);
  const auto metrics = train(model, train_samples, val_samples, points, tc, [&](const EpochMetrics& m) {
    out << "epoch " << m.epoch << " loss=" << m.loss_name << " lr=" << m.learning_rate
        << " train_loss=" << m.train_loss << " val_mean_angle_deg=" << m.val_mean_angle_deg << '\n';
  });
  save_model(model, out_dir / "model.bin");
  write_metrics_csv(metrics, out_dir / "metrics.csv");
  KeyValueConfig snap = kv;
  if (!mesh_dir.empty()) snap.set("meshes", mesh_dir.string());
  write_snapshot(snap, out_dir / "resolved_config.txt", "train");
  out << "train pairs: " << train_samples.size() << " validation pairs: " << val_samples.size() << '\n'
      << "validation mean angle error: " << metrics.back().val_mean_angle_deg
      << " deg (identity baseline " << identity_baseline_deg(val_samples) << " deg)\n";
  return kExitOk;
}

// ------------------------------------------------------------- eval-estimator

struct EvalOptions {
  Common c;
  std::optional<std::string> dataset;
  std::optional<std::string> meshes;
  std::optional<std::string> estimator;
  std::optional<std::string> model;
  std::optional<double> noise_ratio;
};

int cmd_eval_estimator(const EvalOptions& o, std::ostream& out) {
  KeyValueConfig defaults;
  defaults.set("dataset", std::string());
  defaults.set("meshes", std::string());
  defaults.set("estimator", std::string("oracle"));
  defaults.set("model", std::string());
  defaults.set("noise_ratio", 0.0);
  defaults.set("bin_width_deg", 5.0);
  defaults.set("vertex_cap", 500);
  set_icp_defaults(defaults);
  KeyValueConfig flags;
  put(flags, "dataset", o.dataset);
  put(flags, "meshes", o.meshes);
  put(flags, "estimator", o.estimator);
  put(flags, "model", o.model);
  put(flags, "noise_ratio", o.noise_ratio);

  KeyValueConfig kv;
  fs::path dataset, mesh_dir, model_path;
  std::string estimator;
  OracleNoise noise;
  double bin_width = 0.0;
  IcpConfig icp;
  std::size_t vertex_cap = 0;
  std::uint64_t seed = 0;
  usage_phase([&] {
    kv = resolve(o.c, defaults, flags, {});
    dataset = kv.get_string("dataset", "");
    if (dataset.empty()) throw UsageError("--dataset is required");
    mesh_dir = kv.get_string("meshes", "");
    estimator = kv.get_string("estimator", "oracle");
    if (!kEstimators.count(estimator)) throw UsageError("unknown estimator '" + estimator + "'");
    model_path = kv.get_string("model", "");
    if (estimator == "regressor" && model_path.empty()) throw UsageError("--model is required for the regressor");
    noise.ratio = kv.get_double("noise_ratio", 0.0);
    if (!(noise.ratio >= 0.0)) throw UsageError("noise_ratio must be non-negative");
    bin_width = kv.get_double("bin_width_deg", 5.0);
    if (!(bin_width > 0.0)) throw UsageError("bin_width_deg must be positive");
    icp = icp_from(kv);
    const auto cap = kv.get_int("vertex_cap", 500);
    if (cap < 1) throw UsageError("vertex_cap must be at least 1");
    vertex_cap = static_cast<std::size_t>(cap);
    seed = seed_of(kv);
  });

  const fs::path manifest_path = manifest_path_of(dataset);
  if (!fs::exists(manifest_path)) throw IoError("dataset not found: " + manifest_path.string());
  const DatasetManifest manifest = read_manifest(manifest_path);
  const auto records = read_dataset(manifest_path);
  std::optional<RegressorModel> model;
  if (estimator == "regressor") model = load_model(model_path);
  if (mesh_dir.empty() && fs::is_directory(manifest_path.parent_path() / "meshes")) {
    mesh_dir = manifest_path.parent_path() / "meshes";
  }
  std::map<std::string, PointCloud> points;
  if (!mesh_dir.empty()) {
    points = mesh_points(load_mesh_directory(mesh_dir), vertex_cap, record_seed(seed, "vertices", 0));
  }

  struct Row {
    double true_deg = 0.0;
    double err_deg = 0.0;
    std::optional<double> shapematch;
  };
  std::vector<Row> rows(records.size());
  parallel_for(records.size(), default_thread_count(), [&](std::size_t n) {
    const DatasetRecord& r = records[n];
    UnitQuaternion q_hat;
    if (estimator == "oracle") {
      Rng rng(record_seed(seed, r.object_id, n));
      q_hat = oracle_predict(r.relative_rotation, noise, rng).q_hat;
    } else if (estimator == "icp") {
      q_hat = icp_predict(r.start_image, r.goal_image, manifest.config.camera, icp).q_hat;
    } else if (estimator == "regressor") {
      const int side = model->shape().input_side;
      Rng unused(0);
      q_hat = regressor_forward(*model, prepare_input(r.start_image, side), prepare_input(r.goal_image, side),
                                Mode::Eval, unused)
                  .estimate.q_hat;
    }
    rows[n].true_deg = quat_to_angle(r.relative_rotation).degrees();
    rows[n].err_deg = angle_between(q_hat, r.relative_rotation).degrees();
    if (const auto it = points.find(r.object_id); it != points.end()) {
      rows[n].shapematch = shapematch_loss(r.relative_rotation, q_hat, it->second).value;
    }
  });

  const fs::path out_dir = o.c.out;
  prepare_output_dir(out_dir, o.c.force);
  std::ofstream csv(out_dir / "samples.csv");
  if (!csv) throw IoError("cannot write into " + out_dir.string());
  csv << "index,object_id,true_angle_deg,err_deg,identity_err_deg,shapematch_loss\n" << std::setprecision(17);
  struct Bin {
    int count = 0;
    double err = 0.0, identity = 0.0;
  };
  std::map<long, Bin> bins;
  std::vector<double> errs;
  double err_sum = 0.0, identity_sum = 0.0;
  for (std::size_t n = 0; n < rows.size(); ++n) {
    const Row& row = rows[n];
    csv << n << ',' << records[n].object_id << ',' << row.true_deg << ',' << row.err_deg << ','
        << row.true_deg << ',';
    if (row.shapematch) csv << *row.shapematch;
    csv << '\n';
    Bin& b = bins[static_cast<long>(std::floor(row.true_deg / bin_width))];
    ++b.count;
    b.err += row.err_deg;
    b.identity += row.true_deg;
    errs.push_back(row.err_deg);
    err_sum += row.err_deg;
    identity_sum += row.true_deg;
  }
  if (!csv) throw IoError("write failed for samples.csv");

  std::ofstream bcsv(out_dir / "bins.csv");
  if (!bcsv) throw IoError("cannot write into " + out_dir.string());
  bcsv << "bin_lo_deg,bin_hi_deg,count,mean_err_deg,mean_identity_err_deg\n" << std::setprecision(17);
  for (const auto& [idx, b] : bins) {
    bcsv << idx * bin_width << ',' << (idx + 1) * bin_width << ',' << b.count << ',' << b.err / b.count << ','
         << b.identity / b.count << '\n';
  }
  if (!bcsv) throw IoError("write failed for bins.csv");

  const double count = static_cast<double>(rows.size());
  nlohmann::json summary;
  summary["estimator"] = estimator;
  summary["count"] = rows.size();
  summary["mean_err_deg"] = err_sum / count;
  summary["median_err_deg"] = percentile(errs, 50.0);
  summary["mean_identity_err_deg"] = identity_sum / count;
  std::ofstream js(out_dir / "summary.json");
  js << summary.dump(2) << '\n';
  if (!js) throw IoError("write failed for summary.json");

  write_snapshot(kv, out_dir / "resolved_config.txt", "eval-estimator");
  out << "samples: " << rows.size() << '\n'
      << "mean error: " << err_sum / count << " deg (identity baseline " << identity_sum / count << " deg)\n";
  return kExitOk;
}

// ------------------------------------------------------------- run-controller

struct ControllerOptions {
  Common c;
  std::optional<std::string> meshes;
  std::optional<std::string> estimator;
  std::optional<std::string> model;
  std::optional<double> noise_ratio;
  std::optional<std::string> composition;
  std::optional<double> eta;
  std::optional<double> delta;
  std::optional<int> max_iterations;
  std::optional<int> trials;
};

int cmd_run_controller(const ControllerOptions& o, std::ostream& out) {
  const ControllerConfig cdef;
  KeyValueConfig defaults;
  defaults.set("meshes", std::string());
  defaults.set("estimator", std::string("oracle"));
  defaults.set("model", std::string());
  defaults.set("noise_ratio", 0.0);
  defaults.set("K", cdef.max_iterations);
  defaults.set("eta", cdef.eta);
  defaults.set("delta_deg", cdef.delta_deg);
  defaults.set("composition", to_string(cdef.composition));
  defaults.set("trials_per_object", 20);
  defaults.set("initial_angle_deg", 30.0);
  defaults.set("image.width", 128);
  defaults.set("image.height", 128);
  defaults.set("randomize_captures", false);
  defaults.set("capture_dropout", kDefaultDropout);
  defaults.set("write_traces", false);
  set_camera_defaults(defaults);
  set_icp_defaults(defaults);
  KeyValueConfig flags;
  put(flags, "meshes", o.meshes);
  put(flags, "estimator", o.estimator);
  put(flags, "model", o.model);
  put(flags, "noise_ratio", o.noise_ratio);
  put(flags, "composition", o.composition);
  put(flags, "eta", o.eta);
  put(flags, "delta_deg", o.delta);
  put(flags, "K", o.max_iterations);
  put(flags, "trials_per_object", o.trials);

  KeyValueConfig kv;
  EvaluationConfig ec;
  fs::path mesh_dir, model_path;
  std::string estimator;
  OracleNoise noise;
  IcpConfig icp;
  bool write_traces = false;
  std::uint64_t seed = 0;
  usage_phase([&] {
    kv = resolve(o.c, defaults, flags, {});
    mesh_dir = kv.get_string("meshes", "");
    if (mesh_dir.empty()) throw UsageError("--meshes is required");
    estimator = kv.get_string("estimator", "oracle");
    if (!kEstimators.count(estimator)) throw UsageError("unknown estimator '" + estimator + "'");
    model_path = kv.get_string("model", "");
    if (estimator == "regressor" && model_path.empty()) throw UsageError("--model is required for the regressor");
    noise.ratio = kv.get_double("noise_ratio", 0.0);
    if (!(noise.ratio >= 0.0)) throw UsageError("noise_ratio must be non-negative");
    ec.controller.max_iterations = static_cast<int>(kv.get_int("K", cdef.max_iterations));
    ec.controller.eta = kv.get_double("eta", cdef.eta);
    ec.controller.delta_deg = kv.get_double("delta_deg", cdef.delta_deg);
    ec.controller.composition = parse_composition(kv.get_string("composition", "left"));
    ec.controller.validate();
    ec.trials_per_object = static_cast<int>(kv.get_int("trials_per_object", 20));
    if (ec.trials_per_object < 1) throw UsageError("trials must be at least 1");
    ec.initial_angle_deg = kv.get_double("initial_angle_deg", 30.0);
    if (!(ec.initial_angle_deg >= 0.0 && ec.initial_angle_deg <= 180.0)) {
      throw UsageError("initial_angle_deg must lie in [0, 180]");
    }
    ec.size = size_from(kv);
    ec.camera = camera_from(kv);
    ec.randomize_captures = kv.get_bool("randomize_captures", false);
    ec.occlusion = OcclusionConfig{}.scaled_for(ec.size.width);
    ec.dropout = kv.get_double("capture_dropout", kDefaultDropout);
    if (!(ec.dropout >= 0.0 && ec.dropout <= 1.0)) throw UsageError("capture_dropout must lie in [0, 1]");
    write_traces = kv.get_bool("write_traces", false);
    icp = icp_from(kv);
    seed = seed_of(kv);
  });
  ec.threads = default_thread_count();

  const auto meshes = load_mesh_directory(mesh_dir);
  if (meshes.empty()) throw UsageError("no .obj files in " + mesh_dir.string());
  std::optional<RegressorModel> model;
  if (estimator == "regressor") {
    model = load_model(model_path);
    if (ec.size.width != ec.size.height || ec.size.width % model->shape().input_side != 0) {
      throw ShapeMismatch("image size does not pool to the model input size");
    }
  }

  const fs::path out_dir = o.c.out;
  prepare_output_dir(out_dir, o.c.force);
  if (write_traces) {
    ec.trace_dir = out_dir / "traces";
    fs::create_directories(ec.trace_dir);
  }
  const CameraModel cam = ec.camera;
  EstimatorFactory factory = [&](SimEnvironment& env, std::uint64_t trial_seed) -> std::unique_ptr<RotationEstimator> {
    if (estimator == "oracle") {
      return std::make_unique<OracleEstimator>([&env] { return env.true_relative_rotation(); }, noise, trial_seed);
    }
    if (estimator == "icp") return std::make_unique<IcpEstimator>(cam, icp);
    if (estimator == "regressor") return std::make_unique<RegressorEstimator>(*model);
    return std::make_unique<IdentityEstimator>();
  };
  const EvaluationSummary summary = evaluate_controller(meshes, factory, seed, ec);
  write_trials_csv(summary, out_dir / "trials.csv");
  write_summary_json(summary, ec, estimator, seed, out_dir / "summary.json");
  write_snapshot(kv, out_dir / "resolved_config.txt", "run-controller");

  std::vector<double> conv;
  for (const auto& t : summary.trials) {
    if (t.converged_at >= 0) conv.push_back(t.converged_at);
  }
  out << "trials: " << summary.trials.size() << '\n'
      << "convergence rate: " << summary.convergence_rate << '\n'
      << "median final error: " << summary.median_final_err_deg << " deg\n"
      << "mean final error: " << summary.mean_final_err_deg << " deg\n"
      << "p90 final error: " << summary.p90_final_err_deg << " deg\n";
  if (!conv.empty()) out << "median convergence iteration: " << percentile(conv, 50.0) << '\n';
  return kExitOk;
}

// --------------------------------------------------------------------- render

struct RenderOptions {
  Common c;
  std::optional<std::string> mesh;
  std::optional<std::string> shape;
  std::optional<std::string> quaternion;
  std::optional<int> size;
};

TriangleMesh named_shape(const std::string& name) {
  if (name == "cube") return shapes::cube();
  if (name == "tetrahedron") return shapes::regular_tetrahedron();
  if (name == "icosphere") return shapes::icosphere(2);
  if (name == "l_bracket") return shapes::l_bracket();
  if (name == "stepped_block") return shapes::stepped_block();
  if (name == "offset_tee") return shapes::offset_tee();
  if (name == "wedge") return shapes::wedge();
  throw UsageError("unknown shape '" + name + "'");
}

UnitQuaternion parse_quaternion(const std::string& text) {
  std::vector<double> c;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      c.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("quaternion component '" + item + "' is not a number");
    }
  }
  if (c.size() != 4) throw UsageError("quaternion needs four comma-separated components r,i,j,k");
  const double norm = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3]);
  if (!(std::abs(norm - 1.0) <= 1e-6)) {
    throw UsageError("quaternion norm is " + format_double(norm) + ", expected 1");
  }
  return UnitQuaternion::normalize(c[0], c[1], c[2], c[3]);
}

int cmd_render(const RenderOptions& o, std::ostream& out) {
  KeyValueConfig defaults;
  defaults.set("mesh", std::string());
  defaults.set("shape", std::string());
  defaults.set("q", std::string("1,0,0,0"));
  defaults.set("image.width", 128);
  defaults.set("image.height", 128);
  set_camera_defaults(defaults);
  KeyValueConfig flags;
  put(flags, "mesh", o.mesh);
  put(flags, "shape", o.shape);
  put(flags, "q", o.quaternion);
  put(flags, "image.width", o.size);
  put(flags, "image.height", o.size);

  KeyValueConfig kv;
  UnitQuaternion q;
  RenderSize size;
  CameraModel cam;
  std::string mesh_path, shape;
  usage_phase([&] {
    kv = resolve(o.c, defaults, flags, {});
    q = parse_quaternion(kv.get_string("q", "1,0,0,0"));
    size = size_from(kv);
    cam = camera_from(kv);
    mesh_path = kv.get_string("mesh", "");
    shape = kv.get_string("shape", "");
    if (mesh_path.empty() == shape.empty()) throw UsageError("give exactly one of --mesh or --shape");
    seed_of(kv);
  });
  const TriangleMesh mesh = mesh_path.empty() ? named_shape(shape) : load_obj(mesh_path);

  const fs::path out_path = o.c.out;
  if (fs::exists(out_path) && !o.c.force) {
    throw IoError(out_path.string() + " already exists (use --force to overwrite)");
  }
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  const DepthImage img = render_depth(mesh, q, cam, size);
  write_depth_image(img, cam, out_path);
  write_snapshot(kv, out_path.parent_path() / (out_path.stem().string() + ".config.txt"), "render");
  out << "wrote " << out_path.string() << " (" << img.count_nonzero() << " object pixels)\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth-image object reorientation: datasets, estimators and closed-loop control", "reorient"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-dataset", "Render a seeded dataset of start/goal depth pairs");
  add_common(gen_cmd, gen.c);
  gen_cmd->add_option("--meshes", gen.meshes, "Directory of .obj meshes");
  gen_cmd->add_option("--per-object", gen.per_object, "Pairs per mesh");
  gen_cmd->add_option("--size", gen.size, "Image width and height in pixels");

  SymmetryOptions sym;
  auto* sym_cmd = app.add_subcommand("symmetry-filter", "Score meshes for rotational symmetry");
  add_common(sym_cmd, sym.c);
  sym_cmd->add_option("--meshes", sym.meshes, "Directory of .obj meshes");
  sym_cmd->add_option("--threshold", sym.threshold, "Flag when score < threshold * radius^2");

  TrainOptions tr;
  auto* tr_cmd = app.add_subcommand("train", "Train the quaternion regressor");
  add_common(tr_cmd, tr.c);
  tr_cmd->add_option("--dataset", tr.dataset, "Dataset directory or manifest");
  tr_cmd->add_option("--meshes", tr.meshes, "Mesh directory for ShapeMatch (default: <dataset>/meshes)");
  tr_cmd->add_option("--loss", tr.loss, "mean | shapematch | hybrid");
  tr_cmd->add_option("--epochs", tr.epochs, "Training epochs");
  tr_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size");
  tr_cmd->add_option("--val-fraction", tr.val_fraction, "Held-out fraction");
  tr_cmd->add_option("--split", tr.split, "pair | object");

  EvalOptions ev;
  auto* ev_cmd = app.add_subcommand("eval-estimator", "Per-sample rotation errors on a dataset");
  add_common(ev_cmd, ev.c);
  ev_cmd->add_option("--dataset", ev.dataset, "Dataset directory or manifest");
  ev_cmd->add_option("--meshes", ev.meshes, "Mesh directory for the ShapeMatch column");
  ev_cmd->add_option("--estimator", ev.estimator, "oracle | icp | regressor | identity");
  ev_cmd->add_option("--model", ev.model, "Model file for the regressor");
  ev_cmd->add_option("--noise-ratio", ev.noise_ratio, "Oracle noise ratio");

  ControllerOptions ct;
  auto* ct_cmd = app.add_subcommand("run-controller", "Closed-loop reorientation trials");
  add_common(ct_cmd, ct.c);
  ct_cmd->add_option("--meshes", ct.meshes, "Directory of .obj meshes");
  ct_cmd->add_option("--estimator", ct.estimator, "oracle | icp | regressor | identity");
  ct_cmd->add_option("--model", ct.model, "Model file for the regressor");
  ct_cmd->add_option("--noise-ratio", ct.noise_ratio, "Oracle noise ratio");
  ct_cmd->add_option("--composition", ct.composition, "right | left");
  ct_cmd->add_option("--eta", ct.eta, "Slerp step size in (0, 1]");
  ct_cmd->add_option("--delta", ct.delta, "Stop threshold on the predicted angle, degrees");
  ct_cmd->add_option("--max-iterations", ct.max_iterations, "Iteration cap K");
  ct_cmd->add_option("--trials", ct.trials, "Trials per mesh");

  RenderOptions rd;
  auto* rd_cmd = app.add_subcommand("render", "Render one depth image to PGM");
  add_common(rd_cmd, rd.c);
  rd_cmd->add_option("--mesh", rd.mesh, ".obj file");
  rd_cmd->add_option("--shape", rd.shape, "Built-in shape instead of a file");
  rd_cmd->add_option("--quaternion,-q", rd.quaternion, "Orientation r,i,j,k");
  rd_cmd->add_option("--size", rd.size, "Image width and height in pixels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_dataset(gen, out);
    if (*sym_cmd) return cmd_symmetry_filter(sym, out);
    if (*tr_cmd) return cmd_train(tr, out);
    if (*ev_cmd) return cmd_eval_estimator(ev, out);
    if (*ct_cmd) return cmd_run_controller(ct, out);
    if (*rd_cmd) return cmd_render(rd, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace reorient
