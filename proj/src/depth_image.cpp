#include "reorient/depth_image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <json.hpp>

#include "reorient/error.hpp"

namespace reorient {

void CameraModel::validate() const {
  if (!(half_extent > 0.0)) throw ConfigError("camera half_extent must be positive");
  if (!(near_plane < far_plane)) throw ConfigError("camera near plane must be before far plane");
  if (half_extent < 1.0 || near_plane > distance - 1.0 || far_plane < distance + 1.0) {
    throw ConfigError("camera frustum does not contain the unit sphere");
  }
}

std::size_t DepthImage::count_nonzero() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](std::uint16_t v) { return v != 0; }));
}

std::uint16_t quantize_depth(double depth, const CameraModel& cam) {
  const double code = std::round((depth - cam.depth_offset()) / cam.depth_scale());
  return static_cast<std::uint16_t>(std::clamp(code, 1.0, 65535.0));
}

double dequantize_depth(std::uint16_t code, const CameraModel& cam) {
  return cam.depth_offset() + code * cam.depth_scale();
}

std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path) {
  auto p = pgm_path;
  p.replace_extension(".json");
  return p;
}

std::vector<unsigned char> encode_pgm(const DepthImage& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n65535\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.reserve(header.size() + img.values.size() * 2);
  for (std::uint16_t v : img.values) {
    bytes.push_back(static_cast<unsigned char>(v >> 8));
    bytes.push_back(static_cast<unsigned char>(v & 0xff));
  }
  return bytes;
}

void write_depth_image(const DepthImage& img, const CameraModel& cam,
                       const std::filesystem::path& pgm_path) {
  const auto bytes = encode_pgm(img);
  {
    std::ofstream out(pgm_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + pgm_path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + pgm_path.string());
  }
  nlohmann::ordered_json meta;
  meta["width"] = img.width;
  meta["height"] = img.height;
  meta["depth_scale"] = img.depth_scale;
  meta["depth_offset"] = img.depth_offset;
  meta["camera"] = {{"projection", "orthographic"},
                    {"half_extent", cam.half_extent},
                    {"distance", cam.distance},
                    {"near", cam.near_plane},
                    {"far", cam.far_plane}};
  std::ofstream side(sidecar_path(pgm_path));
  if (!side) throw IoError("cannot write " + sidecar_path(pgm_path).string());
  side << meta.dump(2) << '\n';
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::vector<unsigned char>& buf, std::size_t& pos) {
  for (;;) {
    while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
    if (pos < buf.size() && buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(buf[pos])) tok.push_back(static_cast<char>(buf[pos++]));
  return tok;
}

int parse_positive(const std::string& tok, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw IoError("bad PGM " + what + " '" + tok + "'");
}

}  // namespace

StoredDepthImage read_depth_image(const std::filesystem::path& pgm_path) {
  std::ifstream in(pgm_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + pgm_path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  if (next_token(buf, pos) != "P5") throw IoError(pgm_path.string() + " is not a binary PGM");
  const int w = parse_positive(next_token(buf, pos), "width");
  const int h = parse_positive(next_token(buf, pos), "height");
  if (parse_positive(next_token(buf, pos), "maxval") != 65535) {
    throw IoError(pgm_path.string() + " is not a 16-bit PGM");
  }
  ++pos;  // single whitespace byte after maxval
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (buf.size() < pos + 2 * n) throw IoError(pgm_path.string() + " is truncated");

  std::ifstream side(sidecar_path(pgm_path));
  if (!side) throw IoError("missing sidecar " + sidecar_path(pgm_path).string());
  nlohmann::json meta;
  try {
    side >> meta;
    StoredDepthImage out;
    const auto& c = meta.at("camera");
    out.camera = CameraModel{c.at("half_extent").get<double>(), c.at("distance").get<double>(),
                             c.at("near").get<double>(), c.at("far").get<double>()};
    if (meta.at("width").get<int>() != w || meta.at("height").get<int>() != h) {
      throw IoError("sidecar size disagrees with " + pgm_path.string());
    }
    out.image = DepthImage(w, h, meta.at("depth_scale").get<double>(),
                           meta.at("depth_offset").get<double>());
    for (std::size_t i = 0; i < n; ++i) {
      out.image.values[i] =
          static_cast<std::uint16_t>((buf[pos + 2 * i] << 8) | buf[pos + 2 * i + 1]);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad sidecar for " + pgm_path.string() + ": " + e.what());
  }
}

}  // namespace reorient
