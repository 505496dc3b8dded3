#pragma once

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spherebev/camera.hpp"
#include "spherebev/feature_map.hpp"
#include "spherebev/grid.hpp"
#include "spherebev/ground_truth.hpp"
#include "spherebev/sampling.hpp"
#include "spherebev/sync.hpp"

namespace spherebev::io {

/// File read/parse failure carrying the offending path and, when known, the
/// byte offset where decoding stopped making sense.
class IoError : public std::runtime_error {
 public:
  IoError(std::filesystem::path path, std::optional<std::size_t> byte_offset,
          const std::string& message)
      : std::runtime_error(format(path, byte_offset, message)),
        path_(std::move(path)), byte_offset_(byte_offset) {}

  const std::filesystem::path& path() const { return path_; }
  std::optional<std::size_t> byte_offset() const { return byte_offset_; }

 private:
  static std::string format(const std::filesystem::path& path,
                            std::optional<std::size_t> offset, const std::string& message) {
    std::string out = path.string();
    if (offset) out += " (byte " + std::to_string(*offset) + ")";
    out += ": " + message;
    return out;
  }

  std::filesystem::path path_;
  std::optional<std::size_t> byte_offset_;
};

namespace detail {

inline std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, std::nullopt, "cannot open file");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_all(const std::filesystem::path& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, std::nullopt, "cannot open file for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path, std::nullopt, "write failed");
}

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<char>& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class Reader {
 public:
  Reader(const std::filesystem::path& path, std::span<const char> bytes)
      : path_(path), bytes_(bytes) {}

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }

  void expect_magic(const char (&magic)[5]) {
    if (remaining() < 4 || std::memcmp(bytes_.data() + offset_, magic, 4) != 0) {
      throw IoError(path_, offset_, std::string("bad magic, expected '") + magic + "'");
    }
    offset_ += 4;
  }

  std::uint32_t u32(const char* what) {
    if (remaining() < 4) throw IoError(path_, offset_, std::string("truncated ") + what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[offset_ + i])) << (8 * i);
    }
    offset_ += 4;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  void read_f32_block(std::span<float> out, const char* what) {
    if (remaining() < out.size() * 4) {
      throw IoError(path_, bytes_.size(),
                    std::string("truncated ") + what + ": expected " +
                        std::to_string(out.size() * 4 - remaining()) + " more bytes");
    }
    for (float& f : out) f = f32(what);
  }

  void expect_end() {
    if (remaining() != 0) throw IoError(path_, offset_, "trailing bytes after payload");
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw IoError(path_, offset_, message);
  }

 private:
  const std::filesystem::path& path_;
  std::span<const char> bytes_;
  std::size_t offset_ = 0;
};

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline nlohmann::json parse_json(const std::filesystem::path& path) {
  const std::vector<char> bytes = read_all(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path, e.byte, e.what());
  }
}

}  // namespace detail

// --- PGM (binary P5; labels stored as 0/255) -------------------------------

struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

inline void write_pgm(const std::filesystem::path& path, const LabelGrid& grid) {
  std::vector<char> out;
  const std::string header =
      "P5\n" + std::to_string(grid.n()) + " " + std::to_string(grid.n()) + "\n255\n";
  out.insert(out.end(), header.begin(), header.end());
  for (const std::uint8_t v : grid.data()) out.push_back(v ? static_cast<char>(255) : 0);
  detail::write_all(path, out);
}

inline PgmImage read_pgm(const std::filesystem::path& path) {
  const std::vector<char> bytes = detail::read_all(path);
  std::size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < bytes.size()) {  // skip whitespace and '#' comment lines
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw IoError(path, start, "unexpected end of PGM header");
    return std::string(bytes.data() + start, pos - start);
  };
  auto number = [&](const char* what) -> std::size_t {
    const std::size_t at = pos;
    const std::string tok = token();
    std::size_t value = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
      throw IoError(path, at, std::string("bad PGM ") + what);
    }
    return value;
  };

  if (token() != "P5") throw IoError(path, 0, "not a binary PGM (expected P5)");
  PgmImage img;
  img.width = number("width");
  img.height = number("height");
  const std::size_t maxval = number("maxval");
  if (maxval == 0 || maxval > 255) throw IoError(path, pos, "unsupported PGM maxval");
  if (pos >= bytes.size()) throw IoError(path, pos, "missing PGM payload");
  ++pos;  // single whitespace byte after maxval
  const std::size_t expected = img.width * img.height;
  if (bytes.size() - pos < expected) {
    throw IoError(path, bytes.size(), "truncated PGM payload");
  }
  img.pixels.resize(expected);
  std::memcpy(img.pixels.data(), bytes.data() + pos, expected);
  return img;
}

/// Binds a PGM image to a grid geometry; any nonzero pixel is a positive label.
inline LabelGrid label_grid_from_pgm(const PgmImage& img, const GridSpec& spec,
                                     const std::filesystem::path& path = {}) {
  if (img.width != spec.n() || img.height != spec.n()) {
    throw IoError(path, std::nullopt,
                  "PGM dimensions " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + " do not match the " +
                      std::to_string(spec.n()) + "-cell grid");
  }
  LabelGrid grid(spec, 0);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    grid.data()[i] = img.pixels[i] ? 1 : 0;
  }
  return grid;
}

// --- f32 raster ("BEVR": magic, version, cells per side, resolution) -------

inline void write_raster(const std::filesystem::path& path, const ValueGrid& grid) {
  std::vector<char> out;
  out.insert(out.end(), {'B', 'E', 'V', 'R'});
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(grid.n()));
  detail::put_f32(out, static_cast<float>(grid.spec().resolution()));
  for (const double v : grid.data()) detail::put_f32(out, static_cast<float>(v));
  detail::write_all(path, out);
}

inline ValueGrid read_raster(const std::filesystem::path& path) {
  const std::vector<char> bytes = detail::read_all(path);
  detail::Reader reader(path, bytes);
  reader.expect_magic("BEVR");
  const std::uint32_t version = reader.u32("version");
  if (version != 1) reader.fail("unsupported raster version " + std::to_string(version));
  const std::uint32_t side = reader.u32("side");
  const float resolution = reader.f32("resolution");
  if (side == 0 || !(resolution > 0.0f)) reader.fail("invalid raster geometry");
  GridSpec spec(static_cast<double>(side) * static_cast<double>(resolution),
                static_cast<double>(resolution));
  if (spec.n() != side) reader.fail("inconsistent raster geometry");
  ValueGrid grid(spec, 0.0);
  std::vector<float> payload(grid.data().size());
  reader.read_f32_block(payload, "raster payload");
  reader.expect_end();
  for (std::size_t i = 0; i < payload.size(); ++i) grid.data()[i] = payload[i];
  return grid;
}

// --- feature map ("FMAP": magic, C, H, W) -----------------------------------

inline void write_feature_map(const std::filesystem::path& path, const FeatureMap& fm) {
  std::vector<char> out;
  out.insert(out.end(), {'F', 'M', 'A', 'P'});
  detail::put_u32(out, static_cast<std::uint32_t>(fm.channels()));
  detail::put_u32(out, static_cast<std::uint32_t>(fm.height()));
  detail::put_u32(out, static_cast<std::uint32_t>(fm.width()));
  for (const float v : fm.data()) detail::put_f32(out, v);
  detail::write_all(path, out);
}

inline FeatureMap read_feature_map(const std::filesystem::path& path) {
  const std::vector<char> bytes = detail::read_all(path);
  detail::Reader reader(path, bytes);
  reader.expect_magic("FMAP");
  const std::uint32_t channels = reader.u32("channel count");
  const std::uint32_t height = reader.u32("height");
  const std::uint32_t width = reader.u32("width");
  if (channels == 0 || height == 0 || width == 0) reader.fail("invalid feature map dimensions");
  FeatureMap fm(channels, height, width);
  reader.read_f32_block(fm.data(), "feature map payload");
  reader.expect_end();
  for (std::size_t i = 0; i < fm.data().size(); ++i) {
    if (!std::isfinite(fm.data()[i])) {
      throw IoError(path, 16 + i * 4, "non-finite feature value");
    }
  }
  return fm;
}

// --- offset grids ride in the FMAP container (C=2: x then y channel) -------

inline void write_vector_grid(const std::filesystem::path& path, const VectorGrid& grid) {
  FeatureMap fm(2, grid.n(), grid.n());
  for (std::size_t r = 0; r < grid.n(); ++r) {
    for (std::size_t c = 0; c < grid.n(); ++c) {
      fm.at(0, r, c) = static_cast<float>(grid.at(r, c).x);
      fm.at(1, r, c) = static_cast<float>(grid.at(r, c).y);
    }
  }
  write_feature_map(path, fm);
}

inline VectorGrid read_vector_grid(const std::filesystem::path& path, const GridSpec& spec) {
  const std::vector<char> bytes = detail::read_all(path);
  detail::Reader reader(path, bytes);
  reader.expect_magic("FMAP");
  const std::uint32_t channels = reader.u32("channel count");
  const std::uint32_t height = reader.u32("height");
  const std::uint32_t width = reader.u32("width");
  if (channels != 2) reader.fail("vector grid needs exactly 2 channels");
  if (height != spec.n() || width != spec.n()) reader.fail("vector grid does not match the grid spec");
  std::vector<float> payload(2 * spec.n() * spec.n());
  reader.read_f32_block(payload, "vector grid payload");
  reader.expect_end();
  VectorGrid grid(spec);
  const std::size_t plane = spec.n() * spec.n();
  for (std::size_t i = 0; i < plane; ++i) {
    grid.data()[i] = {payload[i], payload[plane + i]};
  }
  return grid;
}

// --- JSON codecs ------------------------------------------------------------

inline void write_calibration(const std::filesystem::path& path, const CameraCalibration& cal) {
  nlohmann::json j;
  j["coeffs"] = cal.coeffs();
  j["width"] = cal.width();
  j["height"] = cal.height();
  j["epsilon"] = cal.epsilon();
  const std::string text = j.dump(2) + "\n";
  detail::write_all(path, {text.data(), text.size()});
}

inline CameraCalibration read_calibration(const std::filesystem::path& path) {
  const nlohmann::json j = detail::parse_json(path);
  try {
    const auto& coeffs = j.at("coeffs");
    if (!coeffs.is_array() || coeffs.size() != 5) {
      throw IoError(path, std::nullopt, "calibration needs exactly 5 coefficients");
    }
    std::array<double, 5> a{};
    for (std::size_t i = 0; i < 5; ++i) a[i] = coeffs[i].get<double>();
    return CameraCalibration(a, j.at("width").get<int>(), j.at("height").get<int>(),
                             j.at("epsilon").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path, std::nullopt, e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(path, std::nullopt, e.what());
  }
}

inline void write_annotations(const std::filesystem::path& path,
                              std::span<const BoundingBox3D> boxes) {
  nlohmann::json arr = nlohmann::json::array();
  for (const BoundingBox3D& box : boxes) {
    nlohmann::json j;
    j["center"] = {box.center.x, box.center.y, box.center.z};
    j["rotation"] = {box.rotation.x, box.rotation.y, box.rotation.z};
    j["size"] = {box.size.length, box.size.width, box.size.height};
    j["class"] = to_string(box.class_label);
    if (box.sensor_distance) j["sensor_distance"] = *box.sensor_distance;
    if (box.point_count) j["point_count"] = *box.point_count;
    arr.push_back(std::move(j));
  }
  const std::string text = arr.dump(2) + "\n";
  detail::write_all(path, {text.data(), text.size()});
}

inline std::vector<BoundingBox3D> read_annotations(const std::filesystem::path& path) {
  const nlohmann::json arr = detail::parse_json(path);
  if (!arr.is_array()) throw IoError(path, std::nullopt, "annotations must be a JSON array");
  std::vector<BoundingBox3D> boxes;
  boxes.reserve(arr.size());
  try {
    for (const auto& j : arr) {
      BoundingBox3D box;
      const auto& center = j.at("center");
      const auto& rotation = j.at("rotation");
      const auto& size = j.at("size");
      if (center.size() != 3 || rotation.size() != 3 || size.size() != 3) {
        throw IoError(path, std::nullopt, "box fields center/rotation/size need 3 components");
      }
      box.center = {center[0].get<double>(), center[1].get<double>(), center[2].get<double>()};
      box.rotation = {rotation[0].get<double>(), rotation[1].get<double>(),
                      rotation[2].get<double>()};
      box.size = {size[0].get<double>(), size[1].get<double>(), size[2].get<double>()};
      const auto label = class_from_string(j.at("class").get<std::string>());
      if (!label) {
        throw IoError(path, std::nullopt,
                      "unknown class '" + j.at("class").get<std::string>() + "'");
      }
      box.class_label = *label;
      if (j.contains("sensor_distance")) box.sensor_distance = j["sensor_distance"].get<double>();
      if (j.contains("point_count")) box.point_count = j["point_count"].get<std::int64_t>();
      box.validate();
      boxes.push_back(box);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path, std::nullopt, e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(path, std::nullopt, e.what());
  }
  return boxes;
}

inline void write_decoder(const std::filesystem::path& path, const AffineMeanDecoder& decoder) {
  nlohmann::json j;
  j["weights"] = decoder.weights();
  j["bias"] = decoder.bias();
  const std::string text = j.dump(2) + "\n";
  detail::write_all(path, {text.data(), text.size()});
}

inline AffineMeanDecoder read_decoder(const std::filesystem::path& path) {
  const nlohmann::json j = detail::parse_json(path);
  try {
    return AffineMeanDecoder(j.at("weights").get<std::vector<double>>(),
                             j.at("bias").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path, std::nullopt, e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(path, std::nullopt, e.what());
  }
}

// --- raw points (little-endian float32 XYZ triples) -------------------------

inline void write_points(const std::filesystem::path& path, std::span<const Point3> points) {
  std::vector<char> out;
  out.reserve(points.size() * 12);
  for (const Point3& p : points) {
    detail::put_f32(out, static_cast<float>(p.x));
    detail::put_f32(out, static_cast<float>(p.y));
    detail::put_f32(out, static_cast<float>(p.z));
  }
  detail::write_all(path, out);
}

inline std::vector<Point3> read_points(const std::filesystem::path& path) {
  const std::vector<char> bytes = detail::read_all(path);
  if (bytes.size() % 12 != 0) {
    throw IoError(path, bytes.size() - bytes.size() % 12,
                  "point payload is not a whole number of float32 XYZ triples");
  }
  detail::Reader reader(path, bytes);
  std::vector<Point3> points(bytes.size() / 12);
  for (Point3& p : points) {
    p.x = reader.f32("point");
    p.y = reader.f32("point");
    p.z = reader.f32("point");
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw IoError(path, reader.offset() - 12, "non-finite point component");
    }
  }
  return points;
}

// --- trace CSV (stream_id,timestamp) ----------------------------------------

inline void write_trace(const std::filesystem::path& path,
                        std::span<const StampedMessage> trace) {
  std::string out = "stream_id,timestamp\n";
  for (const StampedMessage& msg : trace) {
    out += to_string(msg.stream);
    out += ',';
    out += detail::format_double(msg.timestamp);
    out += '\n';
  }
  detail::write_all(path, {out.data(), out.size()});
}

inline std::vector<StampedMessage> read_trace(const std::filesystem::path& path) {
  const std::vector<char> bytes = detail::read_all(path);
  std::vector<StampedMessage> trace;
  std::size_t pos = 0;
  std::uint64_t ref = 0;
  while (pos < bytes.size()) {
    std::size_t eol = pos;
    while (eol < bytes.size() && bytes[eol] != '\n') ++eol;
    std::string_view line(bytes.data() + pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::size_t line_start = pos;
    pos = eol + 1;
    if (line.empty() || line.front() == '#' || line == "stream_id,timestamp") continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) {
      throw IoError(path, line_start, "expected 'stream_id,timestamp'");
    }
    const auto stream = stream_from_string(line.substr(0, comma));
    if (!stream) {
      throw IoError(path, line_start,
                    "unknown stream '" + std::string(line.substr(0, comma)) + "'");
    }
    double t = 0.0;
    const auto* first = line.data() + comma + 1;
    const auto* last = line.data() + line.size();
    const auto res = std::from_chars(first, last, t);
    if (res.ec != std::errc{} || res.ptr != last) {
      throw IoError(path, line_start + comma + 1, "bad timestamp");
    }
    trace.push_back({*stream, t, ref++});
  }
  return trace;
}

}  // namespace spherebev::io
