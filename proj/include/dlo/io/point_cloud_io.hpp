#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlo/geometry.hpp"

namespace dlo::io {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline bool parse_double(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  char* end = nullptr;
  out = std::strtod(tok.c_str(), &end);
  return end == tok.c_str() + tok.size();
}

// Little-endian scalar load of `size` bytes interpreted per `kind`.
// kind: 'i' signed, 'u' unsigned, 'f' floating.
inline double load_scalar(const char* p, char kind, std::size_t size) {
  unsigned char b[8];
  std::memcpy(b, p, size);
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < size / 2; ++i) std::swap(b[i], b[size - 1 - i]);
  }
  switch (kind) {
    case 'f':
      if (size == 4) { float f; std::memcpy(&f, b, 4); return f; }
      if (size == 8) { double d; std::memcpy(&d, b, 8); return d; }
      break;
    case 'i':
      if (size == 1) { std::int8_t v; std::memcpy(&v, b, 1); return v; }
      if (size == 2) { std::int16_t v; std::memcpy(&v, b, 2); return v; }
      if (size == 4) { std::int32_t v; std::memcpy(&v, b, 4); return v; }
      if (size == 8) { std::int64_t v; std::memcpy(&v, b, 8); return static_cast<double>(v); }
      break;
    case 'u':
      if (size == 1) { std::uint8_t v; std::memcpy(&v, b, 1); return v; }
      if (size == 2) { std::uint16_t v; std::memcpy(&v, b, 2); return v; }
      if (size == 4) { std::uint32_t v; std::memcpy(&v, b, 4); return v; }
      if (size == 8) { std::uint64_t v; std::memcpy(&v, b, 8); return static_cast<double>(v); }
      break;
  }
  throw ParseError("unsupported scalar type");
}

inline void store_float_le(std::string& out, float f) {
  unsigned char b[4];
  std::memcpy(b, &f, 4);
  if constexpr (std::endian::native == std::endian::big) {
    std::swap(b[0], b[3]);
    std::swap(b[1], b[2]);
  }
  out.append(reinterpret_cast<const char*>(b), 4);
}

inline void keep_if_finite(PointCloud& cloud, const Point3& p) {
  if (is_finite(p)) cloud.points.push_back(p);
}

}  // namespace detail

// ============================================================================
// PLY
// ============================================================================

namespace detail {

struct PlyType {
  char kind;
  std::size_t size;
};

inline PlyType ply_type(const std::string& name, int line) {
  static const std::map<std::string, PlyType> types = {
      {"char", {'i', 1}},   {"int8", {'i', 1}},    {"uchar", {'u', 1}},  {"uint8", {'u', 1}},
      {"short", {'i', 2}},  {"int16", {'i', 2}},   {"ushort", {'u', 2}}, {"uint16", {'u', 2}},
      {"int", {'i', 4}},    {"int32", {'i', 4}},   {"uint", {'u', 4}},   {"uint32", {'u', 4}},
      {"float", {'f', 4}},  {"float32", {'f', 4}}, {"double", {'f', 8}}, {"float64", {'f', 8}}};
  auto it = types.find(name);
  if (it == types.end()) {
    throw ParseError("PLY header line " + std::to_string(line) + ": unknown type '" + name + "'");
  }
  return it->second;
}

struct PlyProperty {
  std::string name;
  PlyType type;
  bool is_list = false;
  PlyType count_type{};
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

}  // namespace detail

/**
 * @brief Reads the x, y, z vertex properties of a PLY file.
 *
 * Supports `ascii` and `binary_little_endian` with float32/float64 coordinates;
 * other properties and elements are skipped. Non-finite points are dropped.
 */
inline PointCloud read_ply(const std::filesystem::path& path) {
  const std::string data = detail::read_file(path);
  std::size_t pos = 0;
  int line_no = 0;
  auto next_line = [&](std::string& line) {
    if (pos >= data.size()) return false;
    auto nl = data.find('\n', pos);
    if (nl == std::string::npos) nl = data.size();
    line = data.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = nl + 1;
    ++line_no;
    return true;
  };
  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError(path.string() + ": PLY header line " + std::to_string(line_no) + ": " + msg);
  };

  std::string line;
  if (!next_line(line) || line != "ply") throw fail("missing 'ply' magic");
  std::string format;
  std::vector<detail::PlyElement> elements;
  bool ended = false;
  while (next_line(line)) {
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) throw fail("malformed format line");
      format = tok[1];
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw fail("malformed element line");
      detail::PlyElement e;
      e.name = tok[1];
      try {
        e.count = std::stoull(tok[2]);
      } catch (const std::exception&) {
        throw fail("bad element count '" + tok[2] + "'");
      }
      elements.push_back(e);
    } else if (tok[0] == "property") {
      if (elements.empty()) throw fail("property before any element");
      detail::PlyProperty p;
      if (tok.size() == 5 && tok[1] == "list") {
        p.is_list = true;
        p.count_type = detail::ply_type(tok[2], line_no);
        p.type = detail::ply_type(tok[3], line_no);
        p.name = tok[4];
      } else if (tok.size() == 3) {
        p.type = detail::ply_type(tok[1], line_no);
        p.name = tok[2];
      } else {
        throw fail("malformed property line");
      }
      elements.back().props.push_back(p);
    } else if (tok[0] == "end_header") {
      ended = true;
      break;
    } else {
      throw fail("unexpected keyword '" + tok[0] + "'");
    }
  }
  if (!ended) throw fail("missing end_header");
  if (format == "binary_big_endian") throw fail("unsupported endianness: binary_big_endian");
  if (format != "ascii" && format != "binary_little_endian") {
    throw fail("unsupported format '" + format + "'");
  }

  const detail::PlyElement* vertex = nullptr;
  int xi = -1, yi = -1, zi = -1;
  for (const auto& e : elements) {
    if (e.name != "vertex") continue;
    vertex = &e;
    for (std::size_t i = 0; i < e.props.size(); ++i) {
      const auto& p = e.props[i];
      int* slot = p.name == "x" ? &xi : p.name == "y" ? &yi : p.name == "z" ? &zi : nullptr;
      if (!slot) continue;
      if (p.is_list || p.type.kind != 'f') throw fail("coordinate '" + p.name + "' must be float32/float64");
      *slot = static_cast<int>(i);
    }
  }
  if (!vertex || xi < 0 || yi < 0 || zi < 0) throw fail("no vertex element with x, y, z");

  PointCloud cloud;
  cloud.points.reserve(vertex->count);
  const std::size_t header_bytes = pos;

  if (format == "ascii") {
    for (const auto& e : elements) {
      for (std::size_t n = 0; n < e.count; ++n) {
        if (!next_line(line)) {
          throw ParseError(path.string() + ": element '" + e.name + "' expects " +
                           std::to_string(e.count) + " rows, file ends after " + std::to_string(n));
        }
        const auto tok = detail::split_ws(line);
        std::vector<double> vals;
        std::size_t t = 0;
        for (const auto& p : e.props) {
          std::size_t reps = 1;
          double v = 0;
          if (p.is_list) {
            if (t >= tok.size() || !detail::parse_double(tok[t++], v) || v < 0) {
              throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": bad list count");
            }
            reps = static_cast<std::size_t>(v);
          }
          for (std::size_t r = 0; r < reps; ++r) {
            if (t >= tok.size() || !detail::parse_double(tok[t++], v)) {
              throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                               ": expected a number for property '" + p.name + "'");
            }
            if (!p.is_list) vals.push_back(v);
          }
          if (p.is_list) vals.push_back(0.0);
        }
        if (t != tok.size()) {
          throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                           std::to_string(t) + " values, found " + std::to_string(tok.size()));
        }
        if (&e == vertex) {
          detail::keep_if_finite(cloud, Point3(vals[xi], vals[yi], vals[zi]));
        }
      }
    }
    return cloud;
  }

  // binary_little_endian
  std::size_t off = header_bytes;
  for (const auto& e : elements) {
    bool fixed = true;
    std::size_t stride = 0;
    for (const auto& p : e.props) {
      if (p.is_list) fixed = false;
      else stride += p.type.size;
    }
    if (fixed && data.size() - off < e.count * stride) {
      throw ParseError(path.string() + ": truncated binary body: element '" + e.name +
                       "' needs " + std::to_string(e.count * stride) + " bytes at offset " +
                       std::to_string(off) + ", only " + std::to_string(data.size() - off) +
                       " available");
    }
    for (std::size_t n = 0; n < e.count; ++n) {
      double xyz[3] = {0, 0, 0};
      for (std::size_t i = 0; i < e.props.size(); ++i) {
        const auto& p = e.props[i];
        std::size_t reps = 1;
        if (p.is_list) {
          if (off + p.count_type.size > data.size()) {
            throw ParseError(path.string() + ": truncated binary body at offset " + std::to_string(off));
          }
          reps = static_cast<std::size_t>(
              detail::load_scalar(data.data() + off, p.count_type.kind, p.count_type.size));
          off += p.count_type.size;
        }
        if (off + reps * p.type.size > data.size()) {
          throw ParseError(path.string() + ": truncated binary body at offset " + std::to_string(off));
        }
        if (&e == vertex && !p.is_list) {
          const int axis = static_cast<int>(i) == xi ? 0 : static_cast<int>(i) == yi ? 1
                         : static_cast<int>(i) == zi ? 2 : -1;
          if (axis >= 0) xyz[axis] = detail::load_scalar(data.data() + off, 'f', p.type.size);
        }
        off += reps * p.type.size;
      }
      if (&e == vertex) detail::keep_if_finite(cloud, Point3(xyz[0], xyz[1], xyz[2]));
    }
  }
  return cloud;
}

/// Binary little-endian PLY with float32 x, y, z; byte-deterministic.
inline std::string encode_ply(const PointCloud& cloud) {
  std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                    std::to_string(cloud.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  out.reserve(out.size() + 12 * cloud.size());
  for (const auto& p : cloud.points) {
    detail::store_float_le(out, static_cast<float>(p.x()));
    detail::store_float_le(out, static_cast<float>(p.y()));
    detail::store_float_le(out, static_cast<float>(p.z()));
  }
  return out;
}

inline void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  detail::write_file(path, encode_ply(cloud));
}

// ============================================================================
// PCD v0.7
// ============================================================================

/**
 * @brief Reads x, y, z from a PCD v0.7 file with DATA ascii or binary.
 *
 * Coordinates must be TYPE F with SIZE 4 or 8. Other fields are skipped and
 * non-finite points (e.g. organized clouds) are dropped.
 */
inline PointCloud read_pcd(const std::filesystem::path& path) {
  const std::string data = detail::read_file(path);
  std::size_t pos = 0;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    return ParseError(path.string() + ": PCD line " + std::to_string(line_no) + ": " + msg);
  };
  std::vector<std::string> fields, types;
  std::vector<std::size_t> sizes, counts;
  std::size_t points = 0, width = 0, height = 1;
  bool have_points = false;
  std::string data_kind;
  std::string line;
  while (pos < data.size()) {
    auto nl = data.find('\n', pos);
    if (nl == std::string::npos) nl = data.size();
    line = data.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tok = detail::split_ws(line);
    const std::vector<std::string> rest(tok.begin() + 1, tok.end());
    auto to_sizes = [&](std::vector<std::size_t>& dst) {
      dst.clear();
      for (const auto& t : rest) {
        try {
          dst.push_back(std::stoull(t));
        } catch (const std::exception&) {
          throw fail("bad number '" + t + "'");
        }
      }
    };
    if (tok[0] == "VERSION") {
      continue;
    } else if (tok[0] == "FIELDS") {
      fields = rest;
    } else if (tok[0] == "SIZE") {
      to_sizes(sizes);
    } else if (tok[0] == "TYPE") {
      types = rest;
    } else if (tok[0] == "COUNT") {
      to_sizes(counts);
    } else if (tok[0] == "WIDTH" || tok[0] == "HEIGHT" || tok[0] == "POINTS") {
      std::vector<std::size_t> v;
      to_sizes(v);
      if (v.size() != 1) throw fail("malformed " + tok[0]);
      if (tok[0] == "WIDTH") width = v[0];
      else if (tok[0] == "HEIGHT") height = v[0];
      else { points = v[0]; have_points = true; }
    } else if (tok[0] == "VIEWPOINT") {
      continue;
    } else if (tok[0] == "DATA") {
      if (tok.size() != 2) throw fail("malformed DATA line");
      data_kind = tok[1];
      break;
    } else {
      throw fail("unexpected keyword '" + tok[0] + "'");
    }
  }
  if (data_kind.empty()) throw fail("missing DATA line");
  if (data_kind != "ascii" && data_kind != "binary") {
    throw fail("unsupported DATA '" + data_kind + "'");
  }
  if (counts.empty()) counts.assign(fields.size(), 1);
  if (fields.empty() || sizes.size() != fields.size() || types.size() != fields.size() ||
      counts.size() != fields.size()) {
    throw fail("FIELDS/SIZE/TYPE/COUNT lengths disagree");
  }
  if (!have_points) points = width * height;

  int slot[3] = {-1, -1, -1};
  std::vector<std::size_t> offset(fields.size());
  std::size_t stride = 0, columns = 0;
  std::vector<std::size_t> column(fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    offset[i] = stride;
    column[i] = columns;
    stride += sizes[i] * counts[i];
    columns += counts[i];
    const int axis = fields[i] == "x" ? 0 : fields[i] == "y" ? 1 : fields[i] == "z" ? 2 : -1;
    if (axis < 0) continue;
    if (types[i] != "F" || (sizes[i] != 4 && sizes[i] != 8)) {
      throw fail("coordinate '" + fields[i] + "' must be TYPE F with SIZE 4 or 8");
    }
    slot[axis] = static_cast<int>(i);
  }
  if (slot[0] < 0 || slot[1] < 0 || slot[2] < 0) throw fail("FIELDS must contain x y z");

  PointCloud cloud;
  cloud.points.reserve(points);
  if (data_kind == "ascii") {
    std::size_t n = 0;
    while (pos < data.size() && n < points) {
      auto nl = data.find('\n', pos);
      if (nl == std::string::npos) nl = data.size();
      line = data.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      const auto tok = detail::split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() != columns) {
        throw fail("expected " + std::to_string(columns) + " values, found " + std::to_string(tok.size()));
      }
      double xyz[3];
      for (int a = 0; a < 3; ++a) {
        if (!detail::parse_double(tok[column[slot[a]]], xyz[a])) {
          throw fail("non-numeric coordinate '" + tok[column[slot[a]]] + "'");
        }
      }
      detail::keep_if_finite(cloud, Point3(xyz[0], xyz[1], xyz[2]));
      ++n;
    }
    if (n != points) {
      throw ParseError(path.string() + ": PCD declares " + std::to_string(points) +
                       " points, found " + std::to_string(n));
    }
    return cloud;
  }

  const std::size_t need = points * stride;
  const std::size_t have = data.size() >= pos ? data.size() - pos : 0;
  if (have < need) {
    throw ParseError(path.string() + ": truncated binary body: expected " + std::to_string(need) +
                     " bytes at offset " + std::to_string(pos) + ", found " + std::to_string(have));
  }
  for (std::size_t n = 0; n < points; ++n) {
    const char* rec = data.data() + pos + n * stride;
    double xyz[3];
    for (int a = 0; a < 3; ++a) {
      xyz[a] = detail::load_scalar(rec + offset[slot[a]], 'f', sizes[slot[a]]);
    }
    detail::keep_if_finite(cloud, Point3(xyz[0], xyz[1], xyz[2]));
  }
  return cloud;
}

/// Binary PCD v0.7 with float32 x, y, z; byte-deterministic.
inline std::string encode_pcd(const PointCloud& cloud) {
  const std::string n = std::to_string(cloud.size());
  std::string out = "# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\nFIELDS x y z\n"
                    "SIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\nWIDTH " + n +
                    "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS " + n + "\nDATA binary\n";
  for (const auto& p : cloud.points) {
    detail::store_float_le(out, static_cast<float>(p.x()));
    detail::store_float_le(out, static_cast<float>(p.y()));
    detail::store_float_le(out, static_cast<float>(p.z()));
  }
  return out;
}

inline void write_pcd(const std::filesystem::path& path, const PointCloud& cloud) {
  detail::write_file(path, encode_pcd(cloud));
}

/// Dispatches on the file extension (.ply or .pcd).
inline PointCloud read_cloud(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".ply") return read_ply(path);
  if (ext == ".pcd") return read_pcd(path);
  throw ParseError(path.string() + ": unsupported point cloud extension '" + ext + "'");
}

}  // namespace dlo::io
