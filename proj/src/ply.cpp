#include "ov3d/ply.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ov3d {

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

namespace {

enum class PropType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::size_t type_size(PropType t) {
  switch (t) {
    case PropType::i8:
    case PropType::u8: return 1;
    case PropType::i16:
    case PropType::u16: return 2;
    case PropType::i32:
    case PropType::u32:
    case PropType::f32: return 4;
    case PropType::f64: return 8;
  }
  return 0;
}

PropType parse_type(const std::string& s) {
  if (s == "char" || s == "int8") return PropType::i8;
  if (s == "uchar" || s == "uint8") return PropType::u8;
  if (s == "short" || s == "int16") return PropType::i16;
  if (s == "ushort" || s == "uint16") return PropType::u16;
  if (s == "int" || s == "int32") return PropType::i32;
  if (s == "uint" || s == "uint32") return PropType::u32;
  if (s == "float" || s == "float32") return PropType::f32;
  if (s == "double" || s == "float64") return PropType::f64;
  throw PlyError("PLY: unsupported property type '" + s + "'");
}

double read_binary(const char* p, PropType t) {
  switch (t) {
    case PropType::i8: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
    case PropType::u8: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
    case PropType::i16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case PropType::u16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case PropType::i32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case PropType::u32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case PropType::f32: { float v; std::memcpy(&v, p, 4); return v; }
    case PropType::f64: { double v; std::memcpy(&v, p, 8); return v; }
  }
  return 0.0;
}

struct Property {
  std::string name;
  PropType type;
};

}  // namespace

PlyCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PlyError("PLY: cannot open " + path.string());

  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw PlyError("PLY: missing magic in " + path.string());

  bool binary = false;
  bool in_vertex = false;
  bool vertex_seen = false;
  std::size_t n_vertices = 0;
  std::vector<Property> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw PlyError("PLY: unsupported format '" + fmt + "'");
    } else if (kw == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (vertex_seen && name != "vertex" && !in_vertex) continue;
      in_vertex = name == "vertex";
      if (in_vertex) {
        if (vertex_seen) throw PlyError("PLY: duplicate vertex element");
        vertex_seen = true;
        n_vertices = count;
      } else if (!vertex_seen && count > 0) {
        throw PlyError("PLY: elements before 'vertex' are not supported");
      }
    } else if (kw == "property" && in_vertex) {
      std::string type, name;
      ls >> type;
      if (type == "list") throw PlyError("PLY: list properties on vertices are not supported");
      ls >> name;
      props.push_back({name, parse_type(type)});
    } else if (kw == "end_header") {
      break;
    }
  }
  if (!vertex_seen) throw PlyError("PLY: no vertex element in " + path.string());

  auto find = [&](const char* n) -> int {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i].name == n) return static_cast<int>(i);
    return -1;
  };
  const std::array<int, 3> xyz{find("x"), find("y"), find("z")};
  const std::array<int, 3> rgb{find("red"), find("green"), find("blue")};
  if (xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0) throw PlyError("PLY: vertex lacks x/y/z");
  const bool has_rgb = rgb[0] >= 0 && rgb[1] >= 0 && rgb[2] >= 0;

  PlyCloud cloud;
  const auto n = static_cast<Eigen::Index>(n_vertices);
  cloud.points.resize(3, n);
  if (has_rgb) cloud.colors.resize(3, n);

  std::vector<double> row(props.size());
  if (binary) {
    std::vector<std::size_t> offsets(props.size());
    std::size_t stride = 0;
    for (std::size_t i = 0; i < props.size(); ++i) {
      offsets[i] = stride;
      stride += type_size(props[i].type);
    }
    std::vector<char> buf(stride);
    for (Eigen::Index v = 0; v < n; ++v) {
      if (!in.read(buf.data(), static_cast<std::streamsize>(stride))) throw PlyError("PLY: truncated binary body");
      for (std::size_t i = 0; i < props.size(); ++i) row[i] = read_binary(buf.data() + offsets[i], props[i].type);
      for (int k = 0; k < 3; ++k) cloud.points(k, v) = row[static_cast<std::size_t>(xyz[k])];
      if (has_rgb)
        for (int k = 0; k < 3; ++k) cloud.colors(k, v) = static_cast<std::uint8_t>(row[static_cast<std::size_t>(rgb[k])]);
    }
  } else {
    for (Eigen::Index v = 0; v < n; ++v) {
      if (!std::getline(in, line)) throw PlyError("PLY: truncated ascii body");
      const char* p = line.data();
      const char* end = line.data() + line.size();
      for (std::size_t i = 0; i < props.size(); ++i) {
        while (p < end && (*p == ' ' || *p == '\t')) ++p;
        auto [next, ec] = std::from_chars(p, end, row[i]);
        if (ec != std::errc()) throw PlyError("PLY: bad number on vertex line " + std::to_string(v));
        p = next;
      }
      for (int k = 0; k < 3; ++k) cloud.points(k, v) = row[static_cast<std::size_t>(xyz[k])];
      if (has_rgb)
        for (int k = 0; k < 3; ++k) cloud.colors(k, v) = static_cast<std::uint8_t>(row[static_cast<std::size_t>(rgb[k])]);
    }
  }
  return cloud;
}

void write_ply(const std::filesystem::path& path, const Points& points, const Colors& colors, PlyFormat format) {
  const bool has_rgb = colors.cols() > 0;
  if (has_rgb && colors.cols() != points.cols()) throw PlyError("PLY: color count does not match point count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PlyError("PLY: cannot write " + path.string());

  out << "ply\nformat " << (format == PlyFormat::ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "element vertex " << points.cols() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (has_rgb) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";

  if (format == PlyFormat::binary_little_endian) {
    for (Eigen::Index v = 0; v < points.cols(); ++v) {
      for (int k = 0; k < 3; ++k) {
        const double d = points(k, v);
        out.write(reinterpret_cast<const char*>(&d), sizeof d);
      }
      if (has_rgb) out.write(reinterpret_cast<const char*>(colors.col(v).data()), 3);
    }
  } else {
    std::array<char, 64> buf;
    for (Eigen::Index v = 0; v < points.cols(); ++v) {
      for (int k = 0; k < 3; ++k) {
        auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), points(k, v));
        out.write(buf.data(), end - buf.data());
        out << (k < 2 || has_rgb ? ' ' : '\n');
      }
      if (has_rgb)
        out << int(colors(0, v)) << ' ' << int(colors(1, v)) << ' ' << int(colors(2, v)) << '\n';
    }
  }
  if (!out) throw PlyError("PLY: write failed for " + path.string());
}

}  // namespace ov3d
