#pragma once

#include <filesystem>
#include <stdexcept>

#include "ov3d/scene.hpp"

namespace ov3d {

class PlyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PlyCloud {
  Points points = Points(3, 0);
  Colors colors = Colors(3, 0);
};

/// Reads the vertex element of an ASCII or binary_little_endian PLY file.
/// x/y/z may be float or double; red/green/blue (uchar) are optional and
/// other vertex properties are skipped.
PlyCloud read_ply(const std::filesystem::path& path);

enum class PlyFormat { ascii, binary_little_endian };

/// Writes x/y/z as double (plus uchar colors when present).
void write_ply(const std::filesystem::path& path, const Points& points, const Colors& colors = Colors(3, 0),
               PlyFormat format = PlyFormat::binary_little_endian);

}  // namespace ov3d
