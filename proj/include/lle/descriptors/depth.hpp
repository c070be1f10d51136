#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "lle/descriptors/good.hpp"

namespace lle {

inline constexpr double kEmptyDepth = std::numeric_limits<double>::infinity();

/// Row-major depth map in meters; kEmptyDepth marks pixels no point hit.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> depth;

  double at(int row, int col) const { return depth[static_cast<std::size_t>(row) * width + col]; }
};

/// Orthographic depth views of the object in its principal frame, looking
/// along -Z, -Y and -X. Each view covers a square of side = largest extent
/// centred on the bounding box; depth is measured from the near box face and
/// each pixel keeps its nearest point.
inline std::array<DepthImage, 3> render_orthographic_depth(const PointCloud& cloud, int resolution) {
  if (resolution < 1) throw Error(Errc::InvalidArgument, "resolution must be >= 1");
  const PointCloud sorted = detail::canonical_copy(cloud);
  const PointCloud local = transform_to_frame(sorted, principal_frame(sorted));
  const detail::AxisBox box = detail::bounding_box(local);
  const double side = box.largest_side();
  const Vec3 c = box.center();
  const auto res = static_cast<std::size_t>(resolution);

  // (column axis, row axis, depth axis)
  constexpr std::array<std::array<int, 3>, 3> views{{{0, 1, 2}, {0, 2, 1}, {1, 2, 0}}};
  std::array<DepthImage, 3> out;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto [cu, rv, dz] = views[k];
    DepthImage img{resolution, resolution, std::vector<double>(res * res, kEmptyDepth)};
    for (const auto& p : local.points) {
      const Vec3 q = p.vec();
      const std::size_t col = detail::bin_of((q(cu) - (c(cu) - side / 2)) / side, res);
      const std::size_t row = detail::bin_of(((c(rv) + side / 2) - q(rv)) / side, res);
      const double d = box.hi(dz) - q(dz);
      double& px = img.depth[row * res + col];
      if (d < px) px = d;
    }
    out[k] = std::move(img);
  }
  return out;
}

/// Binary 16-bit PGM, depth in 0.1 mm units, empty pixels 65535.
inline void write_pgm(const DepthImage& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::IoError, "cannot write '" + path + "'");
  os << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  for (double d : img.depth) {
    std::uint16_t v = 65535;
    if (std::isfinite(d)) v = static_cast<std::uint16_t>(std::min(65534.0, std::max(0.0, std::round(d * 1e4))));
    const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    os.write(bytes, 2);
  }
  if (!os) throw Error(Errc::IoError, "failed writing '" + path + "'");
}

}  // namespace lle
