#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "lle/cloud.hpp"
#include "lle/feature.hpp"

namespace lle {

struct GoodConfig {
  int bins = 9;
};

namespace detail {

inline void canonical_sort(std::vector<Point>& pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
  });
}

inline PointCloud canonical_copy(const PointCloud& cloud) {
  PointCloud out = cloud;
  canonical_sort(out.points);
  return out;
}

struct AxisBox {
  Vec3 lo;
  Vec3 hi;
  Vec3 center() const { return 0.5 * (lo + hi); }
  double largest_side() const { return (hi - lo).maxCoeff(); }
};

inline AxisBox bounding_box(const PointCloud& cloud) {
  AxisBox box{cloud.points.front().vec(), cloud.points.front().vec()};
  for (const auto& p : cloud.points) {
    box.lo = box.lo.cwiseMin(p.vec());
    box.hi = box.hi.cwiseMax(p.vec());
  }
  return box;
}

// Distribution matrix of the orthographic projection onto axes (u, v), binned
// over a square of the given side centred on the box centre.
inline std::vector<double> projection_matrix(const PointCloud& local, const AxisBox& box, double side, int u, int v,
                                             std::size_t bins) {
  std::vector<double> m(bins * bins, 0.0);
  const Vec3 c = box.center();
  const double lo_u = c(u) - side / 2, lo_v = c(v) - side / 2;
  for (const auto& p : local.points) {
    const Vec3 q = p.vec();
    const std::size_t r = bin_of((q(u) - lo_u) / side, bins);
    const std::size_t col = bin_of((q(v) - lo_v) / side, bins);
    m[r * bins + col] += 1.0;
  }
  const double n = static_cast<double>(local.size());
  for (double& x : m) x /= n;
  return m;
}

inline double entropy(const std::vector<double>& m) {
  double h = 0.0;
  for (double p : m) {
    if (p > 0) h -= p * std::log2(p);
  }
  return h;
}

// Spatial variance of the projected mass around its mean bin.
inline double spread(const std::vector<double>& m, std::size_t bins) {
  double mr = 0, mc = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    mr += m[i] * static_cast<double>(i / bins);
    mc += m[i] * static_cast<double>(i % bins);
  }
  double var = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double dr = static_cast<double>(i / bins) - mr, dc = static_cast<double>(i % bins) - mc;
    var += m[i] * (dr * dr + dc * dc);
  }
  return var;
}

}  // namespace detail

/// Global Orthographic Object Descriptor.
///
/// The cloud is moved into its disambiguated principal frame and projected
/// onto the XoY, XoZ and YoZ planes. Each projection is binned into a
/// bins x bins distribution over a square whose side is the largest object
/// extent, and normalized to unit mass. The three matrices are concatenated
/// (row-major, row = first plane axis) in order of decreasing entropy, then
/// decreasing spatial variance, then the fixed plane order.
inline FeatureVector good_descriptor(const PointCloud& cloud, const GoodConfig& cfg = {}) {
  if (cfg.bins < 2) throw Error(Errc::InvalidArgument, "GOOD needs bins >= 2");
  const auto bins = static_cast<std::size_t>(cfg.bins);
  const PointCloud sorted = detail::canonical_copy(cloud);
  const ReferenceFrame frame = principal_frame(sorted);
  const PointCloud local = transform_to_frame(sorted, frame);
  const detail::AxisBox box = detail::bounding_box(local);
  const double side = box.largest_side();

  constexpr std::array<std::array<int, 2>, 3> planes{{{0, 1}, {0, 2}, {1, 2}}};
  std::array<std::vector<double>, 3> mats;
  std::array<double, 3> ent{}, var{};
  for (std::size_t k = 0; k < 3; ++k) {
    mats[k] = detail::projection_matrix(local, box, side, planes[k][0], planes[k][1], bins);
    ent[k] = detail::entropy(mats[k]);
    var[k] = detail::spread(mats[k], bins);
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (std::abs(ent[a] - ent[b]) > 1e-12) return ent[a] > ent[b];
    if (std::abs(var[a] - var[b]) > 1e-12) return var[a] > var[b];
    return a < b;
  });

  FeatureVector out;
  out.rep_id = "good" + std::to_string(cfg.bins);
  out.values.reserve(3 * bins * bins);
  for (std::size_t k : order) out.values.insert(out.values.end(), mats[k].begin(), mats[k].end());
  return out;
}

}  // namespace lle
