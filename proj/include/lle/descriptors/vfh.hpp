#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <unordered_map>
#include <vector>

#include "lle/descriptors/good.hpp"

namespace lle {

struct VfhConfig {
  double normal_radius = 0.006;
  int angle_bins = 45;
  int viewpoint_bins = 128;
};

namespace detail {

/// Uniform hash grid for fixed-radius neighbour queries.
class RadiusIndex {
 public:
  RadiusIndex(const std::vector<Point>& pts, double radius) : pts_(pts), r_(radius) {
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[key(pts[i].vec())].push_back(i);
  }

  template <class Fn>
  void for_each_neighbor(const Vec3& q, Fn&& fn) const {
    const auto [cx, cy, cz] = coords(q);
    const double r2 = r_ * r_;
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find(pack(cx + dx, cy + dy, cz + dz));
          if (it == cells_.end()) continue;
          for (std::size_t j : it->second) {
            if ((pts_[j].vec() - q).squaredNorm() <= r2) fn(j);
          }
        }
  }

 private:
  std::array<std::int64_t, 3> coords(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / r_)), static_cast<std::int64_t>(std::floor(p.y() / r_)),
            static_cast<std::int64_t>(std::floor(p.z() / r_))};
  }
  static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
    const auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v + (1 << 20)) & 0x1fffff; };
    return (u(x) << 42) | (u(y) << 21) | u(z);
  }
  std::uint64_t key(const Vec3& p) const {
    const auto [x, y, z] = coords(p);
    return pack(x, y, z);
  }

  const std::vector<Point>& pts_;
  double r_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

inline Vec3 toward(const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  return d.norm() > 0 ? Vec3(d.normalized()) : Vec3::UnitZ();
}

}  // namespace detail

/// Least-squares plane normals over the radius neighbourhood (the point
/// included), flipped toward `viewpoint`. Points with fewer than three
/// neighbours get the unit vector toward the viewpoint.
inline std::vector<Vec3> estimate_normals(const PointCloud& cloud, double radius,
                                          const Vec3& viewpoint = Vec3::Zero()) {
  if (!(radius > 0)) throw Error(Errc::InvalidArgument, "normal radius must be > 0");
  const detail::RadiusIndex index(cloud.points, radius);
  std::vector<Vec3> normals(cloud.size());
  std::vector<std::size_t> nbrs;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 p = cloud.points[i].vec();
    nbrs.clear();
    index.for_each_neighbor(p, [&](std::size_t j) { nbrs.push_back(j); });
    if (nbrs.size() < 3) {
      normals[i] = detail::toward(p, viewpoint);
      continue;
    }
    Vec3 mean = Vec3::Zero();
    for (std::size_t j : nbrs) mean += cloud.points[j].vec();
    mean /= static_cast<double>(nbrs.size());
    Mat3 cov = Mat3::Zero();
    for (std::size_t j : nbrs) {
      const Vec3 d = cloud.points[j].vec() - mean;
      cov.noalias() += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
    Vec3 n = solver.eigenvectors().col(0).normalized();
    if (n.dot(viewpoint - p) < 0) n = -n;
    normals[i] = n;
  }
  return normals;
}

/// Viewpoint Feature Histogram.
///
/// Layout: four angle_bins histograms (alpha, phi, theta, normalized
/// centroid distance) followed by one viewpoint_bins histogram, each with unit
/// mass. For each point p with normal n, the Darboux frame u = mean normal,
/// v = (p - c)/|p - c| x u, w = u x v gives alpha = v.n, phi = u.(p - c)/|p - c|
/// and theta = atan(w.n / u.n) in [-pi/2, pi/2]. The viewpoint block bins the
/// cosine between n and the centroid-to-viewpoint direction.
inline FeatureVector vfh_descriptor(const PointCloud& cloud, const VfhConfig& cfg = {}) {
  if (cfg.angle_bins < 2 || cfg.viewpoint_bins < 2) throw Error(Errc::InvalidArgument, "VFH needs >= 2 bins");
  if (cloud.size() < 3) throw Error(Errc::DegenerateCloud, "VFH needs at least 3 points");
  const PointCloud sorted = detail::canonical_copy(cloud);
  const Vec3 vp = sorted.viewpoint ? sorted.viewpoint->vec() : Vec3::Zero();
  const std::vector<Vec3> normals = estimate_normals(sorted, cfg.normal_radius, vp);
  const Vec3 c = centroid(sorted).vec();

  double max_d = 0.0;
  Vec3 mean_n = Vec3::Zero();
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    max_d = std::max(max_d, (sorted.points[i].vec() - c).norm());
    mean_n += normals[i];
  }
  if (!(max_d > 1e-12)) throw Error(Errc::DegenerateCloud, "cloud '" + cloud.id + "' has zero extent");
  const Vec3 u = mean_n.norm() > 1e-12 ? Vec3(mean_n.normalized()) : detail::toward(c, vp);
  const Vec3 view_dir = detail::toward(c, vp);

  const auto ab = static_cast<std::size_t>(cfg.angle_bins);
  const auto vb = static_cast<std::size_t>(cfg.viewpoint_bins);
  std::vector<double> h(4 * ab + vb, 0.0);
  constexpr double half_pi = std::numbers::pi / 2;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Vec3 dp = sorted.points[i].vec() - c;
    const double d = dp.norm();
    const Vec3& n = normals[i];
    double alpha = 0.0, phi = 0.0, theta = 0.0;
    if (d > 1e-12) {
      const Vec3 dn = dp / d;
      Vec3 v = dn.cross(u);
      if (v.norm() < 1e-12) v = u.unitOrthogonal();
      v.normalize();
      const Vec3 w = u.cross(v);
      alpha = v.dot(n);
      phi = u.dot(dn);
      const double un = u.dot(n);
      theta = un == 0.0 ? std::copysign(half_pi, w.dot(n)) : std::atan(w.dot(n) / un);
    }
    h[detail::bin_of((alpha + 1) / 2, ab)] += 1;
    h[ab + detail::bin_of((phi + 1) / 2, ab)] += 1;
    h[2 * ab + detail::bin_of((theta + half_pi) / (2 * half_pi), ab)] += 1;
    h[3 * ab + detail::bin_of(d / max_d, ab)] += 1;
    h[4 * ab + detail::bin_of((n.dot(view_dir) + 1) / 2, vb)] += 1;
  }
  auto hs = std::span<double>(h);
  for (std::size_t b = 0; b < 4; ++b) detail::normalize_block(hs.subspan(b * ab, ab));
  detail::normalize_block(hs.subspan(4 * ab, vb));
  return FeatureVector{"vfh", std::move(h)};
}

}  // namespace lle
