#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "lle/error.hpp"
#include "lle/random.hpp"

namespace lle {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rgb = std::array<std::uint8_t, 3>;

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  std::optional<Rgb> rgb;

  Point() = default;
  Point(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}
  Point(const Vec3& v) : x(v.x()), y(v.y()), z(v.z()) {}  // NOLINT(google-explicit-constructor)

  Vec3 vec() const { return {x, y, z}; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

  friend bool operator==(const Point&, const Point&) = default;
};

struct PointCloud {
  std::vector<Point> points;
  std::optional<Point> viewpoint;
  std::string id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

/// Object-centred frame: origin plus three orthonormal, right-handed axes
/// ordered by descending spread.
struct ReferenceFrame {
  Vec3 origin = Vec3::Zero();
  std::array<Vec3, 3> axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};

  static ReferenceFrame identity() { return {}; }

  Mat3 rotation() const {
    Mat3 m;
    m.col(0) = axes[0];
    m.col(1) = axes[1];
    m.col(2) = axes[2];
    return m;
  }
};

inline void require_finite(const PointCloud& cloud) {
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!cloud.points[i].finite()) {
      throw Error(Errc::NonFiniteValue, "point " + std::to_string(i) + " of cloud '" + cloud.id + "' is not finite");
    }
  }
}

inline Point centroid(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(Errc::EmptyCloud, "centroid of empty cloud '" + cloud.id + "'");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : cloud.points) sum += p.vec();
  return Point(sum / static_cast<double>(cloud.size()));
}

/// Population (1/n) covariance about `center`.
inline Mat3 covariance(const PointCloud& cloud, const Vec3& center) {
  Mat3 cov = Mat3::Zero();
  for (const auto& p : cloud.points) {
    const Vec3 d = p.vec() - center;
    cov.noalias() += d * d.transpose();
  }
  return cov / static_cast<double>(cloud.size());
}

namespace detail {

// Replaces the eigenvectors of a repeated eigenvalue by the basis of that
// eigenspace closest to the world axes, taken in x, y, z order.
inline void canonicalize_eigenspace(std::array<Vec3, 3>& axes, std::size_t first, std::size_t count) {
  std::vector<Vec3> basis;
  for (std::size_t g = first; g < first + count; ++g) basis.push_back(axes[g]);
  std::vector<Vec3> chosen;
  for (int k = 0; k < 3 && chosen.size() < count; ++k) {
    const Vec3 e = Vec3::Unit(k);
    Vec3 proj = Vec3::Zero();
    for (const auto& b : basis) proj += b.dot(e) * b;
    for (const auto& c : chosen) proj -= proj.dot(c) * c;
    if (proj.norm() > 1e-6) chosen.push_back(proj.normalized());
  }
  for (std::size_t g = 0; g < count; ++g) axes[first + g] = chosen[g];
}

}  // namespace detail

/// PCA frame with deterministic axis signs: each of the first two axes points
/// toward the side holding more points (third central moment on an exact
/// count tie); the third axis completes a right-handed basis.
inline ReferenceFrame principal_frame(const PointCloud& cloud) {
  const Vec3 c = centroid(cloud).vec();
  const Mat3 cov = covariance(cloud, c);

  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  const Vec3 ascending = solver.eigenvalues();
  const std::array<double, 3> lambda{ascending(2), ascending(1), ascending(0)};
  if (!(lambda[0] > 1e-20) || !(lambda[1] > 1e-12 * lambda[0])) {
    throw Error(Errc::DegenerateCloud, "cloud '" + cloud.id + "' is collinear or coincident");
  }
  std::array<Vec3, 3> axes{solver.eigenvectors().col(2), solver.eigenvectors().col(1),
                           solver.eigenvectors().col(0)};

  const double tie = 1e-12 * lambda[0];
  const bool tie01 = lambda[0] - lambda[1] <= tie;
  const bool tie12 = lambda[1] - lambda[2] <= tie;
  if (tie01 && tie12) {
    detail::canonicalize_eigenspace(axes, 0, 3);
  } else if (tie01) {
    detail::canonicalize_eigenspace(axes, 0, 2);
  } else if (tie12) {
    detail::canonicalize_eigenspace(axes, 1, 2);
  }

  for (int a = 0; a < 2; ++a) {
    std::size_t pos = 0, neg = 0;
    double third_moment = 0.0;
    for (const auto& p : cloud.points) {
      const double s = (p.vec() - c).dot(axes[a]);
      if (s > 0) ++pos;
      if (s < 0) ++neg;
      third_moment += s * s * s;
    }
    if (neg > pos || (neg == pos && third_moment < 0)) axes[a] = -axes[a];
  }
  axes[2] = axes[0].cross(axes[1]).normalized();

  ReferenceFrame frame;
  frame.origin = c;
  frame.axes = axes;
  return frame;
}

inline PointCloud transform_to_frame(const PointCloud& cloud, const ReferenceFrame& frame) {
  const Mat3 rt = frame.rotation().transpose();
  PointCloud out;
  out.id = cloud.id;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    Point q(rt * (p.vec() - frame.origin));
    q.rgb = p.rgb;
    out.points.push_back(q);
  }
  if (cloud.viewpoint) out.viewpoint = Point(rt * (cloud.viewpoint->vec() - frame.origin));
  return out;
}

/// Applies p -> R p + t to points and viewpoint.
inline PointCloud rigid_transform(const PointCloud& cloud, const Mat3& rotation, const Vec3& translation) {
  PointCloud out;
  out.id = cloud.id;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    Point q(rotation * p.vec() + translation);
    q.rgb = p.rgb;
    out.points.push_back(q);
  }
  if (cloud.viewpoint) out.viewpoint = Point(rotation * cloud.viewpoint->vec() + translation);
  return out;
}

/// Uniformly distributed rotation (normalized random quaternion).
inline Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

inline Vec3 random_unit_vector(Rng& rng) {
  Vec3 v;
  do {
    v = Vec3(rng.normal(), rng.normal(), rng.normal());
  } while (v.norm() < 1e-12);
  return v.normalized();
}

/// Independent zero-mean Gaussian perturbation of every coordinate.
inline PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error(Errc::NegativeSigma, "sigma must be >= 0, got " + std::to_string(sigma));
  PointCloud out = cloud;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (auto& p : out.points) {
    p.x += sigma * rng.normal();
    p.y += sigma * rng.normal();
    p.z += sigma * rng.normal();
  }
  return out;
}

/// Grid anchored at the cloud's minimum corner; one centroid per occupied
/// cell, emitted in (ix, iy, iz) order.
inline PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) throw Error(Errc::NonPositiveVoxel, "voxel size must be > 0, got " + std::to_string(voxel));
  PointCloud out;
  out.id = cloud.id;
  out.viewpoint = cloud.viewpoint;
  if (cloud.empty()) return out;

  Vec3 lo = cloud.points.front().vec();
  for (const auto& p : cloud.points) lo = lo.cwiseMin(p.vec());

  struct Cell {
    Vec3 sum = Vec3::Zero();
    std::array<double, 3> rgb{0, 0, 0};
    std::size_t count = 0;
    bool all_rgb = true;
  };
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, Cell> cells;
  for (const auto& p : cloud.points) {
    const Vec3 rel = (p.vec() - lo) / voxel;
    const auto key = std::make_tuple(static_cast<std::int64_t>(std::floor(rel.x())),
                                     static_cast<std::int64_t>(std::floor(rel.y())),
                                     static_cast<std::int64_t>(std::floor(rel.z())));
    Cell& cell = cells[key];
    cell.sum += p.vec();
    ++cell.count;
    if (p.rgb) {
      for (int k = 0; k < 3; ++k) cell.rgb[k] += (*p.rgb)[k];
    } else {
      cell.all_rgb = false;
    }
  }
  out.points.reserve(cells.size());
  for (const auto& [key, cell] : cells) {
    Point q(cell.sum / static_cast<double>(cell.count));
    if (cell.all_rgb) {
      Rgb c;
      for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>(std::lround(cell.rgb[k] / cell.count));
      q.rgb = c;
    }
    out.points.push_back(q);
  }
  return out;
}

// --- synthetic shapes ------------------------------------------------------

enum class ShapeKind { Sphere, Box, Cylinder, Cone, Torus };

inline constexpr std::array<ShapeKind, 5> kAllShapeKinds{ShapeKind::Sphere, ShapeKind::Box, ShapeKind::Cylinder,
                                                         ShapeKind::Cone, ShapeKind::Torus};

constexpr std::string_view shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Box: return "box";
    case ShapeKind::Cylinder: return "cylinder";
    case ShapeKind::Cone: return "cone";
    case ShapeKind::Torus: return "torus";
  }
  return "";
}

inline ShapeKind parse_shape_kind(std::string_view name) {
  for (auto k : kAllShapeKinds) {
    if (shape_name(k) == name) return k;
  }
  throw Error(Errc::UnknownKind, "unknown shape kind '" + std::string(name) + "'");
}

/// Shape dimensions in meters, centred at the origin:
///   sphere   a = radius
///   box      a, b, c = extents along x, y, z
///   cylinder a = radius, b = height (axis z)
///   cone     a = base radius, b = height (base at z = -b/2, apex at +b/2)
///   torus    a = major radius, b = minor radius (in the xy plane)
/// With `view_dir` set only points on the half space facing it are kept.
struct ShapeParams {
  double a = 0.05;
  double b = 0.05;
  double c = 0.05;
  std::optional<Vec3> view_dir;
};

namespace detail {

inline Vec3 sample_surface(ShapeKind kind, const ShapeParams& s, Rng& rng) {
  constexpr double pi = std::numbers::pi;
  switch (kind) {
    case ShapeKind::Sphere:
      return s.a * random_unit_vector(rng);
    case ShapeKind::Box: {
      const double ax = s.b * s.c, ay = s.a * s.c, az = s.a * s.b;
      const double pick = rng.uniform() * (ax + ay + az);
      const double u = rng.uniform() - 0.5, v = rng.uniform() - 0.5;
      const double side = rng.uniform() < 0.5 ? -0.5 : 0.5;
      if (pick < ax) return {side * s.a, u * s.b, v * s.c};
      if (pick < ax + ay) return {u * s.a, side * s.b, v * s.c};
      return {u * s.a, v * s.b, side * s.c};
    }
    case ShapeKind::Cylinder: {
      const double r = s.a, h = s.b;
      const double lateral = 2 * pi * r * h, cap = pi * r * r;
      const double pick = rng.uniform() * (lateral + 2 * cap);
      const double t = 2 * pi * rng.uniform();
      if (pick < lateral) return {r * std::cos(t), r * std::sin(t), h * (rng.uniform() - 0.5)};
      const double rr = r * std::sqrt(rng.uniform());
      return {rr * std::cos(t), rr * std::sin(t), pick < lateral + cap ? -h / 2 : h / 2};
    }
    case ShapeKind::Cone: {
      const double r = s.a, h = s.b;
      const double slant = std::sqrt(r * r + h * h);
      const double lateral = pi * r * slant, base = pi * r * r;
      const double t = 2 * pi * rng.uniform();
      if (rng.uniform() * (lateral + base) < lateral) {
        const double f = std::sqrt(rng.uniform());  // distance fraction from apex
        return {f * r * std::cos(t), f * r * std::sin(t), h / 2 - f * h};
      }
      const double rr = r * std::sqrt(rng.uniform());
      return {rr * std::cos(t), rr * std::sin(t), -h / 2};
    }
    case ShapeKind::Torus: {
      const double big = s.a, small = s.b;
      double theta;
      do {
        theta = 2 * pi * rng.uniform();
      } while (rng.uniform() * (big + small) > big + small * std::cos(theta));
      const double phi = 2 * pi * rng.uniform();
      const double ring = big + small * std::cos(theta);
      return {ring * std::cos(phi), ring * std::sin(phi), small * std::sin(theta)};
    }
  }
  throw Error(Errc::UnknownKind, "unknown shape kind");
}

}  // namespace detail

/// Area-uniform surface sampling of a parametric shape; deterministic in `seed`.
inline PointCloud synth_shape(ShapeKind kind, std::size_t n_points, const ShapeParams& params, std::uint64_t seed) {
  if (n_points < 50) throw Error(Errc::InvalidArgument, "synth_shape needs n_points >= 50");
  if (!(params.a > 0) || !(params.b > 0) || (kind == ShapeKind::Box && !(params.c > 0))) {
    throw Error(Errc::InvalidArgument, "shape dimensions must be positive");
  }
  Rng rng(seed);
  PointCloud cloud;
  cloud.id = std::string(shape_name(kind));
  cloud.points.reserve(n_points);
  std::optional<Vec3> dir;
  if (params.view_dir) dir = params.view_dir->normalized();
  std::size_t attempts = 0;
  while (cloud.points.size() < n_points) {
    if (++attempts > 1000 * n_points) throw Error(Errc::InvalidArgument, "partial view keeps no surface");
    const Vec3 p = detail::sample_surface(kind, params, rng);
    if (dir && p.dot(*dir) < 0.0) continue;
    cloud.points.emplace_back(p);
  }
  return cloud;
}

/// One randomized single-view capture of a shape category: intra-class size
/// variation, a random viewing direction (half-space cull), then a random
/// rigid pose. The sensor sits 0.8 m out along the viewing direction.
inline PointCloud synth_random_view(ShapeKind kind, std::size_t n_points, std::uint64_t seed, bool partial = true) {
  Rng rng(mix_seed(seed, 0x5eed));
  ShapeParams params;
  switch (kind) {
    case ShapeKind::Sphere:
      params.a = rng.uniform(0.04, 0.06);
      break;
    case ShapeKind::Box:
      params.a = rng.uniform(0.09, 0.13);
      params.b = rng.uniform(0.05, 0.07);
      params.c = rng.uniform(0.025, 0.035);
      break;
    case ShapeKind::Cylinder:
      params.a = rng.uniform(0.025, 0.035);
      params.b = rng.uniform(0.10, 0.14);
      break;
    case ShapeKind::Cone:
      params.a = rng.uniform(0.035, 0.05);
      params.b = rng.uniform(0.09, 0.12);
      break;
    case ShapeKind::Torus:
      params.a = rng.uniform(0.045, 0.06);
      params.b = rng.uniform(0.012, 0.018);
      break;
  }
  const Vec3 view = random_unit_vector(rng);
  if (partial) params.view_dir = view;
  PointCloud cloud = synth_shape(kind, n_points, params, rng.next());
  cloud.viewpoint = Point(0.8 * view);
  const Mat3 rot = random_rotation(rng);
  const Vec3 shift(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(0.5, 0.9));
  return rigid_transform(cloud, rot, shift);
}

}  // namespace lle
