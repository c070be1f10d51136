#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "lle/descriptors/good.hpp"
#include "lle/random.hpp"

namespace lle {

struct EsfConfig {
  int samples = 20000;
  int grid = 64;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kEsfBins = 64;
inline constexpr std::size_t kEsfHistograms = 10;

namespace detail {

class OccupancyGrid {
 public:
  OccupancyGrid(const PointCloud& cloud, const AxisBox& box, int grid)
      : lo_(box.lo), n_(grid), cell_(box.largest_side() / grid), occ_(static_cast<std::size_t>(grid) * grid * grid, 0) {
    for (const auto& p : cloud.points) occ_[index(p.vec())] = 1;
  }

  double cell() const { return cell_; }

  bool occupied(const Vec3& p) const { return occ_[index(p)] != 0; }

  // Fraction of half-voxel steps along [a, b] (endpoints included) that land
  // in occupied cells, together with the step count.
  std::pair<std::size_t, std::size_t> trace(const Vec3& a, const Vec3& b) const {
    const double len = (b - a).norm();
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / (0.5 * cell_))));
    std::size_t hits = 0;
    for (std::size_t q = 0; q <= m; ++q) {
      const double t = static_cast<double>(q) / static_cast<double>(m);
      if (occupied(a + t * (b - a))) ++hits;
    }
    return {hits, m + 1};
  }

 private:
  std::size_t axis_index(double rel) const {
    if (!(rel > 0)) return 0;
    const auto i = static_cast<std::size_t>(rel / cell_);
    return i >= static_cast<std::size_t>(n_) ? static_cast<std::size_t>(n_) - 1 : i;
  }

  std::size_t index(const Vec3& p) const {
    const std::size_t n = static_cast<std::size_t>(n_);
    return (axis_index(p.x() - lo_.x()) * n + axis_index(p.y() - lo_.y())) * n + axis_index(p.z() - lo_.z());
  }

  Vec3 lo_;
  int n_;
  double cell_;
  std::vector<std::uint8_t> occ_;
};

enum SurfaceClass : std::size_t { kIn = 0, kOut = 1, kMixed = 2 };

inline SurfaceClass classify_fraction(std::size_t hits, std::size_t steps) {
  const double f = static_cast<double>(hits) / static_cast<double>(steps);
  if (f >= 0.8) return kIn;
  if (f <= 0.2) return kOut;
  return kMixed;
}

}  // namespace detail

/// Ensemble of Shape Functions: ten 64-bin histograms laid out as
/// [D2 in, D2 out, D2 mixed, D2 in-ratio, A3 in, A3 out, A3 mixed,
///  D3 in, D3 out, D3 mixed], each normalized to unit mass.
///
/// Each sample draws three distinct points from the (x, y, z)-sorted cloud.
/// Its three sides feed D2 and the in-ratio, the angle at the first point
/// feeds A3 (classified by the opposite side), and the triangle's sqrt-area
/// feeds D3 (classified by the pooled coverage of all three sides). A side is
/// "in" when >= 80% of its half-voxel steps hit the occupancy grid, "out" at
/// <= 20%, "mixed" otherwise. Distances and sqrt-areas are scaled by the
/// bounding-box diagonal, angles by pi.
inline FeatureVector esf_descriptor(const PointCloud& cloud, const EsfConfig& cfg = {}) {
  if (cfg.samples < 1000) throw Error(Errc::InvalidArgument, "ESF needs samples >= 1000");
  if (cfg.grid < 8) throw Error(Errc::InvalidArgument, "ESF needs grid >= 8");
  if (cloud.size() < 3) throw Error(Errc::DegenerateCloud, "ESF needs at least 3 points");
  // Pose-normalized so the voxel grid and the sampled sequence follow the
  // object rather than the sensor.
  const PointCloud world = detail::canonical_copy(cloud);
  const PointCloud sorted = detail::canonical_copy(transform_to_frame(world, principal_frame(world)));
  const detail::AxisBox box = detail::bounding_box(sorted);
  const double diag = (box.hi - box.lo).norm();
  if (!(diag > 1e-10)) throw Error(Errc::DegenerateCloud, "cloud '" + cloud.id + "' has zero extent");
  const detail::OccupancyGrid grid(sorted, box, cfg.grid);

  constexpr std::size_t B = kEsfBins;
  std::vector<double> h(kEsfHistograms * B, 0.0);
  auto add = [&](std::size_t hist, double unit_value) { h[hist * B + detail::bin_of(unit_value, B)] += 1.0; };

  Rng rng(cfg.seed);
  const std::uint64_t n = sorted.size();
  for (int s = 0; s < cfg.samples; ++s) {
    const std::uint64_t i = rng.index(n);
    std::uint64_t j, k;
    do j = rng.index(n); while (j == i);
    do k = rng.index(n); while (k == i || k == j);
    const Vec3 a = sorted.points[i].vec(), b = sorted.points[j].vec(), c = sorted.points[k].vec();

    const std::array<std::pair<Vec3, Vec3>, 3> sides{{{a, b}, {b, c}, {c, a}}};
    std::size_t pooled_hits = 0, pooled_steps = 0;
    std::array<std::pair<std::size_t, std::size_t>, 3> traced;
    for (std::size_t e = 0; e < 3; ++e) {
      traced[e] = grid.trace(sides[e].first, sides[e].second);
      const auto [hits, steps] = traced[e];
      pooled_hits += hits;
      pooled_steps += steps;
      const double d = (sides[e].second - sides[e].first).norm() / diag;
      add(detail::classify_fraction(hits, steps), d);
      add(3, static_cast<double>(hits) / static_cast<double>(steps));
    }

    const Vec3 ab = b - a, ac = c - a;
    double angle = 0.0;
    if (ab.norm() > 0 && ac.norm() > 0) {
      angle = std::acos(std::clamp(ab.dot(ac) / (ab.norm() * ac.norm()), -1.0, 1.0));
    }
    add(4 + detail::classify_fraction(traced[1].first, traced[1].second), angle / std::numbers::pi);

    const double area = 0.5 * ab.cross(ac).norm();
    add(7 + detail::classify_fraction(pooled_hits, pooled_steps), std::sqrt(area) / diag);
  }

  for (std::size_t b = 0; b < kEsfHistograms; ++b) detail::normalize_block(std::span<double>(h).subspan(b * B, B));
  return FeatureVector{"esf", std::move(h)};
}

}  // namespace lle
