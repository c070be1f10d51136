#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lle/lle.hpp"

namespace testing_support {

inline std::vector<double> random_histogram(lle::Rng& rng, std::size_t n, double zero_prob = 0.0) {
  std::vector<double> h(n);
  double sum = 0;
  for (auto& x : h) {
    x = rng.uniform() < zero_prob ? 0.0 : rng.uniform();
    sum += x;
  }
  if (sum == 0) h[0] = sum = 1;
  for (auto& x : h) x /= sum;
  return h;
}

inline lle::FeatureVector feature(std::string rep, std::vector<double> values) {
  return lle::FeatureVector{std::move(rep), std::move(values)};
}

/// Random smooth-ish object: one of the synthetic shapes with random size.
inline lle::PointCloud random_cloud(std::uint64_t seed, std::size_t n = 600) {
  const auto kind = lle::kAllShapeKinds[seed % lle::kAllShapeKinds.size()];
  return lle::synth_random_view(kind, n, seed);
}

inline lle::PointCloud gaussian_blob(std::uint64_t seed, std::size_t n, const lle::Vec3& scale) {
  lle::Rng rng(seed);
  lle::PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(scale.x() * rng.normal(), scale.y() * rng.normal(), scale.z() * rng.normal());
  }
  return c;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lle_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Blocks of `values` split at the given lengths.
inline std::vector<double> block_sums(const std::vector<double>& values, const std::vector<std::size_t>& lengths) {
  std::vector<double> sums;
  std::size_t at = 0;
  for (std::size_t len : lengths) {
    double s = 0;
    for (std::size_t i = 0; i < len; ++i) s += values.at(at + i);
    sums.push_back(s);
    at += len;
  }
  return sums;
}

}  // namespace testing_support
