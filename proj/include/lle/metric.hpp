#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lle/feature.hpp"

namespace lle {

enum class DistanceKind { Cosine, Gower, Motyka, Euclidean, Dice, Sorensen, Pearson, Neyman, Bhattacharyya, KLDivergence };

inline constexpr std::array<DistanceKind, 10> kAllDistanceKinds{
    DistanceKind::Cosine,  DistanceKind::Gower,   DistanceKind::Motyka, DistanceKind::Euclidean,
    DistanceKind::Dice,    DistanceKind::Sorensen, DistanceKind::Pearson, DistanceKind::Neyman,
    DistanceKind::Bhattacharyya, DistanceKind::KLDivergence};

/// Smoothing applied to both operands of the probabilistic kinds.
inline constexpr double kHistogramEpsilon = 1e-10;

constexpr std::string_view distance_name(DistanceKind k) {
  switch (k) {
    case DistanceKind::Cosine: return "cosine";
    case DistanceKind::Gower: return "gower";
    case DistanceKind::Motyka: return "motyka";
    case DistanceKind::Euclidean: return "euclidean";
    case DistanceKind::Dice: return "dice";
    case DistanceKind::Sorensen: return "sorensen";
    case DistanceKind::Pearson: return "pearson";
    case DistanceKind::Neyman: return "neyman";
    case DistanceKind::Bhattacharyya: return "bhattacharyya";
    case DistanceKind::KLDivergence: return "kl";
  }
  return "";
}

inline DistanceKind parse_distance(std::string_view name) {
  for (auto k : kAllDistanceKinds) {
    if (distance_name(k) == name) return k;
  }
  throw Error(Errc::InvalidArgument, "unknown distance '" + std::string(name) + "'");
}

/// Everything except Euclidean and Cosine sees epsilon-smoothed, unit-sum inputs.
constexpr bool is_probabilistic(DistanceKind k) { return k != DistanceKind::Euclidean && k != DistanceKind::Cosine; }

constexpr bool is_symmetric(DistanceKind k) {
  return k != DistanceKind::Pearson && k != DistanceKind::Neyman && k != DistanceKind::KLDivergence;
}

inline std::vector<double> normalize_histogram(std::span<const double> v, double epsilon) {
  if (!(epsilon >= 0)) throw Error(Errc::InvalidArgument, "epsilon must be >= 0");
  double sum = 0;
  for (double x : v) {
    if (x < 0) throw Error(Errc::NegativeValue, "histogram has a negative bin");
    sum += x;
  }
  if (!(sum > 0)) throw Error(Errc::ZeroSum, "histogram sums to zero");
  const double denom = sum + static_cast<double>(v.size()) * epsilon;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] + epsilon) / denom;
  return out;
}

inline FeatureVector normalize_histogram(const FeatureVector& v, double epsilon) {
  return FeatureVector{v.rep_id, normalize_histogram(v.span(), epsilon)};
}

/// Operand in the form the distance formula consumes (smoothed for the
/// probabilistic kinds, untouched otherwise).
inline std::vector<double> prepare_operand(DistanceKind kind, std::span<const double> v) {
  if (is_probabilistic(kind)) return normalize_histogram(v, kHistogramEpsilon);
  return {v.begin(), v.end()};
}

/// Distance between operands already passed through prepare_operand.
/// Asymmetric kinds treat `p` as the query and `q` as the stored instance.
inline double prepared_distance(DistanceKind kind, std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(Errc::DimMismatch, "distance between dims " + std::to_string(p.size()) + " and " +
                                       std::to_string(q.size()));
  }
  const std::size_t n = p.size();
  double r = 0;
  switch (kind) {
    case DistanceKind::Euclidean: {
      for (std::size_t i = 0; i < n; ++i) r += (p[i] - q[i]) * (p[i] - q[i]);
      return std::sqrt(r);
    }
    case DistanceKind::Cosine: {
      double dot = 0, pp = 0, qq = 0;
      for (std::size_t i = 0; i < n; ++i) {
        dot += p[i] * q[i];
        pp += p[i] * p[i];
        qq += q[i] * q[i];
      }
      if (!(pp > 0) || !(qq > 0)) throw Error(Errc::ZeroNorm, "cosine distance of a zero vector");
      return std::max(0.0, 1.0 - dot / (std::sqrt(pp) * std::sqrt(qq)));
    }
    case DistanceKind::Gower: {
      for (std::size_t i = 0; i < n; ++i) r += std::abs(p[i] - q[i]);
      return r / static_cast<double>(n);
    }
    case DistanceKind::Sorensen: {
      double den = 0;
      for (std::size_t i = 0; i < n; ++i) {
        r += std::abs(p[i] - q[i]);
        den += p[i] + q[i];
      }
      return r / den;
    }
    case DistanceKind::Motyka: {
      double den = 0;
      for (std::size_t i = 0; i < n; ++i) {
        r += std::max(p[i], q[i]);
        den += p[i] + q[i];
      }
      return r / den;
    }
    case DistanceKind::Dice: {
      double pp = 0, qq = 0;
      for (std::size_t i = 0; i < n; ++i) {
        r += (p[i] - q[i]) * (p[i] - q[i]);
        pp += p[i] * p[i];
        qq += q[i] * q[i];
      }
      return r / (pp + qq);
    }
    case DistanceKind::Pearson: {
      for (std::size_t i = 0; i < n; ++i) r += (p[i] - q[i]) * (p[i] - q[i]) / q[i];
      return r;
    }
    case DistanceKind::Neyman: {
      for (std::size_t i = 0; i < n; ++i) r += (p[i] - q[i]) * (p[i] - q[i]) / p[i];
      return r;
    }
    case DistanceKind::Bhattacharyya: {
      for (std::size_t i = 0; i < n; ++i) r += std::sqrt(p[i] * q[i]);
      return std::max(0.0, -std::log(r));
    }
    case DistanceKind::KLDivergence: {
      for (std::size_t i = 0; i < n; ++i) r += p[i] * std::log(p[i] / q[i]);
      return std::max(0.0, r);
    }
  }
  return r;
}

inline double distance(DistanceKind kind, std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(Errc::DimMismatch, "distance between dims " + std::to_string(p.size()) + " and " +
                                       std::to_string(q.size()));
  }
  if (!is_probabilistic(kind)) return prepared_distance(kind, p, q);
  return prepared_distance(kind, prepare_operand(kind, p), prepare_operand(kind, q));
}

inline double distance(DistanceKind kind, const FeatureVector& p, const FeatureVector& q) {
  return distance(kind, p.span(), q.span());
}

}  // namespace lle
