#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "lle/feature.hpp"

namespace lle {

inline std::string external_rep_id(const std::string& name) {
  return name.rfind("ext:", 0) == 0 ? name : "ext:" + name;
}

/// Dimension registry for externally computed embeddings. The first
/// attachment of a representation fixes its dimension.
class EmbeddingRegistry {
 public:
  std::optional<std::size_t> dim(const std::string& rep_id) const {
    std::shared_lock lock(mutex_);
    const auto it = dims_.find(external_rep_id(rep_id));
    if (it == dims_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const std::string& rep_id) const { return dim(rep_id).has_value(); }

  std::vector<std::string> reps() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [k, v] : dims_) out.push_back(k);
    return out;
  }

  /// Registers `dim` for a new representation or checks it against the
  /// registered one; returns the registered dimension.
  std::size_t register_dim(const std::string& rep_id, std::size_t dim, const std::string& view_id = {}) {
    const std::string id = external_rep_id(rep_id);
    {
      std::shared_lock lock(mutex_);
      const auto it = dims_.find(id);
      if (it != dims_.end()) return check(id, it->second, dim, view_id);
    }
    std::unique_lock lock(mutex_);
    const auto [it, inserted] = dims_.emplace(id, dim);
    return inserted ? dim : check(id, it->second, dim, view_id);
  }

 private:
  static std::size_t check(const std::string& id, std::size_t expected, std::size_t got, const std::string& view_id) {
    if (expected != got) {
      throw Error(Errc::DimMismatch, id + (view_id.empty() ? "" : " view '" + view_id + "'") + ": expected dim " +
                                         std::to_string(expected) + ", got " + std::to_string(got));
    }
    return expected;
  }

  mutable std::shared_mutex mutex_;
  std::map<std::string, std::size_t> dims_;
};

/// Wraps an externally computed embedding as a feature; values are
/// L2-normalized (an all-zero vector is kept as is).
inline FeatureVector attach_external_embedding(EmbeddingRegistry& registry, const std::string& view_id,
                                               const std::string& rep_id, std::span<const double> values) {
  if (values.empty()) throw Error(Errc::InvalidArgument, "empty embedding for view '" + view_id + "'");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, "embedding for view '" + view_id + "' is not finite");
  }
  FeatureVector f{external_rep_id(rep_id), std::vector<double>(values.begin(), values.end())};
  registry.register_dim(f.rep_id, f.dim(), view_id);
  double norm = 0;
  for (double v : f.values) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0) {
    for (double& v : f.values) v /= norm;
  }
  return f;
}

}  // namespace lle
