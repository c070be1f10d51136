#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "lle/cloud.hpp"
#include "lle/descriptors.hpp"
#include "lle/ensemble.hpp"

namespace lle {

struct LabeledView {
  std::string id;
  MultiViewFeatures features;
};

struct CategoryViews {
  std::string label;
  std::vector<LabeledView> views;
};

/// Labelled views with their precomputed representations.
struct FeatureDataset {
  std::string name;
  std::vector<CategoryViews> categories;

  std::size_t view_count() const {
    std::size_t n = 0;
    for (const auto& c : categories) n += c.views.size();
    return n;
  }
};

struct CloudCategory {
  std::string label;
  std::vector<PointCloud> views;  // PointCloud::id is the view id
};

struct CloudDataset {
  std::string name;
  std::vector<CloudCategory> categories;
};

/// Throws SchemaError unless every category is non-empty and view ids are
/// unique across the dataset.
template <class Dataset>
void validate_dataset(const Dataset& ds) {
  std::set<std::string> ids;
  std::set<std::string> labels;
  for (const auto& c : ds.categories) {
    if (c.views.empty()) throw Error(Errc::SchemaError, "category '" + c.label + "' has no views");
    if (!labels.insert(c.label).second) throw Error(Errc::SchemaError, "duplicate category '" + c.label + "'");
    for (const auto& v : c.views) {
      if (!ids.insert(v.id).second) throw Error(Errc::SchemaError, "duplicate view id '" + v.id + "'");
    }
  }
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
/// failure by index. jobs <= 1 runs inline.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::jthread> workers;
  const unsigned t = std::min<unsigned>(jobs, static_cast<unsigned>(n));
  for (unsigned w = 0; w < t; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += t) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Native features of one cloud for each requested representation.
inline MultiViewFeatures describe_view(const PointCloud& cloud, const std::vector<std::string>& reps,
                                       const DescriberOptions& opts) {
  MultiViewFeatures out;
  for (const auto& rep : reps) {
    FeatureVector f = describe(rep, cloud, opts);
    f.rep_id = rep;
    out.emplace(rep, std::move(f));
  }
  return out;
}

inline FeatureDataset describe_dataset(const CloudDataset& clouds, const std::vector<std::string>& reps,
                                       const DescriberOptions& opts, unsigned jobs = 1) {
  FeatureDataset out;
  out.name = clouds.name;
  std::vector<std::pair<std::size_t, std::size_t>> refs;
  for (std::size_t c = 0; c < clouds.categories.size(); ++c) {
    out.categories.push_back({clouds.categories[c].label, {}});
    out.categories.back().views.resize(clouds.categories[c].views.size());
    for (std::size_t v = 0; v < clouds.categories[c].views.size(); ++v) refs.emplace_back(c, v);
  }
  parallel_for(refs.size(), jobs, [&](std::size_t i) {
    const auto [c, v] = refs[i];
    const PointCloud& cloud = clouds.categories[c].views[v];
    out.categories[c].views[v] = LabeledView{cloud.id, describe_view(cloud, reps, opts)};
  });
  return out;
}

/// Merges external features (rep -> view id -> feature) into `ds`; every
/// view must be covered by every listed rep.
inline void merge_features(FeatureDataset& ds, const std::map<std::string, std::map<std::string, FeatureVector>>& ext) {
  for (auto& cat : ds.categories) {
    for (auto& view : cat.views) {
      for (const auto& [rep, rows] : ext) {
        const auto it = rows.find(view.id);
        if (it == rows.end()) throw Error(Errc::MissingRepresentation, "no '" + rep + "' feature for view '" + view.id + "'");
        view.features[rep] = it->second;
      }
    }
  }
}

/// Desk-scale stand-in dataset: `views` randomized partial captures of each
/// requested shape kind, ids "<kind>_<nnn>".
inline CloudDataset make_synthetic_dataset(const std::vector<ShapeKind>& kinds, std::size_t views, std::size_t n_points,
                                           std::uint64_t seed) {
  CloudDataset ds;
  ds.name = "synthetic";
  for (ShapeKind kind : kinds) {
    CloudCategory cat;
    cat.label = std::string(shape_name(kind));
    for (std::size_t v = 0; v < views; ++v) {
      PointCloud cloud = synth_random_view(kind, n_points, mix_seed(seed, hash_string(cat.label) + v));
      char buf[32];
      std::snprintf(buf, sizeof buf, "_%03zu", v);
      cloud.id = cat.label + buf;
      cat.views.push_back(std::move(cloud));
    }
    ds.categories.push_back(std::move(cat));
  }
  return ds;
}

}  // namespace lle
