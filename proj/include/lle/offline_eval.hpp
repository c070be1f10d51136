#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lle/dataset.hpp"
#include "lle/ensemble.hpp"
#include "lle/random.hpp"

namespace lle {

struct ViewRef {
  std::size_t category = 0;
  std::size_t view = 0;
  friend auto operator<=>(const ViewRef&, const ViewRef&) = default;
};

struct FoldSplit {
  std::vector<std::vector<ViewRef>> folds;  // test views of each fold
  std::vector<std::string> warnings;
};

/// Stratified split: each category's shuffled views are dealt round-robin
/// over the folds, starting where the previous category stopped so fold sizes
/// stay balanced overall.
inline FoldSplit kfold_split(const std::vector<std::size_t>& views_per_category,
                             const std::vector<std::string>& labels, int k, std::uint64_t seed) {
  if (k < 2) throw Error(Errc::InvalidArgument, "k-fold needs k >= 2");
  FoldSplit split;
  split.folds.resize(static_cast<std::size_t>(k));
  Rng rng(mix_seed(seed, 0xf01d));
  std::size_t offset = 0;
  for (std::size_t c = 0; c < views_per_category.size(); ++c) {
    const std::size_t n = views_per_category[c];
    const std::string& label = c < labels.size() ? labels[c] : std::to_string(c);
    if (n < 2) throw Error(Errc::TooFewViews, "category '" + label + "' has fewer than 2 views");
    if (n < static_cast<std::size_t>(k)) {
      split.warnings.push_back("category '" + label + "' has " + std::to_string(n) + " views for " +
                               std::to_string(k) + " folds; some folds get none");
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t j = 0; j < n; ++j) split.folds[(offset + j) % split.folds.size()].push_back({c, idx[j]});
    offset = (offset + n) % split.folds.size();
  }
  for (auto& f : split.folds) std::sort(f.begin(), f.end());
  return split;
}

inline FoldSplit kfold_split(const FeatureDataset& ds, int k, std::uint64_t seed) {
  std::vector<std::size_t> counts;
  std::vector<std::string> labels;
  for (const auto& c : ds.categories) {
    counts.push_back(c.views.size());
    labels.push_back(c.label);
  }
  return kfold_split(counts, labels, k, seed);
}

struct FoldAudit {
  std::vector<std::string> taught;
  std::vector<std::string> tested;
};

struct EvalReport {
  double aca = 0;
  double instance_accuracy = 0;
  std::map<std::string, double> per_class;
  std::map<std::string, double> member_aca;
  std::map<std::string, double> member_instance_accuracy;
  std::size_t tested = 0;
  std::size_t tie_breaks = 0;
  double elapsed_seconds = 0;
  std::optional<double> level;  // sweep level (category count, sigma or voxel in meters)
  std::string level_kind;
  int folds = 0;
  std::uint64_t seed = 0;
  EnsembleConfig config;
  std::vector<std::string> categories;
  std::vector<FoldAudit> audit;
  std::vector<std::string> warnings;
};

namespace detail {

struct ClassTally {
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_class;  // category -> (correct, total)
  void add(std::size_t c, bool ok) {
    auto& t = per_class[c];
    t.first += ok;
    ++t.second;
  }
  void merge(const ClassTally& o) {
    for (const auto& [c, t] : o.per_class) {
      per_class[c].first += t.first;
      per_class[c].second += t.second;
    }
  }
  // (ACA, instance accuracy)
  std::pair<double, double> accuracies() const {
    double sum = 0;
    std::size_t correct = 0, total = 0;
    for (const auto& [c, t] : per_class) {
      sum += static_cast<double>(t.first) / static_cast<double>(t.second);
      correct += t.first;
      total += t.second;
    }
    if (per_class.empty()) return {0, 0};
    return {sum / static_cast<double>(per_class.size()), static_cast<double>(correct) / static_cast<double>(total)};
  }
};

struct FoldResult {
  ClassTally ensemble;
  std::vector<ClassTally> members;
  std::size_t tie_breaks = 0;
  FoldAudit audit;
};

}  // namespace detail

struct CrossValidationOptions {
  int folds = 10;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  const EmbeddingRegistry* registry = nullptr;
};

/// k-fold cross-validation with a fresh agent per fold. Training views come
/// from `train`; test views are looked up at the same position in `test`,
/// which lets robustness sweeps perturb only the test side. Member accuracies
/// are the members' own votes, i.e. those of single-member ensembles.
inline EvalReport cross_validate(const EnsembleConfig& config, const FeatureDataset& train, const FeatureDataset& test,
                                 const CrossValidationOptions& opts = {}) {
  validate_dataset(train);
  const auto start = std::chrono::steady_clock::now();
  const FoldSplit split = kfold_split(train, opts.folds, opts.seed);
  build_ensemble(config, opts.registry);  // fail fast on a bad config

  std::vector<detail::FoldResult> results(split.folds.size());
  parallel_for(split.folds.size(), opts.jobs, [&](std::size_t f) {
    const std::set<ViewRef> held_out(split.folds[f].begin(), split.folds[f].end());
    Ensemble ensemble = build_ensemble(config, opts.registry);
    detail::FoldResult& r = results[f];
    r.members.resize(ensemble.members().size());
    for (std::size_t c = 0; c < train.categories.size(); ++c) {
      for (std::size_t v = 0; v < train.categories[c].views.size(); ++v) {
        if (held_out.count({c, v})) continue;
        const auto& view = train.categories[c].views[v];
        ensemble.teach_all(train.categories[c].label, view.features);
        r.audit.taught.push_back(view.id);
      }
    }
    for (const ViewRef& ref : split.folds[f]) {
      const auto& view = test.categories.at(ref.category).views.at(ref.view);
      const std::string& truth = train.categories[ref.category].label;
      const Prediction p = ensemble.predict(view.features);
      r.ensemble.add(ref.category, p.label == truth);
      for (std::size_t m = 0; m < p.votes.size(); ++m) r.members[m].add(ref.category, p.votes[m].label == truth);
      r.tie_breaks += p.tie_break_used;
      r.audit.tested.push_back(view.id);
    }
  });

  detail::ClassTally total;
  std::vector<detail::ClassTally> members(config.members.size());
  EvalReport report;
  for (const auto& r : results) {
    total.merge(r.ensemble);
    for (std::size_t m = 0; m < members.size(); ++m) members[m].merge(r.members[m]);
    report.tie_breaks += r.tie_breaks;
    report.audit.push_back(r.audit);
  }
  std::tie(report.aca, report.instance_accuracy) = total.accuracies();
  for (const auto& [c, t] : total.per_class) {
    report.per_class[train.categories[c].label] = static_cast<double>(t.first) / static_cast<double>(t.second);
    report.tested += t.second;
  }
  for (std::size_t m = 0; m < members.size(); ++m) {
    const auto [aca, inst] = members[m].accuracies();
    report.member_aca[config.members[m].rep_id] = aca;
    report.member_instance_accuracy[config.members[m].rep_id] = inst;
  }
  for (const auto& c : train.categories) report.categories.push_back(c.label);
  report.folds = opts.folds;
  report.seed = opts.seed;
  report.config = config;
  report.warnings = split.warnings;
  report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline EvalReport cross_validate(const EnsembleConfig& config, const FeatureDataset& dataset,
                                 const CrossValidationOptions& opts = {}) {
  return cross_validate(config, dataset, dataset, opts);
}

/// Cross-validation on nested random category subsets: one seeded category
/// permutation, each count takes its prefix.
inline std::vector<EvalReport> scalability_sweep(const EnsembleConfig& config, const FeatureDataset& dataset,
                                                 const std::vector<std::size_t>& category_counts,
                                                 const CrossValidationOptions& opts = {}) {
  std::vector<std::size_t> perm(dataset.categories.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(mix_seed(opts.seed, 0x5ca1e));
  rng.shuffle(perm.begin(), perm.end());
  for (std::size_t n : category_counts) {
    if (n > perm.size()) {
      throw Error(Errc::CountTooLarge, std::to_string(n) + " categories requested, dataset has " +
                                           std::to_string(perm.size()));
    }
    if (n < 1) throw Error(Errc::InvalidArgument, "category count must be >= 1");
  }
  std::vector<EvalReport> out;
  for (std::size_t n : category_counts) {
    FeatureDataset subset{dataset.name, {}};
    for (std::size_t i = 0; i < n; ++i) subset.categories.push_back(dataset.categories[perm[i]]);
    EvalReport r = cross_validate(config, subset, opts);
    r.level = static_cast<double>(n);
    r.level_kind = "categories";
    out.push_back(std::move(r));
  }
  return out;
}

struct Perturbation {
  enum class Kind { Noise, Downsample };
  Kind kind = Kind::Noise;
  std::vector<double> levels;  // meters: noise sigma or voxel edge
};

inline PointCloud apply_perturbation(const PointCloud& cloud, Perturbation::Kind kind, double level,
                                     std::uint64_t seed) {
  if (kind == Perturbation::Kind::Noise) return add_gaussian_noise(cloud, level, mix_seed(seed, hash_string(cloud.id)));
  return voxel_downsample(cloud, level);
}

/// Per level, cross-validation where only the test views are perturbed before
/// description; training views keep their original density.
inline std::vector<EvalReport> robustness_sweep(const EnsembleConfig& config, const CloudDataset& clouds,
                                                const DescriberOptions& describer, const Perturbation& perturbation,
                                                const CrossValidationOptions& opts = {}) {
  if (perturbation.levels.empty()) throw Error(Errc::InvalidArgument, "robustness sweep needs at least one level");
  std::vector<std::string> reps;
  for (const auto& m : config.members) {
    if (!is_native_rep(m.rep_id)) {
      throw Error(Errc::UnknownRep, "robustness sweeps re-describe clouds; '" + m.rep_id + "' is not native");
    }
    reps.push_back(m.rep_id);
  }
  const FeatureDataset train = describe_dataset(clouds, reps, describer, opts.jobs);

  std::vector<EvalReport> out;
  for (double level : perturbation.levels) {
    CloudDataset perturbed{clouds.name, {}};
    for (const auto& cat : clouds.categories) {
      CloudCategory pc{cat.label, {}};
      for (const auto& view : cat.views) {
        pc.views.push_back(apply_perturbation(view, perturbation.kind, level, opts.seed));
      }
      perturbed.categories.push_back(std::move(pc));
    }
    const FeatureDataset test = describe_dataset(perturbed, reps, describer, opts.jobs);
    EvalReport r = cross_validate(config, train, test, opts);
    r.level = level;
    r.level_kind = perturbation.kind == Perturbation::Kind::Noise ? "noise_sigma_m" : "voxel_m";
    out.push_back(std::move(r));
  }
  return out;
}

/// True iff taught and tested ids are disjoint in every fold.
inline bool check_no_leakage(const EvalReport& report) {
  for (const auto& fold : report.audit) {
    const std::set<std::string> taught(fold.taught.begin(), fold.taught.end());
    for (const auto& id : fold.tested) {
      if (taught.count(id)) return false;
    }
  }
  return true;
}

inline nlohmann::json to_json(const EvalReport& r, bool include_timing = true) {
  nlohmann::json audit = nlohmann::json::array();
  for (const auto& f : r.audit) audit.push_back({{"taught", f.taught}, {"tested", f.tested}});
  nlohmann::json j = {{"format", "lle-eval-report"},
                      {"version", 1},
                      {"ACA", r.aca},
                      {"instance_accuracy", r.instance_accuracy},
                      {"per_class", r.per_class},
                      {"member_ACA", r.member_aca},
                      {"member_instance_accuracy", r.member_instance_accuracy},
                      {"tested", r.tested},
                      {"tie_breaks", r.tie_breaks},
                      {"folds", r.folds},
                      {"seed", r.seed},
                      {"config", to_json(r.config)},
                      {"categories", r.categories},
                      {"warnings", r.warnings},
                      {"audit", audit}};
  j["level"] = r.level ? nlohmann::json(*r.level) : nlohmann::json(nullptr);
  j["level_kind"] = r.level_kind;
  if (include_timing) j["elapsed_seconds"] = r.elapsed_seconds;
  return j;
}

}  // namespace lle
