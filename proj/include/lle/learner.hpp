#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "lle/feature.hpp"
#include "lle/metric.hpp"

namespace lle {

/// Novelty threshold for the bounded (Motyka-like) distances.
inline constexpr double kDefaultNoveltyThreshold = 0.75;

enum class InstanceOrigin { Taught, Corrected };

struct Instance {
  FeatureVector feature;
  std::string label;
  InstanceOrigin origin = InstanceOrigin::Taught;
  std::uint64_t timestamp = 0;
};

struct CategoryModel {
  std::string label;
  std::vector<Instance> instances;
};

struct Neighbor {
  std::string label;
  double distance = 0.0;
  std::uint64_t timestamp = 0;
};

struct Classification {
  std::string label;
  double best_distance = 0.0;
  std::vector<Neighbor> neighbors;                   // the k voters, nearest first
  std::map<std::string, double> category_best;       // min distance per known category
};

struct Novelty {
  bool known = false;
  std::string label;
  double min_distance = 0.0;
};

/// Instance-based learner: one representation, one distance function and a
/// per-category memory of every taught or corrected instance.
class IblLearner {
 public:
  IblLearner(std::string rep_id, DistanceKind dist, int k = 3) : rep_id_(std::move(rep_id)), dist_(dist), k_(k) {
    if (k_ < 1) throw Error(Errc::InvalidArgument, "k must be >= 1");
  }

  const std::string& rep_id() const { return rep_id_; }
  DistanceKind distance_kind() const { return dist_; }
  int k() const { return k_; }
  std::optional<std::size_t> dim() const { return dim_; }

  /// Skip storing an instance closer than `delta` to the nearest instance of
  /// the same label. Off by default.
  void set_dedup_delta(std::optional<double> delta) { dedup_delta_ = delta; }
  std::optional<double> dedup_delta() const { return dedup_delta_; }

  /// Throws if `feature` cannot be stored in or compared against this memory.
  void validate(const FeatureVector& feature) const {
    if (feature.rep_id != rep_id_) {
      throw Error(Errc::InvalidArgument, "learner for '" + rep_id_ + "' given feature '" + feature.rep_id + "'");
    }
    if (dim_ && feature.dim() != *dim_) {
      throw Error(Errc::DimMismatch, rep_id_ + ": expected dim " + std::to_string(*dim_) + ", got " +
                                         std::to_string(feature.dim()));
    }
    if (feature.values.empty()) throw Error(Errc::DimMismatch, rep_id_ + ": empty feature");
    require_finite(feature);
  }

  /// Returns false when the dedup hook rejected the instance.
  bool teach(const std::string& label, const FeatureVector& feature) {
    return store(label, feature, InstanceOrigin::Taught);
  }

  bool correct(const std::string& label, const FeatureVector& feature) {
    return store(label, feature, InstanceOrigin::Corrected);
  }

  Classification classify(const FeatureVector& query) const {
    if (categories_.empty()) throw Error(Errc::NoKnownCategories, rep_id_ + ": no known categories");
    validate(query);
    const std::vector<double> q = prepare_operand(dist_, query.span());

    std::vector<Neighbor> all;
    Classification out;
    for (const auto& [label, model] : categories_) {
      const auto& prepared = prepared_.at(label);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < model.instances.size(); ++i) {
        const double d = prepared_distance(dist_, q, prepared[i]);
        all.push_back({label, d, model.instances[i].timestamp});
        best = std::min(best, d);
      }
      out.category_best[label] = best;
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
      return std::tie(a.distance, a.label, a.timestamp) < std::tie(b.distance, b.label, b.timestamp);
    });
    const std::size_t voters = std::min<std::size_t>(static_cast<std::size_t>(k_), all.size());
    all.resize(voters);

    // label -> (votes, min voter distance)
    std::map<std::string, std::pair<std::size_t, double>> tally;
    for (const auto& n : all) {
      auto [it, fresh] = tally.try_emplace(n.label, 0, n.distance);
      ++it->second.first;
      it->second.second = std::min(it->second.second, n.distance);
    }
    auto winner = tally.begin();
    for (auto it = std::next(tally.begin()); it != tally.end(); ++it) {
      const auto& [votes, dmin] = it->second;
      const auto& [wvotes, wdmin] = winner->second;
      if (votes > wvotes || (votes == wvotes && dmin < wdmin)) winner = it;
    }
    out.label = winner->first;
    out.best_distance = out.category_best.at(out.label);
    out.neighbors = std::move(all);
    return out;
  }

  /// Unknown iff every stored instance is farther than `threshold`.
  Novelty novelty_check(const FeatureVector& query, double threshold) const {
    if (!(threshold > 0)) throw Error(Errc::InvalidArgument, "novelty threshold must be > 0");
    if (categories_.empty()) return {};
    const Classification c = classify(query);
    double min_d = std::numeric_limits<double>::infinity();
    for (const auto& [label, d] : c.category_best) min_d = std::min(min_d, d);
    if (min_d > threshold) return {false, {}, min_d};
    return {true, c.label, min_d};
  }

  /// Returns false if the label was not known.
  bool forget(const std::string& label) {
    prepared_.erase(label);
    return categories_.erase(label) > 0;
  }

  std::vector<std::string> categories() const {
    std::vector<std::string> out;
    for (const auto& [label, model] : categories_) out.push_back(label);
    return out;
  }

  std::map<std::string, std::size_t> instance_counts() const {
    std::map<std::string, std::size_t> out;
    for (const auto& [label, model] : categories_) out[label] = model.instances.size();
    return out;
  }

  const std::map<std::string, CategoryModel>& models() const { return categories_; }

  std::size_t total_instances() const { return count_if_origin(std::nullopt); }
  std::size_t taught_count() const { return count_if_origin(InstanceOrigin::Taught); }
  std::size_t corrected_count() const { return count_if_origin(InstanceOrigin::Corrected); }

  nlohmann::json to_json() const {
    nlohmann::json cats = nlohmann::json::array();
    for (const auto& [label, model] : categories_) {
      nlohmann::json insts = nlohmann::json::array();
      for (const auto& inst : model.instances) {
        insts.push_back({{"origin", inst.origin == InstanceOrigin::Taught ? "taught" : "corrected"},
                         {"timestamp", inst.timestamp},
                         {"values", inst.feature.values}});
      }
      cats.push_back({{"label", label}, {"instances", std::move(insts)}});
    }
    nlohmann::json j = {{"format", "lle-learner"},
                        {"version", 1},
                        {"rep_id", rep_id_},
                        {"distance", distance_name(dist_)},
                        {"k", k_},
                        {"clock", clock_},
                        {"categories", std::move(cats)}};
    j["dim"] = dim_ ? nlohmann::json(*dim_) : nlohmann::json(nullptr);
    j["dedup_delta"] = dedup_delta_ ? nlohmann::json(*dedup_delta_) : nlohmann::json(nullptr);
    return j;
  }

  static IblLearner from_json(const nlohmann::json& j) {
    try {
      if (j.at("format") != "lle-learner" || j.at("version") != 1) {
        throw Error(Errc::SchemaError, "not an lle-learner v1 snapshot");
      }
      IblLearner l(j.at("rep_id").get<std::string>(), parse_distance(j.at("distance").get<std::string>()),
                   j.at("k").get<int>());
      if (!j.at("dim").is_null()) l.dim_ = j.at("dim").get<std::size_t>();
      if (!j.at("dedup_delta").is_null()) l.dedup_delta_ = j.at("dedup_delta").get<double>();
      for (const auto& cat : j.at("categories")) {
        const auto label = cat.at("label").get<std::string>();
        for (const auto& inst : cat.at("instances")) {
          Instance in;
          in.label = label;
          in.origin = inst.at("origin") == "taught" ? InstanceOrigin::Taught : InstanceOrigin::Corrected;
          in.timestamp = inst.at("timestamp").get<std::uint64_t>();
          in.feature = FeatureVector{l.rep_id_, inst.at("values").get<std::vector<double>>()};
          l.validate(in.feature);
          l.dim_ = in.feature.dim();
          l.append(std::move(in));
        }
      }
      l.clock_ = j.at("clock").get<std::uint64_t>();
      return l;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::SchemaError, std::string("learner snapshot: ") + e.what());
    }
  }

 private:
  bool store(const std::string& label, const FeatureVector& feature, InstanceOrigin origin) {
    validate(feature);
    if (dedup_delta_) {
      const auto it = prepared_.find(label);
      if (it != prepared_.end()) {
        const std::vector<double> q = prepare_operand(dist_, feature.span());
        for (const auto& s : it->second) {
          if (prepared_distance(dist_, q, s) < *dedup_delta_) return false;
        }
      }
    }
    dim_ = feature.dim();
    append(Instance{feature, label, origin, clock_++});
    return true;
  }

  void append(Instance inst) {
    auto& model = categories_[inst.label];
    model.label = inst.label;
    prepared_[inst.label].push_back(prepare_operand(dist_, inst.feature.span()));
    model.instances.push_back(std::move(inst));
  }

  std::size_t count_if_origin(std::optional<InstanceOrigin> origin) const {
    std::size_t n = 0;
    for (const auto& [label, model] : categories_) {
      for (const auto& inst : model.instances) {
        if (!origin || inst.origin == *origin) ++n;
      }
    }
    return n;
  }

  std::string rep_id_;
  DistanceKind dist_;
  int k_;
  std::optional<std::size_t> dim_;
  std::optional<double> dedup_delta_;
  std::uint64_t clock_ = 0;
  std::map<std::string, CategoryModel> categories_;
  std::map<std::string, std::vector<std::vector<double>>> prepared_;
};

}  // namespace lle
