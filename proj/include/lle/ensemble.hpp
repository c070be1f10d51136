#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lle/descriptors.hpp"
#include "lle/learner.hpp"

namespace lle {

/// One object view, one feature per representation.
using MultiViewFeatures = std::map<std::string, FeatureVector>;

/// How member distances are made comparable when the vote is tied.
enum class TieBreak { Raw, MinMax, Rank };

constexpr std::string_view tie_break_name(TieBreak t) {
  switch (t) {
    case TieBreak::Raw: return "raw";
    case TieBreak::MinMax: return "minmax";
    case TieBreak::Rank: return "rank";
  }
  return "";
}

inline TieBreak parse_tie_break(std::string_view s) {
  for (auto t : {TieBreak::Raw, TieBreak::MinMax, TieBreak::Rank}) {
    if (tie_break_name(t) == s) return t;
  }
  throw Error(Errc::InvalidArgument, "unknown tie-break strategy '" + std::string(s) + "'");
}

struct MemberSpec {
  std::string rep_id;
  DistanceKind distance = DistanceKind::Motyka;
  int k = 3;
  double weight = 1.0;
};

struct EnsembleConfig {
  std::string name = "custom";
  std::vector<MemberSpec> members;
  TieBreak tie_break = TieBreak::MinMax;
  bool weighted = false;
};

struct MemberVote {
  std::string rep_id;
  std::string label;
  double best_distance = 0.0;
};

struct Prediction {
  std::string label;
  std::vector<MemberVote> votes;
  bool tie_break_used = false;
};

class Ensemble {
 public:
  Ensemble(std::string name, std::vector<IblLearner> members, TieBreak tie_break = TieBreak::MinMax,
           std::vector<double> weights = {})
      : name_(std::move(name)), members_(std::move(members)), tie_break_(tie_break), weights_(std::move(weights)) {
    if (members_.empty()) throw Error(Errc::InvalidArgument, "ensemble needs at least one member");
    std::set<std::string> seen;
    for (const auto& m : members_) {
      if (!seen.insert(m.rep_id()).second) throw Error(Errc::DuplicateRep, "duplicate member '" + m.rep_id() + "'");
    }
    if (!weights_.empty() && weights_.size() != members_.size()) {
      throw Error(Errc::InvalidArgument, "one weight per member expected");
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<IblLearner>& members() const { return members_; }
  std::vector<IblLearner>& members() { return members_; }
  TieBreak tie_break() const { return tie_break_; }

  /// Majority vote of the members' kNN labels. A tied vote goes to the tied
  /// label with the smallest per-member normalized best distance (min over
  /// members), then to the lexicographically smallest label.
  Prediction predict(const MultiViewFeatures& features) const {
    std::vector<Classification> results;
    results.reserve(members_.size());
    for (const auto& m : members_) results.push_back(m.classify(feature_for(m, features)));

    Prediction out;
    std::map<std::string, double> tally;
    for (std::size_t i = 0; i < members_.size(); ++i) {
      out.votes.push_back({members_[i].rep_id(), results[i].label, results[i].best_distance});
      tally[results[i].label] += weights_.empty() ? 1.0 : weights_[i];
    }
    double top = 0;
    for (const auto& [label, v] : tally) top = std::max(top, v);
    std::vector<std::string> tied;
    for (const auto& [label, v] : tally) {
      if (v == top) tied.push_back(label);
    }
    if (tied.size() == 1) {
      out.label = tied.front();
      return out;
    }

    out.tie_break_used = true;
    double best_score = std::numeric_limits<double>::infinity();
    out.label = tied.front();
    for (const auto& label : tied) {  // sorted, so strict < keeps the lexicographic winner
      double score = std::numeric_limits<double>::infinity();
      for (const auto& r : results) {
        if (const auto s = comparable_distance(r, label)) score = std::min(score, *s);
      }
      if (score < best_score) {
        best_score = score;
        out.label = label;
      }
    }
    return out;
  }

  void teach_all(const std::string& label, const MultiViewFeatures& features) {
    broadcast(label, features, InstanceOrigin::Taught);
  }

  void correct_all(const std::string& label, const MultiViewFeatures& features) {
    broadcast(label, features, InstanceOrigin::Corrected);
  }

  std::vector<std::size_t> instance_counts() const {
    std::vector<std::size_t> out;
    for (const auto& m : members_) out.push_back(m.total_instances());
    return out;
  }

 private:
  static const FeatureVector& feature_for(const IblLearner& m, const MultiViewFeatures& features) {
    const auto it = features.find(m.rep_id());
    if (it == features.end()) throw Error(Errc::MissingRepresentation, "no '" + m.rep_id() + "' feature for view");
    return it->second;
  }

  std::optional<double> comparable_distance(const Classification& r, const std::string& label) const {
    const auto it = r.category_best.find(label);
    if (it == r.category_best.end()) return std::nullopt;
    const double d = it->second;
    switch (tie_break_) {
      case TieBreak::Raw:
        return d;
      case TieBreak::MinMax: {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& [l, v] : r.category_best) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        return hi > lo ? (d - lo) / (hi - lo) : 0.0;
      }
      case TieBreak::Rank: {
        std::size_t closer = 0;
        for (const auto& [l, v] : r.category_best) {
          if (v < d) ++closer;
        }
        const std::size_t n = r.category_best.size();
        return n > 1 ? static_cast<double>(closer) / static_cast<double>(n - 1) : 0.0;
      }
    }
    return d;
  }

  // Validates every member's feature before mutating any of them.
  void broadcast(const std::string& label, const MultiViewFeatures& features, InstanceOrigin origin) {
    for (const auto& m : members_) m.validate(feature_for(m, features));
    for (auto& m : members_) {
      const auto& f = feature_for(m, features);
      if (origin == InstanceOrigin::Taught) {
        m.teach(label, f);
      } else {
        m.correct(label, f);
      }
    }
  }

  std::string name_;
  std::vector<IblLearner> members_;
  TieBreak tie_break_;
  std::vector<double> weights_;
};

/// A rep is buildable if it is native (good<N>, esf, vfh) or a registered
/// external embedding.
inline bool rep_available(const std::string& rep_id, const EmbeddingRegistry* registry) {
  if (is_native_rep(rep_id)) return true;
  return rep_id.rfind("ext:", 0) == 0 && registry && registry->contains(rep_id);
}

inline Ensemble build_ensemble(const EnsembleConfig& cfg, const EmbeddingRegistry* registry = nullptr) {
  if (cfg.members.empty()) throw Error(Errc::InvalidArgument, "ensemble config has no members");
  std::vector<IblLearner> members;
  std::vector<double> weights;
  std::set<std::string> seen;
  for (const auto& spec : cfg.members) {
    if (!seen.insert(spec.rep_id).second) throw Error(Errc::DuplicateRep, "duplicate member '" + spec.rep_id + "'");
    if (!rep_available(spec.rep_id, registry)) throw Error(Errc::UnknownRep, "unknown representation '" + spec.rep_id + "'");
    members.emplace_back(spec.rep_id, spec.distance, spec.k);
    weights.push_back(spec.weight);
  }
  if (!cfg.weighted) weights.clear();
  return Ensemble(cfg.name, std::move(members), cfg.tie_break, std::move(weights));
}

/// Named member sets, each with Motyka distance and k = 3:
///   handcrafted-only  good9, esf, vfh
///   mixed             good9, esf, <first embedding>
///   deep-only         three embeddings
/// `embeddings` lists the external reps to use; each must be registered.
inline EnsembleConfig ensemble_preset(std::string_view name, const EmbeddingRegistry* registry = nullptr,
                                      const std::vector<std::string>& embeddings = {}) {
  EnsembleConfig cfg;
  cfg.name = std::string(name);
  auto ext = [&](std::size_t i) {
    if (i >= embeddings.size()) {
      throw Error(Errc::UnknownRep, "preset '" + cfg.name + "' needs " + std::to_string(i + 1) + " embedding(s)");
    }
    const std::string id = external_rep_id(embeddings[i]);
    if (!registry || !registry->contains(id)) throw Error(Errc::UnknownRep, "embedding '" + id + "' is not registered");
    return id;
  };
  if (name == "handcrafted-only") {
    cfg.members = {{"good9"}, {"esf"}, {"vfh"}};
  } else if (name == "mixed") {
    cfg.members = {{"good9"}, {"esf"}, {ext(0)}};
  } else if (name == "deep-only") {
    cfg.members = {{ext(0)}, {ext(1)}, {ext(2)}};
  } else {
    throw Error(Errc::InvalidArgument, "unknown ensemble preset '" + cfg.name + "'");
  }
  return cfg;
}

inline nlohmann::json to_json(const EnsembleConfig& cfg) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : cfg.members) {
    members.push_back({{"rep", m.rep_id}, {"distance", std::string(distance_name(m.distance))}, {"k", m.k},
                       {"weight", m.weight}});
  }
  return {{"name", cfg.name},
          {"members", members},
          {"tie_break", std::string(tie_break_name(cfg.tie_break))},
          {"weighted", cfg.weighted}};
}

/// Parses an ensemble block: either {"preset": ..., "embeddings": [...]} or
/// {"members": [{"rep", "distance", "k", "weight"}...]}, plus optional
/// "name", "tie_break", "weighted", and for presets "distance"/"k" overrides.
inline EnsembleConfig ensemble_config_from_json(const nlohmann::json& j, const EmbeddingRegistry* registry = nullptr) {
  try {
    EnsembleConfig cfg;
    if (j.contains("preset")) {
      cfg = ensemble_preset(j.at("preset").get<std::string>(), registry,
                            j.value("embeddings", std::vector<std::string>{}));
      for (auto& m : cfg.members) {
        if (j.contains("distance")) m.distance = parse_distance(j.at("distance").get<std::string>());
        if (j.contains("k")) m.k = j.at("k").get<int>();
      }
    } else {
      for (const auto& m : j.at("members")) {
        MemberSpec spec;
        spec.rep_id = m.at("rep").get<std::string>();
        spec.distance = parse_distance(m.value("distance", std::string("motyka")));
        spec.k = m.value("k", 3);
        spec.weight = m.value("weight", 1.0);
        cfg.members.push_back(spec);
      }
    }
    cfg.name = j.value("name", cfg.name);
    cfg.tie_break = parse_tie_break(j.value("tie_break", std::string("minmax")));
    cfg.weighted = j.value("weighted", false);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaError, std::string("ensemble config: ") + e.what());
  }
}

}  // namespace lle
