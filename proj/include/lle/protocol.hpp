#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <deque>
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

/// What the simulated teacher needs from an agent: answer a question about a
/// view, absorb a taught view, absorb a corrected view.
template <class A>
concept OpenEndedAgent = requires(A& agent, const std::string& label, const LabeledView& view) {
  { agent.ask(view) } -> std::convertible_to<std::string>;
  agent.teach(label, view);
  agent.correct(label, view);
};

/// Adapts an Ensemble to the teacher's interface.
class EnsembleAgent {
 public:
  explicit EnsembleAgent(Ensemble ensemble) : ensemble_(std::move(ensemble)) {}

  std::string ask(const LabeledView& view) { return ensemble_.predict(view.features).label; }
  void teach(const std::string& label, const LabeledView& view) { ensemble_.teach_all(label, view.features); }
  void correct(const std::string& label, const LabeledView& view) { ensemble_.correct_all(label, view.features); }

  const Ensemble& ensemble() const { return ensemble_; }

 private:
  Ensemble ensemble_;
};

struct ProtocolConfig {
  double tau = 0.67;
  int views_per_teach = 3;
  int qci_limit_without_progress = 100;
  int window_multiplier = 3;
  int window_floor = 10;
  int initial_categories = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(tau > 0 && tau < 1)) throw Error(Errc::InvalidArgument, "tau must lie in (0, 1)");
    if (views_per_teach < 1) throw Error(Errc::InvalidArgument, "views_per_teach must be >= 1");
    if (qci_limit_without_progress < 1) throw Error(Errc::InvalidArgument, "QCI limit must be >= 1");
    if (window_multiplier < 1 || window_floor < 1) throw Error(Errc::InvalidArgument, "window rule must be >= 1");
    if (initial_categories < 1) throw Error(Errc::InvalidArgument, "initial_categories must be >= 1");
  }

  friend bool operator==(const ProtocolConfig&, const ProtocolConfig&) = default;
};

enum class StopReason { LackOfData, NoProgress };

constexpr std::string_view stop_reason_name(StopReason r) {
  return r == StopReason::LackOfData ? "lack_of_data" : "no_progress";
}

struct TraceEvent {
  enum class Kind { Introduce, Ask };
  Kind kind = Kind::Ask;
  std::size_t qci = 0;  // question count after this event
  std::string category;
  std::vector<std::string> views;  // taught views (introduce) or the asked view
  std::string predicted;
  bool correct = false;
  std::optional<double> protocol_accuracy;  // window accuracy after an ask
  std::size_t known = 0;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct CategoryCounts {
  std::size_t taught = 0;
  std::size_t corrected = 0;
  friend bool operator==(const CategoryCounts&, const CategoryCounts&) = default;
};

struct ProtocolReport {
  std::size_t qci = 0;
  double alc = 0;
  double aic = 0;
  double gca = 0;
  double apa = 0;
  StopReason stop_reason = StopReason::LackOfData;
  ProtocolConfig config;
  std::vector<std::string> introduced;  // in introduction order
  std::map<std::string, CategoryCounts> per_category;
  std::vector<double> apa_samples;
  std::vector<TraceEvent> trace;
};

/// Sliding window over the most recent answers; capacity is set on reset.
class AccuracyWindow {
 public:
  void reset(std::size_t capacity) {
    capacity_ = capacity;
    flags_.clear();
  }
  void push(bool correct) {
    flags_.push_back(correct);
    if (flags_.size() > capacity_) flags_.pop_front();
  }
  bool full() const { return flags_.size() >= capacity_; }
  bool empty() const { return flags_.empty(); }
  std::size_t size() const { return flags_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<bool>& flags() const { return flags_; }

 private:
  std::size_t capacity_ = 0;
  std::deque<bool> flags_;
};

/// Correct answers over window length.
inline double protocol_accuracy(const AccuracyWindow& window) {
  if (window.empty()) throw Error(Errc::EmptyWindow, "protocol accuracy of an empty window");
  const auto correct = std::count(window.flags().begin(), window.flags().end(), true);
  return static_cast<double>(correct) / static_cast<double>(window.size());
}

inline std::size_t window_length(const ProtocolConfig& cfg, std::size_t known) {
  return std::max<std::size_t>(static_cast<std::size_t>(cfg.window_floor),
                               static_cast<std::size_t>(cfg.window_multiplier) * known);
}

/// Simulated-teacher open-ended evaluation (test-then-train).
///
/// The teacher introduces `initial_categories` categories with
/// `views_per_teach` random views each, then keeps asking about never-seen
/// views of known categories, correcting every mistake with the misclassified
/// view. Once the window (max(floor, multiplier x known) answers since the last
/// introduction) is full and its accuracy exceeds tau, the next category is
/// introduced. The run stops with lack_of_data when no category is left to
/// introduce or no known category has unseen views, and with no_progress after
/// `qci_limit_without_progress` questions without an introduction.
///
/// Questions cycle through shuffled rounds of the known categories, so every
/// known category is asked before the window can fill.
template <OpenEndedAgent Agent>
ProtocolReport run_open_ended(Agent& agent, const FeatureDataset& dataset, const ProtocolConfig& config) {
  config.validate();
  const std::size_t vpt = static_cast<std::size_t>(config.views_per_teach);
  if (dataset.categories.size() < 2) throw Error(Errc::InsufficientDataset, "need at least 2 categories");
  for (const auto& c : dataset.categories) {
    if (c.views.size() < vpt + 1) {
      throw Error(Errc::InsufficientDataset,
                  "category '" + c.label + "' needs at least " + std::to_string(vpt + 1) + " views");
    }
  }

  Rng rng(config.seed);
  const std::size_t n_cat = dataset.categories.size();
  std::vector<std::size_t> order(n_cat);
  for (std::size_t i = 0; i < n_cat; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  std::vector<std::deque<std::size_t>> unseen(n_cat);
  for (std::size_t c = 0; c < n_cat; ++c) {
    std::vector<std::size_t> idx(dataset.categories[c].views.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx.begin(), idx.end());
    unseen[c].assign(idx.begin(), idx.end());
  }

  ProtocolReport report;
  report.config = config;
  std::vector<std::size_t> known;
  std::deque<std::size_t> round;
  AccuracyWindow window;
  std::size_t next_intro = 0, since_intro = 0, correct_total = 0;

  auto introduce = [&](std::size_t c) {
    const auto& cat = dataset.categories[c];
    TraceEvent ev{TraceEvent::Kind::Introduce, report.qci, cat.label};
    for (std::size_t t = 0; t < vpt; ++t) {
      const auto& view = cat.views[unseen[c].front()];
      unseen[c].pop_front();
      agent.teach(cat.label, view);
      ev.views.push_back(view.id);
    }
    report.per_category[cat.label].taught += vpt;
    report.introduced.push_back(cat.label);
    known.push_back(c);
    ev.known = known.size();
    report.trace.push_back(std::move(ev));
    window.reset(window_length(config, known.size()));
    round.clear();
    since_intro = 0;
  };
  auto sample_apa = [&] {
    if (!window.empty()) report.apa_samples.push_back(protocol_accuracy(window));
  };

  const std::size_t initial = std::min<std::size_t>(static_cast<std::size_t>(config.initial_categories), n_cat);
  while (next_intro < initial) introduce(order[next_intro++]);

  while (true) {
    if (round.empty()) {
      std::vector<std::size_t> candidates;
      for (std::size_t c : known) {
        if (!unseen[c].empty()) candidates.push_back(c);
      }
      if (candidates.empty()) {
        sample_apa();
        report.stop_reason = StopReason::LackOfData;
        break;
      }
      rng.shuffle(candidates.begin(), candidates.end());
      round.assign(candidates.begin(), candidates.end());
    }
    const std::size_t c = round.front();
    round.pop_front();
    if (unseen[c].empty()) continue;
    const auto& cat = dataset.categories[c];
    const auto& view = cat.views[unseen[c].front()];
    unseen[c].pop_front();

    const std::string predicted = agent.ask(view);
    const bool ok = predicted == cat.label;
    ++report.qci;
    ++since_intro;
    if (ok) {
      ++correct_total;
    } else {
      agent.correct(cat.label, view);
      ++report.per_category[cat.label].corrected;
    }
    window.push(ok);
    const double acc = protocol_accuracy(window);
    report.trace.push_back(
        {TraceEvent::Kind::Ask, report.qci, cat.label, {view.id}, predicted, ok, acc, known.size()});

    if (window.full() && acc > config.tau) {
      sample_apa();
      if (next_intro >= n_cat) {
        report.stop_reason = StopReason::LackOfData;
        break;
      }
      introduce(order[next_intro++]);
      continue;
    }
    if (since_intro >= static_cast<std::size_t>(config.qci_limit_without_progress)) {
      sample_apa();
      report.stop_reason = StopReason::NoProgress;
      break;
    }
  }

  std::size_t stored = 0;
  for (const auto& [label, counts] : report.per_category) stored += counts.taught + counts.corrected;
  report.alc = static_cast<double>(known.size());
  report.aic = static_cast<double>(stored) / report.alc;
  report.gca = report.qci ? static_cast<double>(correct_total) / static_cast<double>(report.qci) : 0.0;
  double apa = 0;
  for (double s : report.apa_samples) apa += s;
  report.apa = report.apa_samples.empty() ? 0.0 : apa / static_cast<double>(report.apa_samples.size());
  return report;
}

inline ProtocolReport run_open_ended(const Ensemble& ensemble, const FeatureDataset& dataset,
                                     const ProtocolConfig& config) {
  EnsembleAgent agent(ensemble);
  return run_open_ended(agent, dataset, config);
}

/// True iff no asked view had been taught before it was asked and no view
/// was asked twice.
inline bool check_test_then_train(const ProtocolReport& report) {
  std::set<std::string> taught, asked;
  for (const auto& ev : report.trace) {
    if (ev.kind == TraceEvent::Kind::Introduce) {
      for (const auto& v : ev.views) {
        if (asked.count(v) || !taught.insert(v).second) return false;
      }
    } else {
      const auto& v = ev.views.front();
      if (taught.count(v) || !asked.insert(v).second) return false;
      if (!ev.correct) taught.insert(v);
    }
  }
  return true;
}

inline nlohmann::json to_json(const ProtocolConfig& c) {
  return {{"tau", c.tau},
          {"views_per_teach", c.views_per_teach},
          {"qci_limit_without_progress", c.qci_limit_without_progress},
          {"window_multiplier", c.window_multiplier},
          {"window_floor", c.window_floor},
          {"initial_categories", c.initial_categories},
          {"seed", c.seed}};
}

inline ProtocolConfig protocol_config_from_json(const nlohmann::json& j) {
  try {
    ProtocolConfig c;
    c.tau = j.value("tau", c.tau);
    c.views_per_teach = j.value("views_per_teach", c.views_per_teach);
    c.qci_limit_without_progress = j.value("qci_limit_without_progress", c.qci_limit_without_progress);
    c.window_multiplier = j.value("window_multiplier", c.window_multiplier);
    c.window_floor = j.value("window_floor", c.window_floor);
    c.initial_categories = j.value("initial_categories", c.initial_categories);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaError, std::string("protocol config: ") + e.what());
  }
}

inline nlohmann::json to_json(const ProtocolReport& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& ev : r.trace) {
    nlohmann::json e = {{"kind", ev.kind == TraceEvent::Kind::Introduce ? "introduce" : "ask"},
                        {"qci", ev.qci},
                        {"category", ev.category},
                        {"views", ev.views},
                        {"known", ev.known}};
    if (ev.kind == TraceEvent::Kind::Ask) {
      e["predicted"] = ev.predicted;
      e["correct"] = ev.correct;
      e["protocol_accuracy"] = *ev.protocol_accuracy;
    }
    trace.push_back(std::move(e));
  }
  nlohmann::json per_cat = nlohmann::json::object();
  for (const auto& [label, c] : r.per_category) per_cat[label] = {{"taught", c.taught}, {"corrected", c.corrected}};
  return {{"format", "lle-protocol-report"},
          {"version", 1},
          {"QCI", r.qci},
          {"ALC", r.alc},
          {"AIC", r.aic},
          {"GCA", r.gca},
          {"APA", r.apa},
          {"stop_reason", std::string(stop_reason_name(r.stop_reason))},
          {"seed", r.config.seed},
          {"config", to_json(r.config)},
          {"introduced", r.introduced},
          {"per_category", per_cat},
          {"apa_samples", r.apa_samples},
          {"trace", trace}};
}

inline ProtocolReport protocol_report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "lle-protocol-report") throw Error(Errc::SchemaError, "not a protocol report");
    ProtocolReport r;
    r.qci = j.at("QCI").get<std::size_t>();
    r.alc = j.at("ALC").get<double>();
    r.aic = j.at("AIC").get<double>();
    r.gca = j.at("GCA").get<double>();
    r.apa = j.at("APA").get<double>();
    r.stop_reason = j.at("stop_reason") == "no_progress" ? StopReason::NoProgress : StopReason::LackOfData;
    r.config = protocol_config_from_json(j.at("config"));
    r.introduced = j.at("introduced").get<std::vector<std::string>>();
    for (const auto& [label, c] : j.at("per_category").items()) {
      r.per_category[label] = {c.at("taught").get<std::size_t>(), c.at("corrected").get<std::size_t>()};
    }
    r.apa_samples = j.at("apa_samples").get<std::vector<double>>();
    for (const auto& e : j.at("trace")) {
      TraceEvent ev;
      ev.kind = e.at("kind") == "introduce" ? TraceEvent::Kind::Introduce : TraceEvent::Kind::Ask;
      ev.qci = e.at("qci").get<std::size_t>();
      ev.category = e.at("category").get<std::string>();
      ev.views = e.at("views").get<std::vector<std::string>>();
      ev.known = e.at("known").get<std::size_t>();
      if (ev.kind == TraceEvent::Kind::Ask) {
        ev.predicted = e.at("predicted").get<std::string>();
        ev.correct = e.at("correct").get<bool>();
        ev.protocol_accuracy = e.at("protocol_accuracy").get<double>();
      }
      r.trace.push_back(std::move(ev));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaError, std::string("protocol report: ") + e.what());
  }
}

/// Re-runs the protocol with the report's config and seed on a fresh agent
/// and requires an identical report.
template <class AgentFactory>
ProtocolReport replay(const ProtocolReport& report, const FeatureDataset& dataset, AgentFactory&& make_agent) {
  auto agent = make_agent();
  ProtocolReport again = run_open_ended(agent, dataset, report.config);
  if (to_json(again).dump() != to_json(report).dump()) {
    throw Error(Errc::TraceMismatch, "replay with seed " + std::to_string(report.config.seed) + " diverged");
  }
  return again;
}

}  // namespace lle
