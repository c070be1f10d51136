#include <catch_amalgamated.hpp>

#include <set>

#include "support.hpp"

using namespace lle;

namespace {

FeatureDataset id_only_dataset(std::size_t categories, std::size_t views) {
  FeatureDataset ds;
  ds.name = "ids";
  for (std::size_t c = 0; c < categories; ++c) {
    CategoryViews cat{"cat" + std::to_string(c), {}};
    for (std::size_t v = 0; v < views; ++v) cat.views.push_back({cat.label + "_" + std::to_string(v), {}});
    ds.categories.push_back(std::move(cat));
  }
  return ds;
}

// Knows the answer for every view id.
struct PerfectAgent {
  std::map<std::string, std::string> truth;
  std::size_t taught = 0, corrected = 0;
  std::string ask(const LabeledView& v) { return truth.at(v.id); }
  void teach(const std::string&, const LabeledView&) { ++taught; }
  void correct(const std::string&, const LabeledView&) { ++corrected; }
};

struct WrongAgent {
  std::size_t corrected = 0;
  std::string ask(const LabeledView&) { return "never-a-label"; }
  void teach(const std::string&, const LabeledView&) {}
  void correct(const std::string&, const LabeledView&) { ++corrected; }
};

// Always answers with the most recently introduced label.
struct ParrotAgent {
  std::string last;
  std::string ask(const LabeledView&) { return last; }
  void teach(const std::string& label, const LabeledView&) { last = label; }
  void correct(const std::string&, const LabeledView&) {}
};

PerfectAgent perfect_for(const FeatureDataset& ds) {
  PerfectAgent a;
  for (const auto& c : ds.categories)
    for (const auto& v : c.views) a.truth[v.id] = c.label;
  return a;
}

FeatureDataset small_feature_dataset() {
  const CloudDataset clouds =
      make_synthetic_dataset({ShapeKind::Sphere, ShapeKind::Box, ShapeKind::Torus}, 15, 300, 5);
  return describe_dataset(clouds, {"good9"}, {});
}

EnsembleConfig good_only() {
  EnsembleConfig cfg;
  cfg.name = "good-only";
  cfg.members = {{"good9"}};
  return cfg;
}

}  // namespace

TEST_CASE("protocol accuracy over the window") {
  AccuracyWindow w;
  w.reset(3);
  CHECK_THROWS_MATCHES(protocol_accuracy(w), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == Errc::EmptyWindow; }));
  w.push(true);
  w.push(true);
  w.push(false);
  CHECK(protocol_accuracy(w) == Catch::Approx(2.0 / 3.0));
  CHECK(w.full());
  w.push(true);
  CHECK(w.size() == 3);
  CHECK(protocol_accuracy(w) == Catch::Approx(2.0 / 3.0));
  w.reset(4);
  for (int i = 0; i < 4; ++i) w.push(true);
  CHECK(protocol_accuracy(w) == 1.0);

  // tau = 0.67: accuracy must be at least twice the error rate.
  CHECK(2.0 / 3.0 < 0.67);
  CHECK(0.7 > 0.67);

  ProtocolConfig cfg;
  CHECK(window_length(cfg, 2) == 10);
  CHECK(window_length(cfg, 4) == 12);
  CHECK(window_length(cfg, 10) == 30);
}

TEST_CASE("config validation") {
  ProtocolConfig cfg;
  CHECK(cfg.tau == 0.67);
  CHECK(cfg.views_per_teach == 3);
  CHECK(cfg.qci_limit_without_progress == 100);
  cfg.tau = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.views_per_teach = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(protocol_config_from_json(nlohmann::json::parse(R"({"tau": "high"})")), Error);
  const ProtocolConfig parsed = protocol_config_from_json(nlohmann::json::parse(R"({"tau": 0.8, "seed": 4})"));
  CHECK(parsed.tau == 0.8);
  CHECK(parsed.seed == 4);
  CHECK(protocol_config_from_json(to_json(parsed)) == parsed);
}

TEST_CASE("insufficient datasets are rejected") {
  WrongAgent agent;
  CHECK_THROWS_MATCHES(run_open_ended(agent, id_only_dataset(1, 10), {}), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == Errc::InsufficientDataset; }));
  CHECK_THROWS_AS(run_open_ended(agent, id_only_dataset(3, 3), {}), Error);
}

TEST_CASE("a perfect agent learns every category") {
  const FeatureDataset ds = id_only_dataset(5, 20);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    PerfectAgent agent = perfect_for(ds);
    ProtocolConfig cfg;
    cfg.seed = seed;
    const ProtocolReport r = run_open_ended(agent, ds, cfg);
    REQUIRE(r.alc == 5);
    REQUIRE(r.gca == 1.0);
    REQUIRE(r.apa == 1.0);
    REQUIRE(r.stop_reason == StopReason::LackOfData);
    REQUIRE(r.aic == 3.0);
    REQUIRE(agent.taught == 15);
    REQUIRE(agent.corrected == 0);
    REQUIRE(check_test_then_train(r));
  }
}

TEST_CASE("a constant-wrong agent stops for lack of progress") {
  const FeatureDataset ds = id_only_dataset(5, 80);
  for (int limit : {100, 37}) {
    WrongAgent agent;
    ProtocolConfig cfg;
    cfg.qci_limit_without_progress = limit;
    cfg.seed = 3;
    const ProtocolReport r = run_open_ended(agent, ds, cfg);
    REQUIRE(r.stop_reason == StopReason::NoProgress);
    REQUIRE(r.qci == static_cast<std::size_t>(limit));
    REQUIRE(r.alc == 2);
    REQUIRE(r.gca == 0.0);
    REQUIRE(agent.corrected == static_cast<std::size_t>(limit));
    REQUIRE(r.aic == Catch::Approx((6.0 + limit) / 2.0));
    REQUIRE(check_test_then_train(r));
  }
}

TEST_CASE("running out of views stops with lack of data") {
  // Wrong answers but only 4 unseen views per category: the data ends first.
  WrongAgent agent;
  const ProtocolReport r = run_open_ended(agent, id_only_dataset(3, 7), {});
  CHECK(r.stop_reason == StopReason::LackOfData);
  CHECK(r.qci == 8);
  CHECK(r.alc == 2);
}

TEST_CASE("trace invariants") {
  const FeatureDataset ds = id_only_dataset(6, 25);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ParrotAgent agent;
    ProtocolConfig cfg;
    cfg.seed = seed;
    const ProtocolReport r = run_open_ended(agent, ds, cfg);
    REQUIRE(check_test_then_train(r));
    REQUIRE(r.gca >= 0);
    REQUIRE(r.gca <= 1);
    REQUIRE(r.apa >= 0);
    REQUIRE(r.apa <= 1);
    REQUIRE(r.alc <= 6);
    REQUIRE(r.aic >= 3);

    // QCI is monotone; every known category is asked before the next
    // introduction or the stop.
    std::size_t qci = 0;
    std::set<std::string> known, asked;
    for (const auto& ev : r.trace) {
      REQUIRE(ev.qci >= qci);
      qci = ev.qci;
      if (ev.kind == TraceEvent::Kind::Introduce) {
        if (known.size() >= static_cast<std::size_t>(cfg.initial_categories)) REQUIRE(asked == known);
        known.insert(ev.category);
        asked.clear();
      } else {
        REQUIRE(known.count(ev.category));
        asked.insert(ev.category);
      }
    }
    REQUIRE(asked == known);
    REQUIRE(qci == r.qci);

    std::size_t stored = 0;
    for (const auto& [label, counts] : r.per_category) stored += counts.taught + counts.corrected;
    REQUIRE(r.aic == Catch::Approx(static_cast<double>(stored) / r.alc));
  }
}

TEST_CASE("ensemble runs are deterministic and replayable") {
  const FeatureDataset ds = small_feature_dataset();
  ProtocolConfig cfg;
  cfg.seed = 11;
  const EnsembleConfig ec = good_only();
  const ProtocolReport a = run_open_ended(build_ensemble(ec), ds, cfg);
  const ProtocolReport b = run_open_ended(build_ensemble(ec), ds, cfg);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(check_test_then_train(a));

  auto factory = [&] { return EnsembleAgent(build_ensemble(ec)); };
  CHECK_NOTHROW(replay(a, ds, factory));

  ProtocolReport tampered = a;
  tampered.trace.back().predicted = "tampered";
  CHECK_THROWS_MATCHES(replay(tampered, ds, factory), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == Errc::TraceMismatch; }));

  cfg.seed = 12;
  const ProtocolReport c = run_open_ended(build_ensemble(ec), ds, cfg);
  CHECK(c.trace.front().views != a.trace.front().views);
}

TEST_CASE("protocol reports round-trip through JSON") {
  const FeatureDataset ds = id_only_dataset(4, 20);
  ParrotAgent agent;
  ProtocolConfig cfg;
  cfg.seed = 2;
  const ProtocolReport r = run_open_ended(agent, ds, cfg);
  const nlohmann::json j = to_json(r);
  CHECK(j.at("stop_reason") == std::string(stop_reason_name(r.stop_reason)));
  const ProtocolReport back = protocol_report_from_json(nlohmann::json::parse(j.dump()));
  CHECK(to_json(back).dump() == j.dump());
  CHECK_THROWS_AS(protocol_report_from_json(nlohmann::json::parse(R"({"format": "lle-eval-report"})")), Error);
}
