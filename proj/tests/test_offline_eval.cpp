#include <catch_amalgamated.hpp>

#include <set>

#include "support.hpp"

using namespace lle;

namespace {

FeatureDataset line_dataset(const std::map<std::string, std::vector<double>>& positions) {
  FeatureDataset ds;
  ds.name = "line";
  for (const auto& [label, values] : positions) {
    CategoryViews cat{label, {}};
    for (std::size_t i = 0; i < values.size(); ++i) {
      cat.views.push_back({label + std::to_string(i), {{"ext:line", FeatureVector{"ext:line", {values[i]}}}}});
    }
    ds.categories.push_back(std::move(cat));
  }
  return ds;
}

EnsembleConfig line_member() {
  EnsembleConfig cfg;
  cfg.members = {{"ext:line", DistanceKind::Euclidean, 1}};
  return cfg;
}

EnsembleConfig single(const std::string& rep) {
  EnsembleConfig cfg;
  cfg.name = rep + "-only";
  cfg.members = {{rep}};
  return cfg;
}

DescriberOptions fast_describer() {
  DescriberOptions opts;
  opts.esf.samples = 4000;
  return opts;
}

const CloudDataset& clouds() {
  static const CloudDataset ds = make_synthetic_dataset(
      {ShapeKind::Sphere, ShapeKind::Box, ShapeKind::Cylinder, ShapeKind::Cone, ShapeKind::Torus}, 12, 400, 21);
  return ds;
}

const FeatureDataset& features() {
  static const FeatureDataset ds = describe_dataset(clouds(), {"good9", "esf", "vfh"}, fast_describer());
  return ds;
}

std::set<std::string> all_ids(const FeatureDataset& ds) {
  std::set<std::string> ids;
  for (const auto& c : ds.categories)
    for (const auto& v : c.views) ids.insert(v.id);
  return ids;
}

}  // namespace

TEST_CASE("stratified k-fold split") {
  const std::vector<std::size_t> counts{100, 100, 100};
  const FoldSplit s = kfold_split(counts, {"a", "b", "c"}, 10, 4);
  REQUIRE(s.folds.size() == 10);
  CHECK(s.warnings.empty());
  std::set<ViewRef> seen;
  for (const auto& fold : s.folds) {
    std::map<std::size_t, int> per_cat;
    for (const auto& r : fold) {
      ++per_cat[r.category];
      CHECK(seen.insert(r).second);
    }
    for (std::size_t c = 0; c < 3; ++c) CHECK(per_cat[c] == 10);
  }
  CHECK(seen.size() == 300);

  const FoldSplit again = kfold_split(counts, {"a", "b", "c"}, 10, 4);
  for (std::size_t f = 0; f < 10; ++f) CHECK(again.folds[f] == s.folds[f]);
  CHECK(kfold_split(counts, {"a", "b", "c"}, 10, 5).folds[0] != s.folds[0]);

  // Uneven counts stay balanced within one view per category and fold.
  const FoldSplit uneven = kfold_split(std::vector<std::size_t>{7, 13, 5}, {"a", "b", "c"}, 4, 1);
  std::size_t lo = 100, hi = 0;
  for (const auto& fold : uneven.folds) {
    lo = std::min(lo, fold.size());
    hi = std::max(hi, fold.size());
  }
  CHECK(hi - lo <= 1);

  CHECK_THROWS_MATCHES(kfold_split(std::vector<std::size_t>{10, 1}, {"a", "b"}, 5, 0), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == Errc::TooFewViews; }));
  CHECK(kfold_split(std::vector<std::size_t>{10, 3}, {"a", "b"}, 5, 0).warnings.size() == 1);
  CHECK_THROWS_AS(kfold_split(std::vector<std::size_t>{10}, {"a"}, 1, 0), Error);
}

TEST_CASE("ACA averages per-class accuracies") {
  EmbeddingRegistry registry;
  registry.register_dim("ext:line", 1);
  // B has two intruders whose nearest neighbours are always A views.
  const FeatureDataset ds = line_dataset({{"A", {0, 0.1, 0.2, 0.3, 0.4, 0.5}}, {"B", {100, 100.1, 10, -10}}});
  CrossValidationOptions opts;
  opts.folds = 4;
  opts.registry = &registry;
  const EvalReport r = cross_validate(line_member(), ds, opts);
  CHECK(r.per_class.at("A") == 1.0);
  CHECK(r.per_class.at("B") == 0.5);
  CHECK(r.aca == Catch::Approx(0.75));
  CHECK(r.instance_accuracy == Catch::Approx(0.8));
  CHECK(r.tested == 10);
  CHECK(check_no_leakage(r));
}

TEST_CASE("separable shapes reach perfect accuracy") {
  // Round versus elongated: no partial view of one resembles the other.
  const CloudDataset two = make_synthetic_dataset({ShapeKind::Sphere, ShapeKind::Cylinder}, 12, 1500, 3);
  const FeatureDataset f = describe_dataset(two, {"good9", "esf", "vfh"}, {});
  CrossValidationOptions opts;
  opts.folds = 5;
  const EvalReport r = cross_validate(ensemble_preset("handcrafted-only"), f, opts);
  CHECK(r.aca == 1.0);
  CHECK(r.instance_accuracy == 1.0);
}

TEST_CASE("cross-validation audit, determinism and parallel folds") {
  CrossValidationOptions opts;
  opts.folds = 4;
  opts.seed = 9;
  const EvalReport serial = cross_validate(ensemble_preset("handcrafted-only"), features(), opts);
  REQUIRE(serial.audit.size() == 4);
  CHECK(check_no_leakage(serial));
  const std::set<std::string> ids = all_ids(features());
  std::set<std::string> tested;
  for (const auto& fold : serial.audit) {
    CHECK(fold.taught.size() + fold.tested.size() == ids.size());
    tested.insert(fold.tested.begin(), fold.tested.end());
  }
  CHECK(tested == ids);

  opts.jobs = 3;
  const EvalReport parallel = cross_validate(ensemble_preset("handcrafted-only"), features(), opts);
  CHECK(to_json(parallel, false).dump() == to_json(serial, false).dump());
  opts.jobs = 1;
  CHECK(to_json(cross_validate(ensemble_preset("handcrafted-only"), features(), opts), false).dump() ==
        to_json(serial, false).dump());

  double mean = 0;
  for (const auto& [label, acc] : serial.per_class) mean += acc;
  CHECK(serial.aca == Catch::Approx(mean / serial.per_class.size()).epsilon(1e-15));
  CHECK(serial.member_aca.size() == 3);
  CHECK(serial.config.name == "handcrafted-only");
  CHECK(serial.elapsed_seconds >= 0);

  // Member accuracies equal single-member ensembles.
  for (const char* rep : {"good9", "esf", "vfh"}) {
    CHECK(cross_validate(single(rep), features(), opts).aca == serial.member_aca.at(rep));
  }

  // Leakage detection itself.
  EvalReport leaky = serial;
  leaky.audit[0].taught.push_back(leaky.audit[0].tested.front());
  CHECK_FALSE(check_no_leakage(leaky));
}

TEST_CASE("scalability sweep samples nested categories") {
  CrossValidationOptions opts;
  opts.folds = 3;
  opts.seed = 2;
  const auto reports = scalability_sweep(single("good9"), features(), {2, 4}, opts);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].categories.size() == 2);
  CHECK(reports[1].categories.size() == 4);
  for (const auto& l : reports[0].categories) {
    CHECK(std::find(reports[1].categories.begin(), reports[1].categories.end(), l) != reports[1].categories.end());
  }
  CHECK(*reports[0].level == 2);
  CHECK(reports[0].level_kind == "categories");

  const auto full = scalability_sweep(single("good9"), features(), {5}, opts);
  CHECK(std::set<std::string>(full[0].categories.begin(), full[0].categories.end()).size() == 5);
  CHECK(full[0].tested == features().view_count());

  CHECK_THROWS_MATCHES(scalability_sweep(single("good9"), features(), {6}, opts), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == Errc::CountTooLarge; }));
}

TEST_CASE("accuracy does not grow with the category count") {
  double small = 0, large = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CrossValidationOptions opts;
    opts.folds = 4;
    opts.seed = seed;
    const auto r = scalability_sweep(single("good9"), features(), {2, 5}, opts);
    small += r[0].aca;
    large += r[1].aca;
  }
  CHECK(small >= large);
}

TEST_CASE("robustness sweeps perturb only the test views") {
  CrossValidationOptions opts;
  opts.folds = 4;
  opts.seed = 6;
  const EnsembleConfig cfg = ensemble_preset("handcrafted-only");
  const auto noise = robustness_sweep(cfg, clouds(), fast_describer(), {Perturbation::Kind::Noise, {0.0, 0.01}}, opts);
  REQUIRE(noise.size() == 2);
  const EvalReport base = cross_validate(cfg, features(), opts);
  nlohmann::json a = to_json(noise[0], false), b = to_json(base, false);
  a.erase("level");
  a.erase("level_kind");
  b.erase("level");
  b.erase("level_kind");
  CHECK(a.dump() == b.dump());
  CHECK(noise[1].level_kind == "noise_sigma_m");
  CHECK(check_no_leakage(noise[1]));

  // The training side is the unperturbed description.
  const PointCloud& view = clouds().categories[0].views[0];
  const PointCloud noisy = apply_perturbation(view, Perturbation::Kind::Noise, 0.01, opts.seed);
  CHECK(noisy == apply_perturbation(view, Perturbation::Kind::Noise, 0.01, opts.seed));
  CHECK(noisy == add_gaussian_noise(view, 0.01, mix_seed(opts.seed, hash_string(view.id))));

  const auto down = robustness_sweep(cfg, clouds(), fast_describer(), {Perturbation::Kind::Downsample, {0.005}}, opts);
  CHECK(down[0].level_kind == "voxel_m");
  CHECK(*down[0].level == 0.005);

  CHECK_THROWS_AS(robustness_sweep(cfg, clouds(), fast_describer(), {Perturbation::Kind::Noise, {}}, opts), Error);
  EnsembleConfig ext;
  ext.members = {{"ext:resnet50"}};
  CHECK_THROWS_MATCHES(robustness_sweep(ext, clouds(), fast_describer(), {Perturbation::Kind::Noise, {0.0}}, opts), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == Errc::UnknownRep; }));
}

TEST_CASE("datasets are validated before evaluation") {
  FeatureDataset dup = features();
  dup.categories[1].views[0].id = dup.categories[0].views[0].id;
  CHECK_THROWS_MATCHES(cross_validate(single("good9"), dup), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == Errc::SchemaError; }));
  FeatureDataset empty = features();
  empty.categories[2].views.clear();
  CHECK_THROWS_AS(cross_validate(single("good9"), empty), Error);
}

TEST_CASE("parallel_for runs every index and rethrows failures") {
  std::vector<int> hits(50, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw Error(Errc::IoError, "boom");
                  }),
                  Error);
}
