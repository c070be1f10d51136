#include <catch_amalgamated.hpp>

#include <fstream>

#include "support.hpp"

using namespace lle;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

auto code_is(Errc c) {
  return Catch::Matchers::Predicate<Error>([c](const Error& e) { return e.code() == c; });
}

struct EchoAgent {
  std::map<std::string, std::string> truth;
  std::string ask(const LabeledView& v) { return truth.at(v.id); }
  void teach(const std::string&, const LabeledView&) {}
  void correct(const std::string&, const LabeledView&) {}
};

}  // namespace

TEST_CASE("minimal ASCII PLY") {
  const fs::path dir = testing_support::temp_dir("ply_min");
  write_file(dir / "tri.ply",
             "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 3\nproperty float x\nproperty float y\n"
             "property float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
             "0.1 0.2 0.3\n-1 2.5 1e-3\n4 5 6\n3 0 1 2\n");
  const PointCloud c = load_cloud((dir / "tri.ply").string());
  REQUIRE(c.size() == 3);
  CHECK(c.points[0] == Point(0.1, 0.2, 0.3));
  CHECK(c.points[1] == Point(-1, 2.5, 1e-3));
  CHECK(c.points[2] == Point(4, 5, 6));
  CHECK(c.id == "tri");
  CHECK_FALSE(c.viewpoint.has_value());

  write_file(dir / "rgb.ply",
             "ply\nformat ascii 1.0\ncomment viewpoint 0 0 1.5\nelement vertex 1\nproperty float x\nproperty float y\n"
             "property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n1 2 3 10 20 30\n");
  const PointCloud rgb = load_cloud((dir / "rgb.ply").string());
  CHECK(rgb.points[0].rgb == Rgb{10, 20, 30});
  REQUIRE(rgb.viewpoint.has_value());
  CHECK(*rgb.viewpoint == Point(0, 0, 1.5));
}

TEST_CASE("malformed clouds are rejected with a location") {
  const fs::path dir = testing_support::temp_dir("ply_bad");
  write_file(dir / "short.ply",
             "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
             "0 0 0\n1 1 1\n");
  try {
    load_cloud((dir / "short.ply").string());
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ParseError);
    CHECK_THAT(std::string(e.what()), Catch::Matchers::ContainsSubstring("short.ply:10:"));
    CHECK_THAT(std::string(e.what()), Catch::Matchers::ContainsSubstring("vertex count mismatch"));
  }

  write_file(dir / "bin.ply", "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n");
  CHECK_THROWS_MATCHES(load_cloud((dir / "bin.ply").string()), Error, code_is(Errc::UnsupportedFormat));
  write_file(dir / "magic.ply", "plx\n");
  CHECK_THROWS_MATCHES(load_cloud((dir / "magic.ply").string()), Error, code_is(Errc::ParseError));
  write_file(dir / "extra.ply",
             "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
             "0 0 0\n1 1 1\n");
  CHECK_THROWS_MATCHES(load_cloud((dir / "extra.ply").string()), Error, code_is(Errc::ParseError));
  write_file(dir / "word.ply",
             "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
             "0 zero 0\n");
  CHECK_THROWS_MATCHES(load_cloud((dir / "word.ply").string()), Error, code_is(Errc::ParseError));
  write_file(dir / "nan.ply",
             "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
             "0 nan 0\n");
  CHECK_THROWS_AS(load_cloud((dir / "nan.ply").string()), Error);

  write_file(dir / "cols.csv", "x,y,z\n1,2,3\n1,2\n");
  CHECK_THROWS_MATCHES(load_cloud((dir / "cols.csv").string()), Error, code_is(Errc::ParseError));
  write_file(dir / "head.csv", "a,b,c\n1,2,3\n");
  CHECK_THROWS_MATCHES(load_cloud((dir / "head.csv").string()), Error, code_is(Errc::ParseError));
  CHECK_THROWS_MATCHES(load_cloud((dir / "cloud.pcd").string()), Error, code_is(Errc::UnsupportedFormat));
  CHECK_THROWS_MATCHES(load_cloud((dir / "absent.ply").string()), Error, code_is(Errc::IoError));
}

TEST_CASE("CSV round trips are bitwise exact") {
  const fs::path dir = testing_support::temp_dir("csv_rt");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    PointCloud c = testing_support::random_cloud(seed, 300);
    c.points[0].x = 1.0 / 3.0;
    c.points[1].y = -5e-324;
    c.points[2].z = 1.7976931348623157e308;
    const std::string path = (dir / ("c" + std::to_string(seed) + ".csv")).string();
    save_cloud(c, path);
    const PointCloud back = load_cloud(path);
    REQUIRE(back.points == c.points);
    REQUIRE(back.viewpoint == c.viewpoint);
  }
  PointCloud colored;
  colored.points = {Point(1, 2, 3), Point(4, 5, 6)};
  colored.points[0].rgb = Rgb{1, 2, 3};
  colored.points[1].rgb = Rgb{255, 0, 128};
  save_cloud(colored, (dir / "rgb.csv").string());
  CHECK(load_cloud((dir / "rgb.csv").string()).points == colored.points);
}

TEST_CASE("PLY round trips within float precision") {
  const fs::path dir = testing_support::temp_dir("ply_rt");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PointCloud c = testing_support::random_cloud(seed, 300);
    const std::string path = (dir / ("c" + std::to_string(seed) + ".ply")).string();
    save_cloud(c, path);
    const PointCloud back = load_cloud(path);
    REQUIRE(back.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      REQUIRE(std::abs(back.points[i].x - c.points[i].x) <= 1e-6);
      REQUIRE(std::abs(back.points[i].y - c.points[i].y) <= 1e-6);
      REQUIRE(std::abs(back.points[i].z - c.points[i].z) <= 1e-6);
    }
    REQUIRE(back.viewpoint.has_value());
    REQUIRE((back.viewpoint->vec() - c.viewpoint->vec()).norm() <= 1e-6);
    // Saving the loaded cloud again is a fixed point.
    save_cloud(back, path + ".again.ply");
    REQUIRE(read_file(path) == read_file(path + ".again.ply"));
  }
}

TEST_CASE("embedding tables") {
  const fs::path dir = testing_support::temp_dir("emb");
  const std::vector<std::pair<std::string, std::vector<double>>> rows{{"v1", {0.1, 0.2, 0.7}}, {"v2", {1.0 / 3, 0, 2}}};
  save_embeddings((dir / "e.tsv").string(), "resnet50", rows);
  EmbeddingRegistry registry;
  const EmbeddingTable t = load_embeddings((dir / "e.tsv").string(), registry);
  CHECK(t.rep_id == "ext:resnet50");
  CHECK(t.dim == 3);
  REQUIRE(t.rows.size() == 2);
  // Stored L2-normalized, exactly as attach_external_embedding returns them.
  EmbeddingRegistry scratch;
  CHECK(t.rows.at("v2").values == attach_external_embedding(scratch, "v2", "resnet50", rows[1].second).values);
  CHECK(std::abs(t.rows.at("v1").values[2] - 0.7 / std::sqrt(0.54)) < 1e-15);
  CHECK(t.rows.at("v1").rep_id == "ext:resnet50");
  CHECK(registry.dim("ext:resnet50") == 3);

  write_file(dir / "short.tsv", "rep_id\tvgg16\ndim\t3\ncount\t2\nv1\t1\t2\t3\nv2\t1\t2\n");
  try {
    EmbeddingRegistry r;
    load_embeddings((dir / "short.tsv").string(), r);
    FAIL("expected a dimension error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DimMismatch);
    CHECK_THAT(std::string(e.what()), Catch::Matchers::ContainsSubstring("'v2'"));
  }

  EmbeddingRegistry r;
  write_file(dir / "nohdr.tsv", "v1\t1\t2\n");
  CHECK_THROWS_MATCHES(load_embeddings((dir / "nohdr.tsv").string(), r), Error, code_is(Errc::SchemaError));
  write_file(dir / "count.tsv", "rep_id\tvgg16\ndim\t2\ncount\t3\nv1\t1\t2\n");
  CHECK_THROWS_MATCHES(load_embeddings((dir / "count.tsv").string(), r), Error, code_is(Errc::SchemaError));
  write_file(dir / "dup.tsv", "rep_id\tdupes\ndim\t1\ncount\t2\nv1\t1\nv1\t2\n");
  CHECK_THROWS_MATCHES(load_embeddings((dir / "dup.tsv").string(), r), Error, code_is(Errc::SchemaError));
  write_file(dir / "nan.tsv", "rep_id\tmobilenet\ndim\t1\ncount\t1\nv1\tnan\n");
  CHECK_THROWS_AS(load_embeddings((dir / "nan.tsv").string(), r), Error);

  // A second table for the same rep with another dimension conflicts.
  write_file(dir / "other.tsv", "rep_id\tresnet50\ndim\t4\ncount\t1\nv9\t1\t2\t3\t4\n");
  CHECK_THROWS_AS(load_embeddings((dir / "other.tsv").string(), registry), Error);
}

TEST_CASE("dataset manifests") {
  const fs::path dir = testing_support::temp_dir("manifest");
  const CloudDataset ds = make_synthetic_dataset({ShapeKind::Sphere, ShapeKind::Box}, 3, 100, 4);
  DatasetManifest m;
  m.name = "tiny";
  m.root = dir.string();
  for (const auto& c : ds.categories) {
    fs::create_directories(dir / c.label);
    ManifestCategory cat{c.label, {}};
    for (const auto& v : c.views) {
      const std::string path = (dir / c.label / (v.id + ".csv")).string();
      save_cloud(v, path);
      cat.views.push_back({v.id, path});
    }
    m.categories.push_back(cat);
  }
  save_embeddings((dir / "cnn.tsv").string(), "cnn", {{"sphere_000", {1, 2}}});
  m.embeddings.push_back({"ext:cnn", (dir / "cnn.tsv").string()});
  write_manifest(m, (dir / "manifest.json").string());

  const DatasetManifest back = load_manifest((dir / "manifest.json").string());
  CHECK(back.name == "tiny");
  REQUIRE(back.categories.size() == 2);
  CHECK(back.categories[1].views[2].id == ds.categories[1].views[2].id);
  CHECK(fs::equivalent(back.categories[1].views[2].cloud, m.categories[1].views[2].cloud));
  const CloudDataset loaded = load_cloud_dataset(back);
  CHECK(loaded.categories[0].views[1].points == ds.categories[0].views[1].points);
  CHECK(loaded.categories[0].views[1].id == ds.categories[0].views[1].id);
  EmbeddingRegistry registry;
  const auto emb = load_manifest_embeddings(back, registry);
  CHECK(emb.at("ext:cnn").at("sphere_000").values[1] == Catch::Approx(2 / std::sqrt(5.0)).epsilon(1e-15));

  fs::remove(dir / "box" / (ds.categories[1].views[0].id + ".csv"));
  CHECK_THROWS_MATCHES(load_manifest((dir / "manifest.json").string()), Error, code_is(Errc::SchemaError));

  write_file(dir / "bad.json", R"({"categories": [{"label": "a"}]})");
  CHECK_THROWS_MATCHES(load_manifest((dir / "bad.json").string()), Error, code_is(Errc::SchemaError));
  write_file(dir / "broken.json", "{");
  CHECK_THROWS_MATCHES(load_manifest((dir / "broken.json").string()), Error, code_is(Errc::SchemaError));
  write_file(dir / "dup.json",
             R"({"categories": [{"label": "a", "views": [{"id": "x", "cloud": "sphere/sphere_000.csv"}]},
                                {"label": "b", "views": [{"id": "x", "cloud": "sphere/sphere_001.csv"}]}]})");
  CHECK_THROWS_MATCHES(load_manifest((dir / "dup.json").string()), Error, code_is(Errc::SchemaError));
}

TEST_CASE("protocol report files") {
  FeatureDataset ds;
  EchoAgent agent;
  for (int c = 0; c < 3; ++c) {
    CategoryViews cat{"c" + std::to_string(c), {}};
    for (int v = 0; v < 8; ++v) {
      cat.views.push_back({cat.label + "_" + std::to_string(v), {}});
      agent.truth[cat.views.back().id] = cat.label;
    }
    ds.categories.push_back(cat);
  }
  ProtocolConfig cfg;
  cfg.seed = 5;
  const ProtocolReport r = run_open_ended(agent, ds, cfg);
  const fs::path dir = testing_support::temp_dir("protocol_reports");
  write_protocol_reports(dir.string(), {r, r});

  const std::string summary = read_file(dir / "protocol_summary.csv");
  CHECK(summary.rfind("QCI,ALC,AIC,GCA,APA,stop_reason,seed\n", 0) == 0);
  CHECK_THAT(summary, Catch::Matchers::ContainsSubstring(",lack_of_data,5\n"));
  const std::string trace = read_file(dir / "protocol_trace.csv");
  CHECK(trace.rfind("run,iteration,protocol_accuracy,introduced\n", 0) == 0);
  std::size_t rows = 0;
  for (char ch : trace) rows += ch == '\n';
  CHECK(rows == 1 + 2 * r.trace.size());

  const nlohmann::json arr = nlohmann::json::parse(read_file(dir / "protocol_report.json"));
  REQUIRE(arr.size() == 2);
  CHECK(arr[0].at("format") == "lle-protocol-report");
  CHECK(to_json(protocol_report_from_json(arr[1])).dump() == to_json(r).dump());
}

TEST_CASE("evaluation report files") {
  EvalReport a;
  a.aca = 0.75;
  a.instance_accuracy = 0.8;
  a.tested = 10;
  a.seed = 3;
  a.member_aca = {{"good9", 0.5}, {"esf", 1.0 / 3}};
  a.level = 0.01;
  a.level_kind = "noise_sigma_m";
  EvalReport b = a;
  b.level = 0.02;
  b.member_aca = {{"good9", 0.25}};
  const std::string csv = eval_reports_csv({a, b});
  CHECK(csv ==
        "level_kind,level,ACA,instance_accuracy,tested,tie_breaks,elapsed_seconds,seed,ACA[esf],ACA[good9]\n"
        "noise_sigma_m,0.01,0.75,0.8,10,0,0,3,0.3333333333333333,0.5\n"
        "noise_sigma_m,0.02,0.75,0.8,10,0,0,3,,0.25\n");

  const fs::path dir = testing_support::temp_dir("eval_reports");
  write_eval_reports(dir.string(), "robustness_noise", {a, b});
  CHECK(read_file(dir / "robustness_noise.csv") == csv);
  const nlohmann::json arr = nlohmann::json::parse(read_file(dir / "robustness_noise.json"));
  REQUIRE(arr.size() == 2);
  CHECK(arr[0].at("format") == "lle-eval-report");
  CHECK(arr[1].at("level") == 0.02);
}
