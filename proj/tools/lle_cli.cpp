// Command-line driver: describe | evaluate | openended | perturb | synth | report.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lle/lle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Level { Quiet, Error, Warn, Info, Debug };

Level log_level() {
  const char* env = std::getenv("ENSEMBLE_LOG");
  if (!env) return Level::Warn;
  const std::string v = env;
  if (v == "quiet") return Level::Quiet;
  if (v == "error") return Level::Error;
  if (v == "info") return Level::Info;
  if (v == "debug") return Level::Debug;
  return Level::Warn;
}

void log(Level level, const std::string& msg) {
  static const Level threshold = log_level();
  if (level > threshold || threshold == Level::Quiet) return;
  static constexpr const char* names[] = {"", "error", "warn", "info", "debug"};
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(const lle::Error& e) {
  switch (e.code()) {
    case lle::Errc::InvalidArgument:
    case lle::Errc::SchemaError:
    case lle::Errc::UnknownRep:
    case lle::Errc::UnknownKind:
    case lle::Errc::DuplicateRep:
    case lle::Errc::ParseError:
    case lle::Errc::UnsupportedFormat:
    case lle::Errc::NegativeSigma:
    case lle::Errc::NonPositiveVoxel:
      return 2;
    default:
      return 1;
  }
}

// --- experiment config -------------------------------------------------------

struct ExperimentConfig {
  fs::path base;  // directory of the config file
  json raw;
  std::string dataset;
  std::string output_dir = "out";
  unsigned jobs = lle::default_jobs();
  lle::DescriberOptions describer;
};

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg;
  std::ifstream is(path);
  if (!is) throw lle::Error(lle::Errc::IoError, "cannot open config '" + path + "'");
  try {
    cfg.raw = json::parse(is);
  } catch (const json::exception& e) {
    throw lle::Error(lle::Errc::SchemaError, path + ": " + e.what());
  }
  cfg.base = fs::path(path).parent_path();
  try {
    cfg.dataset = (cfg.base / cfg.raw.at("dataset").get<std::string>()).lexically_normal().string();
    cfg.output_dir = (cfg.base / cfg.raw.value("output_dir", std::string("out"))).lexically_normal().string();
    if (cfg.raw.contains("jobs")) cfg.jobs = cfg.raw.at("jobs").get<unsigned>();
    const json d = cfg.raw.value("descriptors", json::object());
    cfg.describer.good.bins = d.value("good_bins", 9);
    cfg.describer.esf.samples = d.value("esf_samples", 20000);
    cfg.describer.esf.grid = d.value("esf_grid", 64);
    cfg.describer.esf.seed = d.value("esf_seed", std::uint64_t{0});
    cfg.describer.vfh.normal_radius = d.value("vfh_radius", 0.006);
    cfg.describer.vfh.angle_bins = d.value("vfh_angle_bins", 45);
    cfg.describer.vfh.viewpoint_bins = d.value("vfh_viewpoint_bins", 128);
  } catch (const json::exception& e) {
    throw lle::Error(lle::Errc::SchemaError, path + ": " + e.what());
  }
  return cfg;
}

struct LoadedData {
  lle::CloudDataset clouds;
  lle::FeatureDataset features;
  lle::EnsembleConfig ensemble;
};

LoadedData load_data(const ExperimentConfig& cfg, lle::EmbeddingRegistry& registry) {
  const lle::DatasetManifest manifest = lle::load_manifest(cfg.dataset);
  const auto external = lle::load_manifest_embeddings(manifest, registry);
  LoadedData data;
  data.ensemble = lle::ensemble_config_from_json(cfg.raw.at("ensemble"), &registry);
  lle::build_ensemble(data.ensemble, &registry);
  data.clouds = lle::load_cloud_dataset(manifest);
  lle::validate_dataset(data.clouds);
  log(Level::Info, "loaded " + std::to_string(data.clouds.categories.size()) + " categories from " + cfg.dataset);

  std::vector<std::string> native;
  for (const auto& m : data.ensemble.members) {
    if (lle::is_native_rep(m.rep_id)) native.push_back(m.rep_id);
  }
  data.features = lle::describe_dataset(data.clouds, native, cfg.describer, cfg.jobs);
  std::map<std::string, std::map<std::string, lle::FeatureVector>> used;
  for (const auto& m : data.ensemble.members) {
    if (!lle::is_native_rep(m.rep_id)) used[m.rep_id] = external.at(m.rep_id);
  }
  lle::merge_features(data.features, used);
  return data;
}

std::string summary_line(const lle::EvalReport& r) {
  std::ostringstream os;
  os << "ACA=" << lle::format_double(r.aca) << " instance_accuracy=" << lle::format_double(r.instance_accuracy);
  for (const auto& [rep, aca] : r.member_aca) os << " ACA[" << rep << "]=" << lle::format_double(aca);
  return os.str();
}

// --- subcommands ---------------------------------------------------------------

struct DescribeArgs {
  std::string rep;
  std::string cloud;
  int bins = 9;
  std::uint64_t seed = 0;
  int samples = 20000;
  int grid = 64;
  double radius = 0.006;
  std::string depth_out;
  int resolution = 100;
};

int cmd_describe(const DescribeArgs& a) {
  std::string rep = a.rep;
  if (rep == "good") rep = "good" + std::to_string(a.bins);
  if (!lle::is_native_rep(rep)) throw UsageError("unknown representation '" + a.rep + "' (expected good, esf or vfh)");
  lle::DescriberOptions opts;
  opts.good.bins = a.bins;
  opts.esf = {a.samples, a.grid, a.seed};
  opts.vfh.normal_radius = a.radius;
  const lle::PointCloud cloud = lle::load_cloud(a.cloud);
  const lle::FeatureVector f = lle::describe(rep, cloud, opts);
  std::string line;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (i) line += ' ';
    line += lle::format_double(f.values[i]);
  }
  std::cout << line << '\n';
  if (!a.depth_out.empty()) {
    const auto images = lle::render_orthographic_depth(cloud, a.resolution);
    const char* axis[] = {"z", "y", "x"};
    for (int k = 0; k < 3; ++k) lle::write_pgm(images[k], a.depth_out + "_" + axis[k] + ".pgm");
  }
  return 0;
}

struct SynthArgs {
  std::vector<std::string> categories{"sphere", "box", "cylinder", "cone", "torus"};
  std::size_t views = 50;
  std::size_t points = 1500;
  std::uint64_t seed = 1;
  std::string out = "synthetic";
  std::string format = "ply";
};

int cmd_synth(const SynthArgs& a) {
  std::vector<lle::ShapeKind> kinds;
  for (const auto& c : a.categories) kinds.push_back(lle::parse_shape_kind(c));
  if (a.format != "ply" && a.format != "csv") throw UsageError("--format must be ply or csv");
  const lle::CloudDataset ds = lle::make_synthetic_dataset(kinds, a.views, a.points, a.seed);
  lle::DatasetManifest m;
  m.name = "synthetic";
  m.root = a.out;
  for (const auto& cat : ds.categories) {
    const fs::path dir = fs::path(a.out) / cat.label;
    fs::create_directories(dir);
    lle::ManifestCategory mc{cat.label, {}};
    for (const auto& view : cat.views) {
      const std::string file = (dir / (view.id + "." + a.format)).string();
      lle::save_cloud(view, file);
      mc.views.push_back({view.id, file});
    }
    m.categories.push_back(std::move(mc));
  }
  const std::string manifest = (fs::path(a.out) / "manifest.json").string();
  lle::write_manifest(m, manifest);
  std::cout << manifest << " categories=" << ds.categories.size() << " views=" << a.views * ds.categories.size() << '\n';
  return 0;
}

struct PerturbArgs {
  std::string in, out;
  double noise_mm = 0;
  double voxel_mm = 0;
  std::uint64_t seed = 0;
};

int cmd_perturb(const PerturbArgs& a) {
  lle::PointCloud cloud = lle::load_cloud(a.in);
  if (a.noise_mm != 0) cloud = lle::add_gaussian_noise(cloud, a.noise_mm * 1e-3, a.seed);
  if (a.voxel_mm != 0) cloud = lle::voxel_downsample(cloud, a.voxel_mm * 1e-3);
  lle::save_cloud(cloud, a.out);
  std::cout << a.out << " points=" << cloud.size() << '\n';
  return 0;
}

struct RunArgs {
  std::string config;
  std::optional<unsigned> jobs;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
};

ExperimentConfig config_with_overrides(const RunArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  if (a.jobs) cfg.jobs = *a.jobs;
  if (a.out) cfg.output_dir = *a.out;
  return cfg;
}

int cmd_evaluate(const RunArgs& a) {
  const ExperimentConfig cfg = config_with_overrides(a);
  lle::EmbeddingRegistry registry;
  const LoadedData data = load_data(cfg, registry);
  const json ev = cfg.raw.value("eval", json::object());
  lle::CrossValidationOptions opts;
  try {
    opts.folds = ev.value("folds", 10);
    opts.seed = a.seed ? *a.seed : ev.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw lle::Error(lle::Errc::SchemaError, std::string("eval block: ") + e.what());
  }
  opts.jobs = cfg.jobs;
  opts.registry = &registry;

  const lle::EvalReport base = lle::cross_validate(data.ensemble, data.features, opts);
  for (const auto& w : base.warnings) log(Level::Warn, w);
  lle::write_eval_reports(cfg.output_dir, "eval_report", {base});
  std::cout << summary_line(base) << '\n';

  if (ev.contains("scalability")) {
    const auto counts = ev.at("scalability").get<std::vector<std::size_t>>();
    const auto reports = lle::scalability_sweep(data.ensemble, data.features, counts, opts);
    lle::write_eval_reports(cfg.output_dir, "scalability", reports);
    for (const auto& r : reports) std::cout << "categories=" << *r.level << ' ' << summary_line(r) << '\n';
  }
  for (const auto& [key, kind, stem] :
       {std::tuple{"noise_mm", lle::Perturbation::Kind::Noise, "robustness_noise"},
        std::tuple{"downsample_mm", lle::Perturbation::Kind::Downsample, "robustness_downsample"}}) {
    if (!ev.contains(key)) continue;
    lle::Perturbation p{kind, {}};
    for (double mm : ev.at(key).get<std::vector<double>>()) p.levels.push_back(mm * 1e-3);
    const auto reports = lle::robustness_sweep(data.ensemble, data.clouds, cfg.describer, p, opts);
    lle::write_eval_reports(cfg.output_dir, stem, reports);
    for (const auto& r : reports) std::cout << key << '=' << lle::format_double(*r.level * 1e3) << ' ' << summary_line(r) << '\n';
  }
  return 0;
}

int cmd_openended(const RunArgs& a) {
  const ExperimentConfig cfg = config_with_overrides(a);
  lle::EmbeddingRegistry registry;
  const LoadedData data = load_data(cfg, registry);
  const json pj = cfg.raw.value("protocol", json::object());
  lle::ProtocolConfig base = lle::protocol_config_from_json(pj);
  if (a.seed) base.seed = *a.seed;
  const int runs = a.runs ? *a.runs : pj.value("runs", 1);
  if (runs < 1) throw UsageError("runs must be >= 1");

  std::vector<lle::ProtocolReport> reports(static_cast<std::size_t>(runs));
  lle::parallel_for(reports.size(), cfg.jobs, [&](std::size_t i) {
    lle::ProtocolConfig pc = base;
    pc.seed = base.seed + i;
    reports[i] = lle::run_open_ended(lle::build_ensemble(data.ensemble, &registry), data.features, pc);
  });
  lle::write_protocol_reports(cfg.output_dir, reports);
  std::cout << lle::protocol_summary_csv(reports);
  return 0;
}

int cmd_report(const std::vector<std::string>& files) {
  std::vector<lle::ProtocolReport> protocol;
  std::vector<std::string> eval_rows;
  std::string eval_header;
  for (const auto& file : files) {
    std::ifstream is(file);
    if (!is) throw lle::Error(lle::Errc::IoError, "cannot open '" + file + "'");
    json j;
    try {
      j = json::parse(is);
    } catch (const json::exception& e) {
      throw lle::Error(lle::Errc::SchemaError, file + ": " + e.what());
    }
    const json items = j.is_array() ? j : json::array({j});
    for (const auto& item : items) {
      const std::string format = item.value("format", std::string());
      if (format == "lle-protocol-report") {
        protocol.push_back(lle::protocol_report_from_json(item));
      } else if (format == "lle-eval-report") {
        std::ostringstream os;
        os << file << ',' << item.value("level_kind", std::string()) << ',';
        if (!item.at("level").is_null()) os << lle::format_double(item.at("level").get<double>());
        os << ',' << lle::format_double(item.at("ACA").get<double>()) << ','
           << lle::format_double(item.at("instance_accuracy").get<double>());
        eval_rows.push_back(os.str());
      } else {
        throw lle::Error(lle::Errc::SchemaError, file + ": unrecognized report format");
      }
    }
  }
  if (!protocol.empty()) std::cout << lle::protocol_summary_csv(protocol);
  if (!eval_rows.empty()) {
    std::cout << "file,level_kind,level,ACA,instance_accuracy\n";
    for (const auto& r : eval_rows) std::cout << r << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifelong ensemble learning for few-shot 3D object recognition"};
  app.require_subcommand(1);

  DescribeArgs describe;
  auto* d = app.add_subcommand("describe", "Compute one descriptor of a cloud and print it");
  d->add_option("--rep", describe.rep, "good | good<bins> | esf | vfh")->required();
  d->add_option("--bins", describe.bins, "GOOD bins")->check(CLI::Range(2, 1000));
  d->add_option("--seed", describe.seed, "ESF sampling seed");
  d->add_option("--samples", describe.samples, "ESF samples")->check(CLI::Range(1000, 100000000));
  d->add_option("--grid", describe.grid, "ESF voxel grid resolution")->check(CLI::Range(8, 1024));
  d->add_option("--radius", describe.radius, "VFH normal radius (m)")->check(CLI::PositiveNumber);
  d->add_option("--depth-out", describe.depth_out, "also write orthographic depth PGMs <prefix>_{z,y,x}.pgm");
  d->add_option("--resolution", describe.resolution, "depth image resolution")->check(CLI::Range(1, 4096));
  d->add_option("cloud", describe.cloud, "PLY or CSV cloud")->required();

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic shape dataset and manifest");
  s->add_option("--categories", synth.categories, "comma-separated shape kinds")->delimiter(',');
  s->add_option("--views", synth.views, "views per category")->check(CLI::PositiveNumber);
  s->add_option("--points", synth.points, "points per view")->check(CLI::Range(50, 10000000));
  s->add_option("--seed", synth.seed, "generator seed");
  s->add_option("--out", synth.out, "output directory");
  s->add_option("--format", synth.format, "ply or csv");

  PerturbArgs perturb;
  auto* p = app.add_subcommand("perturb", "Add Gaussian noise and/or voxel-downsample a cloud");
  p->add_option("input", perturb.in)->required();
  p->add_option("output", perturb.out)->required();
  p->add_option("--noise-mm", perturb.noise_mm, "noise sigma in mm");
  p->add_option("--voxel-mm", perturb.voxel_mm, "voxel edge in mm");
  p->add_option("--seed", perturb.seed, "noise seed");

  RunArgs eval_args, open_args;
  auto add_run = [&](CLI::App* sub, RunArgs& r) {
    sub->add_option("--config", r.config, "experiment JSON")->required();
    sub->add_option("--jobs", r.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", r.out, "output directory (overrides config)");
    sub->add_option("--seed", r.seed, "seed (overrides config)");
  };
  auto* e = app.add_subcommand("evaluate", "k-fold cross-validation plus configured sweeps");
  add_run(e, eval_args);
  auto* o = app.add_subcommand("openended", "Simulated-teacher open-ended evaluation");
  add_run(o, open_args);
  o->add_option("--runs", open_args.runs, "independent runs with seeds seed, seed+1, ...");

  std::vector<std::string> report_files;
  auto* r = app.add_subcommand("report", "Summarize report JSON files as CSV");
  r->add_option("files", report_files)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*d) return cmd_describe(describe);
    if (*s) return cmd_synth(synth);
    if (*p) return cmd_perturb(perturb);
    if (*e) return cmd_evaluate(eval_args);
    if (*o) return cmd_openended(open_args);
    if (*r) return cmd_report(report_files);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n\n" << app.help();
    return 2;
  } catch (const lle::Error& err) {
    log(Level::Error, err.what());
    return exit_code_for(err);
  } catch (const std::exception& err) {
    log(Level::Error, err.what());
    return 1;
  }
  return 2;
}
