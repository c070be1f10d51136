#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lle/cloud.hpp"
#include "lle/dataset.hpp"
#include "lle/descriptors/embedding.hpp"
#include "lle/offline_eval.hpp"
#include "lle/protocol.hpp"

namespace lle {

namespace fs = std::filesystem;

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string format_float(float v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  if (sep == ' ') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
      if (j > i) out.push_back(line.substr(i, j - i));
      i = j;
    }
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    std::string_view tok = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!tok.empty() && (tok.back() == '\r' || tok.back() == ' ')) tok.remove_suffix(1);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    out.push_back(tok);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

[[noreturn]] inline void parse_error(const std::string& path, std::size_t line, const std::string& reason) {
  throw Error(Errc::ParseError, path + ":" + std::to_string(line) + ": " + reason);
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return is;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::IoError, "cannot write '" + path + "'");
  return os;
}

inline double number(const std::string& path, std::size_t line, std::string_view tok) {
  const auto v = parse_double(tok);
  if (!v) parse_error(path, line, "bad number '" + std::string(tok) + "'");
  return *v;
}

inline std::uint8_t color(const std::string& path, std::size_t line, std::string_view tok) {
  const double v = number(path, line, tok);
  if (v < 0 || v > 255 || v != std::floor(v)) parse_error(path, line, "bad color '" + std::string(tok) + "'");
  return static_cast<std::uint8_t>(v);
}

inline std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

inline PointCloud load_ply(const std::string& path) {
  std::ifstream is = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    if (!std::getline(is, line)) return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next() || line != "ply") parse_error(path, 1, "missing 'ply' magic");
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> props;
    bool has_list = false;
  };
  std::vector<Element> elements;
  PointCloud cloud;
  cloud.id = stem_of(path);
  bool format_seen = false;
  while (true) {
    if (!next()) parse_error(path, lineno, "header not terminated by end_header");
    const auto tok = split(line, ' ');
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 2) parse_error(path, lineno, "bad format line");
      if (tok[1] != "ascii") throw Error(Errc::UnsupportedFormat, path + ": PLY format '" + std::string(tok[1]) + "' is not supported");
      format_seen = true;
    } else if (tok[0] == "comment") {
      if (tok.size() == 5 && tok[1] == "viewpoint") {
        cloud.viewpoint = Point(number(path, lineno, tok[2]), number(path, lineno, tok[3]), number(path, lineno, tok[4]));
      }
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_error(path, lineno, "bad element line");
      const double n = number(path, lineno, tok[2]);
      if (n < 0 || n != std::floor(n)) parse_error(path, lineno, "bad element count");
      elements.push_back({std::string(tok[1]), static_cast<std::size_t>(n), {}, false});
    } else if (tok[0] == "property") {
      if (elements.empty() || tok.size() < 3) parse_error(path, lineno, "property outside an element");
      if (tok[1] == "list") {
        elements.back().has_list = true;
        elements.back().props.emplace_back(tok.back());
      } else {
        elements.back().props.emplace_back(tok[2]);
      }
    } else if (tok[0] != "obj_info") {
      parse_error(path, lineno, "unknown header line '" + line + "'");
    }
  }
  if (!format_seen) parse_error(path, lineno, "missing format line");

  for (const auto& el : elements) {
    if (el.name != "vertex") {
      for (std::size_t i = 0; i < el.count; ++i) {
        if (!next()) parse_error(path, lineno + 1, "expected " + std::to_string(el.count) + " '" + el.name + "' rows, found " + std::to_string(i));
      }
      continue;
    }
    if (el.has_list) throw Error(Errc::UnsupportedFormat, path + ": list properties on vertices");
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < el.props.size(); ++i) col[el.props[i]] = i;
    for (const char* req : {"x", "y", "z"}) {
      if (!col.count(req)) parse_error(path, lineno, std::string("vertex has no '") + req + "' property");
    }
    const bool rgb = col.count("red") && col.count("green") && col.count("blue");
    cloud.points.reserve(el.count);
    for (std::size_t i = 0; i < el.count; ++i) {
      if (!next()) {
        parse_error(path, lineno + 1, "vertex count mismatch: header declares " + std::to_string(el.count) +
                                          ", file has " + std::to_string(i));
      }
      const auto tok = split(line, ' ');
      if (tok.size() != el.props.size()) {
        parse_error(path, lineno, "expected " + std::to_string(el.props.size()) + " values, got " + std::to_string(tok.size()));
      }
      Point p(number(path, lineno, tok[col["x"]]), number(path, lineno, tok[col["y"]]), number(path, lineno, tok[col["z"]]));
      if (rgb) p.rgb = Rgb{color(path, lineno, tok[col["red"]]), color(path, lineno, tok[col["green"]]), color(path, lineno, tok[col["blue"]])};
      cloud.points.push_back(p);
    }
  }
  while (next()) {
    if (!split(line, ' ').empty()) parse_error(path, lineno, "data beyond the declared element counts");
  }
  require_finite(cloud);
  return cloud;
}

inline PointCloud load_csv(const std::string& path) {
  std::ifstream is = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  PointCloud cloud;
  cloud.id = stem_of(path);
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto tok = split(std::string_view(line).substr(1), ' ');
      if (tok.size() == 4 && tok[0] == "viewpoint") {
        cloud.viewpoint = Point(number(path, lineno, tok[1]), number(path, lineno, tok[2]), number(path, lineno, tok[3]));
      }
      continue;
    }
    const auto tok = split(line, ',');
    if (header.empty()) {
      for (auto t : tok) header.emplace_back(t);
      const bool xyz = header.size() >= 3 && header[0] == "x" && header[1] == "y" && header[2] == "z";
      const bool ok = xyz && (header.size() == 3 ||
                              (header.size() == 6 && ((header[3] == "r" && header[4] == "g" && header[5] == "b") ||
                                                      (header[3] == "red" && header[4] == "green" && header[5] == "blue"))));
      if (!ok) parse_error(path, lineno, "expected header 'x,y,z' or 'x,y,z,r,g,b'");
      continue;
    }
    if (tok.size() != header.size()) {
      parse_error(path, lineno, "expected " + std::to_string(header.size()) + " columns, got " + std::to_string(tok.size()));
    }
    Point p(number(path, lineno, tok[0]), number(path, lineno, tok[1]), number(path, lineno, tok[2]));
    if (header.size() == 6) p.rgb = Rgb{color(path, lineno, tok[3]), color(path, lineno, tok[4]), color(path, lineno, tok[5])};
    cloud.points.push_back(p);
  }
  if (header.empty()) parse_error(path, lineno, "missing CSV header");
  require_finite(cloud);
  return cloud;
}

}  // namespace detail

enum class CloudFormat { Ply, Csv };

inline CloudFormat format_for_path(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (ext == ".ply") return CloudFormat::Ply;
  if (ext == ".csv" || ext == ".xyz" || ext == ".txt") return CloudFormat::Csv;
  throw Error(Errc::UnsupportedFormat, "unknown cloud file extension '" + ext + "'");
}

/// ASCII PLY (vertex x/y/z, optional red/green/blue, optional
/// "comment viewpoint x y z") or x,y,z[,r,g,b] CSV with an optional
/// "# viewpoint x y z" line. The cloud id is the file stem.
inline PointCloud load_cloud(const std::string& path) {
  return format_for_path(path) == CloudFormat::Ply ? detail::load_ply(path) : detail::load_csv(path);
}

/// CSV keeps full double precision; PLY stores float32.
inline void save_cloud(const PointCloud& cloud, const std::string& path, std::optional<CloudFormat> format = std::nullopt) {
  const CloudFormat fmt = format ? *format : format_for_path(path);
  const bool rgb = !cloud.empty() && std::all_of(cloud.points.begin(), cloud.points.end(), [](const Point& p) { return p.rgb.has_value(); });
  std::ofstream os = detail::open_out(path);
  if (fmt == CloudFormat::Ply) {
    os << "ply\nformat ascii 1.0\n";
    if (cloud.viewpoint) {
      os << "comment viewpoint " << format_float(static_cast<float>(cloud.viewpoint->x)) << ' '
         << format_float(static_cast<float>(cloud.viewpoint->y)) << ' ' << format_float(static_cast<float>(cloud.viewpoint->z)) << '\n';
    }
    os << "element vertex " << cloud.size() << "\nproperty float x\nproperty float y\nproperty float z\n";
    if (rgb) os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    os << "end_header\n";
    for (const auto& p : cloud.points) {
      os << format_float(static_cast<float>(p.x)) << ' ' << format_float(static_cast<float>(p.y)) << ' '
         << format_float(static_cast<float>(p.z));
      if (rgb) os << ' ' << int((*p.rgb)[0]) << ' ' << int((*p.rgb)[1]) << ' ' << int((*p.rgb)[2]);
      os << '\n';
    }
  } else {
    if (cloud.viewpoint) {
      os << "# viewpoint " << format_double(cloud.viewpoint->x) << ' ' << format_double(cloud.viewpoint->y) << ' '
         << format_double(cloud.viewpoint->z) << '\n';
    }
    os << (rgb ? "x,y,z,r,g,b\n" : "x,y,z\n");
    for (const auto& p : cloud.points) {
      os << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.z);
      if (rgb) os << ',' << int((*p.rgb)[0]) << ',' << int((*p.rgb)[1]) << ',' << int((*p.rgb)[2]);
      os << '\n';
    }
  }
  if (!os) throw Error(Errc::IoError, "failed writing '" + path + "'");
}

// --- embeddings ------------------------------------------------------------

struct EmbeddingTable {
  std::string rep_id;
  std::size_t dim = 0;
  std::map<std::string, FeatureVector> rows;
};

/// TSV with a three-line header
///   rep_id<TAB>ext:name
///   dim<TAB>D
///   count<TAB>N
/// followed by N rows "view_id<TAB>v1<TAB>...<TAB>vD".
inline EmbeddingTable load_embeddings(const std::string& path, EmbeddingRegistry& registry) {
  std::ifstream is = detail::open_in(path);
  std::string line;
  std::size_t lineno = 0;
  auto header = [&](std::string_view key) -> std::string {
    if (!std::getline(is, line)) throw Error(Errc::SchemaError, path + ": missing '" + std::string(key) + "' header");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tok = detail::split(line, '\t');
    if (tok.size() != 2 || tok[0] != key) throw Error(Errc::SchemaError, path + ":" + std::to_string(lineno) + ": expected '" + std::string(key) + "<TAB>value'");
    return std::string(tok[1]);
  };
  EmbeddingTable table;
  table.rep_id = external_rep_id(header("rep_id"));
  const auto dim = detail::parse_double(header("dim"));
  const auto count = detail::parse_double(header("count"));
  if (!dim || *dim < 1 || *dim != std::floor(*dim)) throw Error(Errc::SchemaError, path + ": bad dim");
  if (!count || *count < 0 || *count != std::floor(*count)) throw Error(Errc::SchemaError, path + ": bad count");
  table.dim = static_cast<std::size_t>(*dim);
  registry.register_dim(table.rep_id, table.dim);
  std::vector<double> values;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tok = detail::split(line, '\t');
    const std::string view_id(tok[0]);
    if (tok.size() - 1 != table.dim) {
      throw Error(Errc::DimMismatch, path + ":" + std::to_string(lineno) + ": view '" + view_id + "' has " +
                                         std::to_string(tok.size() - 1) + " values, expected " + std::to_string(table.dim));
    }
    values.clear();
    for (std::size_t i = 1; i < tok.size(); ++i) values.push_back(detail::number(path, lineno, tok[i]));
    if (table.rows.count(view_id)) throw Error(Errc::SchemaError, path + ": duplicate view id '" + view_id + "'");
    table.rows.emplace(view_id, attach_external_embedding(registry, view_id, table.rep_id, values));
  }
  if (table.rows.size() != static_cast<std::size_t>(*count)) {
    throw Error(Errc::SchemaError, path + ": header count " + std::to_string(static_cast<std::size_t>(*count)) +
                                       " but " + std::to_string(table.rows.size()) + " rows");
  }
  return table;
}

inline void save_embeddings(const std::string& path, const std::string& rep_id,
                            const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  std::ofstream os = detail::open_out(path);
  const std::size_t dim = rows.empty() ? 0 : rows.front().second.size();
  os << "rep_id\t" << external_rep_id(rep_id) << "\ndim\t" << dim << "\ncount\t" << rows.size() << '\n';
  for (const auto& [id, v] : rows) {
    os << id;
    for (double x : v) os << '\t' << format_double(x);
    os << '\n';
  }
}

// --- dataset manifest ------------------------------------------------------

struct ManifestView {
  std::string id;
  std::string cloud;  // resolved path
};

struct ManifestCategory {
  std::string label;
  std::vector<ManifestView> views;
};

struct ManifestEmbedding {
  std::string rep_id;
  std::string file;  // resolved path
};

/// {"name", "root"?, "categories": [{"label", "views": [{"id", "cloud"}]}],
///  "embeddings"?: [{"rep", "file"}]}; paths relative to root, which is
/// relative to the manifest's directory.
struct DatasetManifest {
  std::string name;
  std::string root;
  std::vector<ManifestCategory> categories;
  std::vector<ManifestEmbedding> embeddings;
};

inline DatasetManifest load_manifest(const std::string& path) {
  nlohmann::json j;
  {
    std::ifstream is = detail::open_in(path);
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::SchemaError, path + ": " + e.what());
    }
  }
  DatasetManifest m;
  try {
    m.name = j.value("name", std::string("dataset"));
    fs::path root = fs::path(path).parent_path() / j.value("root", std::string("."));
    m.root = root.lexically_normal().string();
    std::set<std::string> ids, labels;
    for (const auto& c : j.at("categories")) {
      ManifestCategory cat;
      cat.label = c.at("label").get<std::string>();
      if (!labels.insert(cat.label).second) throw Error(Errc::SchemaError, path + ": duplicate category '" + cat.label + "'");
      for (const auto& v : c.at("views")) {
        ManifestView view{v.at("id").get<std::string>(), (root / v.at("cloud").get<std::string>()).lexically_normal().string()};
        if (!ids.insert(view.id).second) throw Error(Errc::SchemaError, path + ": duplicate view id '" + view.id + "'");
        if (!fs::exists(view.cloud)) throw Error(Errc::SchemaError, path + ": view '" + view.id + "' references missing file '" + view.cloud + "'");
        cat.views.push_back(std::move(view));
      }
      if (cat.views.empty()) throw Error(Errc::SchemaError, path + ": category '" + cat.label + "' has no views");
      m.categories.push_back(std::move(cat));
    }
    if (j.contains("embeddings")) {
      std::set<std::string> reps;
      for (const auto& e : j.at("embeddings")) {
        ManifestEmbedding emb{external_rep_id(e.at("rep").get<std::string>()), (root / e.at("file").get<std::string>()).lexically_normal().string()};
        if (!reps.insert(emb.rep_id).second) throw Error(Errc::SchemaError, path + ": duplicate embedding '" + emb.rep_id + "'");
        if (!fs::exists(emb.file)) throw Error(Errc::SchemaError, path + ": embedding file '" + emb.file + "' is missing");
        m.embeddings.push_back(std::move(emb));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaError, path + ": " + e.what());
  }
  return m;
}

inline void write_manifest(const DatasetManifest& m, const std::string& path) {
  const fs::path root = m.root.empty() ? fs::path(path).parent_path() : fs::path(m.root);
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : m.categories) {
    nlohmann::json views = nlohmann::json::array();
    for (const auto& v : c.views) views.push_back({{"id", v.id}, {"cloud", fs::path(v.cloud).lexically_relative(root).generic_string()}});
    cats.push_back({{"label", c.label}, {"views", views}});
  }
  nlohmann::json j = {{"name", m.name}, {"root", "."}, {"categories", cats}};
  if (!m.embeddings.empty()) {
    nlohmann::json embs = nlohmann::json::array();
    for (const auto& e : m.embeddings) embs.push_back({{"rep", e.rep_id}, {"file", fs::path(e.file).lexically_relative(root).generic_string()}});
    j["embeddings"] = embs;
  }
  std::ofstream os = detail::open_out(path);
  os << j.dump(2) << '\n';
}

/// Loads every referenced cloud eagerly.
inline CloudDataset load_cloud_dataset(const DatasetManifest& m) {
  CloudDataset ds;
  ds.name = m.name;
  for (const auto& c : m.categories) {
    CloudCategory cat{c.label, {}};
    for (const auto& v : c.views) {
      PointCloud cloud = load_cloud(v.cloud);
      cloud.id = v.id;
      cat.views.push_back(std::move(cloud));
    }
    ds.categories.push_back(std::move(cat));
  }
  return ds;
}

/// Loads every embedding file of the manifest (rep -> view id -> feature).
inline std::map<std::string, std::map<std::string, FeatureVector>> load_manifest_embeddings(const DatasetManifest& m,
                                                                                          EmbeddingRegistry& registry) {
  std::map<std::string, std::map<std::string, FeatureVector>> out;
  for (const auto& e : m.embeddings) {
    EmbeddingTable t = load_embeddings(e.file, registry);
    if (t.rep_id != e.rep_id) throw Error(Errc::SchemaError, e.file + ": rep_id '" + t.rep_id + "' but manifest says '" + e.rep_id + "'");
    out[t.rep_id] = std::move(t.rows);
  }
  return out;
}

// --- reports ---------------------------------------------------------------

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os = detail::open_out(path);
  os << text;
  if (!os) throw Error(Errc::IoError, "failed writing '" + path + "'");
}

/// Rows = reports (sweep levels), columns = metrics then per-member ACA.
inline std::string eval_reports_csv(const std::vector<EvalReport>& reports) {
  std::set<std::string> reps;
  for (const auto& r : reports) {
    for (const auto& [rep, v] : r.member_aca) reps.insert(rep);
  }
  std::ostringstream os;
  os << "level_kind,level,ACA,instance_accuracy,tested,tie_breaks,elapsed_seconds,seed";
  for (const auto& rep : reps) os << ",ACA[" << rep << ']';
  os << '\n';
  for (const auto& r : reports) {
    os << r.level_kind << ',' << (r.level ? format_double(*r.level) : "") << ',' << format_double(r.aca) << ','
       << format_double(r.instance_accuracy) << ',' << r.tested << ',' << r.tie_breaks << ','
       << format_double(r.elapsed_seconds) << ',' << r.seed;
    for (const auto& rep : reps) {
      const auto it = r.member_aca.find(rep);
      os << ',' << (it == r.member_aca.end() ? "" : format_double(it->second));
    }
    os << '\n';
  }
  return os.str();
}

/// Writes <stem>.json (array of reports) and <stem>.csv.
inline void write_eval_reports(const std::string& dir, const std::string& stem, const std::vector<EvalReport>& reports) {
  fs::create_directories(dir);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  write_text((fs::path(dir) / (stem + ".json")).string(), arr.dump(2) + "\n");
  write_text((fs::path(dir) / (stem + ".csv")).string(), eval_reports_csv(reports));
}

inline std::string protocol_summary_csv(const std::vector<ProtocolReport>& runs) {
  std::ostringstream os;
  os << "QCI,ALC,AIC,GCA,APA,stop_reason,seed\n";
  for (const auto& r : runs) {
    os << r.qci << ',' << format_double(r.alc) << ',' << format_double(r.aic) << ',' << format_double(r.gca) << ','
       << format_double(r.apa) << ',' << stop_reason_name(r.stop_reason) << ',' << r.config.seed << '\n';
  }
  return os.str();
}

/// Accuracy curve: one row per question plus one row per introduction.
inline std::string protocol_trace_csv(const std::vector<ProtocolReport>& runs) {
  std::ostringstream os;
  os << "run,iteration,protocol_accuracy,introduced\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (const auto& ev : runs[i].trace) {
      os << i << ',' << ev.qci << ',';
      if (ev.kind == TraceEvent::Kind::Ask) {
        os << format_double(*ev.protocol_accuracy) << ",\n";
      } else {
        os << ',' << ev.category << '\n';
      }
    }
  }
  return os.str();
}

/// Writes protocol_report.json (array of runs), protocol_summary.csv and
/// protocol_trace.csv.
inline void write_protocol_reports(const std::string& dir, const std::vector<ProtocolReport>& runs) {
  fs::create_directories(dir);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : runs) arr.push_back(to_json(r));
  write_text((fs::path(dir) / "protocol_report.json").string(), arr.dump(2) + "\n");
  write_text((fs::path(dir) / "protocol_summary.csv").string(), protocol_summary_csv(runs));
  write_text((fs::path(dir) / "protocol_trace.csv").string(), protocol_trace_csv(runs));
}

}  // namespace lle
