#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <string_view>

#include "lle/descriptors/depth.hpp"
#include "lle/descriptors/embedding.hpp"
#include "lle/descriptors/esf.hpp"
#include "lle/descriptors/good.hpp"
#include "lle/descriptors/vfh.hpp"

namespace lle {

struct DescriberOptions {
  GoodConfig good;
  EsfConfig esf;
  VfhConfig vfh;
};

enum class NativeRep { Good, Esf, Vfh };

struct ParsedRep {
  NativeRep kind;
  int good_bins = 0;  // only for Good
};

/// Parses "good<bins>", "esf" or "vfh"; "good" alone takes `default_bins`.
inline std::optional<ParsedRep> parse_native_rep(std::string_view rep, int default_bins = 9) {
  if (rep == "esf") return ParsedRep{NativeRep::Esf};
  if (rep == "vfh") return ParsedRep{NativeRep::Vfh};
  if (rep.rfind("good", 0) == 0) {
    const std::string_view tail = rep.substr(4);
    if (tail.empty()) return ParsedRep{NativeRep::Good, default_bins};
    int bins = 0;
    const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), bins);
    if (ec == std::errc() && ptr == tail.data() + tail.size() && bins >= 2) return ParsedRep{NativeRep::Good, bins};
  }
  return std::nullopt;
}

inline bool is_native_rep(std::string_view rep) { return parse_native_rep(rep).has_value(); }

/// Computes a native representation of `cloud`.
inline FeatureVector describe(std::string_view rep, const PointCloud& cloud, const DescriberOptions& opts = {}) {
  const auto parsed = parse_native_rep(rep, opts.good.bins);
  if (!parsed) throw Error(Errc::UnknownRep, "unknown representation '" + std::string(rep) + "'");
  switch (parsed->kind) {
    case NativeRep::Good: return good_descriptor(cloud, GoodConfig{parsed->good_bins});
    case NativeRep::Esf: return esf_descriptor(cloud, opts.esf);
    case NativeRep::Vfh: return vfh_descriptor(cloud, opts.vfh);
  }
  throw Error(Errc::UnknownRep, std::string(rep));
}

}  // namespace lle
