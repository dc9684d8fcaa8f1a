#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphheat/common.hpp"
#include "graphheat/density.hpp"
#include "graphheat/graph.hpp"

namespace graphheat {

/// Malformed or unknown configuration; maps to exit code 4.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace config {

using nlohmann::json;

/// Reads an object field by field and rejects keys that were never read.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }
  template <typename T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key \"" + key + "\"");
    return convert<T>(key);
  }
  template <typename T>
  std::optional<T> optional(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return convert<T>(key);
  }
  /// Raw sub-document (validated by its own reader).
  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key \"" + key + "\"");
    return j_.at(key);
  }
  ObjectReader object(const std::string& key) { return ObjectReader(raw(key), where_ + "." + key); }
  const std::string& where() const { return where_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.contains(it.key())) throw ConfigError(where_ + ": unknown key \"" + it.key() + "\"");
  }

 private:
  template <typename T>
  T convert(const std::string& key) const {
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where_ + ": key \"" + key + "\" has the wrong type (" + v.dump() + ")");
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

inline Metric parse_metric(const std::string& s, const std::string& where) {
  if (s == "combinatorial") return Metric::combinatorial;
  if (s == "euclidean") return Metric::euclidean;
  throw ConfigError(where + ": metric must be \"combinatorial\" or \"euclidean\", got \"" + s + "\"");
}

inline IntRule parse_rule(const std::string& s, const std::string& where) {
  try {
    return IntRule::parse(s);
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

/// {"family":"lattice","n":3} | {"family":"tree","branching":"const:2","depth":200}
/// | {"family":"antitree","sphere":"affine:1,1","convention":"A","depth":200}
inline WeightedGraph parse_graph(const json& j) {
  ObjectReader r(j, "graph");
  const auto family = r.require<std::string>("family");
  WeightedGraph g = [&] {
    if (family == "lattice") return make_lattice(static_cast<int>(r.require<std::int64_t>("n")));
    if (family == "tree")
      return make_tree(parse_rule(r.require<std::string>("branching"), "graph.branching"),
                       r.require<std::int64_t>("depth"));
    if (family == "antitree") {
      const auto conv = r.require<std::string>("convention");
      if (conv != "A" && conv != "B") throw ConfigError("graph.convention must be \"A\" or \"B\"");
      return make_antitree(parse_rule(r.require<std::string>("sphere"), "graph.sphere"),
                           conv == "A" ? AntitreeConvention::A : AntitreeConvention::B,
                           r.require<std::int64_t>("depth"));
    }
    throw ConfigError("graph.family must be lattice, tree or antitree, got \"" + family + "\"");
  }();
  r.finish();
  return g;
}

/// {"family":"constant","c":1} | {"family":"power_decay","c":1,"alpha":3,"metric":"euclidean","side":"upper"}
/// | {"family":"outer_degree_scaled","rho0":1} | {"family":"log_power","rho0":1,"beta":0.5}
inline DensitySpec parse_density(const json& j) {
  ObjectReader r(j, "density");
  const auto family = r.require<std::string>("family");
  DensitySpec d = [&] {
    if (family == "constant") return DensitySpec::constant(r.require<double>("c"));
    if (family == "power_decay") {
      const auto side = r.get<std::string>("side", "lower");
      if (side != "lower" && side != "upper") throw ConfigError("density.side must be \"lower\" or \"upper\"");
      return DensitySpec::power_decay(r.get<double>("c", 1.0), r.require<double>("alpha"),
                                      parse_metric(r.get<std::string>("metric", "combinatorial"), "density"),
                                      side == "upper" ? BoundSide::upper : BoundSide::lower);
    }
    if (family == "outer_degree_scaled") return DensitySpec::outer_degree_scaled(r.require<double>("rho0"));
    if (family == "log_power") return DensitySpec::log_power(r.require<double>("rho0"), r.require<double>("beta"));
    throw ConfigError("density.family must be constant, power_decay, outer_degree_scaled or log_power, got \"" +
                      family + "\"");
  }();
  r.finish();
  return d;
}

enum class ExperimentKind { identities, spectrum, solve, certify, exhaust, nonuniqueness, table1 };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::identities: return "identities";
    case ExperimentKind::spectrum: return "spectrum";
    case ExperimentKind::solve: return "solve";
    case ExperimentKind::certify: return "certify";
    case ExperimentKind::exhaust: return "exhaust";
    case ExperimentKind::nonuniqueness: return "nonuniqueness";
    case ExperimentKind::table1: return "table1";
  }
  return "unknown";
}

inline ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::identities, ExperimentKind::spectrum, ExperimentKind::solve, ExperimentKind::certify,
                 ExperimentKind::exhaust, ExperimentKind::nonuniqueness, ExperimentKind::table1})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown experiment \"" + s + "\"");
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::identities;
  json graph;    // descriptor, validated
  json density;  // descriptor, validated
  json params = json::object();
  std::uint64_t seed = 0;
  std::optional<std::string> output;
  std::optional<std::string> fault;  // "corrupt_weights"
  std::filesystem::path base_dir;    // directory of the config file

  WeightedGraph make_graph() const { return parse_graph(graph); }
  DensitySpec make_density() const { return parse_density(density); }
};

inline ExperimentConfig parse_config(const json& j, std::filesystem::path base_dir = {}) {
  ObjectReader r(j, "config");
  ExperimentConfig c;
  c.kind = parse_kind(r.require<std::string>("experiment"));
  c.base_dir = std::move(base_dir);
  if (c.kind != ExperimentKind::table1) {
    c.graph = r.raw("graph");
    c.density = r.raw("density");
    try {
      parse_graph(c.graph);
      parse_density(c.density);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("invalid descriptor: ") + e.what());
    }
  }
  c.seed = r.get<std::uint64_t>("seed", 0);
  c.output = r.optional<std::string>("output");
  c.fault = r.optional<std::string>("self_test_fault");
  if (c.fault && *c.fault != "corrupt_weights")
    throw ConfigError("self_test_fault must be \"corrupt_weights\", got \"" + *c.fault + "\"");
  if (r.has("params")) c.params = r.raw("params");
  if (!c.params.is_object()) throw ConfigError("config.params must be a JSON object");
  r.finish();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, path.parent_path());
}

}  // namespace config
}  // namespace graphheat
