// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/routing_log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>

#include "moeprobe/csv.hpp"
#include "moeprobe/diagnostics.hpp"
#include "moeprobe/errors.hpp"

namespace moeprobe {

using nlohmann::json;

void RoutingLog::validate() const {
  if (meta.num_layers == 0 || meta.num_experts == 0) throw ValidationError("meta: num_layers and num_experts must be >= 1");
  if (meta.top_k == 0 || meta.top_k > meta.num_experts) {
    throw ValidationError("meta: top_k must be in [1, num_experts]");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto& p = prompts[i];
    const std::string where = "prompts[" + std::to_string(i) + "]";
    if (p.activation.num_layers() != meta.num_layers || p.activation.num_experts() != meta.num_experts) {
      throw ValidationError(where + ": activation is " + std::to_string(p.activation.num_layers()) + "x" +
                            std::to_string(p.activation.num_experts()) + ", meta says " +
                            std::to_string(meta.num_layers) + "x" + std::to_string(meta.num_experts));
    }
    if (p.group.empty()) throw ValidationError(where + ": empty group");
    try {
      p.validate(meta.top_k);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (!seen.insert(p.id).second) throw ValidationError(where + ": duplicate prompt id '" + p.id + "'");
  }
}

std::vector<std::string> RoutingLog::groups() const {
  std::vector<std::string> out;
  for (const auto& p : prompts) {
    if (std::find(out.begin(), out.end(), p.group) == out.end()) out.push_back(p.group);
  }
  return out;
}

namespace {

json map_to_json(const RoutingMap& map, bool integral) {
  json rows = json::array();
  for (std::size_t l = 0; l < map.num_layers(); ++l) {
    json row = json::array();
    for (double v : map.row(l)) {
      if (integral) {
        row.push_back(static_cast<std::uint64_t>(v));
      } else {
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

class Reader {
 public:
  explicit Reader(std::vector<std::string>& warnings) : warnings_(warnings) {}

  const json& field(const json& obj, const std::string& key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(where + ": missing field '" + key + "'");
    return *it;
  }

  std::size_t unsigned_int(const json& v, const std::string& where) {
    if (!v.is_number_unsigned()) {
      throw ValidationError(where + ": expected a nonnegative integer");
    }
    return v.get<std::size_t>();
  }

  std::string string(const json& v, const std::string& where) {
    if (!v.is_string()) throw ValidationError(where + ": expected a string");
    return v.get<std::string>();
  }

  void check_known(const json& obj, std::initializer_list<std::string_view> known, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        warnings_.push_back(where + ": unknown field '" + key + "' ignored");
      }
    }
  }

  RoutingMap map(const json& v, std::size_t layers, std::size_t experts, MapKind kind, const std::string& where) {
    if (!v.is_array()) throw ValidationError(where + ": expected an array of layer rows");
    if (v.size() != layers) {
      throw ValidationError(where + ": expected " + std::to_string(layers) + " layer rows, got " +
                            std::to_string(v.size()));
    }
    std::vector<double> values;
    values.reserve(layers * experts);
    for (std::size_t l = 0; l < layers; ++l) {
      const auto& row = v[l];
      const std::string rw = where + "[" + std::to_string(l) + "]";
      if (!row.is_array()) throw ValidationError(rw + ": expected an array");
      if (row.size() != experts) {
        throw ValidationError(rw + " (layer " + std::to_string(l) + "): expected " + std::to_string(experts) +
                              " entries, got " + std::to_string(row.size()));
      }
      for (std::size_t e = 0; e < experts; ++e) {
        const auto& x = row[e];
        const std::string xw = rw + "[" + std::to_string(e) + "] (layer " + std::to_string(l) + ", expert " +
                               std::to_string(e) + ")";
        if (!x.is_number()) throw ValidationError(xw + ": expected a number");
        const double d = x.get<double>();
        if (!std::isfinite(d) || d < 0.0) throw ValidationError(xw + ": expected a finite nonnegative value");
        if (kind == MapKind::kRawCount && d != std::floor(d)) throw ValidationError(xw + ": count is not an integer");
        values.push_back(d);
      }
    }
    return RoutingMap(layers, experts, std::move(values), kind);
  }

 private:
  std::vector<std::string>& warnings_;
};

}  // namespace

std::string serialize_routing_log(const RoutingLog& log) {
  log.validate();
  json root;
  root["format"] = kRoutingLogFormat;
  root["version"] = kRoutingLogVersion;
  root["meta"] = {{"num_layers", log.meta.num_layers},
                  {"num_experts", log.meta.num_experts},
                  {"top_k", log.meta.top_k},
                  {"source", log.meta.source},
                  {"capture", log.meta.capture}};
  json prompts = json::array();
  for (const auto& p : log.prompts) {
    json rec = {{"id", p.id},
                {"group", p.group},
                {"token_count", p.token_count},
                {"activation", map_to_json(p.activation, true)}};
    if (p.gradient) rec["gradient"] = map_to_json(*p.gradient, false);
    prompts.push_back(std::move(rec));
  }
  root["prompts"] = std::move(prompts);
  return root.dump(1) + "\n";
}

LoadResult parse_routing_log(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("routing log is not valid JSON: ") + e.what());
  }
  LoadResult result;
  Reader r(result.warnings);
  if (!root.is_object()) throw ValidationError("routing log: top level must be an object");
  r.check_known(root, {"format", "version", "meta", "prompts"}, "routing log");
  if (r.string(r.field(root, "format", "routing log"), "format") != kRoutingLogFormat) {
    throw ValidationError("routing log: format must be \"" + std::string(kRoutingLogFormat) + "\"");
  }
  const auto version = r.unsigned_int(r.field(root, "version", "routing log"), "version");
  if (version != static_cast<std::size_t>(kRoutingLogVersion)) {
    throw ValidationError("routing log: unsupported version " + std::to_string(version));
  }

  const json& meta = r.field(root, "meta", "routing log");
  if (!meta.is_object()) throw ValidationError("meta: expected an object");
  r.check_known(meta, {"num_layers", "num_experts", "top_k", "source", "capture"}, "meta");
  auto& m = result.log.meta;
  m.num_layers = r.unsigned_int(r.field(meta, "num_layers", "meta"), "meta.num_layers");
  m.num_experts = r.unsigned_int(r.field(meta, "num_experts", "meta"), "meta.num_experts");
  m.top_k = r.unsigned_int(r.field(meta, "top_k", "meta"), "meta.top_k");
  if (m.num_layers == 0 || m.num_experts == 0) throw ValidationError("meta: num_layers and num_experts must be >= 1");
  if (m.top_k == 0 || m.top_k > m.num_experts) throw ValidationError("meta: top_k must be in [1, num_experts]");
  if (meta.contains("source")) m.source = r.string(meta["source"], "meta.source");
  if (meta.contains("capture")) {
    if (!meta["capture"].is_object()) throw ValidationError("meta.capture: expected an object");
    m.capture = meta["capture"];
  }

  const json& prompts = r.field(root, "prompts", "routing log");
  if (!prompts.is_array()) throw ValidationError("prompts: expected an array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const json& p = prompts[i];
    const std::string where = "prompts[" + std::to_string(i) + "]";
    if (!p.is_object()) throw ValidationError(where + ": expected an object");
    r.check_known(p, {"id", "group", "token_count", "activation", "gradient"}, where);
    PromptRecord rec;
    rec.id = r.string(r.field(p, "id", where), where + ".id");
    if (rec.id.empty()) throw ValidationError(where + ".id: empty");
    if (!seen.insert(rec.id).second) throw ValidationError(where + ": duplicate prompt id '" + rec.id + "'");
    rec.group = r.string(r.field(p, "group", where), where + ".group");
    if (rec.group.empty()) throw ValidationError(where + ".group: empty");
    rec.token_count = r.unsigned_int(r.field(p, "token_count", where), where + ".token_count");
    rec.activation = r.map(r.field(p, "activation", where), m.num_layers, m.num_experts, MapKind::kRawCount,
                           where + ".activation");
    if (p.contains("gradient") && !p["gradient"].is_null()) {
      rec.gradient = r.map(p["gradient"], m.num_layers, m.num_experts, MapKind::kGradient, where + ".gradient");
    }
    try {
      rec.validate(m.top_k);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    result.log.prompts.push_back(std::move(rec));
  }
  return result;
}

void save_routing_log(const RoutingLog& log, const std::filesystem::path& path) {
  write_text_file(path, serialize_routing_log(log));
}

LoadResult load_routing_log(const std::filesystem::path& path) {
  LoadResult result;
  try {
    result = parse_routing_log(read_text_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  for (const auto& w : result.warnings) warn(path.string() + ": " + w);
  return result;
}

}  // namespace moeprobe
