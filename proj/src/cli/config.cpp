#include "optrot/cli/config.hpp"

#include "optrot/error.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace optrot::cli {

using nlohmann::json;

const char* rotation_method_name(RotationMethod m) {
  switch (m) {
    case RotationMethod::kNone: return "none";
    case RotationMethod::kHadamard: return "hadamard";
    case RotationMethod::kOptRot: return "optrot";
    case RotationMethod::kOptRotV2: return "optrot-v2";
    case RotationMethod::kOptRotPlus: return "optrot+";
    case RotationMethod::kOptRotPlusV2: return "optrot+-v2";
  }
  return "none";
}

RotationMethod parse_rotation_method(const std::string& name) {
  for (RotationMethod m : {RotationMethod::kNone, RotationMethod::kHadamard, RotationMethod::kOptRot,
                           RotationMethod::kOptRotV2, RotationMethod::kOptRotPlus,
                           RotationMethod::kOptRotPlusV2}) {
    if (name == rotation_method_name(m)) return m;
  }
  throw InvalidArgument("unknown rotation method '" + name +
                        "' (none, hadamard, optrot, optrot-v2, optrot+, optrot+-v2)");
}

bool is_learned(RotationMethod m) {
  return m != RotationMethod::kNone && m != RotationMethod::kHadamard;
}

bool needs_calibration(RotationMethod m) {
  return m == RotationMethod::kOptRotPlus || m == RotationMethod::kOptRotPlusV2;
}

ObjectiveKind objective_for(RotationMethod m) {
  switch (m) {
    case RotationMethod::kOptRotV2: return ObjectiveKind::kOptRotV2;
    case RotationMethod::kOptRotPlus: return ObjectiveKind::kOptRotPlus;
    case RotationMethod::kOptRotPlusV2: return ObjectiveKind::kOptRotPlusV2;
    default: return ObjectiveKind::kOptRot;
  }
}

CalibrationSection default_calibration(std::uint64_t seed) {
  CalibrationSection c;
  c.seed = seed + 1000;
  c.heldout_seed = seed + 2000;
  return c;
}

namespace {

// Typed, strict view of one JSON object: every key must be consumed.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidArgument(where_ + ": expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  bool read(const char* key, T& dst) {
    if (!has(key)) return false;
    dst = convert<T>(j_.at(key), path(key));
    return true;
  }

  template <typename T>
  bool read_list(const char* key, std::vector<T>& dst) {
    if (!has(key)) return false;
    const json& v = j_.at(key);
    if (!v.is_array()) throw InvalidArgument(path(key) + ": expected an array");
    dst.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      dst.push_back(convert<T>(v[i], path(key) + "[" + std::to_string(i) + "]"));
    }
    return true;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw InvalidArgument(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw InvalidArgument(where + ": expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw InvalidArgument(where + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw InvalidArgument(where + ": expected a number");
      return v.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) {
        throw InvalidArgument(where + ": expected a nonnegative integer");
      }
      return v.get<T>();
    } else {
      if (!v.is_number_integer()) throw InvalidArgument(where + ": expected an integer");
      const auto x = v.get<std::int64_t>();
      if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
        throw InvalidArgument(where + ": out of range");
      }
      return static_cast<T>(x);
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

const std::set<std::string> kModelSpecKeys = {
    "n_layers",         "d_model",          "d_head_block", "d_ff",       "seed",
    "distribution",     "outlier_fraction", "outlier_magnitude", "weight_gain"};

void parse_model(Section& top, ExperimentConfig& cfg) {
  cfg.model.spec.seed = cfg.seed;
  if (!top.has("model")) return;
  Section s(top.raw("model"), "model");
  std::string path;
  const bool has_path = s.read("path", path);
  if (s.has("spec")) {
    if (has_path) throw InvalidArgument("model: give either 'path' or 'spec', not both");
    json spec = s.raw("spec");
    if (!spec.is_object()) throw InvalidArgument("model.spec: expected an object");
    for (const auto& [key, value] : spec.items()) {
      if (!kModelSpecKeys.count(key)) {
        throw InvalidArgument("model.spec: unknown key '" + key + "'");
      }
    }
    if (!spec.contains("seed")) spec["seed"] = cfg.seed;
    if (!spec["seed"].is_number_unsigned()) {
      throw InvalidArgument("model.spec.seed: expected a nonnegative integer");
    }
    cfg.model.spec = ToyModelSpec::from_json(spec.dump());
  }
  if (has_path) cfg.model.path = path;
  s.finish();
}

void parse_rotation(Section& top, ExperimentConfig& cfg) {
  if (!top.has("rotation")) return;
  Section s(top.raw("rotation"), "rotation");
  std::string method;
  if (s.read("method", method)) cfg.rotation.method = parse_rotation_method(method);
  std::string path;
  if (s.read("path", path)) cfg.rotation.path = path;
  s.read("p", cfg.rotation.p);
  TrainConfig& t = cfg.rotation.train;
  s.read("learning_rate", t.learning_rate);
  s.read("steps", t.steps);
  s.read("momentum", t.momentum);
  s.read("clip_step", t.clip_step);
  s.read("top_k", t.top_k);
  s.finish();
}

void parse_calibration(Section& top, ExperimentConfig& cfg) {
  if (!top.has("calibration")) return;
  CalibrationSection c = default_calibration(cfg.seed);
  Section s(top.raw("calibration"), "calibration");
  s.read("samples", c.samples);
  s.read("heldout_samples", c.heldout_samples);
  s.read("outlier_channels", c.outlier_channels);
  s.read("outlier_scale", c.outlier_scale);
  s.read("seed", c.seed);
  s.read("heldout_seed", c.heldout_seed);
  s.finish();
  cfg.calibration = c;
}

void parse_quant(Section& top, ExperimentConfig& cfg) {
  QuantConfig& q = cfg.quant.config;
  PipelineOptions& o = cfg.quant.options;
  q.seed = cfg.seed;
  if (!top.has("quant")) return;
  Section s(top.raw("quant"), "quant");
  s.read("bits", q.bits);
  s.read("group_size", q.group_size);
  std::string name;
  if (s.read("rounding", name)) q.rounding = parse_rounding(name);
  if (s.read("grid", name)) q.grid = parse_grid(name);
  s.read("seed", q.seed);
  if (s.read("method", name)) o.method = parse_quant_method(name);
  s.read("damping", o.damping);
  s.read("clean_activations", o.clean_activations);
  s.read("delta", o.delta);
  s.finish();
}

void parse_bounds(Section& top, ExperimentConfig& cfg) {
  BoundsGrid& g = cfg.bounds.grid;
  g.base_seed = cfg.seed;
  if (!top.has("bounds")) return;
  Section s(top.raw("bounds"), "bounds");
  s.read_list("ns", g.ns);
  std::vector<std::string> names;
  if (s.read_list("spectra", names)) {
    g.spectra.clear();
    for (const auto& n : names) g.spectra.push_back(parse_spectrum(n));
  }
  if (s.read_list("bases", names)) {
    g.bases.clear();
    for (const auto& n : names) g.bases.push_back(parse_eigenbasis(n));
  }
  s.read("exponent", g.exponent);
  s.read("rank", g.rank);
  s.read("seeds", g.seeds);
  s.read("base_seed", g.base_seed);
  s.read("svg", cfg.bounds.svg);
  s.finish();
}

void parse_compare(Section& top, ExperimentConfig& cfg) {
  if (!top.has("compare")) return;
  Section s(top.raw("compare"), "compare");
  std::vector<std::string> dirs;
  if (s.read_list("baseline", dirs)) cfg.compare.baseline.assign(dirs.begin(), dirs.end());
  if (s.read_list("candidate", dirs)) cfg.compare.candidate.assign(dirs.begin(), dirs.end());
  s.read("svg", cfg.compare.svg);
  s.finish();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const Overrides& overrides) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  if (j.is_null()) j = json::object();

  ExperimentConfig cfg;
  Section top(j, "config");
  top.read("seed", cfg.seed);
  if (overrides.seed) cfg.seed = *overrides.seed;
  top.read("threads", cfg.threads);
  if (overrides.threads) cfg.threads = *overrides.threads;
  if (cfg.threads < 1) throw InvalidArgument("threads must be at least 1");
  std::string out;
  if (top.read("out", out)) cfg.out = out;
  if (overrides.out) cfg.out = *overrides.out;

  parse_model(top, cfg);
  parse_rotation(top, cfg);
  parse_calibration(top, cfg);
  parse_quant(top, cfg);
  parse_bounds(top, cfg);
  parse_compare(top, cfg);
  top.finish();

  cfg.rotation.train.threads = cfg.threads;
  cfg.quant.options.threads = cfg.threads;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file, const Overrides& overrides) {
  std::ifstream in(file);
  if (!in) throw InvalidArgument("cannot read config file " + file.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), overrides);
}

}  // namespace optrot::cli
