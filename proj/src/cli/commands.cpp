#include "optrot/cli/commands.hpp"

#include "optrot/cli/svg.hpp"
#include "optrot/error.hpp"
#include "optrot/quant/serialize.hpp"
#include "optrot/rotation/objective.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace optrot::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kLockName = ".optrot.lock";

// Exclusive lock on an output directory for the lifetime of one command.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / kLockName) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      throw IoError("output directory " + dir.string() + " is locked by another run (remove " +
                    path_.string() + " if it is stale)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + file.string());
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Refuses to replace existing artifacts unless forced; forced runs clear
// them first so stale files never mix with fresh ones.
void claim_artifacts(const fs::path& dir, const std::vector<std::string>& names, bool force) {
  for (const auto& name : names) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) continue;
    if (!force) {
      throw IoError(p.string() + " already exists; pass --force to overwrite");
    }
    std::error_code ec;
    fs::remove_all(p, ec);
    if (ec) throw IoError("cannot remove " + p.string() + ": " + ec.message());
  }
}

fs::path require_out(const ExperimentConfig& cfg) {
  if (!cfg.out) throw InvalidArgument("no output directory (set --out or \"out\" in the config)");
  return *cfg.out;
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

ojson nullable(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Wall-clock data lives in its own file so every other artifact stays
// byte-identical across reruns.
void write_timing(const fs::path& dir, const char* command, const Stopwatch& clock) {
  ojson j;
  j["command"] = command;
  j["wall_seconds"] = clock.seconds();
  write_text(dir / "timing.json", dump(j));
}

// ---- validation helpers -------------------------------------------------

void check_model_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument("model path " + dir.string() + " does not exist");
  if (!fs::exists(dir / "model.json")) {
    throw InvalidArgument("model path " + dir.string() + " holds no model.json");
  }
}

ToyModelSpec model_spec_of(const ExperimentConfig& cfg) {
  if (!cfg.model.path) {
    cfg.model.spec.validate();
    return cfg.model.spec;
  }
  check_model_dir(*cfg.model.path);
  return ToyModelSpec::from_json(read_text(*cfg.model.path / "model.json"));
}

ToyModel obtain_model(const ExperimentConfig& cfg) {
  if (cfg.model.path) return load_model(*cfg.model.path);
  return build_toy_model(cfg.model.spec);
}

CalibrationSection calibration_of(const ExperimentConfig& cfg) {
  return cfg.calibration ? *cfg.calibration : default_calibration(cfg.seed);
}

void check_calibration(const CalibrationSection& c, const ToyModelSpec& spec) {
  if (c.samples == 0 || c.heldout_samples == 0) {
    throw InvalidArgument("calibration needs positive sample counts");
  }
  if (c.outlier_channels > spec.d_model) {
    throw InvalidArgument("calibration.outlier_channels exceeds d_model");
  }
  if (!(c.outlier_scale > 0.0) || !std::isfinite(c.outlier_scale)) {
    throw InvalidArgument("calibration.outlier_scale must be positive and finite");
  }
}

CalibrationSet calibration_set(const CalibrationSection& c, std::size_t dim) {
  return synthetic_calibration(dim, c.samples, c.outlier_channels, c.outlier_scale, c.seed);
}

CalibrationSet heldout_set(const CalibrationSection& c, std::size_t dim) {
  return synthetic_calibration(dim, c.heldout_samples, c.outlier_channels, c.outlier_scale,
                               c.heldout_seed);
}

RotationSet fixed_rotations(RotationMethod m, const ToyModelSpec& s, std::uint64_t seed) {
  if (m == RotationMethod::kHadamard) {
    return RotationSet::hadamard_init(s.n_layers, s.d_model, s.d_head_block, s.d_ff, seed);
  }
  return RotationSet::identity(s.n_layers, s.d_model, s.d_head_block, s.d_ff);
}

fs::path rotation_archive_dir(const fs::path& path) {
  if (fs::exists(path / TensorArchive::kManifestName)) return path;
  if (fs::exists(path / "rotations" / TensorArchive::kManifestName)) return path / "rotations";
  throw InvalidArgument("rotation archive " + path.string() + " does not exist");
}

void check_rotation_shapes(const RotationSet& r, const ToyModelSpec& s) {
  r.validate();
  if (r.n_layers() != s.n_layers || r.d_model() != s.d_model ||
      r.d_head_block() != s.d_head_block || r.d_ff() != s.d_ff) {
    throw InvalidArgument("rotation archive does not match the model dimensions");
  }
}

void check_quant(const QuantSection& q, const ToyModelSpec& s) {
  q.config.validate(s.d_model);
  q.config.validate(s.d_ff);
  const PipelineOptions& o = q.options;
  if (o.method == QuantMethod::kGptqs) {
    if (q.config.bits < 3) throw InvalidArgument("gptqs uses the shrunk grid and needs bits >= 3");
  } else if (q.config.rounding != Rounding::kNearest) {
    throw InvalidArgument("stochastic rounding is only available with quant.method = gptqs");
  }
  if (!(o.damping >= 0.0) || !std::isfinite(o.damping)) {
    throw InvalidArgument("quant.damping must be nonnegative and finite");
  }
  if (!(o.delta > 0.0 && o.delta < 1.0)) throw InvalidArgument("quant.delta must be in (0, 1)");
}

// ---- quantize summaries ---------------------------------------------------

struct LayerSummary {
  std::string layer;
  double mu_w = 0.0;
  double snr_db = 0.0;
  bool snr_exact = false;
  double actual_error = 0.0;
};

struct RunSummary {
  fs::path dir;
  std::uint64_t model_seed = 0;
  std::string rotation_method;
  double kl_proxy = 0.0;
  std::vector<LayerSummary> layers;
};

RunSummary read_summary(const fs::path& dir) {
  const fs::path file = dir / "summary.json";
  if (!fs::exists(file)) {
    throw InvalidArgument(dir.string() + " is not a completed quantize run (no summary.json)");
  }
  RunSummary s;
  s.dir = dir;
  try {
    const auto j = nlohmann::json::parse(read_text(file));
    s.model_seed = j.at("model_seed").get<std::uint64_t>();
    s.rotation_method = j.at("rotation_method").get<std::string>();
    s.kl_proxy = j.at("kl_proxy").get<double>();
    for (const auto& l : j.at("layers")) {
      LayerSummary ls;
      ls.layer = l.at("layer").get<std::string>();
      ls.mu_w = l.at("mu_w").get<double>();
      ls.snr_exact = l.at("snr_exact").get<bool>();
      if (!ls.snr_exact) ls.snr_db = l.at("snr_db").get<double>();
      ls.actual_error = l.at("actual_error").get<double>();
      s.layers.push_back(ls);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("malformed " + file.string() + ": " + e.what());
  }
  return s;
}

}  // namespace

double sign_test_p_value(std::size_t wins, std::size_t n) {
  if (n == 0) return 1.0;
  // P(X <= k) for X ~ Bin(n, 1/2), k = min(wins, n - wins), doubled.
  const std::size_t k = std::min(wins, n - wins);
  double tail = 0.0;
  double coeff = 1.0;  // C(n, i), exact in double for any realistic n
  for (std::size_t i = 0; i <= k; ++i) {
    if (i > 0) coeff = coeff * static_cast<double>(n - i + 1) / static_cast<double>(i);
    tail += coeff;
  }
  tail = std::ldexp(tail, -static_cast<int>(n));
  return std::min(1.0, 2.0 * tail);
}

// ---- commands ---------------------------------------------------------------

void cmd_generate(const ExperimentConfig& cfg, const RunOptions& run, std::ostream& log) {
  const fs::path out = require_out(cfg);
  if (cfg.model.path) {
    throw InvalidArgument("generate builds a model from model.spec; model.path is not allowed");
  }
  cfg.model.spec.validate();

  OutputLock lock(out);
  claim_artifacts(out, {"model.json", TensorArchive::kManifestName, TensorArchive::kBlobName},
                  run.force);
  const ToyModel model = build_toy_model(cfg.model.spec);
  save_model(model, out);
  log << "generate: wrote model (seed " << model.spec.seed << ", " << model.spec.n_layers
      << " blocks, d_model " << model.spec.d_model << ") to " << out.string() << "\n";
}

void cmd_learn(const ExperimentConfig& cfg, const RunOptions& run, std::ostream& log) {
  const fs::path out = require_out(cfg);
  const ToyModelSpec spec = model_spec_of(cfg);
  const RotationMethod method = cfg.rotation.method;
  if (needs_calibration(method) && !cfg.calibration) {
    throw InvalidArgument(std::string("rotation method ") + rotation_method_name(method) +
                          " is data-dependent and needs a calibration section");
  }
  if (cfg.calibration) check_calibration(*cfg.calibration, spec);
  ObjectiveSpec objective;
  objective.kind = objective_for(method);
  objective.p = cfg.rotation.p;
  objective.validate();
  cfg.rotation.train.validate();
  const std::size_t n_layers = spec.n_layers * kAllRoles.size();
  if (cfg.rotation.train.top_k > n_layers) {
    throw InvalidArgument("rotation.top_k exceeds the number of layers (" +
                          std::to_string(n_layers) + ")");
  }

  OutputLock lock(out);
  claim_artifacts(out, {"rotations", "loss.csv", "learn.json", "timing.json"}, run.force);
  const Stopwatch clock;
  const ToyModel model = obtain_model(cfg);
  std::vector<LayerRecord> layers = model.layers();
  const RotationSet init = fixed_rotations(
      is_learned(method) ? RotationMethod::kHadamard : method, spec, cfg.seed);

  ojson summary;
  summary["method"] = rotation_method_name(method);
  summary["model_seed"] = spec.seed;
  summary["seed"] = cfg.seed;
  summary["p"] = objective.p;

  RotationSet rotations;
  std::vector<double> history;
  if (is_learned(method)) {
    if (objective.uses_hessian()) {
      const CalibrationSet calib = calibration_set(*cfg.calibration, spec.d_model);
      const std::vector<SymmetricPsd> hs = layer_hessians(model, calib);
      for (std::size_t i = 0; i < layers.size(); ++i) layers[i].hessian = hs[i];
    }
    const TrainResult result = learn_rotations(objective, layers, cfg.rotation.train, init);
    rotations = result.rotations;
    history = result.loss_history;
    summary["objective"] = objective_name(objective.kind);
    summary["loss_scale"] = result.spec.loss_scale;
    summary["steps"] = cfg.rotation.train.steps;
    summary["learning_rate"] = cfg.rotation.train.learning_rate;
    summary["momentum"] = cfg.rotation.train.momentum;
    summary["clip_step"] = cfg.rotation.train.clip_step;
    summary["top_k"] = cfg.rotation.train.top_k;
    ojson selected = ojson::array();
    for (std::size_t i : result.selected) selected.push_back(layers[i].id());
    summary["selected"] = selected;
  } else {
    rotations = init;
    // Reference value only: the plain objective at the fixed rotations.
    history = {objective_value(objective, layers, rotations)};
    summary["objective"] = objective_name(objective.kind);
    summary["steps"] = 0;
  }
  if (!std::isfinite(history.back())) throw NumericalError("training produced a non-finite loss");
  summary["initial_loss"] = history.front();
  summary["final_loss"] = history.back();

  TensorArchive archive;
  store_rotations(archive, rotations);
  archive.write(out / "rotations");
  write_text(out / "loss.csv", loss_history_csv(history));
  write_text(out / "learn.json", dump(summary));
  write_timing(out, "learn", clock);
  log << "learn: " << rotation_method_name(method) << " loss " << history.front() << " -> "
      << history.back() << " (" << history.size() - 1 << " steps) in " << clock.seconds()
      << " s\n";
}

void cmd_quantize(const ExperimentConfig& cfg, const RunOptions& run, std::ostream& log) {
  const fs::path out = require_out(cfg);
  const ToyModelSpec spec = model_spec_of(cfg);
  const RotationMethod method = cfg.rotation.method;
  std::optional<RotationSet> loaded;
  if (cfg.rotation.path) {
    loaded = load_rotations(TensorArchive::read(rotation_archive_dir(*cfg.rotation.path)));
    check_rotation_shapes(*loaded, spec);
  } else if (is_learned(method)) {
    throw InvalidArgument(std::string("rotation method ") + rotation_method_name(method) +
                          " needs rotation.path pointing at a learned rotation archive");
  }
  const CalibrationSection calib_cfg = calibration_of(cfg);
  check_calibration(calib_cfg, spec);
  check_quant(cfg.quant, spec);

  OutputLock lock(out);
  claim_artifacts(out,
                  {"quantized", "model", "reports.csv", "reports.json", "summary.json",
                   "timing.json"},
                  run.force);
  const Stopwatch clock;
  const ToyModel model = obtain_model(cfg);
  const RotationSet r = loaded ? *loaded : fixed_rotations(method, spec, cfg.seed);
  const CalibrationSet calib = calibration_set(calib_cfg, spec.d_model);
  const CalibrationSet heldout = heldout_set(calib_cfg, spec.d_model);
  const QuantizeResult result =
      quantize_model(model, r, calib, heldout, cfg.quant.config, cfg.quant.options);
  if (!std::isfinite(result.kl_proxy)) throw NumericalError("kl_proxy is not finite");

  TensorArchive qarchive;
  for (const LayerRecord& rec : result.layers) store_quantized(qarchive, rec.id(), *rec.quantized);
  qarchive.write(out / "quantized");
  save_model(result.model, out / "model");
  write_text(out / "reports.csv", bound_reports_csv(result.reports));
  write_text(out / "reports.json", bound_reports_json(result.reports));

  const QuantConfig& q = cfg.quant.config;
  const PipelineOptions& o = cfg.quant.options;
  ojson summary;
  summary["model_seed"] = spec.seed;
  summary["model"] = ojson::parse(spec.to_json());
  summary["rotation_method"] = rotation_method_name(method);
  summary["rotation_path"] = cfg.rotation.path ? ojson(cfg.rotation.path->string()) : ojson(nullptr);
  summary["quant"] = {{"bits", q.bits},
                      {"group_size", q.group_size},
                      {"rounding", rounding_name(q.rounding)},
                      {"grid", grid_name(q.grid)},
                      {"seed", q.seed},
                      {"method", quant_method_name(o.method)},
                      {"damping", o.damping},
                      {"clean_activations", o.clean_activations},
                      {"delta", o.delta}};
  summary["calibration"] = {{"samples", calib_cfg.samples},
                            {"heldout_samples", calib_cfg.heldout_samples},
                            {"outlier_channels", calib_cfg.outlier_channels},
                            {"outlier_scale", calib_cfg.outlier_scale},
                            {"seed", calib_cfg.seed},
                            {"heldout_seed", calib_cfg.heldout_seed}};
  summary["kl_proxy"] = result.kl_proxy;

  double snr_sum = 0.0;
  std::size_t snr_count = 0;
  std::map<Role, std::vector<double>> mu_by_role;
  ojson layers = ojson::array();
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    const BoundReport& rep = result.reports[i];
    const LayerRecord& rec = result.layers.at(i);
    if (rec.id() != rep.layer) throw NumericalError("report order does not match layer order");
    mu_by_role[rec.role].push_back(rep.mu_w);
    if (!rep.snr.exact) {
      snr_sum += rep.snr.db;
      ++snr_count;
    }
    ojson l;
    l["layer"] = rep.layer;
    l["mu_w"] = rep.mu_w;
    l["snr_db"] = rep.snr.exact ? ojson(nullptr) : ojson(rep.snr.db);
    l["snr_exact"] = rep.snr.exact;
    l["actual_error"] = rep.actual_error;
    layers.push_back(l);
  }
  summary["mean_snr_db"] = snr_count ? ojson(snr_sum / static_cast<double>(snr_count))
                                     : ojson(nullptr);
  summary["exact_layers"] = result.reports.size() - snr_count;
  ojson roles = ojson::object();
  for (Role role : kAllRoles) {
    const auto& v = mu_by_role[role];
    if (v.empty()) continue;
    double sum = 0.0;
    for (double x : v) sum += x;
    roles[role_name(role)] = {{"mean_mu_w", sum / static_cast<double>(v.size())},
                              {"max_mu_w", *std::max_element(v.begin(), v.end())},
                              {"min_mu_w", *std::min_element(v.begin(), v.end())}};
  }
  summary["mu_w_by_role"] = roles;
  summary["layers"] = layers;
  write_text(out / "summary.json", dump(summary));
  write_timing(out, "quantize", clock);
  log << "quantize: " << quant_method_name(o.method) << " b=" << q.bits << " rotation "
      << rotation_method_name(method) << " kl_proxy " << result.kl_proxy << " in "
      << clock.seconds() << " s\n";
}

void cmd_bounds(const ExperimentConfig& cfg, const RunOptions& run, std::ostream& log) {
  const fs::path out = require_out(cfg);
  const BoundsGrid& g = cfg.bounds.grid;
  if (g.ns.empty() || g.spectra.empty() || g.bases.empty() || g.seeds == 0) {
    throw InvalidArgument("bounds grid is empty");
  }
  for (std::size_t n : g.ns) {
    for (SpectrumKind k : g.spectra) {
      for (Eigenbasis b : g.bases) {
        SpectrumSpec s;
        s.n = n;
        s.spectrum = k;
        s.exponent = g.exponent;
        s.rank = g.rank;
        s.basis = b;
        s.validate();
      }
    }
  }

  OutputLock lock(out);
  claim_artifacts(out, {"bounds.csv", "bounds.json", "bounds.svg", "timing.json"}, run.force);
  const Stopwatch clock;
  const std::vector<BoundsRow> rows = bounds_experiment(g, cfg.threads);
  write_text(out / "bounds.csv", bounds_csv(rows));

  // Re-assert the ordering the experiment is built on: tr(D) <= 2 UB <= 2 tr(H).
  constexpr double kRel = 1e-9;
  std::size_t trd_violations = 0, ub_violations = 0;
  for (const BoundsRow& row : rows) {
    if (row.tr_d > 2.0 * row.ub * (1.0 + kRel)) ++trd_violations;
    if (row.ub > row.tr_h * (1.0 + kRel)) ++ub_violations;
  }
  ojson summary;
  summary["rows"] = rows.size();
  summary["tr_d_above_2ub"] = trd_violations;
  summary["ub_above_tr_h"] = ub_violations;
  write_text(out / "bounds.json", dump(summary));

  if (cfg.bounds.svg) {
    std::vector<Panel> panels;
    for (SpectrumKind k : g.spectra) {
      for (Eigenbasis b : g.bases) {
        Panel p;
        p.title = std::string(spectrum_name(k)) + " / " + eigenbasis_name(b);
        p.x_label = "n";
        p.y_label = "mean over seeds";
        p.log_x = p.log_y = true;
        const char* names[] = {"tr(H)", "tr(D)", "UB", "inc (true Q)", "inc (recomputed Q)"};
        for (int c = 0; c < 5; ++c) p.series.push_back({names[c], {}, {}});
        for (std::size_t n : g.ns) {
          double acc[5] = {0, 0, 0, 0, 0};
          std::size_t count = 0;
          for (const BoundsRow& row : rows) {
            if (row.n != n || row.spectrum != k || row.basis != b) continue;
            acc[0] += row.tr_h;
            acc[1] += row.tr_d;
            acc[2] += row.ub;
            acc[3] += row.inc_bound_true_q;
            acc[4] += row.inc_bound_recomputed_q;
            ++count;
          }
          for (int c = 0; c < 5; ++c) {
            p.series[c].x.push_back(static_cast<double>(n));
            p.series[c].y.push_back(acc[c] / static_cast<double>(std::max<std::size_t>(count, 1)));
          }
        }
        panels.push_back(std::move(p));
      }
    }
    write_text(out / "bounds.svg", render_svg("Error bounds vs dimension", panels, g.bases.size()));
  }
  write_timing(out, "bounds", clock);
  log << "bounds: " << rows.size() << " rows, " << trd_violations + ub_violations
      << " ordering violations, " << clock.seconds() << " s\n";
}

void cmd_compare(const ExperimentConfig& cfg, const RunOptions& run, std::ostream& log) {
  const fs::path out = require_out(cfg);
  const auto& base = cfg.compare.baseline;
  const auto& cand = cfg.compare.candidate;
  if (base.empty() || base.size() != cand.size()) {
    throw InvalidArgument("compare needs equally long, nonempty baseline and candidate lists");
  }
  std::vector<std::pair<RunSummary, RunSummary>> pairs;
  for (std::size_t i = 0; i < base.size(); ++i) {
    RunSummary a = read_summary(base[i]);
    RunSummary b = read_summary(cand[i]);
    if (a.model_seed != b.model_seed) {
      throw InvalidArgument("pair " + std::to_string(i) + ": model seeds differ (" +
                            std::to_string(a.model_seed) + " vs " + std::to_string(b.model_seed) +
                            ")");
    }
    if (a.layers.size() != b.layers.size()) {
      throw InvalidArgument("pair " + std::to_string(i) + ": runs cover different layers");
    }
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
      if (a.layers[k].layer != b.layers[k].layer) {
        throw InvalidArgument("pair " + std::to_string(i) + ": runs cover different layers");
      }
    }
    pairs.emplace_back(std::move(a), std::move(b));
  }

  OutputLock lock(out);
  claim_artifacts(out, {"compare.json", "compare_layers.csv", "compare.svg"}, run.force);

  std::size_t wins = 0, losses = 0, ties = 0;
  ojson jpairs = ojson::array();
  std::ostringstream csv;
  csv << "pair,model_seed,layer,mu_w_baseline,mu_w_candidate,mu_w_delta,snr_db_baseline,"
         "snr_db_candidate,snr_db_delta,error_baseline,error_candidate,error_delta\n";
  auto snr_text = [](const LayerSummary& l) {
    return l.snr_exact ? std::string("exact") : format_double(l.snr_db);
  };
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [a, b] = pairs[i];
    const double d_kl = b.kl_proxy - a.kl_proxy;
    if (b.kl_proxy < a.kl_proxy) {
      ++wins;
    } else if (b.kl_proxy > a.kl_proxy) {
      ++losses;
    } else {
      ++ties;
    }
    ojson jp;
    jp["baseline"] = a.dir.string();
    jp["candidate"] = b.dir.string();
    jp["model_seed"] = a.model_seed;
    jp["baseline_rotation"] = a.rotation_method;
    jp["candidate_rotation"] = b.rotation_method;
    jp["kl_proxy_baseline"] = a.kl_proxy;
    jp["kl_proxy_candidate"] = b.kl_proxy;
    jp["kl_proxy_delta"] = d_kl;
    ojson jl = ojson::array();
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
      const LayerSummary& la = a.layers[k];
      const LayerSummary& lb = b.layers[k];
      double d_snr = std::numeric_limits<double>::quiet_NaN();
      if (la.snr_exact && lb.snr_exact) {
        d_snr = 0.0;
      } else if (!la.snr_exact && !lb.snr_exact) {
        d_snr = lb.snr_db - la.snr_db;
      }
      ojson row;
      row["layer"] = la.layer;
      row["mu_w_delta"] = lb.mu_w - la.mu_w;
      row["snr_db_delta"] = nullable(d_snr);
      row["error_delta"] = lb.actual_error - la.actual_error;
      jl.push_back(row);
      csv << i << ',' << a.model_seed << ',' << la.layer << ',' << format_double(la.mu_w) << ','
          << format_double(lb.mu_w) << ',' << format_double(lb.mu_w - la.mu_w) << ','
          << snr_text(la) << ',' << snr_text(lb) << ',' << format_double(d_snr) << ','
          << format_double(la.actual_error) << ',' << format_double(lb.actual_error) << ','
          << format_double(lb.actual_error - la.actual_error) << '\n';
    }
    jp["layers"] = jl;
    jpairs.push_back(jp);
  }
  ojson summary;
  summary["pairs"] = jpairs;
  summary["sign_test"] = {{"pairs", pairs.size()},
                          {"candidate_wins", wins},
                          {"baseline_wins", losses},
                          {"ties", ties},
                          {"p_value", sign_test_p_value(wins, wins + losses)}};
  write_text(out / "compare.json", dump(summary));
  write_text(out / "compare_layers.csv", csv.str());

  if (cfg.compare.svg) {
    // Layerwise panels averaged over pairs.
    const std::size_t n_layers = pairs.front().first.layers.size();
    Panel mu{"weight incoherence", "layer index", "mu_W", false, false, {}};
    Panel snr{"SNR", "layer index", "dB", false, false, {}};
    Series mu_a{"baseline", {}, {}}, mu_b{"candidate", {}, {}};
    Series snr_a{"baseline", {}, {}}, snr_b{"candidate", {}, {}};
    for (std::size_t k = 0; k < n_layers; ++k) {
      double ma = 0, mb = 0, sa = 0, sb = 0;
      std::size_t na = 0, nb = 0;
      for (const auto& [a, b] : pairs) {
        ma += a.layers[k].mu_w;
        mb += b.layers[k].mu_w;
        if (!a.layers[k].snr_exact) sa += a.layers[k].snr_db, ++na;
        if (!b.layers[k].snr_exact) sb += b.layers[k].snr_db, ++nb;
      }
      const double x = static_cast<double>(k);
      const double np = static_cast<double>(pairs.size());
      mu_a.x.push_back(x), mu_a.y.push_back(ma / np);
      mu_b.x.push_back(x), mu_b.y.push_back(mb / np);
      snr_a.x.push_back(x), snr_a.y.push_back(na ? sa / na : std::nan(""));
      snr_b.x.push_back(x), snr_b.y.push_back(nb ? sb / nb : std::nan(""));
    }
    mu.series = {mu_a, mu_b};
    snr.series = {snr_a, snr_b};
    write_text(out / "compare.svg", render_svg("Layerwise comparison", {mu, snr}, 2));
  }
  log << "compare: " << pairs.size() << " pairs, candidate wins " << wins << ", baseline wins "
      << losses << ", ties " << ties << "\n";
}

// ---- entry point ------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Toy-scale rotation learning and weight quantization experiments."};
  app.name(args.empty() ? "optrot" : fs::path(args.front()).filename().string());
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  bool force = false;
  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  auto* seed_opt = app.add_option("--seed", seed, "top-level seed (overrides the config)");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--force", force, "overwrite existing artifacts");
  app.require_subcommand(1, 1);

  using Command = void (*)(const ExperimentConfig&, const RunOptions&, std::ostream&);
  const std::vector<std::tuple<const char*, const char*, Command>> verbs = {
      {"generate", "build and save a toy model", cmd_generate},
      {"learn", "learn or construct rotations for a model", cmd_learn},
      {"quantize", "rotate and quantize a model, write per-layer reports", cmd_quantize},
      {"bounds", "error bounds on synthetic Hessian spectra", cmd_bounds},
      {"compare", "paired comparison of quantize runs", cmd_compare}};
  for (const auto& [name, help, fn] : verbs) app.add_subcommand(name, help)->fallthrough();

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << app.get_name() << ": " << e.what() << "\n";
    return kExitConfig;
  }

  const std::string verb = app.get_subcommands().front()->get_name();
  try {
    Overrides ov;
    if (seed_opt->count()) ov.seed = seed;
    if (threads_opt->count()) ov.threads = threads;
    if (!out_dir.empty()) ov.out = out_dir;
    const ExperimentConfig cfg =
        config_path.empty() ? parse_config("{}", ov) : load_config(config_path, ov);
    RunOptions run;
    run.force = force;
    for (const auto& [name, help, fn] : verbs) {
      if (verb == name) fn(cfg, run, out);
    }
    return kExitOk;
  } catch (const InvalidArgument& e) {
    err << verb << ": configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << verb << ": I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << verb << ": I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << verb << ": numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace optrot::cli
