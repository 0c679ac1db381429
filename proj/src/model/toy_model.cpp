#include "optrot/model/toy_model.hpp"

#include "optrot/error.hpp"
#include "optrot/rotation/objective.hpp"
#include "optrot/tensor/hadamard.hpp"
#include "optrot/tensor/random.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace optrot {

namespace {

constexpr double kRmsEps = 1e-6;

const char* distribution_name(WeightDistribution d) {
  return d == WeightDistribution::kGaussian ? "gaussian" : "planted-outliers";
}

WeightDistribution parse_distribution(const std::string& name) {
  if (name == "gaussian") return WeightDistribution::kGaussian;
  if (name == "planted-outliers") return WeightDistribution::kPlantedOutliers;
  throw InvalidArgument("unknown weight distribution '" + name + "'");
}

std::pair<std::size_t, std::size_t> role_shape(const ToyModelSpec& s, Role role) {
  switch (role) {
    case Role::kGate:
    case Role::kUp: return {s.d_ff, s.d_model};
    case Role::kDown: return {s.d_model, s.d_ff};
    default: return {s.d_model, s.d_model};
  }
}

Matrix rms_rows(const Matrix& x) {
  Matrix out = x;
  const double d = static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double scale = 1.0 / std::sqrt(x.row(i).squaredNorm() / d + kRmsEps);
    out.row(i) *= scale;
  }
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void ToyModelSpec::validate() const {
  if (n_layers == 0) throw InvalidArgument("toy model needs at least one block");
  if (d_model < 2 || d_ff < 2 || !is_power_of_two(d_model) || !is_power_of_two(d_ff)) {
    throw InvalidArgument("d_model and d_ff must be powers of two >= 2");
  }
  if (d_head_block < 1 || d_model % d_head_block != 0) {
    throw InvalidArgument("d_head_block must divide d_model");
  }
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
    throw InvalidArgument("outlier fraction must lie in [0, 1]");
  }
  if (!std::isfinite(outlier_magnitude) || !std::isfinite(weight_gain) || weight_gain < 0.0) {
    throw InvalidArgument("outlier magnitude and weight gain must be finite, gain >= 0");
  }
}

std::string ToyModelSpec::to_json() const {
  nlohmann::ordered_json j;
  j["n_layers"] = n_layers;
  j["d_model"] = d_model;
  j["d_head_block"] = d_head_block;
  j["d_ff"] = d_ff;
  j["seed"] = seed;
  j["distribution"] = distribution_name(distribution);
  j["outlier_fraction"] = outlier_fraction;
  j["outlier_magnitude"] = outlier_magnitude;
  j["weight_gain"] = weight_gain;
  return j.dump(2) + "\n";
}

ToyModelSpec ToyModelSpec::from_json(const std::string& text) {
  ToyModelSpec s;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    s.n_layers = j.value("n_layers", s.n_layers);
    s.d_model = j.value("d_model", s.d_model);
    s.d_head_block = j.value("d_head_block", s.d_head_block);
    s.d_ff = j.value("d_ff", s.d_ff);
    s.seed = j.value("seed", s.seed);
    s.distribution = parse_distribution(j.value("distribution", std::string("gaussian")));
    s.outlier_fraction = j.value("outlier_fraction", s.outlier_fraction);
    s.outlier_magnitude = j.value("outlier_magnitude", s.outlier_magnitude);
    s.weight_gain = j.value("weight_gain", s.weight_gain);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("invalid model spec: ") + e.what());
  }
  s.validate();
  return s;
}

Matrix& Block::weight(Role role) {
  switch (role) {
    case Role::kQ: return q;
    case Role::kK: return k;
    case Role::kV: return v;
    case Role::kO: return o;
    case Role::kGate: return gate;
    case Role::kUp: return up;
    case Role::kDown: return down;
  }
  return q;
}

const Matrix& Block::weight(Role role) const { return const_cast<Block*>(this)->weight(role); }

std::vector<LayerRecord> ToyModel::layers() const {
  std::vector<LayerRecord> out;
  out.reserve(blocks.size() * kAllRoles.size());
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    for (Role role : kAllRoles) {
      LayerRecord rec;
      rec.layer = l;
      rec.role = role;
      rec.weight = blocks[l].weight(role);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

void ToyModel::set_weight(std::size_t layer, Role role, Matrix w) {
  Matrix& target = blocks.at(layer).weight(role);
  if (w.rows() != target.rows() || w.cols() != target.cols()) {
    throw InvalidArgument("replacement weight has the wrong shape");
  }
  target = std::move(w);
}

ToyModel build_toy_model(const ToyModelSpec& spec) {
  spec.validate();
  ToyModel m;
  m.spec = spec;
  m.embed = Matrix::Identity(spec.d_model, spec.d_model);
  m.head = Matrix::Identity(spec.d_model, spec.d_model);
  m.down_online = Matrix::Identity(spec.d_ff, spec.d_ff);
  Rng rng = make_rng(spec.seed, 0x70E);
  Rng outliers = make_rng(spec.seed, 0x0D1);
  std::bernoulli_distribution plant(spec.outlier_fraction);
  m.blocks.resize(spec.n_layers);
  for (Block& b : m.blocks) {
    for (Role role : kAllRoles) {
      const auto [rows, cols] = role_shape(spec, role);
      Matrix w = gaussian_matrix(rows, cols, rng,
                                 spec.weight_gain / std::sqrt(static_cast<double>(cols)));
      if (spec.distribution == WeightDistribution::kPlantedOutliers) {
        for (Eigen::Index i = 0; i < w.size(); ++i) {
          if (plant(outliers)) w.data()[i] *= spec.outlier_magnitude;
        }
      }
      b.weight(role) = std::move(w);
    }
  }
  return m;
}

const Matrix& BlockCapture::input_of(Role role) const {
  switch (role) {
    case Role::kQ:
    case Role::kK:
    case Role::kV: return attn_in;
    case Role::kO: return o_in;
    case Role::kGate:
    case Role::kUp: return mlp_in;
    case Role::kDown: return down_in;
  }
  return attn_in;
}

Matrix rms_normalize(const Matrix& x) { return rms_rows(x); }

Matrix attention_mix(const ToyModel& model, const Block& block, const Matrix& a) {
  const Eigen::Index d = static_cast<Eigen::Index>(model.spec.d_model);
  const Eigen::Index dh = static_cast<Eigen::Index>(model.spec.d_head_block);
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix q = a * block.q.transpose();
  const Matrix k = a * block.k.transpose();
  Matrix z = a * block.v.transpose();
  for (Eigen::Index h = 0; h < d / dh; ++h) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double score = q.row(i).segment(h * dh, dh).dot(k.row(i).segment(h * dh, dh));
      z.row(i).segment(h * dh, dh) *= sigmoid(score * inv_sqrt_dh);
    }
  }
  return z;
}

Matrix mlp_hidden(const ToyModel& model, const Block& block, const Matrix& m) {
  const Matrix g = m * block.gate.transpose();
  const Matrix u = m * block.up.transpose();
  Matrix act(g.rows(), g.cols());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double x = g.data()[i];
    act.data()[i] = x * sigmoid(x) * u.data()[i];
  }
  return act * model.down_online;
}

Matrix forward(const ToyModel& model, const Matrix& batch, std::vector<BlockCapture>* captures) {
  const Eigen::Index d = static_cast<Eigen::Index>(model.spec.d_model);
  if (batch.cols() != d) {
    throw InvalidArgument("batch width " + std::to_string(batch.cols()) +
                          " does not match d_model " + std::to_string(d));
  }
  if (captures) captures->assign(model.blocks.size(), BlockCapture{});

  Matrix r = batch * model.embed.transpose();
  for (std::size_t l = 0; l < model.blocks.size(); ++l) {
    const Block& b = model.blocks[l];
    Matrix a = rms_rows(r);
    Matrix z = attention_mix(model, b, a);
    r += z * b.o.transpose();
    Matrix m = rms_rows(r);
    Matrix down_in = mlp_hidden(model, b, m);
    r += down_in * b.down.transpose();
    if (captures) {
      BlockCapture& c = (*captures)[l];
      c.attn_in = std::move(a);
      c.o_in = std::move(z);
      c.mlp_in = std::move(m);
      c.down_in = std::move(down_in);
    }
  }
  return rms_rows(r) * model.head.transpose();
}

ToyModel apply_fused_rotations(const ToyModel& model, const RotationSet& r) {
  r.validate();
  if (r.d_model() != model.spec.d_model || r.d_ff() != model.spec.d_ff ||
      r.n_layers() != model.spec.n_layers || r.d_head_block() != model.spec.d_head_block) {
    throw InvalidArgument("rotation set dimensions do not match the model");
  }
  ToyModel out = model;
  out.embed = r.r1.transpose() * model.embed;
  out.head = model.head * r.r1;
  out.down_online = model.down_online * r.r4;
  for (const LayerRecord& rec : model.layers()) {
    out.blocks[rec.layer].weight(rec.role) = rotated_weight(rec, r);
  }
  return out;
}

double max_relative_deviation(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("output shapes differ");
  }
  const double scale = std::max(max_abs(b), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

void save_model(const ToyModel& model, const std::filesystem::path& dir) {
  TensorArchive archive;
  archive.add("embed", model.embed);
  archive.add("head", model.head);
  archive.add("down_online", model.down_online);
  for (const LayerRecord& rec : model.layers()) archive.add(rec.id(), rec.weight);
  archive.write(dir);
  std::ofstream f(dir / "model.json", std::ios::binary | std::ios::trunc);
  f << model.spec.to_json();
  if (!f) throw IoError("cannot write " + (dir / "model.json").string());
}

ToyModel load_model(const std::filesystem::path& dir) {
  std::ifstream f(dir / "model.json", std::ios::binary);
  if (!f) throw IoError("cannot read " + (dir / "model.json").string());
  std::stringstream text;
  text << f.rdbuf();
  ToyModel m;
  m.spec = ToyModelSpec::from_json(text.str());
  const TensorArchive archive = TensorArchive::read(dir);
  m.embed = archive.get("embed");
  m.head = archive.get("head");
  m.down_online = archive.get("down_online");
  m.blocks.resize(m.spec.n_layers);
  for (std::size_t l = 0; l < m.spec.n_layers; ++l) {
    for (Role role : kAllRoles) {
      LayerRecord rec;
      rec.layer = l;
      rec.role = role;
      m.blocks[l].weight(role) = archive.get(rec.id());
      const auto [rows, cols] = role_shape(m.spec, role);
      if (m.blocks[l].weight(role).rows() != static_cast<Eigen::Index>(rows) ||
          m.blocks[l].weight(role).cols() != static_cast<Eigen::Index>(cols)) {
        throw IoError("tensor " + rec.id() + " has the wrong shape for the model spec");
      }
    }
  }
  return m;
}

}  // namespace optrot
