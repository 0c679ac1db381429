#pragma once

#include "optrot/model/layer.hpp"
#include "optrot/rotation/rotation_set.hpp"
#include "optrot/tensor/archive.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace optrot {

enum class WeightDistribution { kGaussian, kPlantedOutliers };

struct ToyModelSpec {
  std::size_t n_layers = 4;
  std::size_t d_model = 64;
  std::size_t d_head_block = 16;
  std::size_t d_ff = 128;
  std::uint64_t seed = 0;
  WeightDistribution distribution = WeightDistribution::kGaussian;
  // Planted outliers: each weight independently, with this probability, is
  // multiplied by outlier_magnitude.
  double outlier_fraction = 0.01;
  double outlier_magnitude = 10.0;
  // Weights are N(0, (weight_gain / sqrt(d_in))^2).
  double weight_gain = 1.0;

  void validate() const;
  std::string to_json() const;
  static ToyModelSpec from_json(const std::string& text);
};

struct Block {
  Matrix q, k, v, o, gate, up, down;

  Matrix& weight(Role role);
  const Matrix& weight(Role role) const;
};

// Pre-norm residual stack over row-major batches (samples x d_model):
//   r = x E^T
//   per block:
//     a = rms(r); q, k, v = a W^T
//     per head h: z_h = sigmoid(<q_h, k_h> / sqrt(d_head)) v_h
//     r += z W_o^T
//     b = rms(r); u = (silu(b W_gate^T) * b W_up^T) R_online
//     r += u W_down^T
//   y = rms(r) P^T
// rms() has unit scale. The head gate is a scalar per head, so it commutes
// with any rotation inside a head block. R_online is the (folded) online
// rotation of the down-projection input.
struct ToyModel {
  ToyModelSpec spec;
  Matrix embed;      // E, d_model x d_model
  Matrix head;       // P, d_model x d_model
  Matrix down_online;  // R_online, d_ff x d_ff
  std::vector<Block> blocks;

  std::vector<LayerRecord> layers() const;
  void set_weight(std::size_t layer, Role role, Matrix w);
};

ToyModel build_toy_model(const ToyModelSpec& spec);

// Inputs of each linear map of one block, one row per sample.
struct BlockCapture {
  Matrix attn_in;  // q, k, v
  Matrix o_in;
  Matrix mlp_in;   // gate, up
  Matrix down_in;

  const Matrix& input_of(Role role) const;
};

// Building blocks of forward(), exposed for pipelines that replace weights
// block by block.
Matrix rms_normalize(const Matrix& x);
// z from the normalized stream a (gated v, one scalar gate per head).
Matrix attention_mix(const ToyModel& model, const Block& block, const Matrix& a);
// Down-projection input from the normalized stream m, after R_online.
Matrix mlp_hidden(const ToyModel& model, const Block& block, const Matrix& m);

// Throws InvalidArgument on a width mismatch. Captures are filled when a
// vector is passed.
Matrix forward(const ToyModel& model, const Matrix& batch,
               std::vector<BlockCapture>* captures = nullptr);

// Rewrites every weight with rotated_weight(), embed <- R1^T E,
// head <- P R1 and R_online <- R_online R4. The result computes the same
// function up to rounding.
ToyModel apply_fused_rotations(const ToyModel& model, const RotationSet& r);

// Max over outputs of |y' - y| / max(max|y|, tiny), over a probe batch.
double max_relative_deviation(const Matrix& a, const Matrix& b);

// Model archive: <dir>/model.json plus a tensor archive with entries embed,
// head, down_online and blocks.<l>.<role>.
void save_model(const ToyModel& model, const std::filesystem::path& dir);
ToyModel load_model(const std::filesystem::path& dir);

}  // namespace optrot
