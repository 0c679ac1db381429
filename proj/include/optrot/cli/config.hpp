#pragma once

#include "optrot/hessian/spectrum.hpp"
#include "optrot/model/pipeline.hpp"
#include "optrot/model/toy_model.hpp"
#include "optrot/quant/quant_config.hpp"
#include "optrot/rotation/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace optrot::cli {

enum class RotationMethod { kNone, kHadamard, kOptRot, kOptRotV2, kOptRotPlus, kOptRotPlusV2 };

const char* rotation_method_name(RotationMethod m);
RotationMethod parse_rotation_method(const std::string& name);
bool is_learned(RotationMethod m);
bool needs_calibration(RotationMethod m);
ObjectiveKind objective_for(RotationMethod m);

struct ModelSection {
  std::optional<std::filesystem::path> path;  // saved model directory
  ToyModelSpec spec;                          // used when path is unset
};

struct RotationSection {
  RotationMethod method = RotationMethod::kNone;
  std::optional<std::filesystem::path> path;  // rotation archive, for quantize
  int p = 4;
  TrainConfig train;
};

struct CalibrationSection {
  std::size_t samples = 512;
  std::size_t heldout_samples = 512;
  std::size_t outlier_channels = 4;
  double outlier_scale = 10.0;
  std::uint64_t seed = 0;
  std::uint64_t heldout_seed = 0;
};

struct QuantSection {
  QuantConfig config;
  PipelineOptions options;
};

struct BoundsSection {
  BoundsGrid grid;
  bool svg = false;
};

struct CompareSection {
  std::vector<std::filesystem::path> baseline;
  std::vector<std::filesystem::path> candidate;
  bool svg = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  std::optional<std::filesystem::path> out;
  ModelSection model;
  RotationSection rotation;
  std::optional<CalibrationSection> calibration;
  QuantSection quant;
  BoundsSection bounds;
  CompareSection compare;
};

// Parses the JSON config. Seeds that are not given explicitly derive from
// the top-level seed, so `overrides` must be applied through this call.
// Unknown keys and type mismatches throw InvalidArgument.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::filesystem::path> out;
};

ExperimentConfig parse_config(const std::string& text, const Overrides& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& file, const Overrides& overrides = {});

// The default calibration section for a given top-level seed.
CalibrationSection default_calibration(std::uint64_t seed);

}  // namespace optrot::cli
