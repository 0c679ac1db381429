#include "optrot/diag/diagnostics.hpp"
#include "optrot/error.hpp"
#include "optrot/model/pipeline.hpp"
#include "optrot/model/toy_model.hpp"
#include "optrot/rotation/objective.hpp"
#include "optrot/tensor/hadamard.hpp"
#include "optrot/tensor/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

namespace optrot {
namespace {

Matrix probe(std::size_t rows, std::size_t d, std::uint64_t seed) {
  Rng rng = make_rng(seed, 5);
  return gaussian_matrix(rows, d, rng);
}

ToyModelSpec small_spec(std::uint64_t seed = 0) {
  ToyModelSpec s;
  s.n_layers = 2;
  s.d_model = 16;
  s.d_head_block = 4;
  s.d_ff = 32;
  s.seed = seed;
  return s;
}

ToyModelSpec outlier_spec(std::uint64_t seed) {
  ToyModelSpec s;
  s.seed = seed;
  s.distribution = WeightDistribution::kPlantedOutliers;
  return s;
}

RotationSet random_set(const ToyModelSpec& s, std::uint64_t seed, bool random_r4) {
  RotationSet r;
  r.r1 = random_orthogonal(s.d_model, seed);
  for (std::size_t l = 0; l < s.n_layers; ++l) {
    r.r2.push_back(random_orthogonal(s.d_head_block, seed * 17 + l + 1));
  }
  r.r4 = random_r4 ? random_orthogonal(s.d_ff, seed + 999) : hadamard_orthonormal(s.d_ff);
  return r;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vector rms(const Vector& x) { return x / std::sqrt(x.squaredNorm() / x.size() + 1e-6); }

TEST(ToyModel, SpecValidation) {
  ToyModelSpec s;
  s.d_model = 48;
  EXPECT_THROW(build_toy_model(s), InvalidArgument);
  s = ToyModelSpec{};
  s.d_head_block = 24;
  EXPECT_THROW(build_toy_model(s), InvalidArgument);
  s = ToyModelSpec{};
  s.n_layers = 0;
  EXPECT_THROW(build_toy_model(s), InvalidArgument);
}

TEST(ToyModel, SpecJsonRoundTrip) {
  ToyModelSpec s = outlier_spec(42);
  s.outlier_fraction = 0.02;
  const ToyModelSpec back = ToyModelSpec::from_json(s.to_json());
  EXPECT_EQ(back.to_json(), s.to_json());
  EXPECT_THROW(ToyModelSpec::from_json("{\"distribution\": \"cauchy\"}"), InvalidArgument);
  EXPECT_THROW(ToyModelSpec::from_json("not json"), InvalidArgument);
}

TEST(ToyModel, ZeroWeightsLeaveOnlyTheNormalizedStream) {
  ToyModelSpec s = small_spec();
  s.weight_gain = 0.0;
  const ToyModel m = build_toy_model(s);
  const Matrix x = probe(5, 16, 1);
  const Matrix y = forward(m, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    EXPECT_LE((y.row(i).transpose() - rms(x.row(i).transpose())).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ(forward(m, Matrix::Zero(3, 16)), Matrix::Zero(3, 16));
}

TEST(ToyModel, DeterministicPerSeed) {
  const Matrix x = probe(4, 64, 2);
  EXPECT_EQ(forward(build_toy_model(ToyModelSpec{}), x), forward(build_toy_model(ToyModelSpec{}), x));
  ToyModelSpec other;
  other.seed = 1;
  EXPECT_NE(forward(build_toy_model(other), x), forward(build_toy_model(ToyModelSpec{}), x));
}

TEST(ToyModel, PlantedOutliersRaiseIncoherence) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    ToyModelSpec g;
    g.seed = seed;
    const ToyModel plain = build_toy_model(g);
    const ToyModel planted = build_toy_model(outlier_spec(seed));
    EXPECT_GT(weight_incoherence(planted.blocks[0].down), weight_incoherence(plain.blocks[0].down));
  }
}

TEST(ToyModel, RejectsWrongWidth) {
  EXPECT_THROW(forward(build_toy_model(small_spec()), Matrix::Zero(2, 8)), InvalidArgument);
}

TEST(Forward, CapturesMatchIndependentRecompute) {
  const ToyModel m = build_toy_model(small_spec(3));
  const Matrix x = probe(6, 16, 3);
  std::vector<BlockCapture> caps;
  const Matrix y = forward(m, x, &caps);
  ASSERT_EQ(caps.size(), 2u);
  for (Eigen::Index s = 0; s < x.rows(); ++s) {
    Vector r = m.embed * x.row(s).transpose();
    for (std::size_t l = 0; l < 2; ++l) {
      const Block& b = m.blocks[l];
      const Vector a = rms(r);
      const Vector q = b.q * a, k = b.k * a;
      Vector z = b.v * a;
      for (int h = 0; h < 4; ++h) {
        z.segment(4 * h, 4) *= sigmoid(q.segment(4 * h, 4).dot(k.segment(4 * h, 4)) / 2.0);
      }
      EXPECT_LE((caps[l].attn_in.row(s).transpose() - a).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((caps[l].o_in.row(s).transpose() - z).cwiseAbs().maxCoeff(), 1e-12);
      r += b.o * z;
      const Vector mm = rms(r);
      const Vector g = b.gate * mm, u = b.up * mm;
      Vector hidden(g.size());
      for (Eigen::Index i = 0; i < g.size(); ++i) hidden(i) = g(i) * sigmoid(g(i)) * u(i);
      EXPECT_LE((caps[l].mlp_in.row(s).transpose() - mm).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((caps[l].down_in.row(s).transpose() - hidden).cwiseAbs().maxCoeff(), 1e-12);
      r += b.down * hidden;
    }
    EXPECT_LE((y.row(s).transpose() - m.head * rms(r)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Forward, LinearMapsScaleWithInput) {
  const ToyModel m = build_toy_model(small_spec(4));
  std::vector<BlockCapture> caps;
  forward(m, probe(3, 16, 4), &caps);
  const Matrix a = caps[1].attn_in;
  EXPECT_LE(((2.0 * a) * m.blocks[1].q.transpose() - 2.0 * (a * m.blocks[1].q.transpose()))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(FusedRotations, IdentityKeepsWeightsBitIdentical) {
  const ToyModel m = build_toy_model(ToyModelSpec{});
  const ToyModel r = apply_fused_rotations(m, RotationSet::identity(4, 64, 16, 128));
  for (std::size_t l = 0; l < 4; ++l) {
    for (Role role : kAllRoles) EXPECT_EQ(r.blocks[l].weight(role), m.blocks[l].weight(role));
  }
}

TEST(FusedRotations, RandomR1AloneIsFunctionPreserving) {
  const ToyModel m = build_toy_model(ToyModelSpec{});
  RotationSet r = RotationSet::identity(4, 64, 16, 128);
  r.r1 = random_orthogonal(64, 8);
  const Matrix x = probe(32, 64, 8);
  EXPECT_LE(max_relative_deviation(forward(apply_fused_rotations(m, r), x), forward(m, x)), 1e-6);
}

TEST(FusedRotations, TwentyRandomSetsArePreserving) {
  const ToyModel m = build_toy_model(outlier_spec(2));
  const Matrix x = probe(32, 64, 9);
  const Matrix y = forward(m, x);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RotationSet r = random_set(m.spec, 50 + seed, seed % 2 == 1);
    const double dev = max_relative_deviation(forward(apply_fused_rotations(m, r), x), y);
    EXPECT_LE(dev, 1e-6) << seed;
  }
}

TEST(FusedRotations, HadamardSpreadsPlantedOutliers) {
  const ToyModel m = build_toy_model(outlier_spec(5));
  const ToyModel r = apply_fused_rotations(m, RotationSet::hadamard_init(4, 64, 16, 128, 5));
  for (std::size_t l = 0; l < 4; ++l) {
    EXPECT_LT(weight_incoherence(r.blocks[l].down), weight_incoherence(m.blocks[l].down));
  }
}

TEST(FusedRotations, PreserveNormsAndTracesButNotMaxima) {
  const ToyModel m = build_toy_model(outlier_spec(6));
  const CalibrationSet calib = synthetic_calibration(64, 256, 3, 8.0, 6);
  const RotationSet r = random_set(m.spec, 7, false);
  const ToyModel rotated = apply_fused_rotations(m, r);
  const auto h0 = layer_hessians(m, calib);
  const auto h1 = layer_hessians(rotated, calib);
  const auto l0 = m.layers();
  const auto l1 = rotated.layers();
  for (std::size_t i = 0; i < l0.size(); ++i) {
    EXPECT_NEAR(l1[i].weight.norm(), l0[i].weight.norm(), 1e-9 * l0[i].weight.norm());
    EXPECT_NEAR(h1[i].trace(), h0[i].trace(), 1e-9 * h0[i].trace());
    EXPECT_NE(max_abs(l1[i].weight), max_abs(l0[i].weight));
    EXPECT_GT(std::abs(off_diagonal_sq(h1[i].matrix()) - off_diagonal_sq(h0[i].matrix())),
              1e-9 * h0[i].trace() * h0[i].trace());
  }
}

TEST(FusedRotations, RejectsMismatchedSet) {
  const ToyModel m = build_toy_model(small_spec());
  EXPECT_THROW(apply_fused_rotations(m, RotationSet::identity(2, 32, 4, 32)), InvalidArgument);
}

TEST(ModelArchive, RoundTrip) {
  const ToyModel m = apply_fused_rotations(build_toy_model(small_spec(7)),
                                           random_set(small_spec(7), 3, false));
  const auto dir = std::filesystem::temp_directory_path() / "optrot_model_archive";
  std::filesystem::remove_all(dir);
  save_model(m, dir);
  const ToyModel back = load_model(dir);
  const Matrix x = probe(4, 16, 1);
  EXPECT_EQ(forward(back, x), forward(m, x));
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_model(dir), IoError);
}

struct PipelineFixture {
  ToyModel model;
  CalibrationSet calib, heldout;
  explicit PipelineFixture(std::uint64_t seed)
      : model(build_toy_model(outlier_spec(seed))),
        calib(synthetic_calibration(64, 512, 4, 10.0, 1000 + seed)),
        heldout(synthetic_calibration(64, 512, 4, 10.0, 2000 + seed)) {}
};

QuantConfig bits(int b) {
  QuantConfig q;
  q.bits = b;
  return q;
}

TEST(Pipeline, GridRefinementAndDeterminism) {
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    PipelineFixture f(seed);
    const RotationSet had = RotationSet::hadamard_init(4, 64, 16, 128, seed);
    const double k3 = quantize_model(f.model, had, f.calib, f.heldout, bits(3)).kl_proxy;
    const double k4 = quantize_model(f.model, had, f.calib, f.heldout, bits(4)).kl_proxy;
    const QuantizeResult r8 = quantize_model(f.model, had, f.calib, f.heldout, bits(8));
    EXPECT_LE(r8.kl_proxy, k4);
    EXPECT_LE(k4, k3);
    EXPECT_LE(r8.kl_proxy, 1e-3 * k3);
    EXPECT_EQ(quantize_model(f.model, had, f.calib, f.heldout, bits(3)).kl_proxy, k3);
    ASSERT_EQ(r8.reports.size(), 28u);
    double total = 0.0;
    for (const BoundReport& rep : r8.reports) total += rep.actual_error;
    EXPECT_NEAR(total, r8.kl_proxy, 1e-12 * r8.kl_proxy);
  }
}

TEST(Pipeline, HadamardBeatsNoRotationOnPlantedOutliers) {
  PipelineFixture f(3);
  const double none =
      quantize_model(f.model, RotationSet::identity(4, 64, 16, 128), f.calib, f.heldout, bits(4))
          .kl_proxy;
  const double had = quantize_model(f.model, RotationSet::hadamard_init(4, 64, 16, 128, 3),
                                    f.calib, f.heldout, bits(4))
                         .kl_proxy;
  EXPECT_LT(had, none);
}

TEST(Pipeline, MethodsAndCleanActivations) {
  PipelineFixture f(4);
  const RotationSet had = RotationSet::hadamard_init(4, 64, 16, 128, 4);
  PipelineOptions opts;
  const QuantizeResult gptq = quantize_model(f.model, had, f.calib, f.heldout, bits(4), opts);
  opts.clean_activations = true;
  const QuantizeResult clean = quantize_model(f.model, had, f.calib, f.heldout, bits(4), opts);
  EXPECT_NE(clean.kl_proxy, gptq.kl_proxy);
  // The first block sees identical inputs either way.
  EXPECT_EQ(clean.layers[0].quantized->codes, gptq.layers[0].quantized->codes);
  opts.clean_activations = false;
  opts.method = QuantMethod::kRtn;
  const QuantizeResult rtn = quantize_model(f.model, had, f.calib, f.heldout, bits(4), opts);
  EXPECT_GT(rtn.kl_proxy, gptq.kl_proxy);
  opts.method = QuantMethod::kGptqs;
  const QuantizeResult gptqs = quantize_model(f.model, had, f.calib, f.heldout, bits(4), opts);
  EXPECT_TRUE(std::isfinite(gptqs.kl_proxy));
  EXPECT_EQ(gptqs.layers[0].quantized->config.grid, Grid::kShrunk);
  // Quantized model weights are the dequantized codes.
  EXPECT_EQ(gptq.model.blocks[2].up, gptq.layers[2 * 7 + 5].quantized->dequantized);
  EXPECT_EQ(parse_quant_method("gptqs"), QuantMethod::kGptqs);
  EXPECT_THROW(parse_quant_method("awq"), InvalidArgument);
}

}  // namespace
}  // namespace optrot
