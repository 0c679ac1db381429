#include "optrot/cli/commands.hpp"
#include "optrot/cli/config.hpp"
#include "optrot/error.hpp"
#include "optrot/rotation/rotation_set.hpp"

#include "json.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using optrot::cli::run_cli;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() /
            ("optrot_cli_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path p(const std::string& name) const { return root_ / name; }

  fs::path config(const std::string& name, const std::string& text) const {
    const fs::path f = p(name);
    std::ofstream(f) << text;
    return f;
  }

  Outcome run(std::vector<std::string> args) const {
    args.insert(args.begin(), "optrot");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
  }

  fs::path root_;
};

std::string slurp(const fs::path& f) {
  std::ifstream in(f, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

nlohmann::json read_json(const fs::path& f) { return nlohmann::json::parse(slurp(f)); }

}  // namespace

TEST(CliConfig, DerivedSeedsFollowTopLevelSeed) {
  const auto cfg = optrot::cli::parse_config(R"({"seed": 7, "calibration": {}})");
  EXPECT_EQ(cfg.model.spec.seed, 7u);
  EXPECT_EQ(cfg.quant.config.seed, 7u);
  ASSERT_TRUE(cfg.calibration);
  EXPECT_EQ(cfg.calibration->seed, 1007u);
  EXPECT_EQ(cfg.calibration->heldout_seed, 2007u);

  optrot::cli::Overrides ov;
  ov.seed = 9;
  ov.threads = 3;
  const auto over = optrot::cli::parse_config(R"({"seed": 7, "model": {"spec": {"seed": 1}}})", ov);
  EXPECT_EQ(over.model.spec.seed, 1u);  // explicit sub-seeds win
  EXPECT_EQ(over.quant.config.seed, 9u);
  EXPECT_EQ(over.rotation.train.threads, 3);
  EXPECT_EQ(over.quant.options.threads, 3);
}

TEST(CliConfig, RejectsUnknownKeysAndBadTypes) {
  using optrot::InvalidArgument;
  using optrot::cli::parse_config;
  EXPECT_THROW(parse_config(R"({"sede": 1})"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"quant": {"bitz": 4}})"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"model": {"spec": {"layers": 2}}})"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"seed": -1})"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"quant": {"bits": "4"}})"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"rotation": {"method": "spin"}})"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"model": {"path": "x", "spec": {}}})"), InvalidArgument);
  EXPECT_THROW(parse_config("{not json"), InvalidArgument);
}

TEST(CliSignTest, ExactBinomialValues) {
  EXPECT_DOUBLE_EQ(optrot::cli::sign_test_p_value(9, 10), 2.0 * 11.0 / 1024.0);
  EXPECT_DOUBLE_EQ(optrot::cli::sign_test_p_value(10, 10), 2.0 / 1024.0);
  EXPECT_DOUBLE_EQ(optrot::cli::sign_test_p_value(5, 10), 1.0);
  EXPECT_DOUBLE_EQ(optrot::cli::sign_test_p_value(0, 0), 1.0);
}

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"explode"}).code, 2);
  EXPECT_EQ(run({"generate", "--threads", "0"}).code, 2);
  EXPECT_EQ(run({"generate", "--config", p("missing.json").string(), "--out", p("m")}).code, 2);
  EXPECT_EQ(run({"generate"}).code, 2);  // no output directory
}

TEST_F(CliTest, GenerateIsByteIdenticalAndCreatesDirectories) {
  ASSERT_EQ(run({"generate", "--seed", "5", "--out", p("a/b/c").string()}).code, 0);
  ASSERT_EQ(run({"generate", "--seed", "5", "--out", p("d").string()}).code, 0);
  for (const char* f : {"model.json", "manifest.json", "tensors.bin"}) {
    EXPECT_EQ(slurp(p("a/b/c") / f), slurp(p("d") / f)) << f;
  }
  EXPECT_FALSE(fs::exists(p("d/.optrot.lock")));
}

TEST_F(CliTest, GenerateRefusesOverwriteWithoutForce) {
  ASSERT_EQ(run({"generate", "--out", p("m").string()}).code, 0);
  const Outcome again = run({"generate", "--out", p("m").string()});
  EXPECT_EQ(again.code, 4);
  EXPECT_NE(again.err.find("--force"), std::string::npos);
  EXPECT_EQ(run({"generate", "--out", p("m").string(), "--force"}).code, 0);
}

TEST_F(CliTest, GenerateRejectsInvalidDimensions) {
  const auto cfg = config("c.json", R"({"model": {"spec": {"d_model": 48}}})");
  const Outcome o = run({"generate", "--config", cfg.string(), "--out", p("m").string()});
  EXPECT_EQ(o.code, 2);
  EXPECT_FALSE(o.err.empty());
  EXPECT_FALSE(fs::exists(p("m/model.json")));
}

TEST_F(CliTest, LockedOutputDirectoryIsAnIoError) {
  fs::create_directories(p("m"));
  std::ofstream(p("m/.optrot.lock")) << "1\n";
  EXPECT_EQ(run({"generate", "--out", p("m").string()}).code, 4);
  EXPECT_FALSE(fs::exists(p("m/model.json")));
}

TEST_F(CliTest, LearnHadamardWritesOneLossRow) {
  ASSERT_EQ(run({"generate", "--out", p("m").string()}).code, 0);
  const auto cfg = config("c.json", R"({"rotation": {"method": "hadamard"}, "model": {"path": ")" +
                                        p("m").string() + "\"}}");
  ASSERT_EQ(run({"learn", "--config", cfg.string(), "--out", p("l").string()}).code, 0);
  EXPECT_EQ(line_count(slurp(p("l/loss.csv"))), 2u);  // header and one row
  EXPECT_TRUE(fs::exists(p("l/rotations/manifest.json")));
  EXPECT_TRUE(fs::exists(p("l/timing.json")));
}

TEST_F(CliTest, LearnOptRotIsBitReproducible) {
  const auto cfg = config("c.json", R"({"seed": 2, "rotation": {"method": "optrot", "steps": 20}})");
  ASSERT_EQ(run({"learn", "--config", cfg.string(), "--out", p("a").string()}).code, 0);
  ASSERT_EQ(run({"learn", "--config", cfg.string(), "--out", p("b").string(), "--threads", "3"})
                .code,
            0);
  EXPECT_EQ(slurp(p("a/loss.csv")), slurp(p("b/loss.csv")));
  EXPECT_EQ(slurp(p("a/learn.json")), slurp(p("b/learn.json")));
  EXPECT_EQ(slurp(p("a/rotations/tensors.bin")), slurp(p("b/rotations/tensors.bin")));
  const auto j = read_json(p("a/learn.json"));
  EXPECT_LT(j["final_loss"].get<double>(), j["initial_loss"].get<double>());
  EXPECT_EQ(line_count(slurp(p("a/loss.csv"))), 22u);
}

TEST_F(CliTest, LearnDataDependentWithoutCalibrationFailsBeforeCompute) {
  for (const char* method : {"optrot+", "optrot+-v2"}) {
    const auto cfg = config("c.json", std::string(R"({"rotation": {"method": ")") + method + "\"}}");
    const Outcome o = run({"learn", "--config", cfg.string(), "--out", p("l").string()});
    EXPECT_EQ(o.code, 2) << method;
    EXPECT_NE(o.err.find("calibration"), std::string::npos);
    EXPECT_FALSE(fs::exists(p("l")));  // nothing touched, not even the directory
  }
}

TEST_F(CliTest, LearnDataDependentWithCalibration) {
  const auto cfg = config("c.json", R"({"rotation": {"method": "optrot+", "steps": 5},
                                        "calibration": {"samples": 256}})");
  ASSERT_EQ(run({"learn", "--config", cfg.string(), "--out", p("l").string()}).code, 0);
  const auto j = read_json(p("l/learn.json"));
  EXPECT_EQ(j["objective"], "optrot+");
  EXPECT_GT(j["loss_scale"].get<double>(), 0.0);
}

TEST_F(CliTest, LearnMissingModelPathIsConfigError) {
  const auto cfg = config("c.json", R"({"model": {"path": "/nonexistent/model"}})");
  EXPECT_EQ(run({"learn", "--config", cfg.string(), "--out", p("l").string()}).code, 2);
}

TEST_F(CliTest, QuantizeMissingRotationArchiveIsExplicitError) {
  const auto cfg = config("c.json", R"({"rotation": {"method": "optrot", "path": ")" +
                                        p("nowhere").string() + "\"}}");
  const Outcome o = run({"quantize", "--config", cfg.string(), "--out", p("q").string()});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("rotation archive"), std::string::npos);

  const auto cfg2 = config("c2.json", R"({"rotation": {"method": "optrot"}})");
  const Outcome o2 = run({"quantize", "--config", cfg2.string(), "--out", p("q").string()});
  EXPECT_EQ(o2.code, 2);
  EXPECT_NE(o2.err.find("rotation.path"), std::string::npos);
}

TEST_F(CliTest, QuantizeRejectsRotationsOfAnotherShape) {
  const auto small = config("s.json", R"({"model": {"spec": {"n_layers": 2}},
                                          "rotation": {"method": "hadamard"}})");
  ASSERT_EQ(run({"learn", "--config", small.string(), "--out", p("l").string()}).code, 0);
  const auto cfg = config("c.json", R"({"rotation": {"method": "optrot", "path": ")" +
                                        p("l").string() + "\"}}");
  EXPECT_EQ(run({"quantize", "--config", cfg.string(), "--out", p("q").string()}).code, 2);
}

TEST_F(CliTest, QuantizeValidatesQuantSection) {
  for (const char* q : {R"({"bits": 9})", R"({"group_size": 5})", R"({"rounding": "stochastic"})",
                        R"({"method": "gptqs", "bits": 2})", R"({"delta": 1.5})"}) {
    const auto cfg = config("c.json", std::string(R"({"quant": )") + q + "}");
    EXPECT_EQ(run({"quantize", "--config", cfg.string(), "--out", p("q").string()}).code, 2) << q;
  }
}

TEST_F(CliTest, QuantizeRerunIsByteIdenticalAndThreadInvariant) {
  const auto cfg = config("c.json", R"({"seed": 1, "rotation": {"method": "hadamard"}})");
  ASSERT_EQ(run({"quantize", "--config", cfg.string(), "--out", p("a").string()}).code, 0);
  ASSERT_EQ(run({"quantize", "--config", cfg.string(), "--out", p("a").string()}).code, 4);
  ASSERT_EQ(run({"quantize", "--config", cfg.string(), "--out", p("b").string(), "--threads", "4"})
                .code,
            0);
  for (const char* f : {"reports.csv", "reports.json", "summary.json", "quantized/tensors.bin",
                        "quantized/manifest.json", "model/tensors.bin", "model/model.json"}) {
    EXPECT_EQ(slurp(p("a") / f), slurp(p("b") / f)) << f;
  }
  const auto s = read_json(p("a/summary.json"));
  EXPECT_EQ(s["layers"].size(), 28u);
  EXPECT_EQ(s["mu_w_by_role"].size(), 7u);
  EXPECT_TRUE(s["mean_snr_db"].is_number());
}

// Golden value: recorded once, frozen in tests/golden.
TEST_F(CliTest, QuantizeIdentityEightBitBelowGoldenThreshold) {
  const auto golden = read_json(fs::path(OPTROT_TEST_DATA_DIR) / "golden/quantize_b8_identity.json");
  const auto cfg = config("c.json", R"({"quant": {"bits": 8}})");
  ASSERT_EQ(run({"quantize", "--config", cfg.string(), "--out", p("q").string()}).code, 0);
  const double kl = read_json(p("q/summary.json"))["kl_proxy"].get<double>();
  EXPECT_LT(kl, golden["threshold"].get<double>());
  EXPECT_GT(kl, 0.0);
}

TEST_F(CliTest, BoundsRowCountAndOrdering) {
  const auto cfg = config("c.json", R"({"bounds": {"ns": [8, 32], "seeds": 3, "svg": true}})");
  ASSERT_EQ(run({"bounds", "--config", cfg.string(), "--out", p("b").string()}).code, 0);
  // 2 sizes x 2 spectra x 3 bases x 3 seeds, plus the header.
  EXPECT_EQ(line_count(slurp(p("b/bounds.csv"))), 2u * 2u * 3u * 3u + 1u);
  const auto j = read_json(p("b/bounds.json"));
  EXPECT_EQ(j["tr_d_above_2ub"], 0);
  EXPECT_EQ(j["ub_above_tr_h"], 0);
  const std::string svg = slurp(p("b/bounds.svg"));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);

  const auto bad = config("bad.json", R"({"bounds": {"seeds": 0}})");
  EXPECT_EQ(run({"bounds", "--config", bad.string(), "--out", p("x").string()}).code, 2);
}

TEST_F(CliTest, CompareWithItselfHasZeroDeltas) {
  const auto cfg = config("c.json", R"({"quant": {"bits": 3}})");
  ASSERT_EQ(run({"quantize", "--config", cfg.string(), "--out", p("q").string()}).code, 0);
  const auto cmp = config("cmp.json", R"({"compare": {"baseline": [")" + p("q").string() +
                                          R"("], "candidate": [")" + p("q").string() +
                                          R"("], "svg": true}})");
  ASSERT_EQ(run({"compare", "--config", cmp.string(), "--out", p("c").string()}).code, 0);
  const auto j = read_json(p("c/compare.json"));
  const auto& pair = j["pairs"][0];
  EXPECT_EQ(pair["kl_proxy_delta"].get<double>(), 0.0);
  for (const auto& l : pair["layers"]) {
    EXPECT_EQ(l["mu_w_delta"].get<double>(), 0.0);
    EXPECT_EQ(l["snr_db_delta"].get<double>(), 0.0);
    EXPECT_EQ(l["error_delta"].get<double>(), 0.0);
  }
  EXPECT_EQ(j["sign_test"]["ties"], 1);
  EXPECT_TRUE(fs::exists(p("c/compare.svg")));
}

TEST_F(CliTest, CompareMismatchedModelSeedsIsError) {
  ASSERT_EQ(run({"quantize", "--seed", "1", "--out", p("a").string()}).code, 0);
  ASSERT_EQ(run({"quantize", "--seed", "2", "--out", p("b").string()}).code, 0);
  const auto cmp = config("cmp.json", R"({"compare": {"baseline": [")" + p("a").string() +
                                          R"("], "candidate": [")" + p("b").string() + R"("]}})");
  const Outcome o = run({"compare", "--config", cmp.string(), "--out", p("c").string()});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("model seeds differ"), std::string::npos);

  const auto missing = config("m.json", R"({"compare": {"baseline": [")" + p("a").string() +
                                            R"("], "candidate": [")" + p("zz").string() + R"("]}})");
  EXPECT_EQ(run({"compare", "--config", missing.string(), "--out", p("c").string()}).code, 2);
}

// Generate, learn, quantize twice and compare, all through the command line.
TEST_F(CliTest, EndToEndOptRotBeatsNoRotationOnPlantedOutliers) {
  const std::string model = p("m").string();
  const auto gen = config("g.json", R"({"seed": 11, "model": {"spec": {"distribution": "planted-outliers"}}})");
  ASSERT_EQ(run({"generate", "--config", gen.string(), "--out", model}).code, 0);
  const auto learn = config("l.json", R"({"seed": 11, "model": {"path": ")" + model +
                                          R"("}, "rotation": {"method": "optrot", "steps": 200}})");
  ASSERT_EQ(run({"learn", "--config", learn.string(), "--out", p("l").string()}).code, 0);
  const auto q_opt = config("qo.json", R"({"seed": 11, "model": {"path": ")" + model +
                                           R"("}, "rotation": {"method": "optrot", "path": ")" +
                                           p("l").string() + "\"}}");
  const auto q_none = config("qn.json", R"({"seed": 11, "model": {"path": ")" + model + "\"}}");
  ASSERT_EQ(run({"quantize", "--config", q_opt.string(), "--out", p("qo").string()}).code, 0);
  ASSERT_EQ(run({"quantize", "--config", q_none.string(), "--out", p("qn").string()}).code, 0);
  const auto cmp = config("c.json", R"({"compare": {"baseline": [")" + p("qn").string() +
                                        R"("], "candidate": [")" + p("qo").string() + R"("]}})");
  ASSERT_EQ(run({"compare", "--config", cmp.string(), "--out", p("c").string()}).code, 0);
  const auto j = read_json(p("c/compare.json"));
  EXPECT_EQ(j["sign_test"]["candidate_wins"], 1);
  EXPECT_LT(j["pairs"][0]["kl_proxy_delta"].get<double>(), 0.0);
}
