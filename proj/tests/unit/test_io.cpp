#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "nmtune/error.hpp"
#include "nmtune/io/config.hpp"
#include "nmtune/io/fmat.hpp"
#include "nmtune/io/labels.hpp"
#include "nmtune/io/results.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
namespace io = nmtune::io;
using nmtune::ErrorKind;
using nmtune::Matrix;

namespace {

ErrorKind decode_error(const std::string& bytes) {
  try {
    io::decode_fmat(bytes);
  } catch (const nmtune::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode succeeded";
  return ErrorKind::kIoError;
}

ErrorKind config_error(const std::string& text) {
  try {
    io::parse_run_config(text);
  } catch (const nmtune::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "parse succeeded: " << text;
  return ErrorKind::kIoError;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nmtune_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kMinimalPlan = R"({
  "plan": {"tasks": ["t"], "gamma_list": [0.0], "eta_list": [0.0], "data_fractions": [1.0]},
  "simulator": {"tasks": [{"id": "t"}]}
})";

}  // namespace

// ---- FMAT ----

TEST(Fmat, OneByOneIsFortyBytes) {
  const std::string bytes = io::encode_fmat(Matrix(1, 1, 0.0));
  EXPECT_EQ(bytes.size(), 40u);
  EXPECT_EQ(bytes.substr(0, 4), "FMAT");
  EXPECT_EQ(io::decode_fmat(bytes), Matrix(1, 1, 0.0));
}

TEST(Fmat, RandomRoundTripIsBitExact) {
  const Matrix m = oracle::random_matrix(128, 32, 1);
  const Matrix back = io::decode_fmat(io::encode_fmat(m));
  ASSERT_EQ(back.rows(), 128u);
  EXPECT_EQ(std::memcmp(back.data(), m.data(), m.size() * sizeof(double)), 0);
}

TEST(Fmat, SpecialValuesSurvive) {
  Matrix m(1, 4);
  m(0, 0) = -0.0;
  m(0, 1) = std::numeric_limits<double>::infinity();
  m(0, 2) = std::numeric_limits<double>::denorm_min();
  m(0, 3) = std::numeric_limits<double>::quiet_NaN();
  const Matrix back = io::decode_fmat(io::encode_fmat(m));
  EXPECT_EQ(std::memcmp(back.data(), m.data(), sizeof(double) * 4), 0);
}

TEST(Fmat, EmptyMatrix) {
  const std::string bytes = io::encode_fmat(Matrix(0, 5));
  EXPECT_EQ(bytes.size(), 32u);
  const Matrix back = io::decode_fmat(bytes);
  EXPECT_EQ(back.rows(), 0u);
  EXPECT_EQ(back.cols(), 5u);
}

TEST(Fmat, CorruptionIsDetected) {
  const std::string good = io::encode_fmat(oracle::random_matrix(4, 3, 2));
  std::string bad = good;
  bad[io::kFmatHeaderBytes + 5] ^= 0x01;
  EXPECT_EQ(decode_error(bad), ErrorKind::kCrcMismatch);

  bad = good;
  bad[0] = 'X';
  EXPECT_EQ(decode_error(bad), ErrorKind::kBadMagic);

  bad = good;
  bad[4] = 2;  // version
  EXPECT_EQ(decode_error(bad), ErrorKind::kUnsupportedVersion);

  bad = good;
  bad[6] = 2;  // dtype
  EXPECT_EQ(decode_error(bad), ErrorKind::kUnsupportedVersion);

  EXPECT_EQ(decode_error(good.substr(0, good.size() - 1)), ErrorKind::kTruncatedFile);
  EXPECT_EQ(decode_error(good.substr(0, 10)), ErrorKind::kTruncatedFile);
  EXPECT_EQ(decode_error(good + "x"), ErrorKind::kTruncatedFile);
}

TEST(Fmat, AtomicFileRoundTrip) {
  const fs::path dir = scratch("fmat");
  const Matrix m = oracle::random_matrix(7, 3, 9);
  io::write_fmat(m, dir / "a.fmat");
  EXPECT_EQ(io::read_fmat(dir / "a.fmat"), m);
  // no temp files left behind
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(dir)) entries += e.is_regular_file();
  EXPECT_EQ(entries, 1u);
  try {
    io::read_fmat(dir / "missing.fmat");
    FAIL();
  } catch (const nmtune::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingArtifact);
  }
}

// ---- labels ----

TEST(Labels, ParseWithHeader) {
  const auto f = io::parse_labels("# classes=5\n0\n4\r\n2\n");
  EXPECT_EQ(f.labels, (std::vector<nmtune::Label>{0, 4, 2}));
  EXPECT_EQ(f.classes(), 5u);
  EXPECT_EQ(io::parse_labels("1\n3\n").classes(), 4u);
}

TEST(Labels, FormatRoundTrip) {
  const io::LabelFile f{{3, 1, 0, 2}, 6};
  EXPECT_EQ(io::parse_labels(io::format_labels(f)).labels, f.labels);
  EXPECT_EQ(io::parse_labels(io::format_labels(f)).num_classes, f.num_classes);
}

TEST(Labels, Rejects) {
  for (const char* text : {"1\nx\n", "1\n# classes=3\n", "-1\n", "1.5\n", "# classes=2\n3\n"}) {
    try {
      io::parse_labels(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const nmtune::Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kLabelError) << text;
    }
  }
}

// ---- run config ----

TEST(Config, MinimalConfigTakesDefaults) {
  const auto c = io::parse_run_config(kMinimalPlan);
  EXPECT_EQ(c.source, io::SourceKind::kSimulator);
  EXPECT_EQ(c.plan.seeds, std::vector<std::uint64_t>{0});
  EXPECT_EQ(c.simulator.pretrain.hidden_dim, 128u);
  EXPECT_EQ(c.provider.retry.max_retries, 3u);
}

TEST(Config, StrictAboutKeysAndTypes) {
  EXPECT_EQ(config_error(R"({"plan": {"tasks": ["t"]}, "simulator": {"tasks": [{"id": "t"}]}, "extra": 1})"),
            ErrorKind::kConfigError);
  EXPECT_EQ(config_error(R"({"plan": {"tasks": ["t"], "gama_list": [0]}, "simulator": {"tasks": [{"id": "t"}]}})"),
            ErrorKind::kConfigError);
  EXPECT_EQ(config_error(R"({"plan": {"tasks": ["t"], "seed": "x"}, "simulator": {"tasks": [{"id": "t"}]}})"),
            ErrorKind::kConfigError);
  EXPECT_EQ(config_error(R"({"plan": {"tasks": ["u"]}, "simulator": {"tasks": [{"id": "t"}]}})"),
            ErrorKind::kConfigError);
  EXPECT_EQ(config_error(R"({"plan": {"tasks": ["t"], "modes": ["XYZ"]}, "simulator": {"tasks": [{"id": "t"}]}})"),
            ErrorKind::kConfigError);
  EXPECT_EQ(config_error(R"({"plan": {"tasks": ["ID"]}, "simulator": {"tasks": [{"id": "ID"}]}})"),
            ErrorKind::kConfigError);
  EXPECT_EQ(config_error("{not json"), ErrorKind::kConfigError);
}

TEST(Config, DumpParsesBackToSameHash) {
  const auto c = io::read_run_config(fs::path(NMTUNE_SOURCE_DIR) / "configs" / "desk.json");
  const std::string dumped = io::dump_run_config(c);
  const auto again = io::parse_run_config(dumped);
  EXPECT_EQ(io::dump_run_config(again), dumped);
  EXPECT_EQ(io::plan_hash(again), io::plan_hash(c));
  EXPECT_EQ(io::plan_hash(c).size(), 16u);
  auto changed = c;
  changed.plan.seed += 1;
  EXPECT_NE(io::plan_hash(changed), io::plan_hash(c));
}

TEST(Config, BundledConfigShape) {
  const auto c = io::read_run_config(fs::path(NMTUNE_SOURCE_DIR) / "configs" / "desk.json");
  EXPECT_EQ(c.plan.gamma_list, (std::vector<double>{0.0, 0.05, 0.1, 0.2, 0.3}));
  EXPECT_GE(c.plan.seeds.size(), 10u);
  EXPECT_EQ(c.plan.recipe(nmtune::nn::TuneMode::kNmTuneMlp).effective_nmtune()->lambda, 0.01);
}

TEST(Config, NoiseAndTrainSnippets) {
  const auto n = io::parse_noise_spec(R"({"kind": "asymmetric", "ratio": 0.2, "subset": [1, 2]})");
  EXPECT_EQ(n.kind, nmtune::NoiseKind::kAsymmetric);
  EXPECT_THROW(io::parse_noise_spec(R"({"kind": "asymmetric", "ratio": 0.2})"), nmtune::Error);
  EXPECT_THROW(io::parse_train_config(R"({"lr": 0.1})"), nmtune::Error);  // mode required
  const auto t = io::parse_train_config_or(R"({"lr": 0.1, "tap": "pre_relu"})", nmtune::nn::TuneMode::kMlp);
  EXPECT_EQ(t.mode, nmtune::nn::TuneMode::kMlp);
  EXPECT_EQ(t.tap, nmtune::nn::FeatureTap::kPreRelu);
}

TEST(Config, FormatRatio) {
  EXPECT_EQ(io::format_ratio(0.05), "0.05");
  EXPECT_EQ(io::format_ratio(0.0), "0");
  EXPECT_EQ(io::format_ratio(0.1 + 0.2), "0.30000000000000004");
}

// ---- results ----

TEST(Results, JsonRoundTrip) {
  nmtune::EvalResult r;
  r.cell_id = "g0.1_e0_LP_t_f1_s2";
  r.mode = nmtune::nn::TuneMode::kNmTuneMlp;
  r.gamma = 0.1;
  r.task_id = "t";
  r.task_kind = nmtune::sim::TaskKind::kOod;
  r.seed = 2;
  r.cell_seed = 0xfedcba9876543210ULL;
  r.accuracy = 1.0 / 3.0;
  r.macro_f1 = 0.123456789012345678;
  r.sve = 2.5;
  r.lsvr = 1e-300;
  r.train_size = 60;
  r.flipped = 6;
  r.variants = {{"shift0", 0.5, 0.4, 2.0, 1.0}, {"shift1", 1.0 / 7.0, 0.3, 3.0, 1.5}};
  r.loss_trace = {1.1, 0.9, 0.7};
  r.parameter_delta_norm = 0.25;
  const std::string text = io::result_to_json(r);
  const auto back = io::result_from_json(text);
  EXPECT_EQ(io::result_to_json(back), text);
  EXPECT_EQ(back.accuracy, r.accuracy);
  EXPECT_EQ(back.cell_seed, r.cell_seed);
  EXPECT_EQ(back.variants[1].accuracy, r.variants[1].accuracy);
  EXPECT_EQ(back.parameter_delta_norm, r.parameter_delta_norm);
}

TEST(Results, DirectoryRoundTripSkipsConfig) {
  const fs::path dir = scratch("results");
  nmtune::EvalResult a, b;
  a.cell_id = "b";
  b.cell_id = "a";
  b.ok = false;
  b.error_kind = "TrainingDiverged";
  b.error_message = "cell a: boom";
  a.features = {oracle::random_matrix(3, 2, 1)};
  a.variants = {{"test", 0.5, 0.5, 1.0, 1.0}};
  io::write_results(dir, {a, b});
  io::write_file_atomic(dir / "config.json", "{}");
  const auto back = io::read_results(dir);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].cell_id, "a");
  EXPECT_FALSE(back[0].ok);
  EXPECT_EQ(back[0].error_kind, "TrainingDiverged");
  EXPECT_TRUE(fs::exists(dir / "features" / "b.test.fmat"));
}

TEST(Results, SummaryCsvHeader) {
  nmtune::SummaryRow row;
  row.task = "ID";
  row.n = 3;
  row.delta_vs_lp = 0.01;
  const std::string csv = io::summary_to_csv({row});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "mode,task,eta,fraction,gamma,n,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std,"
            "sve_mean,sve_std,lsvr_mean,lsvr_std,delta_vs_lp");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}
