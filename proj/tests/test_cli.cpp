// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <sstream>

#include "fixtures.hpp"
#include "moeprobe/cli.hpp"
#include "moeprobe/csv.hpp"
#include "moeprobe/routing_log.hpp"

using namespace moeprobe;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("moeprobe_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_text_file(dir_ / "benign.txt", "# benign\nhow do plants grow\nname three rivers\nwrite a short poem\n");
    write_text_file(dir_ / "malicious.txt", "placeholder request one\nplaceholder request two\nplaceholder three\n");
    write_text_file(dir_ / "small.conf", "num_layers=2\nnum_experts=4\ntop_k=2\nmodel_dim=16\nhidden_dim=32\n");
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "moeprobe");
    out_.str("");
    err_.str("");
    return cli_dispatch(args, out_, err_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(CliTest, CaptureThenAnalyzeExperts) {
  const auto start = std::chrono::steady_clock::now();
  ASSERT_EQ(run({"capture", "--prompts", "benign=" + path("benign.txt"), "--prompts",
                 "malicious=" + path("malicious.txt"), "--out", path("log.json")}),
            kExitOk)
      << err_.str();
  const auto log = load_routing_log(path("log.json")).log;
  EXPECT_EQ(log.prompts.size(), 6u);
  EXPECT_EQ(log.meta.num_layers, 8u);
  EXPECT_EQ(log.prompts[0].id, "benign-1");

  ASSERT_EQ(run({"analyze-experts", "--log", path("log.json"), "--out", path("experts")}), kExitOk) << err_.str();
  const auto table = parse_csv(read_text_file(dir_ / "experts" / "activation_expert_summary_group.csv"));
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[0][0], "benign");
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 60.0);
}

TEST_F(CliTest, AnalyzeLayersToStdout) {
  ASSERT_EQ(run({"--config", path("small.conf"), "capture", "--prompts", "benign=" + path("benign.txt"), "--out",
                 path("log.json")}),
            kExitOk);
  ASSERT_EQ(run({"analyze-layers", "--log", path("log.json"), "--signal", "gradient"}), kExitOk) << err_.str();
  EXPECT_NE(out_.str().find("entropy_nats"), std::string::npos);
  EXPECT_NE(out_.str().find("# "), std::string::npos);
}

TEST_F(CliTest, UnknownFlagIsUsageError) {
  EXPECT_EQ(run({"analyze-experts", "--bogus"}), kExitUsage);
  EXPECT_EQ(run({"no-such-command"}), kExitUsage);
  EXPECT_EQ(run({"capture", "--out", path("x.json")}), kExitUsage);
  EXPECT_EQ(run({"--help"}), kExitOk);
}

TEST_F(CliTest, BadInputIsValidationError) {
  write_text_file(dir_ / "broken.json", "{\"format\": \"moe-routing-log\"}");
  EXPECT_EQ(run({"analyze-experts", "--log", path("broken.json")}), kExitValidation);
  EXPECT_FALSE(err_.str().empty());
  write_text_file(dir_ / "bad.conf", "num_layers=zero\n");
  EXPECT_EQ(run({"--config", path("bad.conf"), "capture", "--prompts", "benign=" + path("benign.txt"), "--out",
                 path("log.json")}),
            kExitValidation);
  EXPECT_EQ(run({"capture", "--prompts", "nogroup", "--out", path("log.json")}), kExitValidation);
}

TEST_F(CliTest, ClassifyAndInterveneWithTopN) {
  ASSERT_EQ(run({"--config", path("small.conf"), "capture", "--prompts", "benign=" + path("benign.txt"), "--prompts",
                 "malicious=" + path("malicious.txt"), "--out", path("log.json")}),
            kExitOk);
  ASSERT_EQ(run({"classify", "--log", path("log.json"), "--out", path("cls")}), kExitOk) << err_.str();
  const auto cls = parse_csv(read_text_file(dir_ / "cls" / "activation_classification.csv"));
  EXPECT_EQ(cls.rows.size(), 8u);

  const int rc = run({"--config", path("small.conf"), "--top-n", "1", "intervene", "--log", path("log.json"),
                      "--prompts", "malicious=" + path("malicious.txt"), "--out", path("int")});
  if (rc == kExitOk) {
    const auto set = parse_csv(read_text_file(dir_ / "int" / "activation_suppression_set.csv"));
    EXPECT_EQ(set.rows.size(), 1u);
    const auto tr = parse_csv(read_text_file(dir_ / "int" / "activation_transitions.csv"));
    EXPECT_EQ(tr.rows[0][1], "3");
  } else {
    // No benign-dominant pair in this tiny run.
    EXPECT_EQ(rc, kExitValidation) << err_.str();
  }
}

TEST_F(CliTest, LabelOnlyIntervention) {
  write_text_file(dir_ / "labels.csv", fixture::transition_label_file(18, 8, 6, 68));
  ASSERT_EQ(run({"--labels", path("labels.csv"), "intervene", "--out", path("int")}), kExitOk) << err_.str();
  const auto tr = parse_csv(read_text_file(dir_ / "int" / "activation_transitions.csv"));
  EXPECT_EQ(tr.rows.back()[0], "relative_reduction");
  EXPECT_EQ(tr.rows.back()[1], "0.416667");
}
