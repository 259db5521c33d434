// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "moeprobe/classifier.hpp"
#include "moeprobe/csv.hpp"
#include "moeprobe/diagnostics.hpp"
#include "moeprobe/errors.hpp"
#include "moeprobe/metrics.hpp"
#include "moeprobe/report.hpp"
#include "moeprobe/routing_log.hpp"

using namespace moeprobe;

namespace {

RoutingLog random_log(std::uint64_t seed, std::size_t layers, std::size_t experts, std::size_t prompts) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1e-3);
  RoutingLog log;
  log.meta = {layers, experts, 2, "test", nlohmann::json{{"max_new_tokens", 4}}};
  for (std::size_t p = 0; p < prompts; ++p) {
    PromptRecord r;
    r.id = "p" + std::to_string(p);
    r.group = p % 2 ? "malicious" : "benign";
    r.token_count = 3 + p;
    r.activation = RoutingMap(layers, experts, MapKind::kRawCount);
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t t = 0; t < r.token_count; ++t) {
        const std::size_t a = rng() % experts;
        std::size_t b = rng() % (experts - 1);
        if (b >= a) ++b;
        r.activation.add(l, a, 1);
        r.activation.add(l, b, 1);
      }
    }
    std::vector<double> g(layers * experts);
    for (auto& x : g) x = u(rng);
    r.gradient = RoutingMap(layers, experts, g, MapKind::kGradient);
    log.prompts.push_back(std::move(r));
  }
  return log;
}

std::string error_of(std::string_view text) {
  try {
    (void)parse_routing_log(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "no error";
}

}  // namespace

TEST(Csv, NumberFormatting) {
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(0.125), "0.125");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333");
  EXPECT_EQ(format_number(std::size_t{205}), "205");
  EXPECT_EQ(format_number(1e-7), "1e-07");
}

TEST(Csv, StrictParsing) {
  EXPECT_EQ(parse_double("0.25", "x"), 0.25);
  EXPECT_EQ(parse_size("12", "x"), 12u);
  EXPECT_THROW(parse_double("0.25abc", "x"), ValidationError);
  EXPECT_THROW(parse_double("", "x"), ValidationError);
  EXPECT_THROW(parse_size("-1", "x"), ValidationError);
  EXPECT_THROW(parse_size("1.5", "x"), ValidationError);
}

TEST(Csv, QuotedRoundTrip) {
  const CsvTable t{{"a", "b"}, {{"plain", "with,comma"}, {"say \"hi\"", "line\nbreak"}}};
  const auto text = format_csv(t);
  EXPECT_NE(text.find("\"with,comma\""), std::string::npos);
  const auto back = parse_csv(text);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.column("b"), 1u);
  EXPECT_THROW((void)back.column("c"), ValidationError);
}

TEST(Csv, RaggedRowsRejected) {
  EXPECT_THROW(parse_csv("a,b\n1,2\n3\n"), ValidationError);
  EXPECT_THROW(parse_csv("a,b\n\"open,2\n"), ValidationError);
}

TEST(Csv, LineSplittingHandlesCrLf) {
  EXPECT_EQ(split_lines("a\r\nb\nc"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(trim("  x y \t"), "x y");
  EXPECT_EQ(split_fields("a, b,c", ','), (std::vector<std::string>{"a", " b", "c"}));
}

TEST(RoutingLog, RoundTripIsBitExact) {
  const auto log = random_log(17, 3, 8, 5);
  const auto text = serialize_routing_log(log);
  const auto back = parse_routing_log(text);
  EXPECT_TRUE(back.warnings.empty());
  EXPECT_EQ(back.log, log);
  EXPECT_EQ(serialize_routing_log(back.log), text);
}

TEST(RoutingLog, FileRoundTrip) {
  const auto log = random_log(3, 2, 4, 3);
  const auto path = std::filesystem::temp_directory_path() / "moeprobe_test_log.json";
  save_routing_log(log, path);
  EXPECT_EQ(load_routing_log(path).log, log);
  std::filesystem::remove(path);
  try {
    (void)load_routing_log(path);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("moeprobe_test_log.json"), std::string::npos);
  }
}

TEST(RoutingLog, ShortRowNamesLayerAndPrompt) {
  auto j = nlohmann::json::parse(serialize_routing_log(random_log(5, 3, 8, 2)));
  j["prompts"][1]["activation"][2].erase(7);
  const auto msg = error_of(j.dump());
  EXPECT_NE(msg.find("prompts[1]"), std::string::npos) << msg;
  EXPECT_NE(msg.find("layer 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("expected 8 entries, got 7"), std::string::npos) << msg;
}

TEST(RoutingLog, ConservationViolationRejected) {
  auto j = nlohmann::json::parse(serialize_routing_log(random_log(5, 2, 4, 1)));
  j["prompts"][0]["activation"][0][0] = j["prompts"][0]["activation"][0][0].get<std::uint64_t>() + 1;
  EXPECT_NE(error_of(j.dump()).find("layer 0"), std::string::npos);
}

TEST(RoutingLog, StructuralErrors) {
  const auto good = nlohmann::json::parse(serialize_routing_log(random_log(9, 2, 4, 2)));
  auto j = good;
  j["format"] = "other";
  EXPECT_NE(error_of(j.dump()).find("format"), std::string::npos);
  j = good;
  j["version"] = 2;
  EXPECT_NE(error_of(j.dump()).find("version"), std::string::npos);
  j = good;
  j["meta"]["top_k"] = 5;
  EXPECT_NE(error_of(j.dump()).find("top_k"), std::string::npos);
  j = good;
  j["meta"]["num_layers"] = -2;
  EXPECT_NE(error_of(j.dump()), "no error");
  j = good;
  j["prompts"][1]["id"] = j["prompts"][0]["id"];
  EXPECT_NE(error_of(j.dump()).find("duplicate"), std::string::npos);
  j = good;
  j["prompts"][0]["activation"][1][1] = 1.5;
  EXPECT_NE(error_of(j.dump()).find("integer"), std::string::npos);
  j = good;
  j["prompts"][0]["gradient"][0][0] = -1.0;
  EXPECT_NE(error_of(j.dump()).find("nonnegative"), std::string::npos);
  j = good;
  j["prompts"][0].erase("group");
  EXPECT_NE(error_of(j.dump()).find("group"), std::string::npos);
  EXPECT_NE(error_of("{not json"), "no error");
}

TEST(RoutingLog, UnknownFieldsWarn) {
  auto j = nlohmann::json::parse(serialize_routing_log(random_log(11, 2, 4, 1)));
  j["extra"] = 1;
  j["prompts"][0]["note"] = "x";
  const auto r = parse_routing_log(j.dump());
  EXPECT_EQ(r.warnings.size(), 2u);
}

TEST(RoutingLog, GradientIsOptional) {
  auto log = random_log(12, 2, 4, 2);
  log.prompts[0].gradient.reset();
  EXPECT_EQ(parse_routing_log(serialize_routing_log(log)).log, log);
}

TEST(RoutingLog, GroupsInFirstAppearanceOrder) {
  auto log = random_log(13, 2, 4, 3);
  log.prompts[0].group = "z";
  EXPECT_EQ(log.groups(), (std::vector<std::string>{"z", "malicious", "benign"}));
}

TEST(Reports, ExpertSummaryIsAFixedPoint) {
  const auto log = random_log(21, 4, 8, 4);
  std::vector<GroupCoverage> rows;
  for (const auto& p : log.prompts) rows.push_back({p.id, coverage_summary(rank_experts(*p.gradient))});
  const auto text = format_csv(expert_summary_table(rows));
  const auto parsed = parse_expert_summary_table(parse_csv(text));
  ASSERT_EQ(parsed.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(parsed[i].summary.k80, rows[i].summary.k80);
    EXPECT_EQ(parsed[i].summary.k_elbow, rows[i].summary.k_elbow);
    EXPECT_NEAR(parsed[i].summary.top1, rows[i].summary.top1, 1e-5 * rows[i].summary.top1);
  }
  EXPECT_EQ(format_csv(expert_summary_table(parsed)), text);
}

TEST(Reports, LayerSummaryIsAFixedPoint) {
  const auto log = random_log(22, 4, 8, 2);
  std::vector<GroupLayers> groups;
  for (const auto& p : log.prompts) groups.push_back({p.group, layer_summary(*p.gradient)});
  const auto text = format_csv(layer_summary_table(groups));
  EXPECT_EQ(format_csv(layer_summary_table(parse_layer_summary_table(parse_csv(text)))), text);
}

TEST(Reports, UniformMapCoverageThroughCsv) {
  for (std::size_t layers : {4u, 8u, 32u}) {
    const RoutingMap u(layers, 8, std::vector<double>(layers * 8, 0.125), MapKind::kLayerNormalized);
    const std::vector<GroupCoverage> rows{{"uniform", coverage_summary(rank_experts(u))}};
    const auto parsed = parse_expert_summary_table(parse_csv(format_csv(expert_summary_table(rows))));
    EXPECT_EQ(parsed[0].summary.k80, static_cast<std::size_t>(std::ceil(0.8 * layers * 8)));
  }
}

TEST(Reports, ClassificationRoundTripAndCounts) {
  const auto log = random_log(23, 3, 8, 2);
  const auto c = classify_all(*log.prompts[0].gradient, *log.prompts[1].gradient, {1e-4, 1e-4});
  const auto text = format_csv(classification_table(c.rows));
  const auto back = parse_classification_table(parse_csv(text));
  ASSERT_EQ(back.size(), 24u);
  EXPECT_EQ(format_csv(classification_table(back)), text);
  const auto counts = parse_csv(format_csv(category_counts_table(c.counts)));
  std::size_t sum = 0;
  for (const auto& r : counts.rows)
    if (r[0] != "total") sum += parse_size(r[1], "count");
  EXPECT_EQ(sum, 24u);
  EXPECT_EQ(counts.rows.back()[1], "24");
}

TEST(Reports, HeaderMismatchRejected) {
  EXPECT_THROW(parse_expert_summary_table(parse_csv("group,k80\nx,1\n")), ValidationError);
  EXPECT_THROW(parse_classification_table(parse_csv("layer,expert\n0,0\n")), ValidationError);
}

TEST(Reports, LayerBlocks) {
  const auto b = default_layer_blocks(8);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[1].begin, 6u);
  EXPECT_EQ(default_layer_blocks(32)[1].begin, 24u);
  EXPECT_EQ(default_layer_blocks(1)[1].begin, 0u);
}
