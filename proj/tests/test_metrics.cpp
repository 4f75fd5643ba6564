#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "speedbias/errors.hpp"
#include "speedbias/metrics.hpp"

using namespace speedbias;
using doctest::Approx;

namespace {

std::vector<std::string> tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

metrics::RunRecord stub_record(const std::string& spec_id, double time_s,
                               double bleu) {
  metrics::RunRecord rec;
  rec.run_id = spec_id + "-s1";
  rec.config.spec_id = spec_id;
  rec.seed = 1;
  rec.decode_time_seconds = time_s;
  rec.wall_time_seconds = time_s;
  rec.bleu.score = bleu;
  return rec;
}

}  // namespace

TEST_CASE("identity corpus scores BLEU 100") {
  std::vector<std::vector<std::string>> hyp{tokens("the cat sat on the mat"),
                                            tokens("a b c d e")};
  auto report = metrics::corpus_bleu(hyp, hyp);
  CHECK(report.score == Approx(100.0).epsilon(1e-12));
  CHECK(report.brevity_penalty == Approx(1.0));
  for (double p : report.precisions) CHECK(p == Approx(1.0));
}

TEST_CASE("pure brevity penalty case scores 100*exp(-1/4)") {
  // hypothesis n-grams are all present in the reference, so every clipped
  // precision is 1 and only the length ratio 5/4 penalizes
  auto report = metrics::corpus_bleu({tokens("a b c d")},
                                     {tokens("a b c d e")});
  CHECK(report.hyp_length == 4);
  CHECK(report.ref_length == 5);
  CHECK(report.brevity_penalty == Approx(std::exp(-0.25)).epsilon(1e-12));
  CHECK(report.score ==
        Approx(100.0 * std::exp(1.0 - 5.0 / 4.0)).epsilon(1e-5));
  CHECK(std::abs(report.score - 77.8800783) < 1e-3);
}

TEST_CASE("any zero n-gram precision zeroes the unsmoothed score") {
  auto disjoint = metrics::corpus_bleu({tokens("a b c d")},
                                       {tokens("e f g h")});
  CHECK(disjoint.score == 0.0);
  // unigrams overlap but no bigram does
  auto no_bigram = metrics::corpus_bleu({tokens("a c b d")},
                                        {tokens("a b c d")});
  CHECK(no_bigram.precisions[0] == Approx(1.0));
  CHECK(no_bigram.score == 0.0);
}

TEST_CASE("clipping caps repeated hypothesis n-grams") {
  // "the the the the" vs "the cat": unigram 'the' clipped to count 1 of 4
  auto report = metrics::corpus_bleu({tokens("the the the the")},
                                     {tokens("the cat")});
  CHECK(report.precisions[0] == Approx(0.25));
}

TEST_CASE("corpus BLEU pools counts across sentences") {
  // sentence 1: 2/2 unigrams, 1/1 bigrams; sentence 2: 2/3 unigrams,
  // 1/2 bigrams -> pooled p1 = 4/5, p2 = 2/3; lengths 5 vs 5
  std::vector<std::vector<std::string>> hyp{tokens("a b"), tokens("c d x")};
  std::vector<std::vector<std::string>> ref{tokens("a b"), tokens("c d e")};
  auto report = metrics::corpus_bleu(hyp, ref);
  CHECK(report.precisions[0] == Approx(4.0 / 5.0));
  CHECK(report.precisions[1] == Approx(2.0 / 3.0));
  CHECK(report.brevity_penalty == Approx(1.0));
}

TEST_CASE("bleu rejects mismatched corpus sizes and empty corpora") {
  CHECK_THROWS_AS(metrics::corpus_bleu({tokens("a")}, {}), DataError);
  CHECK_THROWS_AS(metrics::corpus_bleu({}, {}), DataError);
}

TEST_CASE("baseline deltas recompute exactly") {
  metrics::CategoryAccuracies acc;
  acc.pro = 80.9;
  acc.anti = 44.2;
  acc.fofc = 69.4;
  acc.mofc = 41.7;
  acc.momc = 88.2;
  acc.fomc = 48.1;
  auto d = metrics::deltas(acc);
  CHECK(d.delta == Approx(36.7).epsilon(1e-9));
  CHECK(d.delta_fc == Approx(27.7).epsilon(1e-9));
  CHECK(d.delta_mc == Approx(40.1).epsilon(1e-9));
}

TEST_CASE("published delta cells recompute within rounding tolerance") {
  // {pro, anti, delta, fofc, mofc, delta_fc, momc, fomc, delta_mc} per row,
  // six single-optimization rows then six stacked rows per direction
  const double rows[][9] = {
      {80.9, 44.2, 36.7, 69.4, 41.7, 27.7, 88.2, 48.1, 40.0},
      {79.5, 44.9, 34.6, 68.4, 42.8, 25.6, 86.6, 48.2, 38.4},
      {78.6, 37.8, 40.8, 67.4, 33.6, 33.8, 85.6, 44.3, 41.3},
      {77.9, 38.1, 39.8, 67.3, 35.9, 31.4, 84.6, 41.7, 42.9},
      {77.7, 38.7, 39.0, 66.0, 33.8, 32.2, 85.1, 46.3, 38.8},
      {79.8, 41.4, 38.4, 67.0, 37.2, 29.8, 88.0, 48.1, 39.8},
      {67.7, 39.7, 28.0, 57.5, 31.6, 25.9, 74.2, 52.3, 21.8},
      {65.0, 39.2, 25.8, 51.5, 29.7, 21.8, 73.5, 54.0, 19.5},
      {68.5, 33.0, 35.5, 58.0, 23.9, 34.1, 75.3, 47.4, 27.8},
      {67.5, 32.6, 35.0, 57.7, 26.5, 31.2, 73.8, 46.7, 27.1},
      {66.9, 35.9, 31.0, 56.6, 30.3, 26.2, 73.5, 44.6, 28.9},
      {63.2, 33.2, 30.0, 50.5, 24.6, 25.9, 71.3, 46.8, 24.6},
      {77.4, 38.5, 38.9, 67.4, 34.9, 32.5, 83.7, 44.0, 39.7},
      {75.3, 36.2, 39.1, 57.1, 31.7, 25.3, 86.8, 43.2, 43.6},
      {78.6, 40.4, 38.2, 66.9, 36.3, 30.5, 86.0, 46.8, 39.2},
      {73.1, 34.9, 38.2, 58.7, 29.5, 29.2, 82.3, 43.4, 38.8},
      {66.7, 32.2, 34.5, 54.6, 22.1, 32.5, 74.4, 48.1, 26.3},
      {64.2, 29.1, 35.1, 50.3, 22.2, 28.1, 73.0, 44.7, 28.3},
      {64.7, 28.9, 35.9, 53.9, 19.9, 34.1, 71.6, 43.0, 28.6},
      {61.0, 23.3, 37.6, 46.3, 14.8, 31.5, 70.3, 36.7, 33.6},
  };
  for (const auto& row : rows) {
    metrics::CategoryAccuracies acc;
    acc.pro = row[0];
    acc.anti = row[1];
    acc.fofc = row[3];
    acc.mofc = row[4];
    acc.momc = row[6];
    acc.fomc = row[7];
    auto d = metrics::deltas(acc);
    CHECK(std::abs(d.delta - row[2]) <= 0.1 + 1e-9);
    CHECK(std::abs(d.delta_fc - row[5]) <= 0.1 + 1e-9);
    CHECK(std::abs(d.delta_mc - row[8]) <= 0.1 + 1e-9);
  }
}

TEST_CASE("deltas require all six accuracies") {
  metrics::CategoryAccuracies acc;
  acc.pro = 80.0;
  acc.anti = 40.0;
  acc.fofc = 70.0;
  acc.mofc = 40.0;
  acc.momc = 90.0;
  CHECK_THROWS_AS(metrics::deltas(acc), DataError);
}

TEST_CASE("relative drop reproduces the published time cell") {
  double drop = metrics::relative_drop(3662.8, 1993.5);
  CHECK(drop == Approx(100.0 * (3662.8 - 1993.5) / 3662.8).epsilon(1e-12));
  CHECK(round1(drop) == Approx(45.6));
  CHECK(round1(metrics::relative_drop(33.2, 32.7)) == Approx(1.5));
  CHECK(metrics::relative_drop(10.0, 12.0) == Approx(-20.0));
  CHECK_THROWS_AS(metrics::relative_drop(0.0, 1.0), DataError);
  CHECK_THROWS_AS(metrics::relative_drop(-3.0, 1.0), DataError);
}

TEST_CASE("accuracy tables use the two documented denominators") {
  eval::SubgroupTally tally;
  tally.momc = {3, 1, 1};  // correct, incorrect, inconclusive
  tally.fofc = {1, 0, 1};
  tally.mofc = {0, 2, 0};
  // fomc left empty
  auto inclusive = metrics::accuracy_table(tally);
  REQUIRE(inclusive.momc.has_value());
  CHECK(*inclusive.momc == Approx(60.0));
  CHECK(*inclusive.fofc == Approx(50.0));
  CHECK(*inclusive.mofc == Approx(0.0));
  CHECK_FALSE(inclusive.fomc.has_value());
  CHECK(*inclusive.pro == Approx(100.0 * 4 / 7));
  CHECK(*inclusive.anti == Approx(0.0));

  auto strict = metrics::accuracy_table_excluding_inconclusive(tally);
  CHECK(*strict.momc == Approx(75.0));
  CHECK(*strict.fofc == Approx(100.0));
  CHECK_FALSE(strict.fomc.has_value());

  eval::SubgroupTally only_inconclusive;
  only_inconclusive.momc = {0, 0, 4};
  auto degenerate =
      metrics::accuracy_table_excluding_inconclusive(only_inconclusive);
  CHECK_FALSE(degenerate.momc.has_value());
  CHECK(*metrics::accuracy_table(only_inconclusive).momc == Approx(0.0));
}

TEST_CASE("average_runs reports mean and sample stddev") {
  auto a = stub_record("e6d6-std-fp-b5", 1.0, 30.0);
  auto b = stub_record("e6d6-std-fp-b5", 3.0, 34.0);
  b.run_id = "e6d6-std-fp-b5-s2";
  b.seed = 2;
  a.accuracies.pro = 80.0;
  b.accuracies.pro = 90.0;
  auto agg = metrics::average_runs({a, b});
  CHECK(agg.runs == 2);
  CHECK(agg.decode_time_seconds.mean == Approx(2.0));
  CHECK(agg.decode_time_seconds.stddev == Approx(std::sqrt(2.0)));
  CHECK(agg.bleu.mean == Approx(32.0));
  CHECK(agg.bleu.stddev == Approx(std::sqrt(8.0)));
  REQUIRE(agg.pro.has_value());
  CHECK(agg.pro->mean == Approx(85.0));
  CHECK(agg.pro->stddev == Approx(std::sqrt(50.0)));
  CHECK_FALSE(agg.anti.has_value());
  REQUIRE(agg.run_ids.size() == 2);

  auto single = metrics::average_runs({a});
  CHECK(single.decode_time_seconds.stddev == 0.0);

  CHECK_THROWS_AS(metrics::average_runs({}), DataError);
  auto other = stub_record("e6d6-std-fp-b1", 1.0, 30.0);
  CHECK_THROWS_AS(metrics::average_runs({a, other}), DataError);
}

TEST_CASE("footer scatter point reproduces from two run stubs") {
  auto baseline = stub_record("e6d6-std-fp-b5", 3662.8, 33.2);
  auto fastest = stub_record("e6d2-std-fp-b5", 1993.5, 32.7);
  auto points = metrics::scatter_data({metrics::average_runs({baseline}),
                                       metrics::average_runs({fastest})},
                                      "e6d6-std-fp-b5");
  REQUIRE(points.size() == 1);
  CHECK(points[0].metric == "bleu");
  CHECK(points[0].spec_id == "e6d2-std-fp-b5");
  CHECK(round1(points[0].rel_time_drop) == Approx(45.6));
  CHECK(round1(points[0].rel_metric_drop) == Approx(1.5));
}

TEST_CASE("scatter skips baseline rows and non-positive baselines") {
  auto baseline = stub_record("e6d6-std-fp-b5", 100.0, 30.0);
  baseline.accuracies.pro = 80.0;
  baseline.accuracies.anti = 0.0;  // non-positive: anti points skipped
  auto variant = stub_record("e6d6-std-fp-b1", 50.0, 27.0);
  variant.accuracies.pro = 60.0;
  variant.accuracies.anti = 10.0;
  variant.accuracies.momc = 70.0;  // missing from baseline: skipped
  auto points = metrics::scatter_data({metrics::average_runs({baseline}),
                                       metrics::average_runs({variant})},
                                      "e6d6-std-fp-b5");
  REQUIRE(points.size() == 2);
  for (const auto& p : points) {
    CHECK(p.spec_id == "e6d6-std-fp-b1");
    CHECK(p.rel_time_drop == Approx(50.0));
  }
  CHECK(points[0].metric == "bleu");
  CHECK(points[0].rel_metric_drop == Approx(10.0));
  CHECK(points[1].metric == "pro");
  CHECK(points[1].rel_metric_drop == Approx(25.0));
  CHECK_THROWS_AS(metrics::scatter_data({metrics::average_runs({variant})},
                                        "absent"),
                  DataError);
}

TEST_CASE("run records round trip through json") {
  auto rec = stub_record("e10d2-aan-int8-b1", 12.5, 28.75);
  rec.config.encoder_layers = 10;
  rec.config.decoder_layers = 2;
  rec.config.use_aan = true;
  rec.config.quantized = true;
  rec.config.beam_size = 1;
  rec.seed = 42;
  rec.bleu.precisions = {0.9, 0.8, 0.7, 0.6};
  rec.bleu.brevity_penalty = 0.95;
  rec.bleu.hyp_length = 900;
  rec.bleu.ref_length = 950;
  rec.tally.momc = {30, 5, 5};
  rec.tally.fomc = {10, 25, 5};
  rec.accuracies = metrics::accuracy_table(rec.tally);
  rec.accuracies_strict =
      metrics::accuracy_table_excluding_inconclusive(rec.tally);
  metrics::DeltaReport d{1.5, 2.5, 3.5};
  rec.delta_report = d;

  auto back = metrics::run_record_from_json(metrics::to_json(rec));
  CHECK(back.run_id == rec.run_id);
  CHECK(back.config.spec_id == rec.config.spec_id);
  CHECK(back.config.encoder_layers == 10);
  CHECK(back.config.use_aan);
  CHECK(back.config.quantized);
  CHECK(back.config.beam_size == 1);
  CHECK(back.seed == 42);
  CHECK(back.status == "complete");
  CHECK(back.error.empty());
  CHECK(back.decode_time_seconds == Approx(12.5));
  CHECK(back.bleu.score == Approx(28.75));
  CHECK(back.bleu.precisions[3] == Approx(0.6));
  CHECK(back.tally.momc.correct == 30);
  CHECK(back.tally.fomc.incorrect == 25);
  CHECK(back.accuracies.momc == rec.accuracies.momc);
  CHECK_FALSE(back.accuracies.fofc.has_value());
  REQUIRE(back.delta_report.has_value());
  CHECK(back.delta_report->delta_mc == Approx(3.5));
}

TEST_CASE("failed run records keep their error through json") {
  auto rec = stub_record("e6d6-std-fp-b5", 0.0, 0.0);
  rec.status = "failed";
  rec.error = "training diverged at step 7";
  auto j = metrics::to_json(rec);
  CHECK(j.at("error").get<std::string>() == rec.error);
  auto back = metrics::run_record_from_json(j);
  CHECK(back.status == "failed");
  CHECK(back.error == rec.error);
  CHECK_FALSE(back.delta_report.has_value());

  // complete records omit the error key entirely
  auto clean = metrics::to_json(stub_record("e6d6-std-fp-b5", 1.0, 2.0));
  CHECK_FALSE(clean.contains("error"));
}

TEST_CASE("aggregate json exposes means for report consumers") {
  auto a = stub_record("e6d6-std-fp-b5", 2.0, 30.0);
  auto agg = metrics::average_runs({a});
  auto j = metrics::to_json(agg);
  CHECK(j.at("config").at("spec_id").get<std::string>() ==
        "e6d6-std-fp-b5");
  CHECK(j.at("runs").get<int>() == 1);
  CHECK(j.at("decode_time_seconds").at("mean").get<double>() ==
        Approx(2.0));
}
