#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "speedbias/gender_eval.hpp"

namespace speedbias::metrics {

struct BleuReport {
  std::array<double, 4> precisions{};  // clipped n-gram precisions, n=1..4
  double brevity_penalty = 0.0;
  long hyp_length = 0;
  long ref_length = 0;
  double score = 0.0;  // 0..100
};

// Unsmoothed corpus BLEU, single reference per hypothesis. Tokens are taken
// as given. Score is 0 when any n-gram precision is 0.
BleuReport corpus_bleu(const std::vector<std::vector<std::string>>& hypotheses,
                       const std::vector<std::vector<std::string>>& references);

// Percentages in [0,100]; a field is empty when its denominator is 0.
struct CategoryAccuracies {
  std::optional<double> pro, anti, fofc, mofc, momc, fomc;
};

// Denominator includes inconclusive items.
CategoryAccuracies accuracy_table(const eval::SubgroupTally& tally);
// Denominator excludes inconclusive items.
CategoryAccuracies accuracy_table_excluding_inconclusive(
    const eval::SubgroupTally& tally);

struct DeltaReport {
  double delta = 0;     // pro - anti
  double delta_fc = 0;  // FOFC - MOFC (feminine context)
  double delta_mc = 0;  // MOMC - FOMC (masculine context)
};

// Throws DataError unless all six accuracies are defined. Unrounded.
DeltaReport deltas(const CategoryAccuracies& acc);

// 100 * (baseline - value) / baseline; throws DataError when baseline <= 0.
double relative_drop(double baseline, double value);

struct RunConfigSummary {
  int encoder_layers = 6;
  int decoder_layers = 6;
  bool use_aan = false;
  bool quantized = false;
  int beam_size = 5;
  std::string spec_id;  // stable id for grouping, e.g. "e6d6-std-fp-b5"
};

struct RunRecord {
  std::string run_id;
  RunConfigSummary config;
  std::uint64_t seed = 0;
  std::string status = "complete";  // complete | failed
  std::string error;                // diagnostic, set on failed runs
  double decode_time_seconds = 0;
  double wall_time_seconds = 0;
  BleuReport bleu;
  eval::SubgroupTally tally;
  CategoryAccuracies accuracies;         // denominator includes inconclusive
  CategoryAccuracies accuracies_strict;  // denominator excludes inconclusive
  std::optional<DeltaReport> delta_report;
};

nlohmann::ordered_json to_json(const RunRecord& rec);
RunRecord run_record_from_json(const nlohmann::json& j);

struct Dispersion {
  double mean = 0;
  double stddev = 0;  // sample stddev; 0 when n == 1
};

struct AggregateRecord {
  RunConfigSummary config;
  int runs = 0;
  std::vector<std::string> run_ids;
  Dispersion decode_time_seconds, wall_time_seconds, bleu;
  // accuracies with the inconclusive-inclusive denominator
  std::optional<Dispersion> pro, anti, fofc, mofc, momc, fomc;
  std::optional<Dispersion> delta, delta_fc, delta_mc;
  Dispersion correct, incorrect, inconclusive;  // tally totals
};

// Mean and sample standard deviation over same-config runs. Throws DataError
// on an empty span or mixed spec ids.
AggregateRecord average_runs(const std::vector<RunRecord>& runs);

nlohmann::ordered_json to_json(const AggregateRecord& agg);

struct ScatterPoint {
  std::string spec_id;
  std::string metric;  // bleu | pro | anti | fofc | mofc | momc | fomc
  double rel_time_drop = 0;
  double rel_metric_drop = 0;
};

// One point per (non-baseline aggregate, metric); metrics whose baseline
// value is missing or non-positive are skipped.
std::vector<ScatterPoint> scatter_data(const std::vector<AggregateRecord>& records,
                                       const std::string& baseline_spec_id);

}  // namespace speedbias::metrics
