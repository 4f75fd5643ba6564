#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "speedbias/metrics.hpp"

namespace speedbias::report {

struct ReportArtifacts {
  std::string markdown;       // results table + footer + failures
  std::string scatter_csv;    // bleu/pro/anti drop vs time drop
  std::string breakdown_csv;  // per-subgroup drop vs time drop
  std::string scatter_svg;    // plot of scatter_csv with trendlines
  nlohmann::ordered_json summary;
};

// Aggregates same-spec records, renders the results table (one column per
// metric, a "max rel. % drop" footer comparing the fastest spec against the
// baseline) and the scatter CSVs. Failed records are listed, not averaged.
// Rows follow row_order (spec ids); when row_order is empty, the default
// matrix order filtered to present ids, then leftovers sorted. Output is
// byte-identical for identical record sets.
ReportArtifacts build_report(const std::vector<metrics::RunRecord>& records,
                             const std::string& baseline_spec_id,
                             const std::vector<std::string>& row_order = {});

// report.md, scatter.csv, scatter_breakdown.csv, scatter.svg, summary.json
void write_report(const std::filesystem::path& dir, const ReportArtifacts& artifacts);

}  // namespace speedbias::report
