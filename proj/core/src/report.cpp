#include "speedbias/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "speedbias/errors.hpp"
#include "speedbias/harness.hpp"

namespace fs = std::filesystem;

namespace speedbias::report {
namespace {

constexpr const char* kMissing = "—";

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string cell(const std::optional<double>& v, int decimals = 1) {
  return v ? fmt(*v, decimals) : std::string(kMissing);
}

std::optional<double> opt_mean(const std::optional<metrics::Dispersion>& d) {
  if (!d) return std::nullopt;
  return d->mean;
}

// relative drop, defined only when both values exist and the baseline is
// positive (the formula's own domain)
std::string drop_cell(std::optional<double> baseline, std::optional<double> value) {
  if (!baseline || !value || !(*baseline > 0)) return kMissing;
  return fmt(metrics::relative_drop(*baseline, *value), 1);
}

struct Row {
  std::string spec_id;
  std::string label;
  const metrics::AggregateRecord* agg = nullptr;  // null: no completed runs
};

struct Series {
  std::string name;
  std::string color;
  std::vector<double> x, y;
};

void fit_line(const Series& s, double& slope, double& intercept, bool& ok) {
  ok = false;
  std::size_t n = s.x.size();
  if (n < 2) return;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += s.x[i];
    my += s.y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (s.x[i] - mx) * (s.x[i] - mx);
    sxy += (s.x[i] - mx) * (s.y[i] - my);
  }
  if (!(sxx > 0)) return;
  slope = sxy / sxx;
  intercept = my - slope * mx;
  ok = true;
}

std::string render_svg(const std::vector<metrics::ScatterPoint>& points) {
  const std::vector<std::pair<std::string, std::string>> palette = {
      {"bleu", "#1f77b4"}, {"pro", "#2ca02c"}, {"anti", "#d62728"}};
  std::vector<Series> series;
  for (const auto& [name, color] : palette) {
    Series s{name, color, {}, {}};
    for (const auto& p : points)
      if (p.metric == name) {
        s.x.push_back(p.rel_time_drop);
        s.y.push_back(p.rel_metric_drop);
      }
    if (!s.x.empty()) series.push_back(std::move(s));
  }

  const int width = 640, height = 480;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  if (series.empty()) {
    svg << "<text x=\"320\" y=\"240\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"14\">no scatter data</text>\n";
    svg << "</svg>\n";
    return svg.str();
  }

  double xmin = series[0].x[0], xmax = xmin, ymin = series[0].y[0], ymax = ymin;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  auto pad = [](double& lo, double& hi) {
    double span = hi - lo;
    if (!(span > 0)) span = std::max(1.0, std::abs(hi));
    lo -= 0.05 * span;
    hi += 0.05 * span;
  };
  pad(xmin, xmax);
  pad(ymin, ymax);

  const double left = 70, right = width - 25, top = 25, bottom = height - 55;
  auto px = [&](double x) {
    return left + (x - xmin) / (xmax - xmin) * (right - left);
  };
  auto py = [&](double y) {
    return bottom - (y - ymin) / (ymax - ymin) * (bottom - top);
  };

  svg << "<clipPath id=\"plot\"><rect x=\"" << left << "\" y=\"" << top
      << "\" width=\"" << right - left << "\" height=\"" << bottom - top
      << "\"/></clipPath>\n";
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\""
      << right - left << "\" height=\"" << bottom - top
      << "\" fill=\"none\" stroke=\"#444\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    double xv = xmin + (xmax - xmin) * i / 5.0;
    double yv = ymin + (ymax - ymin) * i / 5.0;
    svg << "<line x1=\"" << fmt(px(xv), 2) << "\" y1=\"" << bottom << "\" x2=\""
        << fmt(px(xv), 2) << "\" y2=\"" << bottom + 5
        << "\" stroke=\"#444\"/>\n";
    svg << "<text x=\"" << fmt(px(xv), 2) << "\" y=\"" << bottom + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << fmt(xv, 1) << "</text>\n";
    svg << "<line x1=\"" << left - 5 << "\" y1=\"" << fmt(py(yv), 2)
        << "\" x2=\"" << left << "\" y2=\"" << fmt(py(yv), 2)
        << "\" stroke=\"#444\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << fmt(py(yv) + 4, 2)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(yv, 1) << "</text>\n";
  }
  svg << "<text x=\"" << (left + right) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">relative % drop in decoding time</text>\n";
  svg << "<text x=\"18\" y=\"" << (top + bottom) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 "
      << (top + bottom) / 2 << ")\">relative % drop in metric</text>\n";

  for (const Series& s : series) {
    double slope = 0, intercept = 0;
    bool ok = false;
    fit_line(s, slope, intercept, ok);
    if (ok) {
      double x1 = xmin, x2 = xmax;
      svg << "<line clip-path=\"url(#plot)\" x1=\"" << fmt(px(x1), 2)
          << "\" y1=\"" << fmt(py(slope * x1 + intercept), 2) << "\" x2=\""
          << fmt(px(x2), 2) << "\" y2=\"" << fmt(py(slope * x2 + intercept), 2)
          << "\" stroke=\"" << s.color << "\" stroke-dasharray=\"5,4\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg << "<circle cx=\"" << fmt(px(s.x[i]), 2) << "\" cy=\""
          << fmt(py(s.y[i]), 2) << "\" r=\"3.5\" fill=\"" << s.color
          << "\" fill-opacity=\"0.8\"/>\n";
  }

  double lx = right - 90, ly = top + 14;
  for (const Series& s : series) {
    svg << "<rect x=\"" << lx << "\" y=\"" << ly - 9
        << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>\n";
    svg << "<text x=\"" << lx + 16 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name
        << "</text>\n";
    ly += 18;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string csv_for(const std::vector<metrics::ScatterPoint>& points,
                    const std::set<std::string>& metrics_wanted) {
  std::string csv = "metric,rel_time_drop,rel_metric_drop\n";
  for (const auto& p : points)
    if (metrics_wanted.count(p.metric))
      csv += p.metric + "," + fmt(p.rel_time_drop, 4) + "," +
             fmt(p.rel_metric_drop, 4) + "\n";
  return csv;
}

}  // namespace

ReportArtifacts build_report(const std::vector<metrics::RunRecord>& records,
                             const std::string& baseline_spec_id,
                             const std::vector<std::string>& row_order) {
  if (records.empty()) throw DataError("report: no records given");
  std::map<std::string, std::vector<metrics::RunRecord>> by_spec;
  std::vector<const metrics::RunRecord*> failed;
  for (const metrics::RunRecord& rec : records) {
    if (rec.status == "complete")
      by_spec[rec.config.spec_id].push_back(rec);
    else
      failed.push_back(&rec);
  }
  if (by_spec.find(baseline_spec_id) == by_spec.end())
    throw DataError("report: baseline spec '" + baseline_spec_id +
                    "' has no completed records");

  std::map<std::string, metrics::AggregateRecord> aggregates;
  for (const auto& [id, runs] : by_spec)
    aggregates.emplace(id, metrics::average_runs(runs));

  std::vector<std::string> order = row_order;
  if (order.empty()) {
    std::set<std::string> present;
    for (const metrics::RunRecord& rec : records) present.insert(rec.config.spec_id);
    for (const harness::OptimizationSpec& spec : harness::enumerate_matrix())
      if (present.erase(spec.id()) > 0) order.push_back(spec.id());
    for (const std::string& id : present) order.push_back(id);
  }

  std::vector<Row> rows;
  for (const std::string& id : order) {
    Row row;
    row.spec_id = id;
    try {
      row.label = harness::spec_from_id(id).label();
    } catch (const DataError&) {
      row.label = id;
    }
    if (id == baseline_spec_id) row.label += " (baseline)";
    auto it = aggregates.find(id);
    if (it != aggregates.end()) row.agg = &it->second;
    rows.push_back(std::move(row));
  }

  const metrics::AggregateRecord& base = aggregates.at(baseline_spec_id);
  const metrics::AggregateRecord* fastest = nullptr;
  for (const Row& row : rows)
    if (row.agg && (!fastest || row.agg->decode_time_seconds.mean <
                                    fastest->decode_time_seconds.mean))
      fastest = row.agg;

  std::ostringstream md;
  md << "# Speed optimizations vs. gendered-noun translation\n\n";
  md << "Cells are means over each configuration's completed runs; '" << kMissing
     << "' marks undefined values. Accuracies are percentages with the\n"
        "inconclusive-inclusive denominator; Δ = pro − anti, ΔFC = FOFC − MOFC,\n"
        "ΔMC = MOMC − FOMC.\n\n";
  md << "| model | time(s) | BLEU | pro | anti | Δ | FOFC | MOFC | ΔFC | MOMC "
        "| FOMC | ΔMC |\n";
  md << "|:--|--:|--:|--:|--:|--:|--:|--:|--:|--:|--:|--:|\n";
  for (const Row& row : rows) {
    md << "| " << row.label << " |";
    if (!row.agg) {
      for (int i = 0; i < 11; ++i) md << " " << kMissing << " |";
      md << "\n";
      continue;
    }
    const metrics::AggregateRecord& a = *row.agg;
    md << " " << fmt(a.decode_time_seconds.mean, 3) << " |";
    md << " " << fmt(a.bleu.mean, 1) << " |";
    md << " " << cell(opt_mean(a.pro)) << " |";
    md << " " << cell(opt_mean(a.anti)) << " |";
    md << " " << cell(opt_mean(a.delta)) << " |";
    md << " " << cell(opt_mean(a.fofc)) << " |";
    md << " " << cell(opt_mean(a.mofc)) << " |";
    md << " " << cell(opt_mean(a.delta_fc)) << " |";
    md << " " << cell(opt_mean(a.momc)) << " |";
    md << " " << cell(opt_mean(a.fomc)) << " |";
    md << " " << cell(opt_mean(a.delta_mc)) << " |";
    md << "\n";
  }

  auto footer_drop = [&](auto getter) {
    std::optional<double> f;
    if (fastest) f = getter(*fastest);
    return drop_cell(getter(base), f);
  };
  md << "| max rel. % drop |";
  md << " " << footer_drop([](const metrics::AggregateRecord& a) {
    return std::optional<double>(a.decode_time_seconds.mean);
  }) << " |";
  md << " " << footer_drop([](const metrics::AggregateRecord& a) {
    return std::optional<double>(a.bleu.mean);
  }) << " |";
  md << " " << footer_drop([](const metrics::AggregateRecord& a) {
    return opt_mean(a.pro);
  }) << " |";
  md << " " << footer_drop([](const metrics::AggregateRecord& a) {
    return opt_mean(a.anti);
  }) << " |";
  md << " " << kMissing << " |";
  md << " " << footer_drop([](const metrics::AggregateRecord& a) {
    return opt_mean(a.fofc);
  }) << " |";
  md << " " << footer_drop([](const metrics::AggregateRecord& a) {
    return opt_mean(a.mofc);
  }) << " |";
  md << " " << kMissing << " |";
  md << " " << footer_drop([](const metrics::AggregateRecord& a) {
    return opt_mean(a.momc);
  }) << " |";
  md << " " << footer_drop([](const metrics::AggregateRecord& a) {
    return opt_mean(a.fomc);
  }) << " |";
  md << " " << kMissing << " |";
  md << "\n";

  if (!failed.empty()) {
    md << "\n## Failed runs\n\n";
    std::vector<const metrics::RunRecord*> sorted_failed = failed;
    std::sort(sorted_failed.begin(), sorted_failed.end(),
              [](const metrics::RunRecord* a, const metrics::RunRecord* b) {
                return a->run_id < b->run_id;
              });
    for (const metrics::RunRecord* rec : sorted_failed)
      md << "- `" << rec->run_id << "`: " << rec->error << "\n";
  }

  std::vector<metrics::AggregateRecord> ordered_aggs;
  for (const Row& row : rows)
    if (row.agg) ordered_aggs.push_back(*row.agg);
  std::vector<metrics::ScatterPoint> points =
      metrics::scatter_data(ordered_aggs, baseline_spec_id);

  ReportArtifacts artifacts;
  artifacts.markdown = md.str();
  artifacts.scatter_csv = csv_for(points, {"bleu", "pro", "anti"});
  artifacts.breakdown_csv = csv_for(points, {"momc", "fofc", "mofc", "fomc"});
  artifacts.scatter_svg = render_svg(points);

  nlohmann::ordered_json summary;
  summary["baseline"] = baseline_spec_id;
  summary["fastest"] = fastest ? nlohmann::ordered_json(fastest->config.spec_id)
                               : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json jrows = nlohmann::ordered_json::array();
  for (const Row& row : rows) {
    nlohmann::ordered_json jr;
    jr["spec_id"] = row.spec_id;
    jr["label"] = row.label;
    jr["aggregate"] = row.agg ? metrics::to_json(*row.agg)
                              : nlohmann::ordered_json(nullptr);
    jrows.push_back(std::move(jr));
  }
  summary["rows"] = std::move(jrows);
  nlohmann::ordered_json jfail = nlohmann::ordered_json::array();
  for (const metrics::RunRecord* rec : failed) {
    nlohmann::ordered_json jf;
    jf["run_id"] = rec->run_id;
    jf["error"] = rec->error;
    jfail.push_back(std::move(jf));
  }
  summary["failed_runs"] = std::move(jfail);
  artifacts.summary = std::move(summary);
  return artifacts;
}

void write_report(const fs::path& dir, const ReportArtifacts& artifacts) {
  fs::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw RunError("cannot write " + (dir / name).string());
    out << text;
  };
  write("report.md", artifacts.markdown);
  write("scatter.csv", artifacts.scatter_csv);
  write("scatter_breakdown.csv", artifacts.breakdown_csv);
  write("scatter.svg", artifacts.scatter_svg);
  write("summary.json", artifacts.summary.dump(2) + "\n");
}

}  // namespace speedbias::report
