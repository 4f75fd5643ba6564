#include "speedbias/metrics.hpp"

#include <cmath>
#include <map>

#include "speedbias/errors.hpp"

namespace speedbias::metrics {
namespace {

using NGram = std::vector<std::string>;

void count_ngrams(const std::vector<std::string>& tokens, int n,
                  std::map<NGram, long>& out) {
  if (static_cast<long>(tokens.size()) < n) return;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++out[NGram(tokens.begin() + i, tokens.begin() + i + n)];
}

}  // namespace

BleuReport corpus_bleu(const std::vector<std::vector<std::string>>& hypotheses,
                       const std::vector<std::vector<std::string>>& references) {
  if (hypotheses.size() != references.size())
    throw DataError("corpus_bleu: hypothesis/reference count mismatch");
  if (hypotheses.empty()) throw DataError("corpus_bleu: empty corpus");

  BleuReport rep;
  std::array<long, 4> matched{};
  std::array<long, 4> total{};
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    rep.hyp_length += static_cast<long>(hypotheses[s].size());
    rep.ref_length += static_cast<long>(references[s].size());
    for (int n = 1; n <= 4; ++n) {
      std::map<NGram, long> hyp_counts, ref_counts;
      count_ngrams(hypotheses[s], n, hyp_counts);
      count_ngrams(references[s], n, ref_counts);
      for (const auto& [gram, count] : hyp_counts) {
        total[n - 1] += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }
  bool any_zero = false;
  for (int n = 0; n < 4; ++n) {
    rep.precisions[n] = total[n] > 0 ? static_cast<double>(matched[n]) / total[n] : 0.0;
    if (rep.precisions[n] <= 0.0) any_zero = true;
  }
  if (rep.hyp_length == 0) {
    rep.brevity_penalty = 0.0;
    rep.score = 0.0;
    return rep;
  }
  rep.brevity_penalty =
      rep.hyp_length >= rep.ref_length
          ? 1.0
          : std::exp(1.0 - static_cast<double>(rep.ref_length) / rep.hyp_length);
  if (any_zero) {
    rep.score = 0.0;
    return rep;
  }
  double log_sum = 0;
  for (int n = 0; n < 4; ++n) log_sum += std::log(rep.precisions[n]);
  rep.score = 100.0 * rep.brevity_penalty * std::exp(log_sum / 4.0);
  return rep;
}

namespace {

std::optional<double> pct(long num, long den) {
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

CategoryAccuracies table_impl(const eval::SubgroupTally& t, bool strict) {
  auto acc = [&](const eval::CategoryCounts& c) {
    long den = strict ? c.correct + c.incorrect : c.total();
    return pct(c.correct, den);
  };
  CategoryAccuracies a;
  a.pro = acc(t.pro());
  a.anti = acc(t.anti());
  a.fofc = acc(t.fofc);
  a.mofc = acc(t.mofc);
  a.momc = acc(t.momc);
  a.fomc = acc(t.fomc);
  return a;
}

}  // namespace

CategoryAccuracies accuracy_table(const eval::SubgroupTally& tally) {
  return table_impl(tally, false);
}

CategoryAccuracies accuracy_table_excluding_inconclusive(
    const eval::SubgroupTally& tally) {
  return table_impl(tally, true);
}

DeltaReport deltas(const CategoryAccuracies& acc) {
  if (!acc.pro || !acc.anti || !acc.fofc || !acc.mofc || !acc.momc || !acc.fomc)
    throw DataError("deltas: all category accuracies must be defined");
  return {*acc.pro - *acc.anti, *acc.fofc - *acc.mofc, *acc.momc - *acc.fomc};
}

double relative_drop(double baseline, double value) {
  if (!(baseline > 0))
    throw DataError("relative_drop: baseline must be positive");
  return 100.0 * (baseline - value) / baseline;
}

namespace {

nlohmann::ordered_json bleu_json(const BleuReport& b) {
  nlohmann::ordered_json j;
  j["score"] = b.score;
  j["precisions"] = b.precisions;
  j["brevity_penalty"] = b.brevity_penalty;
  j["hyp_length"] = b.hyp_length;
  j["ref_length"] = b.ref_length;
  return j;
}

BleuReport bleu_from_json(const nlohmann::json& j) {
  BleuReport b;
  b.score = j.at("score").get<double>();
  auto p = j.at("precisions");
  for (int n = 0; n < 4; ++n) b.precisions[n] = p.at(n).get<double>();
  b.brevity_penalty = j.at("brevity_penalty").get<double>();
  b.hyp_length = j.at("hyp_length").get<long>();
  b.ref_length = j.at("ref_length").get<long>();
  return b;
}

nlohmann::ordered_json counts_json(const eval::CategoryCounts& c) {
  nlohmann::ordered_json j;
  j["correct"] = c.correct;
  j["incorrect"] = c.incorrect;
  j["inconclusive"] = c.inconclusive;
  return j;
}

eval::CategoryCounts counts_from_json(const nlohmann::json& j) {
  return {j.at("correct").get<long>(), j.at("incorrect").get<long>(),
          j.at("inconclusive").get<long>()};
}

void put_opt(nlohmann::ordered_json& j, const char* key,
             const std::optional<double>& v) {
  if (v)
    j[key] = *v;
  else
    j[key] = nullptr;
}

std::optional<double> get_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

nlohmann::ordered_json accuracies_json(const CategoryAccuracies& a) {
  nlohmann::ordered_json j;
  put_opt(j, "pro", a.pro);
  put_opt(j, "anti", a.anti);
  put_opt(j, "fofc", a.fofc);
  put_opt(j, "mofc", a.mofc);
  put_opt(j, "momc", a.momc);
  put_opt(j, "fomc", a.fomc);
  return j;
}

CategoryAccuracies accuracies_from_json(const nlohmann::json& j) {
  CategoryAccuracies a;
  a.pro = get_opt(j, "pro");
  a.anti = get_opt(j, "anti");
  a.fofc = get_opt(j, "fofc");
  a.mofc = get_opt(j, "mofc");
  a.momc = get_opt(j, "momc");
  a.fomc = get_opt(j, "fomc");
  return a;
}

nlohmann::ordered_json config_json(const RunConfigSummary& c) {
  nlohmann::ordered_json j;
  j["encoder_layers"] = c.encoder_layers;
  j["decoder_layers"] = c.decoder_layers;
  j["use_aan"] = c.use_aan;
  j["quantized"] = c.quantized;
  j["beam_size"] = c.beam_size;
  j["spec_id"] = c.spec_id;
  return j;
}

RunConfigSummary config_from_json(const nlohmann::json& j) {
  RunConfigSummary c;
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.decoder_layers = j.at("decoder_layers").get<int>();
  c.use_aan = j.at("use_aan").get<bool>();
  c.quantized = j.at("quantized").get<bool>();
  c.beam_size = j.at("beam_size").get<int>();
  c.spec_id = j.at("spec_id").get<std::string>();
  return c;
}

}  // namespace

nlohmann::ordered_json to_json(const RunRecord& rec) {
  nlohmann::ordered_json j;
  j["run_id"] = rec.run_id;
  j["config"] = config_json(rec.config);
  j["seed"] = rec.seed;
  j["status"] = rec.status;
  if (!rec.error.empty()) j["error"] = rec.error;
  j["decode_time_seconds"] = rec.decode_time_seconds;
  j["wall_time_seconds"] = rec.wall_time_seconds;
  j["bleu"] = bleu_json(rec.bleu);
  nlohmann::ordered_json tally;
  tally["momc"] = counts_json(rec.tally.momc);
  tally["mofc"] = counts_json(rec.tally.mofc);
  tally["fofc"] = counts_json(rec.tally.fofc);
  tally["fomc"] = counts_json(rec.tally.fomc);
  j["tally"] = tally;
  j["accuracies"] = accuracies_json(rec.accuracies);
  j["accuracies_strict"] = accuracies_json(rec.accuracies_strict);
  if (rec.delta_report) {
    nlohmann::ordered_json d;
    d["delta"] = rec.delta_report->delta;
    d["delta_fc"] = rec.delta_report->delta_fc;
    d["delta_mc"] = rec.delta_report->delta_mc;
    j["deltas"] = d;
  } else {
    j["deltas"] = nullptr;
  }
  return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord rec;
  rec.run_id = j.at("run_id").get<std::string>();
  rec.config = config_from_json(j.at("config"));
  rec.seed = j.at("seed").get<std::uint64_t>();
  rec.status = j.at("status").get<std::string>();
  if (j.contains("error")) rec.error = j.at("error").get<std::string>();
  rec.decode_time_seconds = j.at("decode_time_seconds").get<double>();
  rec.wall_time_seconds = j.at("wall_time_seconds").get<double>();
  rec.bleu = bleu_from_json(j.at("bleu"));
  const auto& tally = j.at("tally");
  rec.tally.momc = counts_from_json(tally.at("momc"));
  rec.tally.mofc = counts_from_json(tally.at("mofc"));
  rec.tally.fofc = counts_from_json(tally.at("fofc"));
  rec.tally.fomc = counts_from_json(tally.at("fomc"));
  rec.accuracies = accuracies_from_json(j.at("accuracies"));
  rec.accuracies_strict = accuracies_from_json(j.at("accuracies_strict"));
  if (j.contains("deltas") && !j.at("deltas").is_null()) {
    DeltaReport d;
    d.delta = j.at("deltas").at("delta").get<double>();
    d.delta_fc = j.at("deltas").at("delta_fc").get<double>();
    d.delta_mc = j.at("deltas").at("delta_mc").get<double>();
    rec.delta_report = d;
  }
  return rec;
}

namespace {

Dispersion dispersion(const std::vector<double>& xs) {
  Dispersion d;
  if (xs.empty()) return d;
  double sum = 0;
  for (double x : xs) sum += x;
  d.mean = sum / xs.size();
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - d.mean) * (x - d.mean);
    d.stddev = std::sqrt(ss / (xs.size() - 1));
  }
  return d;
}

// all-or-nothing: if any run lacks the field, the aggregate omits it
std::optional<Dispersion> opt_dispersion(
    const std::vector<std::optional<double>>& xs) {
  std::vector<double> vals;
  vals.reserve(xs.size());
  for (const auto& x : xs) {
    if (!x) return std::nullopt;
    vals.push_back(*x);
  }
  return dispersion(vals);
}

}  // namespace

AggregateRecord average_runs(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw DataError("average_runs: no runs");
  AggregateRecord agg;
  agg.config = runs.front().config;
  agg.runs = static_cast<int>(runs.size());
  std::vector<double> dt, wt, bleu, cor, inc, ico;
  std::vector<std::optional<double>> pro, anti, fofc, mofc, momc, fomc, d, dfc, dmc;
  for (const RunRecord& r : runs) {
    if (r.config.spec_id != agg.config.spec_id)
      throw DataError("average_runs: mixed configurations (" + r.config.spec_id +
                      " vs " + agg.config.spec_id + ")");
    agg.run_ids.push_back(r.run_id);
    dt.push_back(r.decode_time_seconds);
    wt.push_back(r.wall_time_seconds);
    bleu.push_back(r.bleu.score);
    auto total = [&](auto f) {
      return static_cast<double>(f(r.tally.momc) + f(r.tally.mofc) +
                                 f(r.tally.fofc) + f(r.tally.fomc));
    };
    cor.push_back(total([](const eval::CategoryCounts& c) { return c.correct; }));
    inc.push_back(total([](const eval::CategoryCounts& c) { return c.incorrect; }));
    ico.push_back(total([](const eval::CategoryCounts& c) { return c.inconclusive; }));
    pro.push_back(r.accuracies.pro);
    anti.push_back(r.accuracies.anti);
    fofc.push_back(r.accuracies.fofc);
    mofc.push_back(r.accuracies.mofc);
    momc.push_back(r.accuracies.momc);
    fomc.push_back(r.accuracies.fomc);
    if (r.delta_report) {
      d.push_back(r.delta_report->delta);
      dfc.push_back(r.delta_report->delta_fc);
      dmc.push_back(r.delta_report->delta_mc);
    } else {
      d.push_back(std::nullopt);
      dfc.push_back(std::nullopt);
      dmc.push_back(std::nullopt);
    }
  }
  agg.decode_time_seconds = dispersion(dt);
  agg.wall_time_seconds = dispersion(wt);
  agg.bleu = dispersion(bleu);
  agg.correct = dispersion(cor);
  agg.incorrect = dispersion(inc);
  agg.inconclusive = dispersion(ico);
  agg.pro = opt_dispersion(pro);
  agg.anti = opt_dispersion(anti);
  agg.fofc = opt_dispersion(fofc);
  agg.mofc = opt_dispersion(mofc);
  agg.momc = opt_dispersion(momc);
  agg.fomc = opt_dispersion(fomc);
  agg.delta = opt_dispersion(d);
  agg.delta_fc = opt_dispersion(dfc);
  agg.delta_mc = opt_dispersion(dmc);
  return agg;
}

nlohmann::ordered_json to_json(const AggregateRecord& agg) {
  nlohmann::ordered_json j;
  j["config"] = config_json(agg.config);
  j["runs"] = agg.runs;
  j["run_ids"] = agg.run_ids;
  auto disp = [](const Dispersion& d) {
    nlohmann::ordered_json x;
    x["mean"] = d.mean;
    x["stddev"] = d.stddev;
    return x;
  };
  auto opt_disp = [&](const std::optional<Dispersion>& d) -> nlohmann::ordered_json {
    if (!d) return nullptr;
    return disp(*d);
  };
  j["decode_time_seconds"] = disp(agg.decode_time_seconds);
  j["wall_time_seconds"] = disp(agg.wall_time_seconds);
  j["bleu"] = disp(agg.bleu);
  j["pro"] = opt_disp(agg.pro);
  j["anti"] = opt_disp(agg.anti);
  j["fofc"] = opt_disp(agg.fofc);
  j["mofc"] = opt_disp(agg.mofc);
  j["momc"] = opt_disp(agg.momc);
  j["fomc"] = opt_disp(agg.fomc);
  j["delta"] = opt_disp(agg.delta);
  j["delta_fc"] = opt_disp(agg.delta_fc);
  j["delta_mc"] = opt_disp(agg.delta_mc);
  j["correct"] = disp(agg.correct);
  j["incorrect"] = disp(agg.incorrect);
  j["inconclusive"] = disp(agg.inconclusive);
  return j;
}

std::vector<ScatterPoint> scatter_data(const std::vector<AggregateRecord>& records,
                                       const std::string& baseline_spec_id) {
  const AggregateRecord* base = nullptr;
  for (const auto& r : records)
    if (r.config.spec_id == baseline_spec_id) base = &r;
  if (!base) throw DataError("scatter_data: baseline '" + baseline_spec_id +
                             "' not among records");
  struct MetricRef {
    const char* name;
    std::optional<double> (*get)(const AggregateRecord&);
  };
  static const MetricRef kMetrics[] = {
      {"bleu", [](const AggregateRecord& r) -> std::optional<double> { return r.bleu.mean; }},
      {"pro", [](const AggregateRecord& r) -> std::optional<double> {
         return r.pro ? std::optional<double>(r.pro->mean) : std::nullopt; }},
      {"anti", [](const AggregateRecord& r) -> std::optional<double> {
         return r.anti ? std::optional<double>(r.anti->mean) : std::nullopt; }},
      {"fofc", [](const AggregateRecord& r) -> std::optional<double> {
         return r.fofc ? std::optional<double>(r.fofc->mean) : std::nullopt; }},
      {"mofc", [](const AggregateRecord& r) -> std::optional<double> {
         return r.mofc ? std::optional<double>(r.mofc->mean) : std::nullopt; }},
      {"momc", [](const AggregateRecord& r) -> std::optional<double> {
         return r.momc ? std::optional<double>(r.momc->mean) : std::nullopt; }},
      {"fomc", [](const AggregateRecord& r) -> std::optional<double> {
         return r.fomc ? std::optional<double>(r.fomc->mean) : std::nullopt; }},
  };
  std::vector<ScatterPoint> points;
  for (const auto& rec : records) {
    if (rec.config.spec_id == baseline_spec_id) continue;
    if (!(base->decode_time_seconds.mean > 0)) continue;
    double x = relative_drop(base->decode_time_seconds.mean,
                             rec.decode_time_seconds.mean);
    for (const MetricRef& m : kMetrics) {
      auto bv = m.get(*base);
      auto rv = m.get(rec);
      if (!bv || !rv || !(*bv > 0)) continue;
      points.push_back({rec.config.spec_id, m.name, x, relative_drop(*bv, *rv)});
    }
  }
  return points;
}

}  // namespace speedbias::metrics
