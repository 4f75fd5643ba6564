// Acceptance checks for the whole pipeline. Each criterion prints exactly
// one PASS/FAIL line; the exit code is the number of failures. INFO lines
// carry measured values that are reported but not asserted.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "speedbias/decode.hpp"
#include "speedbias/errors.hpp"
#include "speedbias/gender_eval.hpp"
#include "speedbias/generation.hpp"
#include "speedbias/harness.hpp"
#include "speedbias/metrics.hpp"
#include "speedbias/quantize.hpp"
#include "speedbias/report.hpp"
#include "speedbias/transformer.hpp"

using namespace speedbias;
using nmt::Mat;
using nmt::ModelConfig;
using nmt::Params;
using nmt::Vec;

namespace {

int failures = 0;

void outcome(const std::string& name, bool ok, const std::string& detail) {
  if (ok)
    std::printf("PASS: %s\n", name.c_str());
  else
    std::printf("FAIL: %s: %s\n", name.c_str(),
                detail.empty() ? "assertion failed" : detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void info(const std::string& text) {
  std::printf("INFO: %s\n", text.c_str());
  std::fflush(stdout);
}

// Runs one criterion; the lambda returns success and fills `why` on failure.
template <typename Fn>
void criterion(const std::string& name, Fn&& fn) {
  bool ok = false;
  std::string why;
  try {
    ok = fn(why);
  } catch (const std::exception& e) {
    ok = false;
    why = std::string("exception: ") + e.what();
  }
  outcome(name, ok, why);
}

std::string fmt1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::filesystem::path data_file(const char* name) {
  return std::filesystem::path(SPEEDBIAS_DATA_DIR) / name;
}

// ---- decoding helpers ----------------------------------------------------

struct Instance {
  Params params;
  std::vector<int> source;
};

Instance random_instance(std::uint64_t seed, int max_vocab,
                         std::optional<bool> force_aan = std::nullopt) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  ModelConfig cfg;
  cfg.model_dim = pick(0, 1) ? 4 : 8;
  cfg.attention_heads = pick(0, 1) ? 1 : 2;
  cfg.ffn_dim = pick(4, 12);
  cfg.encoder_layers = pick(1, 2);
  cfg.decoder_layers = pick(1, 2);
  cfg.use_aan = force_aan ? *force_aan : pick(0, 1) == 1;
  cfg.source_vocab = pick(4, max_vocab);
  cfg.target_vocab = pick(4, max_vocab);
  cfg.init_seed = seed * 7919 + 13;
  Instance inst{nmt::init_params(cfg), {}};
  int len = pick(1, 5);
  for (int i = 0; i < len; ++i)
    inst.source.push_back(pick(0, cfg.source_vocab - 1));
  return inst;
}

std::vector<double> log_softmax(const Vec& logits) {
  double mx = logits.maxCoeff();
  double lse = std::log((logits.array() - mx).exp().sum()) + mx;
  std::vector<double> out(static_cast<std::size_t>(logits.size()));
  for (long i = 0; i < logits.size(); ++i) out[(std::size_t)i] = logits(i) - lse;
  return out;
}

// Teacher-forced score of a finished hypothesis (tokens then EOS); an
// independent path from the incremental decoder used by the search.
double forward_score(const Params& params, const std::vector<int>& source,
                     const std::vector<int>& tokens) {
  std::vector<int> input{1};
  input.insert(input.end(), tokens.begin(), tokens.end());
  Mat logits = nmt::forward(params, source, input);
  double score = 0;
  for (std::size_t t = 0; t <= tokens.size(); ++t) {
    Vec row = logits.row((long)t);
    int label = t < tokens.size() ? tokens[t] : 0;
    score += log_softmax(row)[(std::size_t)label];
  }
  return score;
}

void best_finished(const Params& params, const std::vector<int>& source,
                   std::vector<int>& prefix, int max_len, double& best,
                   std::vector<int>& best_tokens) {
  double score = forward_score(params, source, prefix);
  if (score > best) {
    best = score;
    best_tokens = prefix;
  }
  if ((int)prefix.size() >= max_len) return;
  for (int t = 1; t < params.config.target_vocab; ++t) {
    prefix.push_back(t);
    best_finished(params, source, prefix, max_len, best, best_tokens);
    prefix.pop_back();
  }
}

metrics::RunRecord stub_record(const std::string& spec_id, double time_s,
                               double bleu) {
  metrics::RunRecord rec;
  rec.run_id = spec_id + "-s1";
  auto spec = harness::spec_from_id(spec_id);
  rec.config.spec_id = spec_id;
  rec.config.encoder_layers = spec.layers.encoder;
  rec.config.decoder_layers = spec.layers.decoder;
  rec.config.use_aan = spec.use_aan;
  rec.config.quantized = spec.quantized;
  rec.config.beam_size = spec.beam_size;
  rec.seed = 1;
  rec.decode_time_seconds = time_s;
  rec.wall_time_seconds = time_s;
  rec.bleu.score = bleu;
  return rec;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

long count_occurrences(const std::string& text, const std::string& needle) {
  long n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size()))
    ++n;
  return n;
}

// ---- criteria ------------------------------------------------------------

bool check_judgement_goldens(std::string& why) {
  auto dict = eval::GenderDictionary::load(data_file("dictionary.tsv"), "es");
  gen::TestItem item;
  item.id = "probe";
  item.source = "That physician is a funny lady!";
  item.occupation_lemma = "physician";
  item.occupation_number = gen::Number::Singular;
  item.context_gender = gen::Gender::Feminine;
  item.stereotype_gender = gen::Gender::Masculine;
  item.category = gen::Category::MOFC;
  const std::pair<const char*, eval::Verdict> cases[] = {
      {"¡Esa doctora es una mujer graciosa!", eval::Verdict::Correct},
      {"¡Esa médica es una mujer feliz!", eval::Verdict::Correct},
      {"¡Ese médico es una mujer graciosa!", eval::Verdict::Incorrect},
      {"¡Ese medicación es una mujer graciosa!", eval::Verdict::Inconclusive},
  };
  for (const auto& [text, expected] : cases) {
    auto out = eval::judge(item, text, dict);
    if (out.verdict != expected) {
      why = std::string("'") + text + "' judged " +
            eval::verdict_name(out.verdict) + ", expected " +
            eval::verdict_name(expected);
      return false;
    }
  }
  return true;
}

bool check_relative_drop_and_scatter(std::string& why) {
  double drop = metrics::relative_drop(3662.8, 1993.5);
  if (fmt1(drop) != "45.6") {
    why = "relative_drop(3662.8, 1993.5) = " + fmt1(drop) + ", expected 45.6";
    return false;
  }
  std::vector<metrics::RunRecord> records{
      stub_record("e6d6-std-fp-b5", 3662.8, 33.2),
      stub_record("e6d2-std-fp-b5", 1993.5, 32.7),
  };
  std::vector<metrics::AggregateRecord> aggs{
      metrics::average_runs({records[0]}), metrics::average_runs({records[1]})};
  auto points = metrics::scatter_data(aggs, "e6d6-std-fp-b5");
  const metrics::ScatterPoint* bleu_point = nullptr;
  for (const auto& p : points)
    if (p.metric == "bleu") bleu_point = &p;
  if (!bleu_point) {
    why = "no bleu scatter point produced";
    return false;
  }
  if (fmt1(bleu_point->rel_time_drop) != "45.6" ||
      fmt1(bleu_point->rel_metric_drop) != "1.5") {
    why = "bleu scatter point (" + fmt1(bleu_point->rel_time_drop) + ", " +
          fmt1(bleu_point->rel_metric_drop) + "), expected (45.6, 1.5)";
    return false;
  }
  auto artifacts = report::build_report(records, "e6d6-std-fp-b5");
  if (artifacts.markdown.find("| max rel. % drop | 45.6 | 1.5 |") ==
      std::string::npos) {
    why = "report footer does not show time drop 45.6 and BLEU drop 1.5";
    return false;
  }
  return true;
}

bool check_delta_recomputation(std::string& why) {
  metrics::CategoryAccuracies base;
  base.pro = 80.9;
  base.anti = 44.2;
  base.fofc = 69.4;
  base.mofc = 41.7;
  base.momc = 88.2;
  base.fomc = 48.1;
  auto d = metrics::deltas(base);
  if (std::abs(d.delta - 36.7) > 1e-9 || std::abs(d.delta_fc - 27.7) > 1e-9) {
    why = "baseline deltas " + fmt1(d.delta) + "/" + fmt1(d.delta_fc) +
          ", expected 36.7/27.7 exactly";
    return false;
  }
  // {pro, anti, delta, fofc, mofc, delta_fc, momc, fomc, delta_mc}: the six
  // single-optimization rows then the six stacked rows, both directions
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
  int idx = 0;
  for (const auto& row : rows) {
    metrics::CategoryAccuracies acc;
    acc.pro = row[0];
    acc.anti = row[1];
    acc.fofc = row[3];
    acc.mofc = row[4];
    acc.momc = row[6];
    acc.fomc = row[7];
    auto rd = metrics::deltas(acc);
    if (std::abs(rd.delta - row[2]) > 0.1 + 1e-9 ||
        std::abs(rd.delta_fc - row[5]) > 0.1 + 1e-9 ||
        std::abs(rd.delta_mc - row[8]) > 0.1 + 1e-9) {
      why = "row " + std::to_string(idx) +
            " recomputed deltas differ by more than 0.1";
      return false;
    }
    ++idx;
  }
  return true;
}

bool check_matrix_cardinality(std::string& why) {
  auto specs = harness::enumerate_matrix();
  if (specs.size() != 56) {
    why = "enumerate_matrix yields " + std::to_string(specs.size()) +
          " specs, expected 56";
    return false;
  }
  std::map<std::string, int> ids;
  for (const auto& spec : specs) ++ids[spec.id()];
  if (ids.size() != 56) {
    why = "spec ids are not unique";
    return false;
  }
  if (specs.front().id() != harness::baseline_spec().id()) {
    why = "baseline is not the first spec";
    return false;
  }
  return true;
}

bool check_category_counts(std::string& why) {
  auto templates = gen::load_templates(data_file("templates.txt"));
  auto lexicon = gen::Lexicon::load(data_file("lexicon.tsv"));
  auto corpus = gen::generate_corpus(templates, lexicon);
  std::map<gen::Category, long> counts;
  for (const auto& item : corpus) ++counts[item.category];
  long momc = counts[gen::Category::MOMC], mofc = counts[gen::Category::MOFC];
  long fofc = counts[gen::Category::FOFC], fomc = counts[gen::Category::FOMC];
  if (momc != mofc || fofc != fomc) {
    why = "category counts are asymmetric: MOMC " + std::to_string(momc) +
          " vs MOFC " + std::to_string(mofc) + ", FOFC " +
          std::to_string(fofc) + " vs FOMC " + std::to_string(fomc);
    return false;
  }
  if (momc != 814 || fofc != 518) {
    why = "category counts MOMC/MOFC " + std::to_string(momc) +
          " and FOFC/FOMC " + std::to_string(fofc) +
          ", expected 814 and 518";
    return false;
  }
  return true;
}

bool check_beam_search_properties(std::string& why) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto inst = random_instance(seed, 10);
    auto greedy = nmt::decode_greedy(inst.params, inst.source, 12);
    auto beam1 = nmt::decode_beam(inst.params, inst.source, 1, 12);
    if (beam1.tokens != greedy.tokens || beam1.finished != greedy.finished ||
        std::abs(beam1.log_prob - greedy.log_prob) > 1e-9) {
      why = "beam-1 differs from greedy at seed " + std::to_string(seed);
      return false;
    }
  }
  int comparable = 0;
  for (std::uint64_t seed = 101; seed <= 200; ++seed) {
    auto inst = random_instance(seed, 10);
    auto greedy = nmt::decode_greedy(inst.params, inst.source, 12);
    auto beam = nmt::decode_beam(inst.params, inst.source, 5, 12);
    if (!greedy.finished || !beam.finished) continue;  // different event space
    ++comparable;
    if (beam.log_prob < greedy.log_prob - 1e-9) {
      why = "beam-5 scored below greedy at seed " + std::to_string(seed);
      return false;
    }
  }
  if (comparable < 30) {
    why = "only " + std::to_string(comparable) +
          " finished beam/greedy pairs; comparison would be vacuous";
    return false;
  }
  for (std::uint64_t seed = 300; seed < 320; ++seed) {
    auto inst = random_instance(seed, 6);
    int max_len = 2 + (int)(seed % 3);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> best_tokens, prefix;
    best_finished(inst.params, inst.source, prefix, max_len, best,
                  best_tokens);
    // (V-1)^max_len <= 625 live hypotheses; width 800 covers the search space
    auto result = nmt::decode_beam(inst.params, inst.source, 800, max_len);
    if (!result.finished || std::abs(result.log_prob - best) > 1e-9 ||
        result.tokens != best_tokens) {
      why = "exhaustive-width beam missed the global optimum at seed " +
            std::to_string(seed);
      return false;
    }
  }
  return true;
}

bool check_incremental_quant_gradients(std::string& why) {
  // incremental decoder vs full-prefix recomputation, both layer kinds
  for (std::uint64_t seed = 400; seed < 412; ++seed) {
    auto inst = random_instance(seed, 10, seed % 2 == 0);
    nmt::IncrementalDecoder dec(inst.params, inst.source);
    auto state = dec.initial_state();
    std::vector<int> prefix{1};
    int token = 1;
    for (int t = 0; t < 8; ++t) {
      Vec logits = dec.step(token, state);
      Mat full = nmt::forward(inst.params, inst.source, prefix);
      double diff =
          (logits.transpose() - full.row(full.rows() - 1)).cwiseAbs().maxCoeff();
      if (diff > 1e-6) {
        why = "incremental logits diverge from recomputed prefix by " +
              std::to_string(diff) + " at seed " + std::to_string(seed);
        return false;
      }
      long best = 0;
      logits.maxCoeff(&best);
      token = (int)best;
      if (token == 0) break;
      prefix.push_back(token);
    }
  }
  // per-tensor int8 round trip stays within half a quantization step
  std::mt19937_64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    int r = 1 + (int)(rng() % 8), c = 1 + (int)(rng() % 8);
    double mag = std::pow(10.0, (double)(rng() % 7) - 3.0);
    Mat w(r, c);
    std::uniform_real_distribution<double> dist(-mag, mag);
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < c; ++b) w(a, b) = dist(rng);
    auto q = nmt::quantize_tensor(w);
    double err = (w - nmt::dequantize_tensor(q)).cwiseAbs().maxCoeff();
    if (err > q.scale / 2 + 1e-12) {
      why = "quantization error " + std::to_string(err) + " exceeds scale/2 " +
            std::to_string(q.scale / 2) + " on tensor " + std::to_string(i);
      return false;
    }
  }
  // analytic gradient vs central finite differences
  for (bool aan : {false, true}) {
    ModelConfig cfg;
    cfg.model_dim = 16;
    cfg.attention_heads = 2;
    cfg.ffn_dim = 24;
    cfg.encoder_layers = 1;
    cfg.decoder_layers = 1;
    cfg.use_aan = aan;
    cfg.source_vocab = 9;
    cfg.target_vocab = 8;
    cfg.init_seed = 5;
    Params params = nmt::init_params(cfg);
    std::vector<nmt::ExamplePair> batch{
        {{3, 4, 5}, {2, 3}}, {{6, 7}, {4, 5, 6}}, {{8}, {7}}};
    Vec grad;
    nmt::loss_and_grad(params, batch, grad);
    std::mt19937_64 pick(17);
    const double h = 1e-5;
    for (int k = 0; k < 48; ++k) {
      long i = (long)(pick() % (std::uint64_t)params.flat.size());
      double saved = params.flat(i);
      params.flat(i) = saved + h;
      double up = nmt::loss_value(params, batch);
      params.flat(i) = saved - h;
      double down = nmt::loss_value(params, batch);
      params.flat(i) = saved;
      double fd = (up - down) / (2 * h);
      if (std::abs(grad(i) - fd) >
          1e-6 + 1e-3 * std::max(std::abs(grad(i)), std::abs(fd))) {
        why = "gradient mismatch at coordinate " + std::to_string(i) +
              (aan ? " (aan)" : " (std)") + ": analytic " +
              std::to_string(grad(i)) + " vs fd " + std::to_string(fd);
        return false;
      }
    }
  }
  return true;
}

bool check_bleu_reference_values(std::string& why) {
  std::vector<std::vector<std::string>> corpus{
      {"the", "cat", "sat", "on", "the", "mat"},
      {"astronomers", "measured", "the", "parallax"}};
  auto identity = metrics::corpus_bleu(corpus, corpus);
  if (std::abs(identity.score - 100.0) > 1e-9) {
    why = "identity corpus scored " + std::to_string(identity.score);
    return false;
  }
  std::vector<std::vector<std::string>> hyp{{"a", "b", "c", "d"}};
  std::vector<std::vector<std::string>> ref{{"a", "b", "c", "d", "e"}};
  auto brevity = metrics::corpus_bleu(hyp, ref);
  double expected = 100.0 * std::exp(-0.25);
  if (std::abs(brevity.score - expected) > 1e-3) {
    why = "short-hypothesis corpus scored " + std::to_string(brevity.score) +
          ", expected " + std::to_string(expected);
    return false;
  }
  return true;
}

bool check_end_to_end_experiment(std::string& why) {
  harness::ExperimentConfig cfg;
  cfg.templates_file = data_file("templates.txt");
  cfg.lexicon_file = data_file("lexicon.tsv");
  cfg.dictionary_file = data_file("dictionary.tsv");
  cfg.run_dir = std::filesystem::temp_directory_path() / "speedbias_acceptance";
  std::filesystem::remove_all(cfg.run_dir);

  auto specs = harness::enumerate_matrix();
  auto t0 = std::chrono::steady_clock::now();
  auto result = harness::run_experiment(cfg, specs, nullptr);
  auto artifacts = report::build_report(
      result.records, harness::baseline_spec().id());
  report::write_report(cfg.run_dir, artifacts);
  double wall = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  info("matrix wall time " + fmt1(wall) + "s for " +
       std::to_string(result.records.size()) + " runs");
  if (wall > 1800.0) {
    why = "experiment took " + fmt1(wall) + "s, budget is 1800s";
    return false;
  }
  if (result.failed != 0) {
    why = std::to_string(result.failed) + " runs failed";
    return false;
  }
  std::size_t expected_runs = specs.size() * cfg.seeds.size();
  if (result.records.size() != expected_runs) {
    why = std::to_string(result.records.size()) + " records, expected " +
          std::to_string(expected_runs);
    return false;
  }

  std::map<std::string, std::vector<metrics::RunRecord>> by_spec;
  for (const auto& rec : result.records)
    by_spec[rec.config.spec_id].push_back(rec);
  if (by_spec.size() != 56) {
    why = std::to_string(by_spec.size()) + " distinct specs, expected 56";
    return false;
  }
  std::map<std::string, metrics::AggregateRecord> aggs;
  for (const auto& [id, runs] : by_spec) {
    auto agg = metrics::average_runs(runs);
    if (agg.runs != (int)cfg.seeds.size()) {
      why = "spec " + id + " averaged over " + std::to_string(agg.runs) +
            " runs, expected " + std::to_string(cfg.seeds.size());
      return false;
    }
    aggs.emplace(id, std::move(agg));
  }

  const auto& base = aggs.at(harness::baseline_spec().id());
  if (!base.pro || !base.anti) {
    why = "baseline aggregate is missing pro/anti accuracy";
    return false;
  }
  info("baseline pro " + fmt1(base.pro->mean) + "% vs anti " +
       fmt1(base.anti->mean) + "% (mean over " +
       std::to_string(cfg.seeds.size()) + " seeds)");
  if (!(base.pro->mean > base.anti->mean)) {
    why = "baseline pro accuracy " + fmt1(base.pro->mean) +
          " does not exceed anti " + fmt1(base.anti->mean);
    return false;
  }
  if (base.delta) {
    auto stacked = harness::apply_stack(harness::baseline_spec(),
                                        harness::default_stack());
    const auto& last = aggs.at(stacked.back().id());
    if (last.delta)
      info("bias gap: baseline delta " + fmt1(base.delta->mean) +
           ", fully stacked delta " + fmt1(last.delta->mean) +
           " (recorded, not asserted)");
  }

  // table artifact: 56 data rows, every cell filled; the three delta
  // columns of the footer are the only undefined cells
  auto lines = split_lines(artifacts.markdown);
  long data_rows = 0;
  for (const auto& line : lines) {
    if (line.rfind("| (", 0) == 0) {
      ++data_rows;
      if (line.find("—") != std::string::npos) {
        why = "table row has an undefined cell: " + line;
        return false;
      }
    } else if (line.rfind("| max rel. % drop", 0) == 0) {
      if (count_occurrences(line, "—") != 3) {
        why = "footer should leave exactly the three delta cells undefined: " +
              line;
        return false;
      }
    }
  }
  if (data_rows != 56) {
    why = std::to_string(data_rows) + " table rows, expected 56";
    return false;
  }
  auto scatter_lines = split_lines(artifacts.scatter_csv);
  auto breakdown_lines = split_lines(artifacts.breakdown_csv);
  if (scatter_lines.size() != 1 + 55 * 3) {
    why = "scatter csv has " + std::to_string(scatter_lines.size()) +
          " lines, expected " + std::to_string(1 + 55 * 3);
    return false;
  }
  if (breakdown_lines.size() != 1 + 55 * 4) {
    why = "breakdown csv has " + std::to_string(breakdown_lines.size()) +
          " lines, expected " + std::to_string(1 + 55 * 4);
    return false;
  }
  if (artifacts.scatter_svg.find("<circle") == std::string::npos) {
    why = "scatter svg has no plotted points";
    return false;
  }
  for (const char* name : {"report.md", "scatter.csv", "scatter_breakdown.csv",
                           "scatter.svg", "summary.json"}) {
    if (!std::filesystem::exists(cfg.run_dir / name)) {
      why = std::string("missing artifact ") + name;
      return false;
    }
  }
  return true;
}

bool check_feminine_never_matches_masculine(std::string& why) {
  auto dict = eval::GenderDictionary::load(data_file("dictionary.tsv"), "de");
  std::ifstream in(data_file("dictionary.tsv"));
  std::string line;
  std::getline(in, line);  // header
  long checked = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 6) {
      why = "unparseable dictionary row: " + line;
      return false;
    }
    gen::TestItem item;
    item.occupation_lemma = cols[0];
    item.occupation_number =
        cols[1] == "sg" ? gen::Number::Singular : gen::Number::Plural;
    item.context_gender = gen::Gender::Masculine;
    item.stereotype_gender = gen::Gender::Masculine;
    item.category = gen::Category::MOMC;
    std::stringstream forms(cols[5]);
    std::string fem;
    while (std::getline(forms, fem, '|')) {
      for (const std::string& text : {fem, "Die " + fem + " ist hier."}) {
        auto out = eval::judge(item, text, dict);
        if (out.verdict == eval::Verdict::Correct ||
            out.reason == eval::Reason::ExpectedFormFound) {
          why = "feminine form '" + fem + "' of '" + cols[0] +
                "' was accepted as a masculine match";
          return false;
        }
      }
      ++checked;
    }
  }
  if (checked < 20) {
    why = "only " + std::to_string(checked) +
          " feminine forms checked; dictionary looks truncated";
    return false;
  }
  return true;
}

}  // namespace

int main() {
  criterion("gender-judgement-goldens", check_judgement_goldens);
  criterion("relative-drop-and-scatter-footer", check_relative_drop_and_scatter);
  criterion("delta-recomputation", check_delta_recomputation);
  criterion("optimization-matrix-cardinality", check_matrix_cardinality);
  criterion("test-set-category-counts", check_category_counts);
  criterion("beam-search-properties", check_beam_search_properties);
  criterion("incremental-quantization-gradient-fidelity",
            check_incremental_quant_gradients);
  criterion("bleu-reference-values", check_bleu_reference_values);
  criterion("end-to-end-experiment-matrix", check_end_to_end_experiment);
  criterion("feminine-forms-never-match-masculine",
            check_feminine_never_matches_masculine);
  if (failures == 0)
    std::printf("all criteria passed\n");
  else
    std::printf("%d criteria failed\n", failures);
  return failures;
}
