#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "speedbias/bpe.hpp"
#include "speedbias/checkpoint.hpp"
#include "speedbias/decode.hpp"
#include "speedbias/errors.hpp"
#include "speedbias/gender_eval.hpp"
#include "speedbias/generation.hpp"
#include "speedbias/harness.hpp"
#include "speedbias/metrics.hpp"
#include "speedbias/quantize.hpp"
#include "speedbias/report.hpp"
#include "speedbias/train.hpp"

namespace fs = std::filesystem;
using namespace speedbias;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::istream* in = &std::cin;
  std::ifstream file;
  if (path != "-") {
    file.open(path);
    if (!file) throw DataError("cannot open " + path);
    in = &file;
  }
  std::string line;
  while (std::getline(*in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

harness::ExperimentConfig config_from(const std::string& config_path,
                                      const std::string& run_dir_override) {
  harness::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = harness::read_config_file(config_path);
  if (!run_dir_override.empty()) cfg.run_dir = run_dir_override;
  return cfg;
}

std::vector<harness::StackStep> parse_steps(const std::string& csv) {
  std::vector<harness::StackStep> steps;
  std::stringstream ss(csv);
  std::string part;
  while (std::getline(ss, part, ','))
    if (!part.empty()) {
      // layer steps carry their own comma: rejoin "layers=E" with "D"
      if (part.rfind("layers=", 0) == 0 && part.find_first_of("0123456789") !=
                                               std::string::npos) {
        std::string next;
        if (std::getline(ss, next, ','))
          part += "," + next;
      }
      steps.push_back(harness::parse_stack_step(part));
    }
  return steps;
}

nlohmann::ordered_json counts_json(const eval::CategoryCounts& c) {
  nlohmann::ordered_json j;
  j["correct"] = c.correct;
  j["incorrect"] = c.incorrect;
  j["inconclusive"] = c.inconclusive;
  return j;
}

nlohmann::ordered_json accuracies_json(const metrics::CategoryAccuracies& a) {
  nlohmann::ordered_json j;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v)
      j[key] = *v;
    else
      j[key] = nullptr;
  };
  put("pro", a.pro);
  put("anti", a.anti);
  put("fofc", a.fofc);
  put("mofc", a.mofc);
  put("momc", a.momc);
  put("fomc", a.fomc);
  return j;
}

void run_and_report(const harness::ExperimentConfig& cfg,
                    const std::vector<harness::OptimizationSpec>& specs,
                    const std::vector<std::string>& row_order,
                    const char* report_subdir) {
  harness::ExperimentResult result = harness::run_experiment(cfg, specs, &std::cerr);
  std::cerr << "runs: " << result.executed << " executed, " << result.skipped
            << " reused, " << result.failed << " failed\n";
  report::ReportArtifacts artifacts = report::build_report(
      result.records, harness::baseline_spec().id(), row_order);
  fs::path out_dir = cfg.run_dir / report_subdir;
  report::write_report(out_dir, artifacts);
  std::cout << "records: " << (cfg.run_dir / "records").string() << "\n";
  std::cout << "report:  " << out_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale NMT speed-optimization vs. gender-accuracy harness"};
  app.require_subcommand(1);
  std::function<void()> action;

  // generate
  auto* gen_cmd =
      app.add_subcommand("generate", "Expand the gender test set to JSONL");
  std::string gen_templates = "data/templates.txt";
  std::string gen_lexicon = "data/lexicon.tsv";
  std::string gen_out = "-";
  gen_cmd->add_option("--templates", gen_templates, "Templates file")
      ->capture_default_str();
  gen_cmd->add_option("--lexicon", gen_lexicon, "Keyword lexicon file")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "Output JSONL file ('-' for stdout)")
      ->capture_default_str();
  gen_cmd->callback([&] {
    action = [&] {
      auto templates = gen::load_templates(gen_templates);
      auto lexicon = gen::Lexicon::load(gen_lexicon);
      auto items = gen::generate_corpus(templates, lexicon);
      if (gen_out == "-") {
        gen::write_corpus_jsonl(std::cout, items);
      } else {
        gen::write_corpus_jsonl(fs::path(gen_out), items);
      }
      long per[4] = {0, 0, 0, 0};
      for (const auto& item : items) ++per[static_cast<int>(item.category)];
      std::cerr << "items: " << items.size() << " (momc " << per[0] << ", mofc "
                << per[1] << ", fofc " << per[2] << ", fomc " << per[3]
                << ")\n";
    };
  });

  // train
  auto* train_cmd =
      app.add_subcommand("train", "Train one checkpoint for a spec and seed");
  std::string train_config, train_run_dir;
  std::string train_spec = harness::baseline_spec().id();
  std::int64_t train_seed = -1;
  train_cmd->add_option("--config", train_config, "Experiment config file");
  train_cmd->add_option("--run-dir", train_run_dir, "Override run directory");
  train_cmd->add_option("--spec", train_spec, "Optimization spec id")
      ->capture_default_str();
  train_cmd->add_option("--seed", train_seed,
                        "Training seed (default: first config seed)");
  train_cmd->callback([&] {
    action = [&] {
      harness::ExperimentConfig cfg = config_from(train_config, train_run_dir);
      harness::OptimizationSpec spec = harness::spec_from_id(train_spec);
      std::uint64_t seed =
          train_seed < 0 ? cfg.seeds.front() : static_cast<std::uint64_t>(train_seed);
      harness::PreparedData data = harness::prepare_data(cfg);
      nmt::ModelConfig mc;
      mc.encoder_layers = spec.layers.encoder;
      mc.decoder_layers = spec.layers.decoder;
      mc.model_dim = cfg.model_dim;
      mc.attention_heads = cfg.attention_heads;
      mc.ffn_dim = cfg.ffn_dim;
      mc.use_aan = spec.use_aan;
      mc.source_vocab = data.source_bpe.vocab_size();
      mc.target_vocab = data.target_bpe.vocab_size();
      mc.init_seed = seed;
      nmt::Params params = nmt::init_params(mc);
      nmt::TrainOptions opts;
      opts.steps = cfg.train_steps;
      opts.batch_size = cfg.batch_size;
      opts.learning_rate = cfg.learning_rate;
      opts.warmup_steps = cfg.warmup_steps;
      opts.divergence_loss = cfg.divergence_loss;
      opts.sampler_seed = seed;
      opts.log_every = 50;
      opts.log = &std::cerr;
      nmt::TrainResult tr = nmt::train_model(params, data.train_pairs, opts);
      fs::create_directories(cfg.run_dir / "checkpoints");
      std::ostringstream name;
      name << "e" << spec.layers.encoder << "d" << spec.layers.decoder << "-"
           << (spec.use_aan ? "aan" : "std") << "-s" << seed << ".ckpt";
      fs::path out = cfg.run_dir / "checkpoints" / name.str();
      nmt::save_checkpoint(out, params, false);
      data.source_bpe.save(cfg.run_dir / "source.bpe");
      data.target_bpe.save(cfg.run_dir / "target.bpe");
      std::cerr << "loss " << tr.first_loss << " -> " << tr.final_loss << " over "
                << tr.steps_completed << " steps\n";
      std::cout << out.string() << "\n";
    };
  });

  // decode
  auto* dec_cmd = app.add_subcommand("decode", "Translate lines with a checkpoint");
  std::string dec_ckpt, dec_src_bpe, dec_tgt_bpe;
  std::string dec_input = "-";
  int dec_beam = 5, dec_max_len = 32;
  bool dec_quant = false;
  dec_cmd->add_option("--checkpoint", dec_ckpt, "Checkpoint file")->required();
  dec_cmd->add_option("--source-bpe", dec_src_bpe, "Source BPE model")->required();
  dec_cmd->add_option("--target-bpe", dec_tgt_bpe, "Target BPE model")->required();
  dec_cmd->add_option("--input", dec_input, "Source text file ('-' for stdin)")
      ->capture_default_str();
  dec_cmd->add_option("--beam", dec_beam, "Beam size")->capture_default_str();
  dec_cmd->add_option("--max-len", dec_max_len, "Maximum output tokens")
      ->capture_default_str();
  dec_cmd->add_flag("--quantize", dec_quant,
                    "Round-trip the weights through int8 before decoding");
  dec_cmd->callback([&] {
    action = [&] {
      if (dec_beam < 1) throw UsageError("--beam must be >= 1");
      if (dec_max_len < 1) throw UsageError("--max-len must be >= 1");
      auto loaded = nmt::load_checkpoint(dec_ckpt);
      nmt::Params params = std::move(loaded.params);
      if (dec_quant) params = nmt::quantize_params(params);
      auto src_bpe = nmt::BpeModel::load(dec_src_bpe);
      auto tgt_bpe = nmt::BpeModel::load(dec_tgt_bpe);
      for (const std::string& line : read_lines(dec_input)) {
        nmt::DecodeResult res =
            nmt::decode(params, src_bpe.encode(line), dec_beam, dec_max_len);
        std::cout << tgt_bpe.decode(res.tokens) << "\n";
      }
    };
  });

  // evaluate
  auto* eval_cmd =
      app.add_subcommand("evaluate", "Judge translations against the dictionary");
  std::string eval_items, eval_translations, eval_dict, eval_outcomes;
  std::string eval_language = "es";
  eval_cmd->add_option("--items", eval_items, "Test items JSONL")->required();
  eval_cmd->add_option("--translations", eval_translations,
                       "Translations, one line per item")
      ->required();
  eval_cmd->add_option("--dictionary", eval_dict, "Gendered-form dictionary TSV")
      ->required();
  eval_cmd->add_option("--language", eval_language, "Dictionary language column")
      ->capture_default_str();
  eval_cmd->add_option("--outcomes", eval_outcomes,
                       "Optional per-item outcomes JSONL output");
  eval_cmd->callback([&] {
    action = [&] {
      auto items = gen::read_corpus_jsonl(fs::path(eval_items));
      auto translations = read_lines(eval_translations);
      auto dict = eval::GenderDictionary::load(eval_dict, eval_language);
      eval::CorpusEvaluation ev = eval::evaluate_corpus(items, translations, dict);
      if (!eval_outcomes.empty())
        eval::write_outcomes_jsonl(fs::path(eval_outcomes), ev.outcomes);
      nlohmann::ordered_json out;
      nlohmann::ordered_json tally;
      tally["momc"] = counts_json(ev.tally.momc);
      tally["mofc"] = counts_json(ev.tally.mofc);
      tally["fofc"] = counts_json(ev.tally.fofc);
      tally["fomc"] = counts_json(ev.tally.fomc);
      out["tally"] = tally;
      metrics::CategoryAccuracies acc = metrics::accuracy_table(ev.tally);
      out["accuracies"] = accuracies_json(acc);
      out["accuracies_strict"] =
          accuracies_json(metrics::accuracy_table_excluding_inconclusive(ev.tally));
      if (acc.pro && acc.anti && acc.fofc && acc.mofc && acc.momc && acc.fomc) {
        metrics::DeltaReport d = metrics::deltas(acc);
        nlohmann::ordered_json jd;
        jd["delta"] = d.delta;
        jd["delta_fc"] = d.delta_fc;
        jd["delta_mc"] = d.delta_mc;
        out["deltas"] = jd;
      } else {
        out["deltas"] = nullptr;
      }
      std::cout << out.dump(2) << "\n";
    };
  });

  // bleu
  auto* bleu_cmd = app.add_subcommand("bleu", "Corpus BLEU of two aligned files");
  std::string bleu_hyp, bleu_ref;
  bleu_cmd->add_option("--hypotheses", bleu_hyp, "Hypothesis file")->required();
  bleu_cmd->add_option("--references", bleu_ref, "Reference file")->required();
  bleu_cmd->callback([&] {
    action = [&] {
      auto hyp_lines = read_lines(bleu_hyp);
      auto ref_lines = read_lines(bleu_ref);
      if (hyp_lines.size() != ref_lines.size())
        throw DataError("hypothesis/reference line counts differ");
      std::vector<std::vector<std::string>> hyp, ref;
      for (const auto& l : hyp_lines) hyp.push_back(eval::normalize(l));
      for (const auto& l : ref_lines) ref.push_back(eval::normalize(l));
      metrics::BleuReport r = metrics::corpus_bleu(hyp, ref);
      nlohmann::ordered_json j;
      j["score"] = r.score;
      j["precisions"] = r.precisions;
      j["brevity_penalty"] = r.brevity_penalty;
      j["hyp_length"] = r.hyp_length;
      j["ref_length"] = r.ref_length;
      std::cout << j.dump(2) << "\n";
    };
  });

  // matrix
  auto* matrix_cmd =
      app.add_subcommand("matrix", "List the optimization matrix specs");
  bool matrix_explain = false;
  matrix_cmd->add_flag("--explain", matrix_explain,
                       "Print the default configuration document instead");
  matrix_cmd->callback([&] {
    action = [&] {
      if (matrix_explain) {
        std::cout << "# experiment configuration defaults\n";
        harness::write_config(std::cout, harness::ExperimentConfig{});
        std::cout << "# default stack:";
        for (const auto& step : harness::default_stack())
          std::cout << " " << step.name();
        std::cout << "\n";
        return;
      }
      auto specs = harness::enumerate_matrix();
      for (const auto& spec : specs)
        std::cout << spec.id() << "\t" << spec.label() << "\n";
      std::cerr << specs.size() << " specs\n";
    };
  });

  // run
  auto* run_cmd = app.add_subcommand("run", "Run the full matrix experiment");
  std::string run_config, run_run_dir;
  run_cmd->add_option("--config", run_config, "Experiment config file");
  run_cmd->add_option("--run-dir", run_run_dir, "Override run directory");
  run_cmd->callback([&] {
    action = [&] {
      harness::ExperimentConfig cfg = config_from(run_config, run_run_dir);
      run_and_report(cfg, harness::enumerate_matrix(), {}, "report");
    };
  });

  // stack
  auto* stack_cmd =
      app.add_subcommand("stack", "Run a stacked-optimization sequence");
  std::string stack_config, stack_run_dir;
  std::string stack_steps = "beam=1,aan,layers=10,2,layers=6,2,quant";
  stack_cmd->add_option("--config", stack_config, "Experiment config file");
  stack_cmd->add_option("--run-dir", stack_run_dir, "Override run directory");
  stack_cmd->add_option("--steps", stack_steps,
                        "Comma-separated plan (beam=N, aan, quant, layers=E,D)")
      ->capture_default_str();
  stack_cmd->callback([&] {
    action = [&] {
      harness::ExperimentConfig cfg = config_from(stack_config, stack_run_dir);
      auto specs =
          harness::apply_stack(harness::baseline_spec(), parse_steps(stack_steps));
      std::vector<harness::OptimizationSpec> unique;
      std::vector<std::string> order;
      for (const auto& spec : specs) {
        std::string id = spec.id();
        if (std::find(order.begin(), order.end(), id) == order.end()) {
          order.push_back(id);
          unique.push_back(spec);
        }
      }
      run_and_report(cfg, unique, order, "report-stack");
    };
  });

  // report
  auto* report_cmd =
      app.add_subcommand("report", "Rebuild report artifacts from records");
  std::string report_run_dir, report_out, report_rows;
  std::string report_baseline = harness::baseline_spec().id();
  report_cmd->add_option("--run-dir", report_run_dir, "Run directory")->required();
  report_cmd->add_option("--baseline", report_baseline, "Baseline spec id")
      ->capture_default_str();
  report_cmd->add_option("--out", report_out,
                         "Output directory (default: <run-dir>/report)");
  report_cmd->add_option("--rows", report_rows,
                         "Comma-separated spec ids fixing the row order");
  report_cmd->callback([&] {
    action = [&] {
      auto records = harness::load_records(report_run_dir);
      std::vector<std::string> rows;
      std::stringstream ss(report_rows);
      std::string part;
      while (std::getline(ss, part, ','))
        if (!part.empty()) rows.push_back(part);
      report::ReportArtifacts artifacts =
          report::build_report(records, report_baseline, rows);
      fs::path out = report_out.empty() ? fs::path(report_run_dir) / "report"
                                        : fs::path(report_out);
      report::write_report(out, artifacts);
      std::cout << out.string() << "\n";
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    action();
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const RunError& e) {
    std::cerr << "run error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
