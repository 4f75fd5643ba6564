#include "speedbias/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "speedbias/checkpoint.hpp"
#include "speedbias/decode.hpp"
#include "speedbias/errors.hpp"
#include "speedbias/quantize.hpp"
#include "speedbias/timing.hpp"
#include "speedbias/train.hpp"

namespace fs = std::filesystem;

namespace speedbias::harness {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::string fnv_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string OptimizationSpec::id() const {
  std::ostringstream os;
  os << "e" << layers.encoder << "d" << layers.decoder << "-"
     << (use_aan ? "aan" : "std") << "-" << (quantized ? "int8" : "fp") << "-b"
     << beam_size;
  return os.str();
}

std::string OptimizationSpec::label() const {
  std::ostringstream os;
  os << "(" << layers.encoder << "," << layers.decoder << ")";
  if (use_aan) os << " aan";
  if (quantized) os << " int8";
  os << " bs=" << beam_size;
  return os.str();
}

OptimizationSpec baseline_spec() { return OptimizationSpec{}; }

OptimizationSpec spec_from_id(const std::string& id) {
  auto fail = [&] { return DataError("malformed spec id '" + id + "'"); };
  std::vector<std::string> parts;
  std::stringstream ss(id);
  std::string part;
  while (std::getline(ss, part, '-')) parts.push_back(part);
  if (parts.size() != 4) throw fail();
  OptimizationSpec spec;
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      int v = std::stoi(s, &used);
      if (used != s.size() || v < 1) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw fail();
    }
  };
  const std::string& lc = parts[0];
  std::size_t d = lc.find('d');
  if (lc.size() < 4 || lc[0] != 'e' || d == std::string::npos) throw fail();
  spec.layers.encoder = number(lc.substr(1, d - 1));
  spec.layers.decoder = number(lc.substr(d + 1));
  if (parts[1] == "aan")
    spec.use_aan = true;
  else if (parts[1] != "std")
    throw fail();
  if (parts[2] == "int8")
    spec.quantized = true;
  else if (parts[2] != "fp")
    throw fail();
  if (parts[3].size() < 2 || parts[3][0] != 'b') throw fail();
  spec.beam_size = number(parts[3].substr(1));
  return spec;
}

std::vector<LayerConfig> default_layer_grid() {
  return {{6, 6}, {8, 4}, {10, 2}, {11, 1}, {6, 4}, {6, 2}, {6, 1}};
}

std::vector<OptimizationSpec> enumerate_matrix(const std::vector<LayerConfig>& grid) {
  std::vector<OptimizationSpec> specs;
  specs.reserve(grid.size() * 8);
  for (const LayerConfig& layers : grid)
    for (bool aan : {false, true})
      for (bool quant : {false, true})
        for (int beam : {5, 1})
          specs.push_back(OptimizationSpec{layers, aan, quant, beam});
  return specs;
}

std::string StackStep::name() const {
  if (beam_size) return "bs=" + std::to_string(*beam_size);
  if (set_aan) return "aan";
  if (set_quantized) return "quant";
  if (layers)
    return "layers=(" + std::to_string(layers->encoder) + "," +
           std::to_string(layers->decoder) + ")";
  return "noop";
}

StackStep parse_stack_step(const std::string& text) {
  std::string t = trim(text);
  StackStep step;
  if (t == "aan") {
    step.set_aan = true;
    return step;
  }
  if (t == "quant") {
    step.set_quantized = true;
    return step;
  }
  auto numeric = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw DataError("stack step '" + text + "': bad number '" + s + "'");
    }
  };
  if (t.rfind("beam=", 0) == 0 || t.rfind("bs=", 0) == 0) {
    step.beam_size = numeric(t.substr(t.find('=') + 1));
    if (*step.beam_size < 1)
      throw DataError("stack step '" + text + "': beam size must be >= 1");
    return step;
  }
  if (t.rfind("layers=", 0) == 0) {
    std::string rest = t.substr(7);
    std::size_t comma = rest.find(',');
    if (comma == std::string::npos)
      throw DataError("stack step '" + text + "': expected layers=E,D");
    LayerConfig lc;
    lc.encoder = numeric(trim(rest.substr(0, comma)));
    lc.decoder = numeric(trim(rest.substr(comma + 1)));
    if (lc.encoder < 1 || lc.decoder < 1)
      throw DataError("stack step '" + text + "': layer counts must be >= 1");
    step.layers = lc;
    return step;
  }
  throw DataError("unknown stack step '" + text +
                  "' (expected beam=N, aan, quant or layers=E,D)");
}

std::vector<StackStep> default_stack() {
  return {parse_stack_step("beam=1"), parse_stack_step("aan"),
          parse_stack_step("layers=10,2"), parse_stack_step("layers=6,2"),
          parse_stack_step("quant")};
}

std::vector<OptimizationSpec> apply_stack(const OptimizationSpec& base,
                                          const std::vector<StackStep>& steps) {
  std::vector<OptimizationSpec> specs;
  specs.reserve(steps.size() + 1);
  OptimizationSpec cur = base;
  specs.push_back(cur);
  for (const StackStep& step : steps) {
    if (step.beam_size) cur.beam_size = *step.beam_size;
    if (step.set_aan) cur.use_aan = true;
    if (step.set_quantized) cur.quantized = true;
    if (step.layers) cur.layers = *step.layers;
    specs.push_back(cur);
  }
  return specs;
}

void ExperimentConfig::validate() const {
  if (language.empty()) throw DataError("config: language must be set");
  if (bias_ratio < 0.0 || bias_ratio > 1.0)
    throw DataError("config: bias_ratio must be in [0,1]");
  if (corpus_size == 0) throw DataError("config: corpus_size must be positive");
  if (template_fold < 2) throw DataError("config: template_fold must be >= 2");
  if (eval_max_items == 0)
    throw DataError("config: eval_max_items must be positive");
  if (model_dim <= 0 || attention_heads <= 0 || ffn_dim <= 0)
    throw DataError("config: model dimensions must be positive");
  if (model_dim % attention_heads != 0)
    throw DataError("config: model_dim must be divisible by attention_heads");
  if (bpe_merges < 0) throw DataError("config: bpe_merges must be >= 0");
  if (train_steps < 0) throw DataError("config: train_steps must be >= 0");
  if (batch_size <= 0) throw DataError("config: batch_size must be positive");
  if (learning_rate <= 0) throw DataError("config: learning_rate must be positive");
  if (warmup_steps < 0) throw DataError("config: warmup_steps must be >= 0");
  if (seeds.empty()) throw DataError("config: seeds must be non-empty");
  if (max_len < 1) throw DataError("config: max_len must be >= 1");
  if (timing_warmup < 0) throw DataError("config: timing_warmup must be >= 0");
  if (timing_repetitions < 1)
    throw DataError("config: timing_repetitions must be >= 1");
}

std::string ExperimentConfig::hash() const {
  std::ostringstream os;
  os << templates_file.string() << "\n"
     << lexicon_file.string() << "\n"
     << dictionary_file.string() << "\n"
     << language << "\n"
     << format_double(bias_ratio) << "\n"
     << corpus_size << "\n"
     << template_fold << "\n"
     << corpus_seed << "\n"
     << eval_max_items << "\n"
     << model_dim << "\n"
     << attention_heads << "\n"
     << ffn_dim << "\n"
     << bpe_merges << "\n"
     << train_steps << "\n"
     << batch_size << "\n"
     << format_double(learning_rate) << "\n"
     << warmup_steps << "\n"
     << format_double(divergence_loss) << "\n"
     << max_len << "\n";
  return fnv_hex(os.str());
}

void write_config(std::ostream& out, const ExperimentConfig& cfg) {
  out << "config_version = 1\n";
  out << "templates_file = " << cfg.templates_file.string() << "\n";
  out << "lexicon_file = " << cfg.lexicon_file.string() << "\n";
  out << "dictionary_file = " << cfg.dictionary_file.string() << "\n";
  out << "language = " << cfg.language << "\n";
  out << "bias_ratio = " << format_double(cfg.bias_ratio) << "\n";
  out << "corpus_size = " << cfg.corpus_size << "\n";
  out << "template_fold = " << cfg.template_fold << "\n";
  out << "corpus_seed = " << cfg.corpus_seed << "\n";
  out << "eval_max_items = " << cfg.eval_max_items << "\n";
  out << "model_dim = " << cfg.model_dim << "\n";
  out << "attention_heads = " << cfg.attention_heads << "\n";
  out << "ffn_dim = " << cfg.ffn_dim << "\n";
  out << "bpe_merges = " << cfg.bpe_merges << "\n";
  out << "train_steps = " << cfg.train_steps << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "learning_rate = " << format_double(cfg.learning_rate) << "\n";
  out << "warmup_steps = " << cfg.warmup_steps << "\n";
  out << "divergence_loss = " << format_double(cfg.divergence_loss) << "\n";
  std::string seeds;
  for (std::uint64_t s : cfg.seeds)
    seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  out << "seeds = " << seeds << "\n";
  out << "max_len = " << cfg.max_len << "\n";
  out << "timing_warmup = " << cfg.timing_warmup << "\n";
  out << "timing_repetitions = " << cfg.timing_repetitions << "\n";
  out << "run_dir = " << cfg.run_dir.string() << "\n";
}

ExperimentConfig read_config(std::istream& in, const std::string& origin) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw DataError(where + ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    auto as_ll = [&](long long lo) {
      try {
        std::size_t used = 0;
        long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        if (v < lo) throw std::out_of_range(value);
        return v;
      } catch (const std::exception&) {
        throw DataError(where + ": bad value '" + value + "' for " + key);
      }
    };
    auto as_double = [&]() {
      try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw DataError(where + ": bad value '" + value + "' for " + key);
      }
    };
    if (key == "config_version") {
      if (as_ll(0) != 1)
        throw DataError(where + ": unsupported config_version " + value);
    } else if (key == "templates_file") {
      cfg.templates_file = value;
    } else if (key == "lexicon_file") {
      cfg.lexicon_file = value;
    } else if (key == "dictionary_file") {
      cfg.dictionary_file = value;
    } else if (key == "language") {
      cfg.language = value;
    } else if (key == "bias_ratio") {
      cfg.bias_ratio = as_double();
    } else if (key == "corpus_size") {
      cfg.corpus_size = static_cast<std::size_t>(as_ll(0));
    } else if (key == "template_fold") {
      cfg.template_fold = static_cast<int>(as_ll(0));
    } else if (key == "corpus_seed") {
      cfg.corpus_seed = static_cast<std::uint64_t>(as_ll(0));
    } else if (key == "eval_max_items") {
      cfg.eval_max_items = static_cast<std::size_t>(as_ll(0));
    } else if (key == "model_dim") {
      cfg.model_dim = static_cast<int>(as_ll(0));
    } else if (key == "attention_heads") {
      cfg.attention_heads = static_cast<int>(as_ll(0));
    } else if (key == "ffn_dim") {
      cfg.ffn_dim = static_cast<int>(as_ll(0));
    } else if (key == "bpe_merges") {
      cfg.bpe_merges = static_cast<int>(as_ll(0));
    } else if (key == "train_steps") {
      cfg.train_steps = static_cast<int>(as_ll(0));
    } else if (key == "batch_size") {
      cfg.batch_size = static_cast<int>(as_ll(0));
    } else if (key == "learning_rate") {
      cfg.learning_rate = as_double();
    } else if (key == "warmup_steps") {
      cfg.warmup_steps = static_cast<int>(as_ll(0));
    } else if (key == "divergence_loss") {
      cfg.divergence_loss = as_double();
    } else if (key == "seeds") {
      cfg.seeds.clear();
      std::stringstream ss(value);
      std::string part;
      while (std::getline(ss, part, ',')) {
        part = trim(part);
        try {
          std::size_t used = 0;
          long long v = std::stoll(part, &used);
          if (used != part.size() || v < 0) throw std::invalid_argument(part);
          cfg.seeds.push_back(static_cast<std::uint64_t>(v));
        } catch (const std::exception&) {
          throw DataError(where + ": bad seed '" + part + "'");
        }
      }
      if (cfg.seeds.empty()) throw DataError(where + ": seeds list is empty");
    } else if (key == "max_len") {
      cfg.max_len = static_cast<int>(as_ll(0));
    } else if (key == "timing_warmup") {
      cfg.timing_warmup = static_cast<int>(as_ll(0));
    } else if (key == "timing_repetitions") {
      cfg.timing_repetitions = static_cast<int>(as_ll(0));
    } else if (key == "run_dir") {
      cfg.run_dir = value;
    } else {
      throw DataError(where + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig read_config_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open config file " + file.string());
  return read_config(in, file.string());
}

namespace {

void count_words(const std::string& text, std::map<std::string, long>& counts) {
  std::stringstream ss(text);
  std::string w;
  while (ss >> w) ++counts[w];
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  auto templates = gen::load_templates(cfg.templates_file);
  auto lexicon = gen::Lexicon::load(cfg.lexicon_file);
  PreparedData data;
  data.dictionary = eval::GenderDictionary::load(cfg.dictionary_file, cfg.language);

  auto corpus = gen::generate_corpus(templates, lexicon);
  toy::ToyTranslator translator(lexicon, data.dictionary);
  auto missing = translator.unmapped_words(corpus);
  if (!missing.empty()) {
    std::string list;
    for (const std::string& w : missing) list += (list.empty() ? "" : ", ") + w;
    throw DataError("toy translator lacks mappings for: " + list);
  }

  toy::SplitItems split = toy::split_by_template(corpus, cfg.template_fold);
  auto train_items =
      toy::sample_biased(split.train, cfg.corpus_size, cfg.bias_ratio, cfg.corpus_seed);
  auto train_text = toy::make_parallel(train_items, translator);

  data.test_items = toy::stratified_cap(split.test, cfg.eval_max_items);
  data.references.reserve(data.test_items.size());
  for (const gen::TestItem& item : data.test_items)
    data.references.push_back(translator.translate(item));

  std::map<std::string, long> src_counts, tgt_counts;
  for (const auto& [src, tgt] : train_text) {
    count_words(src, src_counts);
    count_words(tgt, tgt_counts);
  }
  data.source_bpe = nmt::BpeModel::learn(src_counts, cfg.bpe_merges);
  data.target_bpe = nmt::BpeModel::learn(tgt_counts, cfg.bpe_merges);

  data.train_pairs.reserve(train_text.size());
  for (const auto& [src, tgt] : train_text)
    data.train_pairs.push_back(
        {data.source_bpe.encode(src), data.target_bpe.encode(tgt)});
  data.test_sources.reserve(data.test_items.size());
  for (const gen::TestItem& item : data.test_items)
    data.test_sources.push_back(data.source_bpe.encode(item.source));
  return data;
}

namespace {

std::string checkpoint_name(const LayerConfig& layers, bool use_aan,
                            std::uint64_t seed) {
  std::ostringstream os;
  os << "e" << layers.encoder << "d" << layers.decoder << "-"
     << (use_aan ? "aan" : "std") << "-s" << seed << ".ckpt";
  return os.str();
}

void write_record_atomic(const fs::path& file, const metrics::RunRecord& rec) {
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw RunError("cannot write record file " + tmp.string());
    out << metrics::to_json(rec).dump(2) << "\n";
    if (!out) throw RunError("failed writing record file " + tmp.string());
  }
  fs::rename(tmp, file);
}

metrics::RunConfigSummary summarize(const OptimizationSpec& spec) {
  metrics::RunConfigSummary s;
  s.encoder_layers = spec.layers.encoder;
  s.decoder_layers = spec.layers.decoder;
  s.use_aan = spec.use_aan;
  s.quantized = spec.quantized;
  s.beam_size = spec.beam_size;
  s.spec_id = spec.id();
  return s;
}

metrics::RunRecord execute_run(const ExperimentConfig& cfg, const PreparedData& data,
                               const OptimizationSpec& spec, std::uint64_t seed,
                               const fs::path& checkpoint_dir, std::ostream* log) {
  metrics::RunRecord rec;
  rec.run_id = spec.id() + "-s" + std::to_string(seed);
  rec.config = summarize(spec);
  rec.seed = seed;
  auto wall0 = std::chrono::steady_clock::now();
  try {
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

    fs::path ckpt = checkpoint_dir / checkpoint_name(spec.layers, spec.use_aan, seed);
    nmt::Params params = [&] {
      if (fs::exists(ckpt)) return nmt::load_checkpoint(ckpt, mc).params;
      if (log)
        *log << "[train] " << ckpt.filename().string() << " (" << cfg.train_steps
             << " steps)\n";
      nmt::Params fresh = nmt::init_params(mc);
      nmt::TrainOptions topt;
      topt.steps = cfg.train_steps;
      topt.batch_size = cfg.batch_size;
      topt.learning_rate = cfg.learning_rate;
      topt.warmup_steps = cfg.warmup_steps;
      topt.divergence_loss = cfg.divergence_loss;
      topt.sampler_seed = seed;
      nmt::train_model(fresh, data.train_pairs, topt);
      nmt::save_checkpoint(ckpt, fresh, false);
      return fresh;
    }();
    if (spec.quantized) params = nmt::quantize_params(params);

    nmt::TimingOptions topts;
    topts.warmup_passes = cfg.timing_warmup;
    topts.repetitions = cfg.timing_repetitions;
    topts.beam_size = spec.beam_size;
    topts.max_len = cfg.max_len;
    nmt::TimedDecode timed = nmt::time_decode(params, data.test_sources, topts);

    std::vector<std::string> translations;
    translations.reserve(timed.outputs.size());
    for (const std::vector<int>& ids : timed.outputs)
      translations.push_back(data.target_bpe.decode(ids));

    eval::CorpusEvaluation ev =
        eval::evaluate_corpus(data.test_items, translations, data.dictionary);
    rec.tally = ev.tally;
    rec.accuracies = metrics::accuracy_table(ev.tally);
    rec.accuracies_strict = metrics::accuracy_table_excluding_inconclusive(ev.tally);
    const metrics::CategoryAccuracies& a = rec.accuracies;
    if (a.pro && a.anti && a.fofc && a.mofc && a.momc && a.fomc)
      rec.delta_report = metrics::deltas(a);

    std::vector<std::vector<std::string>> hyp_tokens, ref_tokens;
    hyp_tokens.reserve(translations.size());
    ref_tokens.reserve(translations.size());
    for (std::size_t i = 0; i < translations.size(); ++i) {
      hyp_tokens.push_back(eval::normalize(translations[i]));
      ref_tokens.push_back(eval::normalize(data.references[i]));
    }
    rec.bleu = metrics::corpus_bleu(hyp_tokens, ref_tokens);
    rec.decode_time_seconds = timed.seconds;
    rec.status = "complete";
  } catch (const std::exception& e) {
    metrics::RunRecord failed;
    failed.run_id = rec.run_id;
    failed.config = rec.config;
    failed.seed = seed;
    failed.status = "failed";
    failed.error = e.what();
    rec = failed;
  }
  rec.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return rec;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::vector<OptimizationSpec>& specs,
                                std::ostream* log) {
  cfg.validate();
  if (specs.empty()) throw DataError("run_experiment: no specs given");
  fs::create_directories(cfg.run_dir / "records");
  fs::create_directories(cfg.run_dir / "checkpoints");

  // Guard against resuming into a directory produced by different settings.
  fs::path cfg_file = cfg.run_dir / "config.txt";
  if (fs::exists(cfg_file)) {
    ExperimentConfig existing = read_config_file(cfg_file);
    if (existing.hash() != cfg.hash())
      throw DataError("run directory " + cfg.run_dir.string() +
                      " was created with a different configuration");
  }
  {
    std::ofstream out(cfg_file);
    if (!out) throw RunError("cannot write " + cfg_file.string());
    write_config(out, cfg);
  }

  PreparedData data = prepare_data(cfg);
  data.source_bpe.save(cfg.run_dir / "source.bpe");
  data.target_bpe.save(cfg.run_dir / "target.bpe");
  gen::write_corpus_jsonl(cfg.run_dir / "test_items.jsonl", data.test_items);
  {
    std::ofstream out(cfg.run_dir / "references.txt");
    for (const std::string& ref : data.references) out << ref << "\n";
  }

  ExperimentResult result;
  for (const OptimizationSpec& spec : specs) {
    for (std::uint64_t seed : cfg.seeds) {
      std::string run_id = spec.id() + "-s" + std::to_string(seed);
      fs::path rec_file = cfg.run_dir / "records" / (run_id + ".json");
      if (fs::exists(rec_file)) {
        bool reuse = false;
        metrics::RunRecord existing;
        try {
          std::ifstream in(rec_file);
          nlohmann::json j = nlohmann::json::parse(in);
          existing = metrics::run_record_from_json(j);
          reuse = existing.status == "complete";
        } catch (const std::exception&) {
          reuse = false;  // unreadable record: recompute it
        }
        if (reuse) {
          if (log) *log << "[skip] " << run_id << " (complete)\n";
          result.records.push_back(std::move(existing));
          ++result.skipped;
          continue;
        }
      }
      if (log) *log << "[run] " << run_id << "\n";
      metrics::RunRecord rec =
          execute_run(cfg, data, spec, seed, cfg.run_dir / "checkpoints", log);
      write_record_atomic(rec_file, rec);
      ++result.executed;
      if (rec.status == "failed") {
        ++result.failed;
        if (log) *log << "[fail] " << run_id << ": " << rec.error << "\n";
      }
      result.records.push_back(std::move(rec));
    }
  }
  return result;
}

std::vector<metrics::RunRecord> load_records(const fs::path& run_dir) {
  fs::path records_dir = run_dir / "records";
  if (!fs::is_directory(records_dir))
    throw DataError("no records directory under " + run_dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(records_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<metrics::RunRecord> records;
  records.reserve(files.size());
  for (const fs::path& file : files) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open record file " + file.string());
    try {
      records.push_back(metrics::run_record_from_json(nlohmann::json::parse(in)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("record file " + file.string() + ": " + e.what());
    }
  }
  return records;
}

}  // namespace speedbias::harness
