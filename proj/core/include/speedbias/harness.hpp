#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "speedbias/bpe.hpp"
#include "speedbias/gender_eval.hpp"
#include "speedbias/generation.hpp"
#include "speedbias/metrics.hpp"
#include "speedbias/toy.hpp"
#include "speedbias/transformer.hpp"

namespace speedbias::harness {

struct LayerConfig {
  int encoder = 6;
  int decoder = 6;
  bool operator==(const LayerConfig&) const = default;
};

// One cell of the optimization matrix: a layer allocation plus the three
// speed knobs (average attention, int8 weights, beam size).
struct OptimizationSpec {
  LayerConfig layers{6, 6};
  bool use_aan = false;
  bool quantized = false;
  int beam_size = 5;

  std::string id() const;     // "e6d6-std-fp-b5"
  std::string label() const;  // "(6,6) bs=5"
  bool operator==(const OptimizationSpec&) const = default;
};

OptimizationSpec baseline_spec();

// Inverse of OptimizationSpec::id(); throws DataError on malformed ids.
OptimizationSpec spec_from_id(const std::string& id);

// (6,6) plus the deep-encoder and shallow-decoder allocations.
std::vector<LayerConfig> default_layer_grid();

// layers x {standard, aan} x {fp, int8} x {beam 5, beam 1}, in that nesting
// order, so the baseline comes first. 7 layer configs give 56 specs.
std::vector<OptimizationSpec> enumerate_matrix(
    const std::vector<LayerConfig>& grid = default_layer_grid());

// One step of a stacked-optimization plan; exactly one knob is set.
struct StackStep {
  std::optional<int> beam_size;
  bool set_aan = false;
  bool set_quantized = false;
  std::optional<LayerConfig> layers;

  std::string name() const;  // "bs=1" | "aan" | "quant" | "layers=(10,2)"
};

// Accepts "beam=N", "aan", "quant" and "layers=E,D".
StackStep parse_stack_step(const std::string& text);

// bs=1, aan, layers=10,2, layers=6,2, quant. A later layer step replaces
// the earlier one instead of composing with it.
std::vector<StackStep> default_stack();

// Cumulative application: result[0] = base, result[k] = base with
// steps[0..k-1] applied.
std::vector<OptimizationSpec> apply_stack(const OptimizationSpec& base,
                                          const std::vector<StackStep>& steps);

struct ExperimentConfig {
  std::filesystem::path templates_file = "data/templates.txt";
  std::filesystem::path lexicon_file = "data/lexicon.tsv";
  std::filesystem::path dictionary_file = "data/dictionary.tsv";
  std::string language = "es";

  double bias_ratio = 0.9;
  std::size_t corpus_size = 3000;
  int template_fold = 3;
  std::uint64_t corpus_seed = 7;
  std::size_t eval_max_items = 160;

  int model_dim = 64;
  int attention_heads = 4;
  int ffn_dim = 128;
  int bpe_merges = 200;

  int train_steps = 600;
  int batch_size = 32;
  double learning_rate = 1e-3;
  int warmup_steps = 30;
  double divergence_loss = 20.0;

  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int max_len = 32;
  int timing_warmup = 1;
  int timing_repetitions = 1;

  std::filesystem::path run_dir = "runs/experiment";

  void validate() const;  // throws DataError
  // Digest over everything that affects record contents (data, corpus,
  // model and training settings); run_dir, seeds and timing counts are
  // excluded so resumed runs and added seeds stay compatible.
  std::string hash() const;
};

// Versioned key-value document ("config_version = 1", one key per line).
void write_config(std::ostream& out, const ExperimentConfig& cfg);
ExperimentConfig read_config(std::istream& in, const std::string& origin);
ExperimentConfig read_config_file(const std::filesystem::path& file);

// Everything the runs share: the generated test set, its references, the
// subword models and the encoded training corpus.
struct PreparedData {
  std::vector<gen::TestItem> test_items;
  std::vector<std::string> references;
  std::vector<std::vector<int>> test_sources;  // BPE ids
  std::vector<nmt::ExamplePair> train_pairs;
  nmt::BpeModel source_bpe, target_bpe;
  eval::GenderDictionary dictionary;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::vector<metrics::RunRecord> records;  // spec-major, seed-minor order
  int executed = 0;  // runs computed this invocation
  int skipped = 0;   // complete records reused from disk
  int failed = 0;    // runs recorded as failed this invocation
};

// Runs specs x seeds. Checkpoints are shared per (layers, aan, seed) and
// quantized specs reuse their float sibling's checkpoint. Records persist
// one JSON file per run (atomic write-then-rename); complete records are
// skipped on rerun, failed ones are retried. A failing run is recorded and
// the matrix continues.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::vector<OptimizationSpec>& specs,
                                std::ostream* log = nullptr);

// All record files under <run_dir>/records, filename order.
std::vector<metrics::RunRecord> load_records(const std::filesystem::path& run_dir);

}  // namespace speedbias::harness
