#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace speedbias::nmt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct ModelConfig {
  int encoder_layers = 6;
  int decoder_layers = 6;
  int model_dim = 64;
  int attention_heads = 4;
  int ffn_dim = 128;
  bool use_aan = false;
  int source_vocab = 0;
  int target_vocab = 0;
  std::uint64_t init_seed = 1;

  void validate() const;  // throws DataError
  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  // stable digest over every field; checkpoints embed it
  std::string hash() const;
  bool operator==(const ModelConfig&) const = default;
};

struct TensorInfo {
  std::string name;
  int rows = 0, cols = 0;
  std::ptrdiff_t offset = 0;
  long size() const { return static_cast<long>(rows) * cols; }
};

// Named views over one flat parameter vector. Order is fixed by config, so
// optimizer state, checkpoints and finite differences all share indexing.
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const ModelConfig& config);
  std::ptrdiff_t total_size() const { return total_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& info(const std::string& name) const;

 private:
  std::vector<TensorInfo> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
  std::ptrdiff_t total_ = 0;
};

struct Params {
  ModelConfig config;
  ParamLayout layout;
  Vec flat;

  Eigen::Map<Mat> tensor(const std::string& name);
  Eigen::Map<const Mat> tensor(const std::string& name) const;
};

// Seeded, deterministic initialization (Glorot for projections, scaled
// normal for embeddings, identity layer norms, zero biases).
Params init_params(const ModelConfig& config);

// Sinusoidal position encoding value for (position, channel).
double position_encoding(int position, int channel, int model_dim);

// Cumulative-mean rows: out.row(t) = mean(y.row(0..t)). The AAN oracle.
Mat aan_context(const Mat& y);

// Teacher-forced forward pass over one sentence pair. target_input_ids are
// the decoder input as-is (callers prepend BOS themselves); the result has
// one logit row per input position.
Mat forward(const Params& params, const std::vector<int>& source_ids,
            const std::vector<int>& target_input_ids);

struct ExamplePair {
  std::vector<int> source;  // without BOS/EOS
  std::vector<int> target;  // without BOS/EOS
};

// Mean token cross-entropy over the batch; decoder input = BOS + target,
// labels = target + EOS. grad is resized and overwritten.
double loss_and_grad(const Params& params, const std::vector<ExamplePair>& batch,
                     Vec& grad);
double loss_value(const Params& params, const std::vector<ExamplePair>& batch);

}  // namespace speedbias::nmt
