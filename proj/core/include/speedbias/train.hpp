#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "speedbias/transformer.hpp"

namespace speedbias::nmt {

struct TrainOptions {
  int steps = 300;
  int batch_size = 32;
  double learning_rate = 1e-3;  // peak, after warmup
  int warmup_steps = 30;
  double clip_norm = 1.0;
  double beta1 = 0.9, beta2 = 0.98, adam_eps = 1e-9;
  std::uint64_t sampler_seed = 1;
  // a post-warmup loss above this (or any non-finite loss) aborts
  double divergence_loss = 20.0;
  int log_every = 0;  // 0 silences progress
  std::ostream* log = nullptr;
};

struct TrainResult {
  int steps_completed = 0;
  double first_loss = 0;
  double final_loss = 0;
};

// Adam with warmup + inverse-sqrt decay and global-norm clipping. Batches
// are drawn with replacement by a seeded generator. steps == 0 leaves the
// parameters untouched. Throws RunError on divergence.
TrainResult train_model(Params& params, const std::vector<ExamplePair>& corpus,
                        const TrainOptions& opts);

}  // namespace speedbias::nmt
