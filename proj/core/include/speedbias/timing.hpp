#pragma once

#include <vector>

#include "speedbias/transformer.hpp"

namespace speedbias::nmt {

struct TimingOptions {
  int warmup_passes = 3;
  int repetitions = 5;
  int beam_size = 5;
  int max_len = 32;
};

struct TimedDecode {
  double seconds = 0;  // median over repetitions
  std::vector<double> repetition_seconds;
  long sentences = 0;
  std::vector<std::vector<int>> outputs;  // from the first timed repetition
};

// Times the decode loop only: sources arrive pre-encoded, outputs stay as
// token ids. Decoding is deterministic, so repetitions differ only in time.
// An empty corpus times as zero with no repetitions recorded.
TimedDecode time_decode(const Params& params,
                        const std::vector<std::vector<int>>& sources,
                        const TimingOptions& opts);

}  // namespace speedbias::nmt
