#pragma once

#include <vector>

#include "speedbias/transformer.hpp"

namespace speedbias::nmt {

// Per-layer incremental decoding state. Standard layers append projected
// key/value rows; AAN layers keep a running sum and a count, O(1) per step.
struct LayerState {
  Mat self_k, self_v;  // grows one row per step (standard layers)
  Vec aan_sum;         // running sum of layer-norm outputs (AAN layers)
  int steps = 0;
};

struct DecoderState {
  std::vector<LayerState> layers;
  int position = 0;  // next decoder position to fill
};

// Encodes the source once (memory + per-layer cross K/V), then yields
// next-token logits one step at a time. States are plain values, so beam
// hypotheses fork by copying them.
class IncrementalDecoder {
 public:
  IncrementalDecoder(const Params& params, const std::vector<int>& source_ids);

  DecoderState initial_state() const;
  // Feeds one decoder input token; returns logits over the target vocab.
  Vec step(int token, DecoderState& state) const;

  int target_vocab() const { return params_->config.target_vocab; }
  // Current cumulative mean held by an AAN layer; test hook.
  Vec aan_mean(const DecoderState& state, int layer) const;

 private:
  const Params* params_;
  Mat memory_;
  std::vector<Mat> cross_k_, cross_v_;  // per decoder layer
};

struct DecodeResult {
  std::vector<int> tokens;  // emitted tokens, no BOS, no EOS
  double log_prob = 0;      // total log-probability incl. the EOS step
  bool finished = false;    // EOS emitted within max_len
};

// Greedy argmax decoding; ties resolve to the lowest token id. Emits at
// most max_len tokens.
DecodeResult decode_greedy(const Params& params, const std::vector<int>& source_ids,
                           int max_len);

// Beam search without length normalization. Candidates rank by total
// log-probability, ties by lexicographically smaller token sequence;
// finished hypotheses leave the beam. Returns the best finished hypothesis,
// or the best active one when nothing finishes within max_len.
DecodeResult decode_beam(const Params& params, const std::vector<int>& source_ids,
                         int beam_size, int max_len);

// beam_size 1 routes through the greedy decoder (proven equivalent).
DecodeResult decode(const Params& params, const std::vector<int>& source_ids,
                    int beam_size, int max_len);

}  // namespace speedbias::nmt
