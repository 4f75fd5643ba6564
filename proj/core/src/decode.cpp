#include "speedbias/decode.hpp"

#include <algorithm>
#include <cmath>

#include "nmt_internal.hpp"
#include "speedbias/bpe.hpp"
#include "speedbias/errors.hpp"

namespace speedbias::nmt {

using detail::ConstView;

namespace {

Eigen::RowVectorXd log_softmax(const Eigen::RowVectorXd& logits) {
  double mx = logits.maxCoeff();
  Eigen::RowVectorXd shifted = logits.array() - mx;
  double lse = std::log(shifted.array().exp().sum());
  return (shifted.array() - lse).matrix();
}

int argmax_lowest_id(const Eigen::RowVectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

}  // namespace

IncrementalDecoder::IncrementalDecoder(const Params& params,
                                       const std::vector<int>& source_ids)
    : params_(&params) {
  memory_ = detail::encode_source(params, source_ids);
  const ModelConfig& cfg = params.config;
  ConstView w(params.layout, params.flat);
  cross_k_.resize(cfg.decoder_layers);
  cross_v_.resize(cfg.decoder_layers);
  for (int l = 0; l < cfg.decoder_layers; ++l) {
    std::string p = "dec" + std::to_string(l) + ".cross";
    cross_k_[l] = memory_ * w(p + ".wk");
    cross_k_[l].rowwise() += w(p + ".bk").col(0).transpose();
    cross_v_[l] = memory_ * w(p + ".wv");
    cross_v_[l].rowwise() += w(p + ".bv").col(0).transpose();
  }
}

DecoderState IncrementalDecoder::initial_state() const {
  DecoderState st;
  st.layers.resize(params_->config.decoder_layers);
  if (params_->config.use_aan)
    for (LayerState& ls : st.layers)
      ls.aan_sum = Vec::Zero(params_->config.model_dim);
  return st;
}

Vec IncrementalDecoder::aan_mean(const DecoderState& state, int layer) const {
  if (!params_->config.use_aan)
    throw DataError("aan_mean: model has no AAN layers");
  const LayerState& ls = state.layers.at(layer);
  if (ls.steps == 0) throw DataError("aan_mean: no steps taken yet");
  return ls.aan_sum / static_cast<double>(ls.steps);
}

Vec IncrementalDecoder::step(int token, DecoderState& state) const {
  const ModelConfig& cfg = params_->config;
  const int d = cfg.model_dim;
  const int heads = cfg.attention_heads;
  const int dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  ConstView w(params_->layout, params_->flat);
  if (token < 0 || token >= cfg.target_vocab)
    throw DataError("decode step: token id out of range");
  if (static_cast<int>(state.layers.size()) != cfg.decoder_layers)
    throw DataError("decode step: state does not match the model");

  Eigen::RowVectorXd x =
      w("tgt_embed").row(token) * std::sqrt(static_cast<double>(d));
  for (int c = 0; c < d; ++c)
    x(c) += position_encoding(state.position, c, d);

  for (int l = 0; l < cfg.decoder_layers; ++l) {
    LayerState& ls = state.layers[l];
    std::string pre = "dec" + std::to_string(l);
    Eigen::RowVectorXd n1 =
        detail::layer_norm_row(x, w(pre + ".ln1.g"), w(pre + ".ln1.b"));
    if (cfg.use_aan) {
      ls.aan_sum += n1.transpose();
      ls.steps += 1;
      Eigen::RowVectorXd ybar =
          ls.aan_sum.transpose() / static_cast<double>(ls.steps);
      std::string ap = pre + ".aan";
      Eigen::RowVectorXd hidden = ybar * w(ap + ".w1");
      hidden += w(ap + ".b1").col(0).transpose();
      hidden = hidden.cwiseMax(0.0);
      Eigen::RowVectorXd g = hidden * w(ap + ".w2");
      g += w(ap + ".b2").col(0).transpose();
      Eigen::RowVectorXd concat(2 * d);
      concat << n1, g;
      Eigen::RowVectorXd z = concat * w(ap + ".wg");
      z += w(ap + ".bg").col(0).transpose();
      Eigen::RowVectorXd gates = ((-z.array()).exp() + 1.0).inverse().matrix();
      x += (gates.head(d).cwiseProduct(n1) + gates.tail(d).cwiseProduct(g));
    } else {
      std::string sp = pre + ".self";
      Eigen::RowVectorXd q = n1 * w(sp + ".wq");
      q += w(sp + ".bq").col(0).transpose();
      Eigen::RowVectorXd k = n1 * w(sp + ".wk");
      k += w(sp + ".bk").col(0).transpose();
      Eigen::RowVectorXd v = n1 * w(sp + ".wv");
      v += w(sp + ".bv").col(0).transpose();
      ls.self_k.conservativeResize(ls.steps + 1, d);
      ls.self_v.conservativeResize(ls.steps + 1, d);
      ls.self_k.row(ls.steps) = k;
      ls.self_v.row(ls.steps) = v;
      ls.steps += 1;
      Eigen::RowVectorXd ctx(d);
      for (int h = 0; h < heads; ++h) {
        auto kb = ls.self_k.block(0, h * dk, ls.steps, dk);
        auto vb = ls.self_v.block(0, h * dk, ls.steps, dk);
        Eigen::RowVectorXd scores = q.segment(h * dk, dk) * kb.transpose() * scale;
        detail::softmax_row_inplace(scores);
        ctx.segment(h * dk, dk) = scores * vb;
      }
      Eigen::RowVectorXd out = ctx * w(sp + ".wo");
      out += w(sp + ".bo").col(0).transpose();
      x += out;
    }

    Eigen::RowVectorXd n2 =
        detail::layer_norm_row(x, w(pre + ".ln2.g"), w(pre + ".ln2.b"));
    {
      std::string cp = pre + ".cross";
      Eigen::RowVectorXd q = n2 * w(cp + ".wq");
      q += w(cp + ".bq").col(0).transpose();
      Eigen::RowVectorXd ctx(d);
      const Mat& ck = cross_k_[l];
      const Mat& cv = cross_v_[l];
      for (int h = 0; h < heads; ++h) {
        auto kb = ck.block(0, h * dk, ck.rows(), dk);
        auto vb = cv.block(0, h * dk, cv.rows(), dk);
        Eigen::RowVectorXd scores = q.segment(h * dk, dk) * kb.transpose() * scale;
        detail::softmax_row_inplace(scores);
        ctx.segment(h * dk, dk) = scores * vb;
      }
      Eigen::RowVectorXd out = ctx * w(cp + ".wo");
      out += w(cp + ".bo").col(0).transpose();
      x += out;
    }

    Eigen::RowVectorXd n3 =
        detail::layer_norm_row(x, w(pre + ".ln3.g"), w(pre + ".ln3.b"));
    {
      std::string fp = pre + ".ffn";
      Eigen::RowVectorXd hidden = n3 * w(fp + ".w1");
      hidden += w(fp + ".b1").col(0).transpose();
      hidden = hidden.cwiseMax(0.0);
      Eigen::RowVectorXd out = hidden * w(fp + ".w2");
      out += w(fp + ".b2").col(0).transpose();
      x += out;
    }
  }
  Eigen::RowVectorXd y =
      detail::layer_norm_row(x, w("dec_ln.g"), w("dec_ln.b"));
  Eigen::RowVectorXd logits = y * w("out.w");
  logits += w("out.b").col(0).transpose();
  state.position += 1;
  return logits.transpose();
}

DecodeResult decode_greedy(const Params& params,
                           const std::vector<int>& source_ids, int max_len) {
  IncrementalDecoder dec(params, source_ids);
  DecoderState state = dec.initial_state();
  DecodeResult res;
  int input = BpeModel::kBosId;
  for (int t = 0; t < max_len + 1; ++t) {
    Eigen::RowVectorXd logits = dec.step(input, state).transpose();
    int next = argmax_lowest_id(logits);
    if (next == BpeModel::kEosId) {
      res.log_prob += log_softmax(logits)(next);
      res.finished = true;
      break;
    }
    if (static_cast<int>(res.tokens.size()) == max_len) break;
    res.log_prob += log_softmax(logits)(next);
    res.tokens.push_back(next);
    input = next;
  }
  return res;
}

namespace {

struct Hypothesis {
  std::vector<int> tokens;  // emitted, excludes BOS/EOS
  double log_prob = 0;
  int next_input = BpeModel::kBosId;
  DecoderState state;  // state before feeding next_input
};

// lexicographic compare of (parent tokens + appended token) sequences
bool lex_less(const std::vector<int>& a, int a_tok, const std::vector<int>& b,
              int b_tok) {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  int av = a.size() > n ? a[n] : a_tok;
  int bv = b.size() > n ? b[n] : b_tok;
  if (a.size() == b.size()) return a_tok < b_tok;
  if (av != bv) return av < bv;
  // equal so far; the shorter full sequence is smaller
  return a.size() < b.size();
}

}  // namespace

DecodeResult decode_beam(const Params& params, const std::vector<int>& source_ids,
                         int beam_size, int max_len) {
  if (beam_size < 1) throw DataError("beam size must be >= 1");
  IncrementalDecoder dec(params, source_ids);
  const int vocab = dec.target_vocab();

  std::vector<Hypothesis> active(1);
  active[0].state = dec.initial_state();
  std::vector<Hypothesis> finished;

  auto better = [](const Hypothesis& a, const Hypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
  };

  for (int t = 0; t <= max_len && !active.empty(); ++t) {
    struct Candidate {
      std::size_t parent;
      int token;
      double log_prob;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(active.size() * vocab);
    std::vector<DecoderState> stepped(active.size());
    for (std::size_t h = 0; h < active.size(); ++h) {
      stepped[h] = active[h].state;
      Eigen::RowVectorXd logits =
          dec.step(active[h].next_input, stepped[h]).transpose();
      Eigen::RowVectorXd lsm = log_softmax(logits);
      for (int v = 0; v < vocab; ++v)
        candidates.push_back({h, v, active[h].log_prob + lsm(v)});
    }
    auto cand_less = [&](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      return lex_less(active[a.parent].tokens, a.token, active[b.parent].tokens,
                      b.token);
    };
    std::size_t keep = std::min<std::size_t>(beam_size, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + keep,
                      candidates.end(), cand_less);
    candidates.resize(keep);

    std::vector<Hypothesis> next_active;
    for (const Candidate& c : candidates) {
      const Hypothesis& parent = active[c.parent];
      if (c.token == BpeModel::kEosId) {
        Hypothesis done;
        done.tokens = parent.tokens;
        done.log_prob = c.log_prob;
        finished.push_back(std::move(done));
        continue;
      }
      if (static_cast<int>(parent.tokens.size()) + 1 > max_len) continue;
      Hypothesis h;
      h.tokens = parent.tokens;
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      h.next_input = c.token;
      h.state = stepped[c.parent];
      next_active.push_back(std::move(h));
    }
    // all survivors hit the length cap: keep them for final selection
    if (next_active.empty() && finished.empty() && !active.empty()) break;
    active = std::move(next_active);
  }

  DecodeResult res;
  const Hypothesis* best = nullptr;
  bool from_finished = false;
  for (const Hypothesis& h : finished)
    if (!best || better(h, *best)) {
      best = &h;
      from_finished = true;
    }
  if (!best)
    for (const Hypothesis& h : active)
      if (!best || better(h, *best)) best = &h;
  if (!best) return res;  // max_len == 0 and nothing finished
  res.tokens = best->tokens;
  res.log_prob = best->log_prob;
  res.finished = from_finished;
  return res;
}

DecodeResult decode(const Params& params, const std::vector<int>& source_ids,
                    int beam_size, int max_len) {
  if (beam_size == 1) return decode_greedy(params, source_ids, max_len);
  return decode_beam(params, source_ids, beam_size, max_len);
}

}  // namespace speedbias::nmt
