#include "speedbias/transformer.hpp"

#include <cmath>
#include <random>

#include "nmt_internal.hpp"
#include "speedbias/errors.hpp"

namespace speedbias::nmt {

using detail::ConstView;
using detail::MutView;
using detail::Ragged;

// ---------------------------------------------------------------- config --

void ModelConfig::validate() const {
  if (encoder_layers < 1 || decoder_layers < 1)
    throw DataError("model config: layer counts must be >= 1");
  if (model_dim < 2 || ffn_dim < 1) throw DataError("model config: bad dims");
  if (attention_heads < 1 || model_dim % attention_heads != 0)
    throw DataError("model config: heads must divide model_dim");
  if (source_vocab < 3 || target_vocab < 3)
    throw DataError("model config: vocab must cover the special tokens");
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["encoder_layers"] = encoder_layers;
  j["decoder_layers"] = decoder_layers;
  j["model_dim"] = model_dim;
  j["attention_heads"] = attention_heads;
  j["ffn_dim"] = ffn_dim;
  j["use_aan"] = use_aan;
  j["source_vocab"] = source_vocab;
  j["target_vocab"] = target_vocab;
  j["init_seed"] = init_seed;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.decoder_layers = j.at("decoder_layers").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  c.attention_heads = j.at("attention_heads").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.use_aan = j.at("use_aan").get<bool>();
  c.source_vocab = j.at("source_vocab").get<int>();
  c.target_vocab = j.at("target_vocab").get<int>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

std::string ModelConfig::hash() const {
  std::string s = to_json().dump();
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- layout --

ParamLayout::ParamLayout(const ModelConfig& c) {
  c.validate();
  const int d = c.model_dim, f = c.ffn_dim;
  auto add = [&](const std::string& name, int rows, int cols) {
    tensors_.push_back({name, rows, cols, total_});
    index_.emplace(name, tensors_.size() - 1);
    total_ += static_cast<std::ptrdiff_t>(rows) * cols;
  };
  auto add_ln = [&](const std::string& p) {
    add(p + ".g", d, 1);
    add(p + ".b", d, 1);
  };
  auto add_attn = [&](const std::string& p) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) add(p + "." + w, d, d);
    for (const char* b : {"bq", "bk", "bv", "bo"}) add(p + "." + b, d, 1);
  };
  auto add_ffn = [&](const std::string& p) {
    add(p + ".w1", d, f);
    add(p + ".b1", f, 1);
    add(p + ".w2", f, d);
    add(p + ".b2", d, 1);
  };

  add("src_embed", c.source_vocab, d);
  for (int i = 0; i < c.encoder_layers; ++i) {
    std::string p = "enc" + std::to_string(i);
    add_ln(p + ".ln1");
    add_attn(p + ".att");
    add_ln(p + ".ln2");
    add_ffn(p + ".ffn");
  }
  add_ln("enc_ln");
  add("tgt_embed", c.target_vocab, d);
  for (int i = 0; i < c.decoder_layers; ++i) {
    std::string p = "dec" + std::to_string(i);
    add_ln(p + ".ln1");
    if (c.use_aan) {
      add_ffn(p + ".aan");
      add(p + ".aan.wg", 2 * d, 2 * d);
      add(p + ".aan.bg", 2 * d, 1);
    } else {
      add_attn(p + ".self");
    }
    add_ln(p + ".ln2");
    add_attn(p + ".cross");
    add_ln(p + ".ln3");
    add_ffn(p + ".ffn");
  }
  add_ln("dec_ln");
  add("out.w", d, c.target_vocab);
  add("out.b", c.target_vocab, 1);
}

const TensorInfo& ParamLayout::info(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("unknown tensor '" + name + "'");
  return tensors_[it->second];
}

Eigen::Map<Mat> Params::tensor(const std::string& name) {
  const TensorInfo& t = layout.info(name);
  return {flat.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<const Mat> Params::tensor(const std::string& name) const {
  const TensorInfo& t = layout.info(name);
  return {flat.data() + t.offset, t.rows, t.cols};
}

// ------------------------------------------------------------------ init --

namespace {

// deterministic gaussian independent of the standard library's
// distribution implementations
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  double uniform() {
    return (static_cast<double>(rng_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0;
};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Params init_params(const ModelConfig& config) {
  config.validate();
  Params p;
  p.config = config;
  p.layout = ParamLayout(config);
  p.flat = Vec::Zero(p.layout.total_size());
  Gaussian gauss(config.init_seed);
  for (const TensorInfo& t : p.layout.tensors()) {
    Eigen::Map<Mat> m(p.flat.data() + t.offset, t.rows, t.cols);
    if (ends_with(t.name, ".g")) {
      m.setOnes();
    } else if (ends_with(t.name, ".b") || ends_with(t.name, ".bq") ||
               ends_with(t.name, ".bk") || ends_with(t.name, ".bv") ||
               ends_with(t.name, ".bo") || ends_with(t.name, ".b1") ||
               ends_with(t.name, ".b2") || ends_with(t.name, ".bg")) {
      m.setZero();
    } else if (t.name == "src_embed" || t.name == "tgt_embed") {
      double scale = 1.0 / std::sqrt(static_cast<double>(config.model_dim));
      for (int cCol = 0; cCol < t.cols; ++cCol)
        for (int r = 0; r < t.rows; ++r) m(r, cCol) = scale * gauss();
    } else {
      double scale = std::sqrt(2.0 / (t.rows + t.cols));
      for (int cCol = 0; cCol < t.cols; ++cCol)
        for (int r = 0; r < t.rows; ++r) m(r, cCol) = scale * gauss();
    }
  }
  return p;
}

double position_encoding(int position, int channel, int model_dim) {
  double exponent = static_cast<double>(2 * (channel / 2)) / model_dim;
  double angle = position / std::pow(10000.0, exponent);
  return channel % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

Mat aan_context(const Mat& y) {
  Mat out(y.rows(), y.cols());
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(y.cols());
  for (Eigen::Index t = 0; t < y.rows(); ++t) {
    sum += y.row(t);
    out.row(t) = sum / static_cast<double>(t + 1);
  }
  return out;
}

// ---------------------------------------------------------------- detail --

namespace detail {

Mat embed(Eigen::Map<const Mat> table, const std::vector<int>& ids,
          const Ragged& ragged, int model_dim) {
  Mat x(ragged.rows(), model_dim);
  double scale = std::sqrt(static_cast<double>(model_dim));
  for (int s = 0; s < ragged.sentences(); ++s) {
    for (int t = 0; t < ragged.len(s); ++t) {
      int r = ragged.off(s) + t;
      int id = ids[r];
      if (id < 0 || id >= table.rows())
        throw DataError("token id " + std::to_string(id) + " out of vocab range");
      for (int cCol = 0; cCol < model_dim; ++cCol)
        x(r, cCol) = table(id, cCol) * scale + position_encoding(t, cCol, model_dim);
    }
  }
  return x;
}

Eigen::RowVectorXd layer_norm_row(const Eigen::RowVectorXd& x,
                                  Eigen::Map<const Mat> g,
                                  Eigen::Map<const Mat> b) {
  double mu = x.mean();
  double var = (x.array() - mu).square().mean();
  double inv = 1.0 / std::sqrt(var + kLnEps);
  return (((x.array() - mu) * inv) * g.col(0).transpose().array() +
          b.col(0).transpose().array())
      .matrix();
}

void softmax_row_inplace(
    Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  double mx = row.maxCoeff();
  row = (row.array() - mx).exp().matrix();
  row /= row.sum();
}

}  // namespace detail

// --------------------------------------------------- cached forward pass --

namespace {

using detail::kLnEps;

struct LnCache {
  Mat xhat;
  Vec inv_std;
};

Mat ln_forward(const Mat& x, Eigen::Map<const Mat> g, Eigen::Map<const Mat> b,
               LnCache& c) {
  const Eigen::Index n = x.rows(), d = x.cols();
  c.xhat.resize(n, d);
  c.inv_std.resize(n);
  Mat out(n, d);
  Eigen::RowVectorXd gt = g.col(0).transpose();
  Eigen::RowVectorXd bt = b.col(0).transpose();
  for (Eigen::Index r = 0; r < n; ++r) {
    double mu = x.row(r).mean();
    Eigen::RowVectorXd centered = x.row(r).array() - mu;
    double var = centered.squaredNorm() / d;
    double inv = 1.0 / std::sqrt(var + kLnEps);
    c.inv_std(r) = inv;
    c.xhat.row(r) = centered * inv;
    out.row(r) = c.xhat.row(r).cwiseProduct(gt) + bt;
  }
  return out;
}

// returns dx; accumulates gain/bias gradients
Mat ln_backward(const Mat& dy, const LnCache& c, Eigen::Map<const Mat> g,
                Eigen::Map<Mat> gg, Eigen::Map<Mat> gb) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  Mat dx(n, d);
  Eigen::RowVectorXd gt = g.col(0).transpose();
  gg.col(0) += (dy.cwiseProduct(c.xhat)).colwise().sum().transpose();
  gb.col(0) += dy.colwise().sum().transpose();
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gt);
    double m1 = dxhat.mean();
    double m2 = dxhat.cwiseProduct(c.xhat.row(r)).mean();
    dx.row(r) =
        ((dxhat.array() - m1 - c.xhat.row(r).array() * m2) * c.inv_std(r))
            .matrix();
  }
  return dx;
}

struct AttnCache {
  Mat q, k, v, ctx;       // projected matrices, packed
  std::vector<Mat> attn;  // softmax weights per (sentence * heads + head)
};

// q_in: Nq x d (queries), kv_in: Nkv x d (keys/values source)
Mat attn_forward(const ConstView& w, const std::string& p, const Mat& q_in,
                 const Mat& kv_in, const Ragged& rq, const Ragged& rkv,
                 bool causal, int heads, AttnCache& c) {
  const int d = static_cast<int>(q_in.cols());
  const int dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  c.q = q_in * w(p + ".wq");
  c.q.rowwise() += w(p + ".bq").col(0).transpose();
  c.k = kv_in * w(p + ".wk");
  c.k.rowwise() += w(p + ".bk").col(0).transpose();
  c.v = kv_in * w(p + ".wv");
  c.v.rowwise() += w(p + ".bv").col(0).transpose();
  c.ctx.resize(q_in.rows(), d);
  c.attn.assign(static_cast<std::size_t>(rq.sentences()) * heads, Mat());
  for (int s = 0; s < rq.sentences(); ++s) {
    const int tq = rq.len(s), tk = rkv.len(s);
    for (int h = 0; h < heads; ++h) {
      auto qb = c.q.block(rq.off(s), h * dk, tq, dk);
      auto kb = c.k.block(rkv.off(s), h * dk, tk, dk);
      auto vb = c.v.block(rkv.off(s), h * dk, tk, dk);
      Mat scores = (qb * kb.transpose()) * scale;
      if (causal)
        for (int i = 0; i < tq; ++i)
          for (int j = i + 1; j < tk; ++j) scores(i, j) = -1e30;
      for (int i = 0; i < tq; ++i) detail::softmax_row_inplace(scores.row(i));
      c.ctx.block(rq.off(s), h * dk, tq, dk) = scores * vb;
      c.attn[static_cast<std::size_t>(s) * heads + h] = std::move(scores);
    }
  }
  Mat out = c.ctx * w(p + ".wo");
  out.rowwise() += w(p + ".bo").col(0).transpose();
  return out;
}

// returns d(q_in); adds d(kv_in) into dkv_acc
Mat attn_backward(const ConstView& w, const MutView& g, const std::string& p,
                  const Mat& q_in, const Mat& kv_in, const Ragged& rq,
                  const Ragged& rkv, int heads, const AttnCache& c,
                  const Mat& dout, Mat& dkv_acc) {
  const int d = static_cast<int>(q_in.cols());
  const int dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  g(p + ".wo") += c.ctx.transpose() * dout;
  g(p + ".bo").col(0) += dout.colwise().sum().transpose();
  Mat dctx = dout * w(p + ".wo").transpose();

  Mat dq = Mat::Zero(q_in.rows(), d);
  Mat dkm = Mat::Zero(kv_in.rows(), d);
  Mat dvm = Mat::Zero(kv_in.rows(), d);
  for (int s = 0; s < rq.sentences(); ++s) {
    const int tq = rq.len(s), tk = rkv.len(s);
    for (int h = 0; h < heads; ++h) {
      const Mat& a = c.attn[static_cast<std::size_t>(s) * heads + h];
      auto qb = c.q.block(rq.off(s), h * dk, tq, dk);
      auto kb = c.k.block(rkv.off(s), h * dk, tk, dk);
      auto vb = c.v.block(rkv.off(s), h * dk, tk, dk);
      auto dctxb = dctx.block(rq.off(s), h * dk, tq, dk);
      Mat da = dctxb * vb.transpose();
      dvm.block(rkv.off(s), h * dk, tk, dk) += a.transpose() * dctxb;
      Mat ds(tq, tk);
      for (int i = 0; i < tq; ++i) {
        Eigen::RowVectorXd prod = da.row(i).cwiseProduct(a.row(i));
        ds.row(i) = prod - a.row(i) * prod.sum();
      }
      dq.block(rq.off(s), h * dk, tq, dk) += ds * kb * scale;
      dkm.block(rkv.off(s), h * dk, tk, dk) += ds.transpose() * qb * scale;
    }
  }
  g(p + ".wq") += q_in.transpose() * dq;
  g(p + ".bq").col(0) += dq.colwise().sum().transpose();
  g(p + ".wk") += kv_in.transpose() * dkm;
  g(p + ".bk").col(0) += dkm.colwise().sum().transpose();
  g(p + ".wv") += kv_in.transpose() * dvm;
  g(p + ".bv").col(0) += dvm.colwise().sum().transpose();
  dkv_acc += dkm * w(p + ".wk").transpose() + dvm * w(p + ".wv").transpose();
  return dq * w(p + ".wq").transpose();
}

struct FfnCache {
  Mat pre, act;
};

Mat ffn_forward(const ConstView& w, const std::string& p, const Mat& x,
                FfnCache& c) {
  c.pre = x * w(p + ".w1");
  c.pre.rowwise() += w(p + ".b1").col(0).transpose();
  c.act = c.pre.cwiseMax(0.0);
  Mat out = c.act * w(p + ".w2");
  out.rowwise() += w(p + ".b2").col(0).transpose();
  return out;
}

Mat ffn_backward(const ConstView& w, const MutView& g, const std::string& p,
                 const Mat& x, const FfnCache& c, const Mat& dout) {
  g(p + ".w2") += c.act.transpose() * dout;
  g(p + ".b2").col(0) += dout.colwise().sum().transpose();
  Mat dact = dout * w(p + ".w2").transpose();
  Mat dpre = (c.pre.array() > 0.0).select(dact, 0.0);
  g(p + ".w1") += x.transpose() * dpre;
  g(p + ".b1").col(0) += dpre.colwise().sum().transpose();
  return dpre * w(p + ".w1").transpose();
}

struct AanCache {
  Mat ybar;   // per-sentence cumulative means
  FfnCache ffn;
  Mat gctx;   // FFN(ybar)
  Mat gates;  // sigmoid, N x 2d (input gate | forget gate)
};

Mat aan_forward(const ConstView& w, const std::string& p, const Mat& y,
                const Ragged& r, AanCache& c) {
  const Eigen::Index d = y.cols();
  c.ybar.resize(y.rows(), d);
  for (int s = 0; s < r.sentences(); ++s) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(d);
    for (int t = 0; t < r.len(s); ++t) {
      sum += y.row(r.off(s) + t);
      c.ybar.row(r.off(s) + t) = sum / static_cast<double>(t + 1);
    }
  }
  c.gctx = ffn_forward(w, p, c.ybar, c.ffn);
  Mat concat(y.rows(), 2 * d);
  concat.leftCols(d) = y;
  concat.rightCols(d) = c.gctx;
  Mat z = concat * w(p + ".wg");
  z.rowwise() += w(p + ".bg").col(0).transpose();
  c.gates = ((-z.array()).exp() + 1.0).inverse().matrix();
  return c.gates.leftCols(d).cwiseProduct(y) +
         c.gates.rightCols(d).cwiseProduct(c.gctx);
}

Mat aan_backward(const ConstView& w, const MutView& g, const std::string& p,
                 const Mat& y, const Ragged& r, const AanCache& c,
                 const Mat& dout) {
  const Eigen::Index d = y.cols();
  Mat dy = dout.cwiseProduct(c.gates.leftCols(d));
  Mat dg = dout.cwiseProduct(c.gates.rightCols(d));
  Mat dz(y.rows(), 2 * d);
  dz.leftCols(d) = dout.cwiseProduct(y);
  dz.rightCols(d) = dout.cwiseProduct(c.gctx);
  dz = dz.cwiseProduct(c.gates).cwiseProduct((1.0 - c.gates.array()).matrix());
  Mat concat(y.rows(), 2 * d);
  concat.leftCols(d) = y;
  concat.rightCols(d) = c.gctx;
  g(p + ".wg") += concat.transpose() * dz;
  g(p + ".bg").col(0) += dz.colwise().sum().transpose();
  Mat dconcat = dz * w(p + ".wg").transpose();
  dy += dconcat.leftCols(d);
  dg += dconcat.rightCols(d);
  Mat dybar = ffn_backward(w, g, p, c.ybar, c.ffn, dg);
  for (int s = 0; s < r.sentences(); ++s) {
    Eigen::RowVectorXd carry = Eigen::RowVectorXd::Zero(d);
    for (int t = r.len(s) - 1; t >= 0; --t) {
      carry += dybar.row(r.off(s) + t) / static_cast<double>(t + 1);
      dy.row(r.off(s) + t) += carry;
    }
  }
  return dy;
}

struct EncLayerCache {
  LnCache ln1, ln2;
  Mat n1, n2;
  AttnCache att;
  FfnCache ffn;
};

struct DecLayerCache {
  LnCache ln1, ln2, ln3;
  Mat n1, n2, n3;
  AttnCache self, cross;
  AanCache aan;
  FfnCache ffn;
};

struct BatchData {
  Ragged src, tgt;
  std::vector<int> src_ids, tgt_in, tgt_out;  // packed; tgt_out may be empty
};

struct BatchCache {
  std::vector<EncLayerCache> enc;
  LnCache enc_ln;
  Mat memory;  // encoder output after final layer norm
  std::vector<DecLayerCache> dec;
  LnCache dec_ln;
  Mat dec_y;  // decoder output after final layer norm
  Mat logits;
};

void run_forward(const Params& p, const BatchData& b, BatchCache& c) {
  const ModelConfig& cfg = p.config;
  const int heads = cfg.attention_heads;
  ConstView w(p.layout, p.flat);
  for (int s = 0; s < b.src.sentences(); ++s)
    if (b.src.len(s) == 0 || b.tgt.len(s) == 0)
      throw DataError("forward: empty source or target sequence");

  Mat x = detail::embed(w("src_embed"), b.src_ids, b.src, cfg.model_dim);
  c.enc.resize(cfg.encoder_layers);
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    EncLayerCache& lc = c.enc[l];
    std::string pre = "enc" + std::to_string(l);
    lc.n1 = ln_forward(x, w(pre + ".ln1.g"), w(pre + ".ln1.b"), lc.ln1);
    x += attn_forward(w, pre + ".att", lc.n1, lc.n1, b.src, b.src, false, heads,
                      lc.att);
    lc.n2 = ln_forward(x, w(pre + ".ln2.g"), w(pre + ".ln2.b"), lc.ln2);
    x += ffn_forward(w, pre + ".ffn", lc.n2, lc.ffn);
  }
  c.memory = ln_forward(x, w("enc_ln.g"), w("enc_ln.b"), c.enc_ln);

  Mat y = detail::embed(w("tgt_embed"), b.tgt_in, b.tgt, cfg.model_dim);
  c.dec.resize(cfg.decoder_layers);
  for (int l = 0; l < cfg.decoder_layers; ++l) {
    DecLayerCache& lc = c.dec[l];
    std::string pre = "dec" + std::to_string(l);
    lc.n1 = ln_forward(y, w(pre + ".ln1.g"), w(pre + ".ln1.b"), lc.ln1);
    if (cfg.use_aan)
      y += aan_forward(w, pre + ".aan", lc.n1, b.tgt, lc.aan);
    else
      y += attn_forward(w, pre + ".self", lc.n1, lc.n1, b.tgt, b.tgt, true,
                        heads, lc.self);
    lc.n2 = ln_forward(y, w(pre + ".ln2.g"), w(pre + ".ln2.b"), lc.ln2);
    y += attn_forward(w, pre + ".cross", lc.n2, c.memory, b.tgt, b.src, false,
                      heads, lc.cross);
    lc.n3 = ln_forward(y, w(pre + ".ln3.g"), w(pre + ".ln3.b"), lc.ln3);
    y += ffn_forward(w, pre + ".ffn", lc.n3, lc.ffn);
  }
  c.dec_y = ln_forward(y, w("dec_ln.g"), w("dec_ln.b"), c.dec_ln);
  c.logits = c.dec_y * w("out.w");
  c.logits.rowwise() += w("out.b").col(0).transpose();
}

void run_backward(const Params& p, const BatchData& b, const BatchCache& c,
                  const Mat& dlogits, Vec& grad) {
  const ModelConfig& cfg = p.config;
  const int heads = cfg.attention_heads;
  const double emb_scale = std::sqrt(static_cast<double>(cfg.model_dim));
  ConstView w(p.layout, p.flat);
  grad.setZero();
  MutView g(p.layout, grad);

  g("out.w") += c.dec_y.transpose() * dlogits;
  g("out.b").col(0) += dlogits.colwise().sum().transpose();
  Mat dy = ln_backward(dlogits * w("out.w").transpose(), c.dec_ln, w("dec_ln.g"),
                       g("dec_ln.g"), g("dec_ln.b"));

  Mat dmem = Mat::Zero(c.memory.rows(), cfg.model_dim);
  for (int l = cfg.decoder_layers - 1; l >= 0; --l) {
    const DecLayerCache& lc = c.dec[l];
    std::string pre = "dec" + std::to_string(l);
    Mat dn3 = ffn_backward(w, g, pre + ".ffn", lc.n3, lc.ffn, dy);
    dy += ln_backward(dn3, lc.ln3, w(pre + ".ln3.g"), g(pre + ".ln3.g"),
                      g(pre + ".ln3.b"));
    Mat dn2 = attn_backward(w, g, pre + ".cross", lc.n2, c.memory, b.tgt, b.src,
                            heads, lc.cross, dy, dmem);
    dy += ln_backward(dn2, lc.ln2, w(pre + ".ln2.g"), g(pre + ".ln2.g"),
                      g(pre + ".ln2.b"));
    Mat dn1;
    if (cfg.use_aan) {
      dn1 = aan_backward(w, g, pre + ".aan", lc.n1, b.tgt, lc.aan, dy);
    } else {
      Mat dself = Mat::Zero(dy.rows(), cfg.model_dim);
      dn1 = attn_backward(w, g, pre + ".self", lc.n1, lc.n1, b.tgt, b.tgt, heads,
                          lc.self, dy, dself);
      dn1 += dself;
    }
    dy += ln_backward(dn1, lc.ln1, w(pre + ".ln1.g"), g(pre + ".ln1.g"),
                      g(pre + ".ln1.b"));
  }
  {
    auto table = g("tgt_embed");
    for (int r = 0; r < b.tgt.rows(); ++r)
      table.row(b.tgt_in[r]) += emb_scale * dy.row(r);
  }

  Mat dx = ln_backward(dmem, c.enc_ln, w("enc_ln.g"), g("enc_ln.g"), g("enc_ln.b"));
  for (int l = cfg.encoder_layers - 1; l >= 0; --l) {
    const EncLayerCache& lc = c.enc[l];
    std::string pre = "enc" + std::to_string(l);
    Mat dn2 = ffn_backward(w, g, pre + ".ffn", lc.n2, lc.ffn, dx);
    dx += ln_backward(dn2, lc.ln2, w(pre + ".ln2.g"), g(pre + ".ln2.g"),
                      g(pre + ".ln2.b"));
    Mat dself = Mat::Zero(dx.rows(), cfg.model_dim);
    Mat dn1 = attn_backward(w, g, pre + ".att", lc.n1, lc.n1, b.src, b.src, heads,
                            lc.att, dx, dself);
    dn1 += dself;
    dx += ln_backward(dn1, lc.ln1, w(pre + ".ln1.g"), g(pre + ".ln1.g"),
                      g(pre + ".ln1.b"));
  }
  {
    auto table = g("src_embed");
    for (int r = 0; r < b.src.rows(); ++r)
      table.row(b.src_ids[r]) += emb_scale * dx.row(r);
  }
}

BatchData pack_batch(const std::vector<ExamplePair>& batch, int bos, int eos) {
  BatchData b;
  for (const ExamplePair& ex : batch) {
    if (ex.source.empty() || ex.target.empty())
      throw DataError("training pair with empty side");
    b.src.push(static_cast<int>(ex.source.size()));
    b.tgt.push(static_cast<int>(ex.target.size()) + 1);
    b.src_ids.insert(b.src_ids.end(), ex.source.begin(), ex.source.end());
    b.tgt_in.push_back(bos);
    b.tgt_in.insert(b.tgt_in.end(), ex.target.begin(), ex.target.end());
    b.tgt_out.insert(b.tgt_out.end(), ex.target.begin(), ex.target.end());
    b.tgt_out.push_back(eos);
  }
  return b;
}

// mean cross-entropy; fills dlogits when given
double cross_entropy(const Mat& logits, const std::vector<int>& labels,
                     Mat* dlogits) {
  const Eigen::Index n = logits.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw DataError("cross_entropy: label count mismatch");
  if (dlogits) dlogits->resize(n, logits.cols());
  double loss = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    if (labels[r] < 0 || labels[r] >= logits.cols())
      throw DataError("cross_entropy: label out of vocab range");
    double mx = logits.row(r).maxCoeff();
    Eigen::RowVectorXd shifted = logits.row(r).array() - mx;
    Eigen::RowVectorXd expv = shifted.array().exp();
    double z = expv.sum();
    loss += std::log(z) - shifted(labels[r]);
    if (dlogits) {
      dlogits->row(r) = expv / (z * static_cast<double>(n));
      (*dlogits)(r, labels[r]) -= 1.0 / static_cast<double>(n);
    }
  }
  return loss / static_cast<double>(n);
}

}  // namespace

Mat forward(const Params& params, const std::vector<int>& source_ids,
            const std::vector<int>& target_input_ids) {
  BatchData b;
  b.src.push(static_cast<int>(source_ids.size()));
  b.tgt.push(static_cast<int>(target_input_ids.size()));
  b.src_ids = source_ids;
  b.tgt_in = target_input_ids;
  BatchCache c;
  run_forward(params, b, c);
  return c.logits;
}

double loss_and_grad(const Params& params, const std::vector<ExamplePair>& batch,
                     Vec& grad) {
  if (batch.empty()) throw DataError("loss_and_grad: empty batch");
  BatchData b = pack_batch(batch, /*bos=*/1, /*eos=*/0);
  BatchCache c;
  run_forward(params, b, c);
  Mat dlogits;
  double loss = cross_entropy(c.logits, b.tgt_out, &dlogits);
  grad.resize(params.layout.total_size());
  run_backward(params, b, c, dlogits, grad);
  return loss;
}

double loss_value(const Params& params, const std::vector<ExamplePair>& batch) {
  if (batch.empty()) throw DataError("loss_value: empty batch");
  BatchData b = pack_batch(batch, /*bos=*/1, /*eos=*/0);
  BatchCache c;
  run_forward(params, b, c);
  return cross_entropy(c.logits, b.tgt_out, nullptr);
}

namespace detail {

Mat encode_source(const Params& params, const std::vector<int>& source_ids) {
  if (source_ids.empty()) throw DataError("encode_source: empty source");
  const ModelConfig& cfg = params.config;
  ConstView w(params.layout, params.flat);
  Ragged r;
  r.push(static_cast<int>(source_ids.size()));
  Mat x = embed(w("src_embed"), source_ids, r, cfg.model_dim);
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    std::string pre = "enc" + std::to_string(l);
    LnCache ln1, ln2;
    Mat n1 = ln_forward(x, w(pre + ".ln1.g"), w(pre + ".ln1.b"), ln1);
    AttnCache att;
    x += attn_forward(w, pre + ".att", n1, n1, r, r, false, cfg.attention_heads,
                      att);
    Mat n2 = ln_forward(x, w(pre + ".ln2.g"), w(pre + ".ln2.b"), ln2);
    FfnCache ffn;
    x += ffn_forward(w, pre + ".ffn", n2, ffn);
  }
  LnCache fin;
  return ln_forward(x, w("enc_ln.g"), w("enc_ln.b"), fin);
}

}  // namespace detail

}  // namespace speedbias::nmt
