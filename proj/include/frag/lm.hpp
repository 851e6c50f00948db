#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "frag/fragment.hpp"
#include "frag/nn.hpp"
#include "frag/retrieval.hpp"
#include "frag/tokenizer.hpp"

namespace frag {

struct LMConfig {
  int d_model = 256;
  int n_layers = 6;
  int n_heads = 8;
  int context = 128;
};

struct SamplingConfig {
  double temperature = 1.0;
  double top_p = 0.95;
  int top_k = 0;  // 0 = off
  int max_new_tokens = 64;
  int max_retries = 10;  // generation attempts per task (used by the caller loop)
};

// ---------------------------------------------------------------------------
// Transformer pieces. forward() caches activations for backward();
// forward_const() is the inference path.
// ---------------------------------------------------------------------------

namespace detail_lm {

// (q,k,v) each (T, d_model) split into heads; returns concat(att_h * v_h) and
// fills att (one (T,T) per head). Causal.
inline nn::Matrix attention_core(const nn::Matrix& q, const nn::Matrix& k, const nn::Matrix& v,
                                 int n_heads, std::vector<nn::Matrix>* att_out) {
  const int T = static_cast<int>(q.rows());
  const int d = static_cast<int>(q.cols());
  const int dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  nn::Matrix out(T, d);
  if (att_out) att_out->assign(n_heads, nn::Matrix());
  for (int h = 0; h < n_heads; ++h) {
    auto qh = q.middleCols(h * dh, dh);
    auto kh = k.middleCols(h * dh, dh);
    auto vh = v.middleCols(h * dh, dh);
    nn::Matrix scores = qh * kh.transpose() * scale;
    for (int i = 0; i < T; ++i)
      for (int j = i + 1; j < T; ++j) scores(i, j) = -1e30;
    nn::softmax_rows(scores);
    out.middleCols(h * dh, dh) = scores * vh;
    if (att_out) (*att_out)[h] = std::move(scores);
  }
  return out;
}

}  // namespace detail_lm

struct SelfAttention {
  int n_heads = 1;
  nn::Linear qkv;   // d -> 3d
  nn::Linear proj;  // d -> d

  void init(int d, int heads, std::mt19937_64& rng, double std_dev) {
    n_heads = heads;
    qkv.init(d, 3 * d, rng, std_dev);
    proj.init(d, d, rng, std_dev);
  }

  nn::Matrix forward(const nn::Matrix& x) {
    const int d = static_cast<int>(x.cols());
    nn::Matrix qkv_out = qkv.forward(x);
    q_cache = qkv_out.leftCols(d);
    k_cache = qkv_out.middleCols(d, d);
    v_cache = qkv_out.rightCols(d);
    nn::Matrix heads = detail_lm::attention_core(q_cache, k_cache, v_cache, n_heads, &att_cache);
    return proj.forward(heads);
  }

  nn::Matrix forward_const(const nn::Matrix& x) const {
    const int d = static_cast<int>(x.cols());
    nn::Matrix qkv_out = qkv.forward_const(x);
    nn::Matrix heads = detail_lm::attention_core(qkv_out.leftCols(d), qkv_out.middleCols(d, d),
                                                 qkv_out.rightCols(d), n_heads, nullptr);
    return proj.forward_const(heads);
  }

  nn::Matrix backward(const nn::Matrix& dy, bool acc) {
    const int T = static_cast<int>(dy.rows());
    const int d = static_cast<int>(dy.cols());
    const int dh = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    nn::Matrix dheads = proj.backward(dy, acc);
    nn::Matrix dqkv(T, 3 * d);
    for (int h = 0; h < n_heads; ++h) {
      auto qh = q_cache.middleCols(h * dh, dh);
      auto kh = k_cache.middleCols(h * dh, dh);
      auto vh = v_cache.middleCols(h * dh, dh);
      const nn::Matrix& att = att_cache[h];
      nn::Matrix dout_h = dheads.middleCols(h * dh, dh);
      nn::Matrix datt = dout_h * vh.transpose();
      nn::Matrix dvh = att.transpose() * dout_h;
      nn::Matrix ds = att.cwiseProduct(datt);
      nn::Vector rowsum = ds.rowwise().sum();
      ds = att.cwiseProduct(datt.colwise() - rowsum);
      dqkv.middleCols(h * dh, dh) = ds * kh * scale;
      dqkv.middleCols(d + h * dh, dh) = ds.transpose() * qh * scale;
      dqkv.middleCols(2 * d + h * dh, dh) = dvh;
    }
    return qkv.backward(dqkv, acc);
  }

  void collect(nn::ParamList& out, const std::string& prefix) {
    qkv.collect(out, prefix + ".qkv");
    proj.collect(out, prefix + ".proj");
  }

  nn::Matrix q_cache, k_cache, v_cache;
  std::vector<nn::Matrix> att_cache;
};

struct Block {
  nn::LayerNorm ln1, ln2;
  SelfAttention attn;
  nn::Linear mlp_fc;    // d -> 4d
  nn::Gelu mlp_act;
  nn::Linear mlp_proj;  // 4d -> d

  void init(int d, int heads, std::mt19937_64& rng, double std_dev) {
    ln1.init(d);
    ln2.init(d);
    attn.init(d, heads, rng, std_dev);
    mlp_fc.init(d, 4 * d, rng, std_dev);
    mlp_proj.init(4 * d, d, rng, std_dev);
  }

  nn::Matrix forward(const nn::Matrix& x) {
    nn::Matrix x1 = x + attn.forward(ln1.forward(x));
    return x1 + mlp_proj.forward(mlp_act.forward(mlp_fc.forward(ln2.forward(x1))));
  }

  nn::Matrix forward_const(const nn::Matrix& x) const {
    nn::Matrix x1 = x + attn.forward_const(ln1.forward_const(x));
    return x1 + mlp_proj.forward_const(
                    mlp_act.forward_const(mlp_fc.forward_const(ln2.forward_const(x1))));
  }

  nn::Matrix backward(const nn::Matrix& dy, bool acc) {
    nn::Matrix dmid = mlp_fc.backward(
        mlp_act.backward(mlp_proj.backward(dy, acc)), acc);
    nn::Matrix dx1 = dy + ln2.backward(dmid, acc);
    nn::Matrix dattn = attn.backward(dx1, acc);
    return dx1 + ln1.backward(dattn, acc);
  }

  void collect(nn::ParamList& out, const std::string& prefix) {
    ln1.collect(out, prefix + ".ln1");
    attn.collect(out, prefix + ".attn");
    ln2.collect(out, prefix + ".ln2");
    mlp_fc.collect(out, prefix + ".mlp_fc");
    mlp_proj.collect(out, prefix + ".mlp_proj");
  }
};

// ---------------------------------------------------------------------------
// Fragment injection: single cross-attention over soft-fragment states with
// MLP projections. Value's output layer starts at zero, so a fresh module
// reproduces the bare backbone exactly (residual form).
// ---------------------------------------------------------------------------

struct InjectionModule {
  int layer = 1;  // inserted after this (1-based) backbone layer
  int d_key = 0;
  nn::Mlp2 query, key, value;

  void init(int d_model, int dk, int inject_layer, std::mt19937_64& rng, double std_dev = 0.02) {
    layer = inject_layer;
    d_key = dk;
    query.init(d_model, d_model, dk, rng, std_dev);
    key.init(d_model, d_model, dk, rng, std_dev);
    value.init(d_model, d_model, d_model, rng, std_dev);
    value.fc2.weight.w.setZero();
    value.fc2.bias.w.setZero();
  }

  nn::ParamList params() {
    nn::ParamList out;
    query.collect(out, "inject.query");
    key.collect(out, "inject.key");
    value.collect(out, "inject.value");
    return out;
  }

  long parameter_count() {
    return nn::parameter_count(params());
  }

  void check_dims(const nn::Matrix& h_input, const nn::Matrix& h_soft) const {
    long d = query.fc1.weight.w.rows();
    if (h_input.cols() != d || h_soft.cols() != d)
      throw ShapeMismatch("injection expects d_model=" + std::to_string(d) + " states");
  }

  // Pre-residual cross-attention output (the caller adds h_input).
  nn::Matrix attend_const(const nn::Matrix& h_input, const nn::Matrix& h_soft) const {
    check_dims(h_input, h_soft);
    nn::Matrix q = query.forward_const(h_input);   // (T, dk)
    nn::Matrix k = key.forward_const(h_soft);      // (S, dk)
    nn::Matrix v = value.forward_const(h_soft);    // (S, d)
    nn::Matrix att = q * k.transpose() / std::sqrt(static_cast<double>(d_key));
    nn::softmax_rows(att);
    return att * v;
  }

  nn::Matrix attend_train(const nn::Matrix& h_input, const nn::Matrix& h_soft) {
    check_dims(h_input, h_soft);
    q_cache = query.forward(h_input);
    k_cache = key.forward(h_soft);
    v_cache = value.forward(h_soft);
    att_cache = q_cache * k_cache.transpose() / std::sqrt(static_cast<double>(d_key));
    nn::softmax_rows(att_cache);
    return att_cache * v_cache;
  }

  // Gradient of the pre-residual output; accumulates this module's parameter
  // gradients and returns d(h_input) through the Query path.
  nn::Matrix backward(const nn::Matrix& d_out) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_key));
    nn::Matrix datt = d_out * v_cache.transpose();
    nn::Matrix dv = att_cache.transpose() * d_out;
    nn::Matrix ds = att_cache.cwiseProduct(datt);
    nn::Vector rowsum = ds.rowwise().sum();
    ds = att_cache.cwiseProduct(datt.colwise() - rowsum);
    nn::Matrix dq = ds * k_cache * scale;
    nn::Matrix dk = ds.transpose() * q_cache * scale;
    value.backward(dv, true);
    key.backward(dk, true);
    return query.backward(dq, true);
  }

  nn::Matrix q_cache, k_cache, v_cache, att_cache;
};

// ---------------------------------------------------------------------------
// Backbone.
// ---------------------------------------------------------------------------

class BackboneLM {
 public:
  LMConfig cfg;
  TokenVocab vocab;
  nn::Param wte;  // (V, d); also the tied output head
  nn::Param wpe;  // (context, d)
  std::vector<Block> blocks;
  nn::LayerNorm ln_f;

  void init(const LMConfig& c, TokenVocab v, uint64_t seed) {
    cfg = c;
    vocab = std::move(v);
    if (cfg.d_model % cfg.n_heads != 0) throw ConfigError("d_model must divide by n_heads");
    std::mt19937_64 rng(seed);
    wte.init(vocab.size(), cfg.d_model, rng, 0.02);
    wpe.init(cfg.context, cfg.d_model, rng, 0.02);
    blocks.assign(cfg.n_layers, Block());
    for (Block& b : blocks) b.init(cfg.d_model, cfg.n_heads, rng, 0.02);
    ln_f.init(cfg.d_model);
  }

  nn::ParamList params() {
    nn::ParamList out;
    out.push_back({"wte", &wte});
    out.push_back({"wpe", &wpe});
    for (size_t i = 0; i < blocks.size(); ++i)
      blocks[i].collect(out, "block" + std::to_string(i));
    ln_f.collect(out, "ln_f");
    return out;
  }

  void zero_grads() {
    for (nn::NamedParam& p : params()) p.param->zero_grad();
  }

  nn::Matrix embed(const std::vector<int>& toks) const {
    if (static_cast<int>(toks.size()) > cfg.context)
      throw ShapeMismatch("sequence longer than context");
    nn::Matrix x(toks.size(), cfg.d_model);
    for (size_t t = 0; t < toks.size(); ++t)
      x.row(t) = wte.w.row(toks[t]) + wpe.w.row(static_cast<int>(t));
    return x;
  }

  // Training path (cached): blocks [0, upto).
  nn::Matrix lower_forward(const nn::Matrix& emb, int upto) {
    nn::Matrix h = emb;
    for (int l = 0; l < upto; ++l) h = blocks[l].forward(h);
    return h;
  }
  nn::Matrix upper_forward(const nn::Matrix& h_in, int from) {
    nn::Matrix h = h_in;
    for (int l = from; l < cfg.n_layers; ++l) h = blocks[l].forward(h);
    return ln_f.forward(h);
  }

  // Inference path.
  nn::Matrix lower_forward_const(const nn::Matrix& emb, int upto) const {
    nn::Matrix h = emb;
    for (int l = 0; l < upto; ++l) h = blocks[l].forward_const(h);
    return h;
  }
  nn::Matrix upper_forward_const(const nn::Matrix& h_in, int from) const {
    nn::Matrix h = h_in;
    for (int l = from; l < cfg.n_layers; ++l) h = blocks[l].forward_const(h);
    return ln_f.forward_const(h);
  }

  // Hidden states after the given layer (layer 0 = embeddings only).
  nn::Matrix encode_lower(const std::vector<int>& toks, int layer) const {
    if (layer < 0 || layer > cfg.n_layers) throw ConfigError("bad injection layer");
    return lower_forward_const(embed(toks), layer);
  }

  nn::Matrix logits_of(const nn::Matrix& h_final) const { return h_final * wte.w.transpose(); }

  // Full inference forward with optional injection after `layer`.
  nn::Matrix forward_logits(const std::vector<int>& toks, const InjectionModule* inj = nullptr,
                            const nn::Matrix* h_soft = nullptr) const {
    int split = inj ? inj->layer : 0;
    nn::Matrix h = lower_forward_const(embed(toks), split);
    if (inj && h_soft && h_soft->rows() > 0) h = h + inj->attend_const(h, *h_soft);
    return logits_of(upper_forward_const(h, split));
  }

  // Per-fragment lower states concatenated along the sequence axis.
  nn::Matrix soft_states(const std::vector<Fragment>& soft, int layer) const {
    std::vector<nn::Matrix> parts;
    long rows = 0;
    for (const Fragment& f : soft) {
      std::vector<int> toks = vocab.encode(fragment_to_smiles(f));
      parts.push_back(encode_lower(toks, layer));
      rows += parts.back().rows();
    }
    nn::Matrix h(rows, cfg.d_model);
    long at = 0;
    for (const nn::Matrix& p : parts) {
      h.middleRows(at, p.rows()) = p;
      at += p.rows();
    }
    return h;
  }

  long n_params() {
    return nn::parameter_count(params());
  }
};

// ---------------------------------------------------------------------------
// Incremental decoding with per-block KV caches. Equivalent to re-running the
// full prefix every step (causal attention; the injection acts per position).
// ---------------------------------------------------------------------------

class DecodeSession {
 public:
  DecodeSession(const BackboneLM& lm, const InjectionModule* inj, const nn::Matrix* h_soft)
      : lm_(lm), inj_(inj) {
    k_cache_.assign(lm.cfg.n_layers, nn::Matrix(lm.cfg.context, lm.cfg.d_model));
    v_cache_.assign(lm.cfg.n_layers, nn::Matrix(lm.cfg.context, lm.cfg.d_model));
    if (inj_ && h_soft && h_soft->rows() > 0) {
      soft_k_ = inj_->key.forward_const(*h_soft);    // (S, dk)
      soft_v_ = inj_->value.forward_const(*h_soft);  // (S, d)
      has_soft_ = true;
    }
  }

  int position() const { return pos_; }
  bool full() const { return pos_ >= lm_.cfg.context; }

  // Feeds one token; returns the logits row for the next token.
  nn::Vector feed(int token) {
    if (full()) throw ShapeMismatch("context overflow");
    const int d = lm_.cfg.d_model;
    const int heads = lm_.cfg.n_heads;
    const int dh = d / heads;
    nn::Matrix h = lm_.wte.w.row(token) + lm_.wpe.w.row(pos_);  // (1, d)
    for (int l = 0; l < lm_.cfg.n_layers; ++l) {
      const Block& b = lm_.blocks[l];
      nn::Matrix a = b.ln1.forward_const(h);
      nn::Matrix qkv = b.attn.qkv.forward_const(a);  // (1, 3d)
      k_cache_[l].row(pos_) = qkv.middleCols(d, d);
      v_cache_[l].row(pos_) = qkv.rightCols(d);
      nn::Matrix heads_out(1, d);
      const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
      for (int hh = 0; hh < heads; ++hh) {
        auto qh = qkv.middleCols(hh * dh, dh);
        auto kh = k_cache_[l].topRows(pos_ + 1).middleCols(hh * dh, dh);
        auto vh = v_cache_[l].topRows(pos_ + 1).middleCols(hh * dh, dh);
        nn::Matrix scores = qh * kh.transpose() * scale;  // (1, t)
        nn::softmax_rows(scores);
        heads_out.middleCols(hh * dh, dh) = scores * vh;
      }
      h = h + b.attn.proj.forward_const(heads_out);
      h = h + b.mlp_proj.forward_const(
                  b.mlp_act.forward_const(b.mlp_fc.forward_const(b.ln2.forward_const(h))));
      if (inj_ && has_soft_ && l + 1 == inj_->layer) {
        nn::Matrix q = inj_->query.forward_const(h);
        nn::Matrix att = q * soft_k_.transpose() / std::sqrt(static_cast<double>(inj_->d_key));
        nn::softmax_rows(att);
        h = h + att * soft_v_;
      }
    }
    ++pos_;
    nn::Matrix hf = lm_.ln_f.forward_const(h);
    return (hf * lm_.wte.w.transpose()).row(0);
  }

 private:
  const BackboneLM& lm_;
  const InjectionModule* inj_;
  nn::Matrix soft_k_, soft_v_;
  bool has_soft_ = false;
  std::vector<nn::Matrix> k_cache_, v_cache_;
  int pos_ = 0;
};

// ---------------------------------------------------------------------------
// Sampling.
// ---------------------------------------------------------------------------

inline int sample_token(nn::Vector logits, const SamplingConfig& s, std::mt19937_64& rng) {
  logits(TokenVocab::kPad) = -1e30;
  logits(TokenVocab::kBos) = -1e30;
  if (s.temperature <= 0.0) {
    int best = 0;
    logits.maxCoeff(&best);
    return best;
  }
  logits /= s.temperature;
  double mx = logits.maxCoeff();
  nn::Vector probs = (logits.array() - mx).exp();
  probs /= probs.sum();

  std::vector<int> order(probs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return probs(a) > probs(b); });

  size_t keep = order.size();
  if (s.top_k > 0) keep = std::min<size_t>(keep, s.top_k);
  if (s.top_p < 1.0) {
    double cum = 0;
    for (size_t i = 0; i < keep; ++i) {
      cum += probs(order[i]);
      if (cum >= s.top_p) {
        keep = i + 1;
        break;
      }
    }
  }
  double total = 0;
  for (size_t i = 0; i < keep; ++i) total += probs(order[i]);
  double r = std::uniform_real_distribution<double>(0.0, total)(rng);
  double cum = 0;
  for (size_t i = 0; i < keep; ++i) {
    cum += probs(order[i]);
    if (r <= cum) return order[i];
  }
  return order[keep - 1];
}

// ---------------------------------------------------------------------------
// Generation: one sampling attempt. Empty on overrun, tokenizer misses, or
// chemistry that fails reassembly.
// ---------------------------------------------------------------------------

struct GenerationResult {
  MolGraph mol;
  std::string safe_text;
  ReassembledMolecule assembled;
};

inline std::optional<GenerationResult> generate_once(const BackboneLM& lm,
                                                     const InjectionModule* inj,
                                                     const std::string& prefix_text,
                                                     const std::vector<Fragment>& soft,
                                                     const SamplingConfig& s,
                                                     std::mt19937_64& rng) {
  std::vector<int> prefix;
  nn::Matrix h_soft;
  try {
    prefix = lm.vocab.encode(prefix_text, /*bos=*/true);
    if (inj && !soft.empty()) h_soft = lm.soft_states(soft, inj->layer);
  } catch (const TokenizeError&) {
    return std::nullopt;
  }
  if (static_cast<int>(prefix.size()) + 1 >= lm.cfg.context) return std::nullopt;

  DecodeSession session(lm, inj, &h_soft);
  nn::Vector logits;
  for (int tok : prefix) logits = session.feed(tok);

  std::vector<int> sampled;
  bool ended = false;
  for (int step = 0; step < s.max_new_tokens; ++step) {
    if (session.full()) break;
    int tok = sample_token(logits, s, rng);
    if (tok == TokenVocab::kEos) {
      ended = true;
      break;
    }
    sampled.push_back(tok);
    logits = session.feed(tok);
  }
  if (!ended) return std::nullopt;  // EOS-less overrun

  GenerationResult out;
  out.safe_text = prefix_text + lm.vocab.decode(sampled);
  try {
    out.assembled = reassemble_safe(out.safe_text);
  } catch (const Error&) {
    return std::nullopt;
  }
  out.mol = out.assembled.mol;
  return out;
}

// Unconditional sample from BOS (the backbone-only baseline and the validity
// probe for pretraining).
inline std::optional<GenerationResult> sample_unconditional(const BackboneLM& lm,
                                                            const SamplingConfig& s,
                                                            std::mt19937_64& rng) {
  DecodeSession session(lm, nullptr, nullptr);
  nn::Vector logits = session.feed(TokenVocab::kBos);
  std::vector<int> sampled;
  bool ended = false;
  for (int step = 0; step < s.max_new_tokens; ++step) {
    if (session.full()) break;
    int tok = sample_token(logits, s, rng);
    if (tok == TokenVocab::kEos) {
      ended = true;
      break;
    }
    sampled.push_back(tok);
    logits = session.feed(tok);
  }
  if (!ended || sampled.empty()) return std::nullopt;
  GenerationResult out;
  out.safe_text = lm.vocab.decode(sampled);
  try {
    out.assembled = reassemble_safe(out.safe_text);
  } catch (const Error&) {
    return std::nullopt;
  }
  out.mol = out.assembled.mol;
  return out;
}

}  // namespace frag
