#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "frag/lm.hpp"
#include "frag/nn.hpp"
#include "frag/retrieval.hpp"

namespace frag {

// ---------------------------------------------------------------------------
// Loss.
// ---------------------------------------------------------------------------

struct CrossEntropyResult {
  double loss = 0.0;      // mean over counted positions
  nn::Matrix dlogits;     // gradient of that mean
  int counted = 0;
};

// targets[i] < 0 or == pad are ignored (zero loss, zero gradient).
inline CrossEntropyResult cross_entropy(const nn::Matrix& logits, const std::vector<int>& targets) {
  CrossEntropyResult out;
  out.dlogits = nn::Matrix::Zero(logits.rows(), logits.cols());
  for (int t = 0; t < logits.rows(); ++t)
    if (targets[t] >= 0 && targets[t] != TokenVocab::kPad) ++out.counted;
  if (out.counted == 0) return out;
  for (int t = 0; t < logits.rows(); ++t) {
    int y = targets[t];
    if (y < 0 || y == TokenVocab::kPad) continue;
    double mx = logits.row(t).maxCoeff();
    nn::RowArray e = (logits.row(t).array() - mx).exp();
    double z = e.sum();
    out.loss += -(logits(t, y) - mx - std::log(z));
    out.dlogits.row(t) = (e / z).matrix() / out.counted;
    out.dlogits(t, y) -= 1.0 / out.counted;
  }
  out.loss /= out.counted;
  return out;
}

inline void clip_gradients(const nn::ParamList& params, double max_norm) {
  if (max_norm <= 0) return;
  double norm = nn::grad_norm(params);
  if (norm <= max_norm) return;
  double scale = max_norm / norm;
  for (const nn::NamedParam& p : params) p.param->g *= scale;
}

// ---------------------------------------------------------------------------
// Backbone pretraining: next-token cross-entropy over SAFE strings.
// ---------------------------------------------------------------------------

struct PretrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double lr = 3e-4;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  int skipped_too_long = 0;
};

// Slice each molecule once; decomposable ones become 3-block SAFE strings in
// a random block order, the rest plain canonical strings.
inline std::vector<std::string> safe_training_corpus(const std::vector<MolGraph>& mols,
                                                     uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  out.reserve(mols.size());
  for (const MolGraph& m : mols) {
    auto s = slice_arm_linker_arm(m, rng);
    if (s) {
      std::vector<int> order{0, 1, 2};
      std::shuffle(order.begin(), order.end(), rng);
      out.push_back(to_safe({s->arm1, s->linker, s->arm2}, order));
    } else {
      out.push_back(write_smiles(m));
    }
  }
  return out;
}

namespace detail_train {

// Full cached forward + backward for one sequence; accumulates gradients
// scaled by `scale`. Returns the unscaled mean loss.
inline double backbone_step(BackboneLM& lm, const std::vector<int>& toks, double scale) {
  std::vector<int> input(toks.begin(), toks.end() - 1);
  std::vector<int> targets(toks.begin() + 1, toks.end());
  nn::Matrix h = lm.embed(input);
  for (Block& b : lm.blocks) h = b.forward(h);
  nn::Matrix hf = lm.ln_f.forward(h);
  nn::Matrix logits = lm.logits_of(hf);

  CrossEntropyResult ce = cross_entropy(logits, targets);
  if (ce.counted == 0) return 0.0;
  ce.dlogits *= scale;

  nn::Matrix dhf = ce.dlogits * lm.wte.w;
  lm.wte.g.noalias() += ce.dlogits.transpose() * hf;
  nn::Matrix dh = lm.ln_f.backward(dhf, true);
  for (int l = lm.cfg.n_layers - 1; l >= 0; --l) dh = lm.blocks[l].backward(dh, true);
  for (int t = 0; t < dh.rows(); ++t) {
    lm.wte.g.row(input[t]) += dh.row(t);
    lm.wpe.g.row(t) += dh.row(t);
  }
  return ce.loss;
}

}  // namespace detail_train

inline TrainReport pretrain_backbone(BackboneLM& lm, const std::vector<std::string>& corpus,
                                     const PretrainConfig& hp) {
  if (corpus.empty()) throw ConfigError("empty pretraining corpus");
  std::mt19937_64 rng(hp.seed);
  nn::ParamList params = lm.params();
  nn::AdamW opt;
  opt.lr = hp.lr;
  opt.weight_decay = hp.weight_decay;
  opt.attach(params);

  std::vector<std::vector<int>> sequences;
  TrainReport report;
  for (const std::string& s : corpus) {
    std::vector<int> toks = lm.vocab.encode(s, /*bos=*/true, /*eos=*/true);
    if (static_cast<int>(toks.size()) > lm.cfg.context) {
      ++report.skipped_too_long;
      continue;
    }
    sequences.push_back(std::move(toks));
  }
  if (sequences.empty()) throw ConfigError("every corpus line exceeds the context window");

  std::vector<size_t> order(sequences.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    long seen = 0;
    for (size_t at = 0; at < order.size(); at += hp.batch_size) {
      size_t bsz = std::min<size_t>(hp.batch_size, order.size() - at);
      lm.zero_grads();
      for (size_t b = 0; b < bsz; ++b) {
        epoch_loss += detail_train::backbone_step(lm, sequences[order[at + b]], 1.0 / bsz);
        ++seen;
      }
      clip_gradients(params, hp.grad_clip);
      opt.step(params);
    }
    report.epoch_loss.push_back(epoch_loss / seen);
  }
  lm.zero_grads();
  return report;
}

// Fraction of unconditional samples that survive reassembly.
inline double sample_validity(const BackboneLM& lm, int n, const SamplingConfig& s,
                              std::mt19937_64& rng) {
  int valid = 0;
  for (int i = 0; i < n; ++i)
    if (sample_unconditional(lm, s, rng)) ++valid;
  return static_cast<double>(valid) / n;
}

// ---------------------------------------------------------------------------
// Injection-module training: slice to (F1, F2, F3) with a random block
// permutation, use F1.F2. as the hard prompt, soft set = {F3} + its 2..K
// nearest same-kind pool fragments, and learn to emit F3's nearest neighbor.
// ---------------------------------------------------------------------------

struct InjectionExample {
  std::vector<int> tokens;     // BOS + prompt + target block + EOS
  int target_start = 0;        // index in `tokens` of the first target token
  std::vector<Fragment> soft;  // K fragments
};

struct InjectionData {
  std::vector<InjectionExample> examples;
  int skipped = 0;  // undecomposable, too long, or tokenizer misses
};

namespace detail_train {

struct SlicedMol {
  ArmLinkerArm frags;
  std::vector<int> order;  // block permutation
};

// Render a fragment as a completion block carrying the given closure labels.
inline std::string render_block(const Fragment& f, const std::vector<int>& labels) {
  WriteOptions opts;
  for (size_t i = 0; i < f.attachments.size(); ++i)
    opts.extra_closures.emplace_back(f.attachments[i], labels[i]);
  return write_smiles(f.graph, opts);
}

}  // namespace detail_train

// Examples are sliced from `molecules`; the kNN reference pool comes from
// `pool_molecules` when given (held-out evaluation), otherwise from the
// training molecules themselves.
inline InjectionData build_injection_examples(const BackboneLM& lm,
                                              const std::vector<MolGraph>& molecules, int k_soft,
                                              uint64_t seed,
                                              const std::vector<MolGraph>* pool_molecules = nullptr) {
  if (k_soft < 2) throw ConfigError("k_soft must be >= 2 for injection training");
  std::mt19937_64 rng(seed);
  InjectionData out;

  std::vector<detail_train::SlicedMol> sliced;
  std::vector<Fragment> arm_pool, linker_pool;
  for (const MolGraph& m : molecules) {
    auto s = slice_arm_linker_arm(m, rng);
    if (!s) {
      ++out.skipped;
      continue;
    }
    if (!pool_molecules) {
      arm_pool.push_back(s->arm1);
      arm_pool.push_back(s->arm2);
      linker_pool.push_back(s->linker);
    }
    std::vector<int> order{0, 1, 2};
    std::shuffle(order.begin(), order.end(), rng);
    sliced.push_back({std::move(*s), std::move(order)});
  }
  if (pool_molecules) {
    std::mt19937_64 pool_rng(seed + 1);
    for (const MolGraph& m : *pool_molecules) {
      auto s = slice_arm_linker_arm(m, pool_rng);
      if (!s) continue;
      arm_pool.push_back(s->arm1);
      arm_pool.push_back(s->arm2);
      linker_pool.push_back(s->linker);
    }
  }
  FragmentIndex arm_index = FragmentIndex::build(arm_pool);
  FragmentIndex linker_index = FragmentIndex::build(linker_pool);

  for (const detail_train::SlicedMol& sm : sliced) {
    const std::vector<Fragment> frags{sm.frags.arm1, sm.frags.linker, sm.frags.arm2};
    // Labels as assigned by to_safe: arm1<->linker share 10, linker<->arm2 share 11.
    const std::vector<std::vector<int>> labels{{10}, {10, 11}, {11}};
    std::string text = to_safe(frags, sm.order);
    size_t cut = text.rfind('.');
    std::string prompt = text.substr(0, cut + 1);

    const Fragment& f3 = frags[sm.order[2]];
    const FragmentIndex& pool = f3.kind() == FragmentKind::Arm ? arm_index : linker_index;
    std::vector<int> nn;
    try {
      nn = knn_indices(fragment_fingerprint(f3), fragment_key(f3), pool, k_soft);
    } catch (const PoolTooSmall&) {
      ++out.skipped;
      continue;
    }
    const Fragment& target = pool.items[nn[0]];
    std::string target_text = detail_train::render_block(target, labels[sm.order[2]]);

    InjectionExample ex;
    ex.soft.push_back(f3);
    for (int i = 1; i < k_soft; ++i) ex.soft.push_back(pool.items[nn[i]]);
    try {
      std::vector<int> prompt_toks = lm.vocab.encode(prompt, /*bos=*/true);
      std::vector<int> target_toks = lm.vocab.encode(target_text, /*bos=*/false, /*eos=*/true);
      ex.target_start = static_cast<int>(prompt_toks.size());
      ex.tokens = std::move(prompt_toks);
      ex.tokens.insert(ex.tokens.end(), target_toks.begin(), target_toks.end());
    } catch (const TokenizeError&) {
      ++out.skipped;
      continue;
    }
    if (static_cast<int>(ex.tokens.size()) > lm.cfg.context) {
      ++out.skipped;
      continue;
    }
    out.examples.push_back(std::move(ex));
  }
  return out;
}

struct InjectionTrainConfig {
  int epochs = 8;        // Appendix-default
  double lr = 1e-4;      // Appendix-default
  int batch_size = 16;
  double weight_decay = 0.0;
  double grad_clip = 1.0;
  uint64_t seed = 0;
};

namespace detail_train {

// Forward with injection; caches live in the upper blocks and the module.
// Only injection parameters receive gradients.
inline double injection_step(BackboneLM& lm, InjectionModule& inj, const InjectionExample& ex,
                             double scale) {
  std::vector<int> input(ex.tokens.begin(), ex.tokens.end() - 1);
  std::vector<int> targets(ex.tokens.begin() + 1, ex.tokens.end());
  for (int i = 0; i + 1 < ex.target_start; ++i) targets[i] = -1;

  nn::Matrix h_low = lm.lower_forward_const(lm.embed(input), inj.layer);
  nn::Matrix h_soft = lm.soft_states(ex.soft, inj.layer);
  nn::Matrix h = h_low + inj.attend_train(h_low, h_soft);
  for (int l = inj.layer; l < lm.cfg.n_layers; ++l) h = lm.blocks[l].forward(h);
  nn::Matrix hf = lm.ln_f.forward(h);
  nn::Matrix logits = lm.logits_of(hf);

  CrossEntropyResult ce = cross_entropy(logits, targets);
  if (ce.counted == 0) return 0.0;
  ce.dlogits *= scale;

  nn::Matrix dh = lm.ln_f.backward(ce.dlogits * lm.wte.w, /*accumulate_params=*/false);
  for (int l = lm.cfg.n_layers - 1; l >= inj.layer; --l)
    dh = lm.blocks[l].backward(dh, /*accumulate_params=*/false);
  inj.backward(dh);
  return ce.loss;
}

}  // namespace detail_train

inline TrainReport train_injection(BackboneLM& lm, InjectionModule& inj,
                                   const std::vector<InjectionExample>& examples,
                                   const InjectionTrainConfig& hp) {
  if (examples.empty()) throw ConfigError("no injection training examples");
  std::mt19937_64 rng(hp.seed);
  nn::ParamList params = inj.params();
  nn::AdamW opt;
  opt.lr = hp.lr;
  opt.weight_decay = hp.weight_decay;
  opt.attach(params);

  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainReport report;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    long seen = 0;
    for (size_t at = 0; at < order.size(); at += hp.batch_size) {
      size_t bsz = std::min<size_t>(hp.batch_size, order.size() - at);
      for (const nn::NamedParam& p : params) p.param->zero_grad();
      for (size_t b = 0; b < bsz; ++b) {
        epoch_loss +=
            detail_train::injection_step(lm, inj, examples[order[at + b]], 1.0 / bsz);
        ++seen;
      }
      clip_gradients(params, hp.grad_clip);
      opt.step(params);
    }
    report.epoch_loss.push_back(epoch_loss / seen);
  }
  return report;
}

// Mean log-likelihood of the target tokens under the (optionally injected)
// model; inj == nullptr scores the bare backbone.
inline double example_loglik(const BackboneLM& lm, const InjectionModule* inj,
                             const InjectionExample& ex) {
  std::vector<int> input(ex.tokens.begin(), ex.tokens.end() - 1);
  nn::Matrix h_soft;
  if (inj) h_soft = lm.soft_states(ex.soft, inj->layer);
  nn::Matrix logits = lm.forward_logits(input, inj, inj ? &h_soft : nullptr);
  double ll = 0.0;
  int counted = 0;
  for (int i = ex.target_start - 1; i + 1 < static_cast<int>(ex.tokens.size()); ++i) {
    int y = ex.tokens[i + 1];
    double mx = logits.row(i).maxCoeff();
    double z = std::log((logits.row(i).array() - mx).exp().sum());
    ll += logits(i, y) - mx - z;
    ++counted;
  }
  return counted ? ll / counted : 0.0;
}

}  // namespace frag
