#include "ssmcast/decoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssmcast/ops.hpp"

namespace ssmcast {

AttentionWeights::AttentionWeights(std::size_t d, Rng& rng, ParamRegistry& reg,
                                   const std::string& prefix) {
  wq = linear_init(rng, d, d);
  wk = linear_init(rng, d, d);
  wv = linear_init(rng, d, d);
  wo = linear_init(rng, d, d);
  bq = Tensor({d}, Real(0));
  bk = Tensor({d}, Real(0));
  bv = Tensor({d}, Real(0));
  bo = Tensor({d}, Real(0));
  reg.add(prefix + ".wq", wq);
  reg.add(prefix + ".bq", bq);
  reg.add(prefix + ".wk", wk);
  reg.add(prefix + ".bk", bk);
  reg.add(prefix + ".wv", wv);
  reg.add(prefix + ".bv", bv);
  reg.add(prefix + ".wo", wo);
  reg.add(prefix + ".bo", bo);
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionWeights& w, std::size_t heads) {
  const std::size_t d = w.wq.dim(0);
  if (heads == 0 || d % heads != 0)
    throw std::invalid_argument("attention: d_model must divide by heads");
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != d ||
      k.dim(1) != d || v.dim(1) != d)
    throw std::invalid_argument("attention: q/k/v must be [rows, d_model]");
  if (k.dim(0) != v.dim(0))
    throw std::invalid_argument("attention: k and v row counts differ");

  Tensor qp = linear(q, w.wq, &w.bq);
  Tensor kp = linear(k, w.wk, &w.bk);
  Tensor vp = linear(v, w.wv, &w.bv);

  const std::size_t dh = d / heads;
  const Real inv_scale = Real(1) / std::sqrt(Real(dh));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice(qp, 1, h * dh, dh);
    Tensor kh = slice(kp, 1, h * dh, dh);
    Tensor vh = slice(vp, 1, h * dh, dh);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_scale);
    Tensor attn = softmax(scores, 1);
    outs.push_back(matmul(attn, vh));
  }
  Tensor merged = heads == 1 ? outs[0] : concat(outs, 1);
  return linear(merged, w.wo, &w.bo);
}

namespace {

DecoderLayerWeights make_layer(std::size_t d, std::size_t ffn_mult,
                               bool self_attention, Rng& rng,
                               ParamRegistry& reg, const std::string& prefix) {
  DecoderLayerWeights lw;
  if (self_attention) {
    lw.ln1_g = Tensor({d}, Real(1));
    lw.ln1_b = Tensor({d}, Real(0));
    reg.add(prefix + ".ln1.g", lw.ln1_g);
    reg.add(prefix + ".ln1.b", lw.ln1_b);
    lw.self_attn = AttentionWeights(d, rng, reg, prefix + ".self");
  }
  lw.ln2_g = Tensor({d}, Real(1));
  lw.ln2_b = Tensor({d}, Real(0));
  reg.add(prefix + ".ln2.g", lw.ln2_g);
  reg.add(prefix + ".ln2.b", lw.ln2_b);
  lw.cross_attn = AttentionWeights(d, rng, reg, prefix + ".cross");
  lw.ln3_g = Tensor({d}, Real(1));
  lw.ln3_b = Tensor({d}, Real(0));
  reg.add(prefix + ".ln3.g", lw.ln3_g);
  reg.add(prefix + ".ln3.b", lw.ln3_b);
  const std::size_t dff = d * ffn_mult;
  lw.ffn_w1 = linear_init(rng, d, dff);
  lw.ffn_b1 = Tensor({dff}, Real(0));
  lw.ffn_w2 = linear_init(rng, dff, d);
  lw.ffn_b2 = Tensor({d}, Real(0));
  reg.add(prefix + ".ffn.w1", lw.ffn_w1);
  reg.add(prefix + ".ffn.b1", lw.ffn_b1);
  reg.add(prefix + ".ffn.w2", lw.ffn_w2);
  reg.add(prefix + ".ffn.b2", lw.ffn_b2);
  return lw;
}

// Fixed sin/cos position rows, [rows, d]. Not trained, rebuilt on demand.
Tensor sinusoid_positions(std::size_t rows, std::size_t d) {
  Tensor p({rows, d}, Real(0));
  Real* out = p.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j + 1 < d; j += 2) {
      const double freq = std::pow(10000.0, -double(j) / double(d));
      out[r * d + j] = Real(std::sin(double(r) * freq));
      out[r * d + j + 1] = Real(std::cos(double(r) * freq));
    }
  }
  return p;
}

}  // namespace

DecoderWeights::DecoderWeights(const DecoderConfig& c, Rng& rng,
                               ParamRegistry& reg, const std::string& prefix)
    : cfg(c) {
  if (cfg.queries == 0) throw std::invalid_argument("decoder: queries must be >= 1");
  if (cfg.heads == 0 || cfg.d_model % cfg.heads != 0)
    throw std::invalid_argument("decoder: d_model must divide by heads");
  if (cfg.layers == 0 || cfg.ffn_mult == 0)
    throw std::invalid_argument("decoder: layers and ffn_mult must be >= 1");

  q_content = Tensor({cfg.queries, cfg.d_model}, Real(0));
  if (cfg.learnable_queries) reg.add(prefix + ".q_content", q_content);
  q_pos = normal_init(rng, {cfg.queries, cfg.d_model}, 0.02);
  reg.add(prefix + ".q_pos", q_pos);

  layers.reserve(cfg.layers);
  for (std::size_t i = 0; i < cfg.layers; ++i)
    layers.push_back(make_layer(cfg.d_model, cfg.ffn_mult, cfg.self_attention,
                                rng, reg, prefix + ".layer" + std::to_string(i)));

  ln_f_g = Tensor({cfg.d_model}, Real(1));
  ln_f_b = Tensor({cfg.d_model}, Real(0));
  reg.add(prefix + ".ln_f.g", ln_f_g);
  reg.add(prefix + ".ln_f.b", ln_f_b);
}

Tensor decode(const Tensor& e_short, const DecoderWeights& w) {
  if (e_short.rank() != 2 || e_short.dim(1) != w.cfg.d_model)
    throw std::invalid_argument("decoder: memory must be [rows, d_model]");

  Tensor keys = e_short;
  if (w.cfg.key_positional)
    keys = add(e_short, sinusoid_positions(e_short.dim(0), w.cfg.d_model));

  Tensor state = w.q_content;
  for (const auto& lw : w.layers) {
    if (w.cfg.self_attention) {
      Tensor h = layer_norm(state, lw.ln1_g, lw.ln1_b);
      Tensor hq = add(h, w.q_pos);  // positional goes to q and k, not v
      state = add(state, multi_head_attention(hq, hq, h, lw.self_attn,
                                              w.cfg.heads));
    }
    Tensor h = layer_norm(state, lw.ln2_g, lw.ln2_b);
    Tensor hq = add(h, w.q_pos);
    state = add(state,
                multi_head_attention(hq, keys, e_short, lw.cross_attn,
                                     w.cfg.heads));
    Tensor h2 = layer_norm(state, lw.ln3_g, lw.ln3_b);
    Tensor ff = linear(silu(linear(h2, lw.ffn_w1, &lw.ffn_b1)), lw.ffn_w2,
                       &lw.ffn_b2);
    state = add(state, ff);
  }
  return layer_norm(state, w.ln_f_g, w.ln_f_b);
}

HeadWeights::HeadWeights(const HeadsConfig& c, Rng& rng, ParamRegistry& reg,
                         const std::string& prefix)
    : cfg(c) {
  if (cfg.vocab_verbs == 0 || cfg.vocab_nouns == 0)
    throw std::invalid_argument("heads: vocab sizes must be >= 1");
  if (cfg.action_head && cfg.vocab_actions == 0)
    throw std::invalid_argument("heads: action head needs vocab_actions >= 1");

  w_verb = linear_init(rng, cfg.d_model, cfg.vocab_verbs);
  b_verb = Tensor({cfg.vocab_verbs}, Real(0));
  reg.add(prefix + ".verb.w", w_verb);
  reg.add(prefix + ".verb.b", b_verb);
  w_noun = linear_init(rng, cfg.d_model, cfg.vocab_nouns);
  b_noun = Tensor({cfg.vocab_nouns}, Real(0));
  reg.add(prefix + ".noun.w", w_noun);
  reg.add(prefix + ".noun.b", b_noun);
  if (cfg.action_head) {
    w_action = linear_init(rng, cfg.d_model, cfg.vocab_actions);
    b_action = Tensor({cfg.vocab_actions}, Real(0));
    reg.add(prefix + ".action.w", w_action);
    reg.add(prefix + ".action.b", b_action);
  }
}

SlotLogits classify_logits(const Tensor& f, const HeadWeights& w) {
  if (f.rank() != 2 || f.dim(1) != w.cfg.d_model)
    throw std::invalid_argument("heads: slot features must be [Z, d_model]");
  SlotLogits out;
  out.verbs = linear(f, w.w_verb, &w.b_verb);
  out.nouns = linear(f, w.w_noun, &w.b_noun);
  if (w.cfg.action_head) out.actions = linear(f, w.w_action, &w.b_action);
  return out;
}

SlotDistributions classify_heads(const Tensor& f, const HeadWeights& w) {
  SlotLogits lg = classify_logits(f, w);
  SlotDistributions out;
  out.verbs = softmax(lg.verbs, 1);
  out.nouns = softmax(lg.nouns, 1);
  if (w.cfg.action_head) out.actions = softmax(lg.actions, 1);
  return out;
}

}  // namespace ssmcast
