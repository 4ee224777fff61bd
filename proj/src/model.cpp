#include "ssmcast/model.hpp"

#include <stdexcept>

#include "ssmcast/ops.hpp"

namespace ssmcast {

EncoderConfig encoder_config(const Config& cfg) {
  cfg.validate();
  EncoderConfig e;
  e.input_dim = cfg.input_dim;
  e.d_model = cfg.d_model;
  e.layers = cfg.enc_layers;
  e.long_tokens = cfg.long_tokens;
  e.short_tokens = cfg.short_tokens;
  e.block.d_model = cfg.d_model;
  e.block.n_state = cfg.n_state;
  e.block.expand = cfg.expand;
  e.block.conv_width = cfg.conv_width;
  return e;
}

DecoderConfig decoder_config(const Config& cfg) {
  DecoderConfig d;
  d.d_model = cfg.d_model;
  d.heads = cfg.heads;
  d.layers = cfg.dec_layers;
  d.queries = cfg.queries;
  d.ffn_mult = cfg.ffn_mult;
  d.self_attention = cfg.decoder_self_attention;
  d.learnable_queries = cfg.learnable_queries;
  d.key_positional = cfg.key_positional;
  return d;
}

HeadsConfig heads_config(const Config& cfg, std::size_t action_classes) {
  if (cfg.loss_action && action_classes == 0)
    throw std::invalid_argument(
        "action loss enabled but no action taxonomy supplied");
  if (!cfg.loss_action && action_classes != 0)
    throw std::invalid_argument(
        "action taxonomy supplied but loss_action is off");
  HeadsConfig h;
  h.d_model = cfg.d_model;
  h.vocab_verbs = cfg.vocab_verbs;
  h.vocab_nouns = cfg.vocab_nouns;
  h.action_head = cfg.loss_action;
  h.vocab_actions = action_classes;
  return h;
}

Forecaster::Forecaster(const Config& c, Rng& rng, std::size_t ac)
    : cfg(c),
      action_classes(ac),
      enc(encoder_config(c), rng, params, "enc"),
      dec(decoder_config(c), rng, params, "dec"),
      heads(heads_config(c, ac), rng, params, "heads") {
  if (cfg.loss_aux) {
    aux_verb_w = params.add("aux.verb.w",
                            linear_init(rng, cfg.d_model, cfg.vocab_verbs));
    aux_verb_b = params.add("aux.verb.b", Tensor({cfg.vocab_verbs}));
    aux_noun_w = params.add("aux.noun.w",
                            linear_init(rng, cfg.d_model, cfg.vocab_nouns));
    aux_noun_b = params.add("aux.noun.b", Tensor({cfg.vocab_nouns}));
  }
}

Forecaster::Output Forecaster::forward(const Tensor& memory) const {
  Output out;
  out.encoded = encode(memory, enc);
  out.slots = decode(out.encoded.short_mem, dec);
  out.logits = classify_logits(out.slots, heads);
  if (cfg.loss_aux) {
    out.aux_verb_logits =
        linear(out.encoded.short_mem, aux_verb_w, &aux_verb_b);
    out.aux_noun_logits =
        linear(out.encoded.short_mem, aux_noun_w, &aux_noun_b);
  }
  return out;
}

LossBreakdown compute_loss(const Forecaster& model,
                           const Forecaster::Output& out,
                           const MemoryExample& example,
                           const ActionTaxonomy* taxonomy) {
  const Config& cfg = model.cfg;
  if (cfg.loss_action && taxonomy == nullptr)
    throw std::invalid_argument(
        "action loss enabled but no action taxonomy supplied");
  if (example.targets.size() != cfg.queries)
    throw std::invalid_argument(
        "compute_loss: example has " + std::to_string(example.targets.size()) +
        " targets, model forecasts " + std::to_string(cfg.queries));

  std::vector<std::int64_t> verbs, nouns;
  verbs.reserve(example.targets.size());
  nouns.reserve(example.targets.size());
  for (const SlotPair& p : example.targets) {
    verbs.push_back(static_cast<std::int64_t>(p.verb));
    nouns.push_back(static_cast<std::int64_t>(p.noun));
  }

  LossBreakdown bd;
  Tensor total = Tensor::scalar(0);
  if (cfg.loss_verb) {
    Tensor t = cross_entropy(out.logits.verbs, verbs);
    bd.verb = t.item();
    total = add(total, t);
  }
  if (cfg.loss_noun) {
    Tensor t = cross_entropy(out.logits.nouns, nouns);
    bd.noun = t.item();
    total = add(total, t);
  }
  if (cfg.loss_action) {
    std::vector<std::int64_t> ids;
    ids.reserve(example.targets.size());
    for (const SlotPair& p : example.targets)
      ids.push_back(taxonomy->action_id(p.verb, p.noun));  // -1 when unseen
    Tensor t = cross_entropy(out.logits.actions, ids);
    bd.action = t.item();
    total = add(total, t);
  }
  if (cfg.loss_aux) {
    Tensor tv = cross_entropy(out.aux_verb_logits, example.aux_verbs);
    Tensor tn = cross_entropy(out.aux_noun_logits, example.aux_nouns);
    bd.aux_verb = tv.item();
    bd.aux_noun = tn.item();
    total = add(total, add(tv, tn));
  }
  bd.total = total;
  return bd;
}

}  // namespace ssmcast
