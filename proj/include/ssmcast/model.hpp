#pragma once

#include <string>

#include "ssmcast/config.hpp"
#include "ssmcast/dataio.hpp"
#include "ssmcast/decoder.hpp"
#include "ssmcast/encoder.hpp"
#include "ssmcast/interaction.hpp"
#include "ssmcast/params.hpp"
#include "ssmcast/rng.hpp"

namespace ssmcast {

// The full forecaster: input projection + state-space encoder over the
// memory, slot decoder cross-attending into the recent block, linear heads.
// All weights live in one registry so the optimizer and checkpoints can walk
// them by name.
struct Forecaster {
  Config cfg;
  std::size_t action_classes = 0;  // taxonomy size when the action head is on
  ParamRegistry params;
  EncoderWeights enc;
  DecoderWeights dec;
  HeadWeights heads;
  // per-window classifiers over the recent block, only when loss_aux
  Tensor aux_verb_w, aux_verb_b;
  Tensor aux_noun_w, aux_noun_b;

  // action_classes must be positive iff cfg.loss_action
  Forecaster(const Config& cfg, Rng& rng, std::size_t action_classes = 0);

  struct Output {
    EncodedMemory encoded;
    Tensor slots;  // [Z, d_model]
    SlotLogits logits;
    Tensor aux_verb_logits;  // [S, vocab_verbs] when loss_aux, else undefined
    Tensor aux_noun_logits;
  };
  Output forward(const Tensor& memory) const;
};

EncoderConfig encoder_config(const Config& cfg);
DecoderConfig decoder_config(const Config& cfg);
HeadsConfig heads_config(const Config& cfg, std::size_t action_classes);

struct LossBreakdown {
  Tensor total;  // scalar, on the tape
  double verb = 0;
  double noun = 0;
  double action = 0;
  double aux_verb = 0;
  double aux_noun = 0;
};

// Sum of the enabled cross-entropy terms, equal weights. The action term
// classifies each slot's pair through the taxonomy; pairs outside it are
// skipped via the ignore index. Requires a taxonomy iff loss_action.
LossBreakdown compute_loss(const Forecaster& model,
                           const Forecaster::Output& out,
                           const MemoryExample& example,
                           const ActionTaxonomy* taxonomy);

}  // namespace ssmcast
