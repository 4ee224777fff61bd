#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ssmcast/config.hpp"
#include "ssmcast/dataio.hpp"
#include "ssmcast/interaction.hpp"
#include "ssmcast/metrics.hpp"
#include "ssmcast/model.hpp"
#include "ssmcast/rng.hpp"

namespace ssmcast {

// rng fork tags for the stages that draw randomness
constexpr std::uint64_t kRngModelInit = 1;
constexpr std::uint64_t kRngTrainShuffle = 2;
constexpr std::uint64_t kRngInfer = 3;

// One example per clip at the evaluation cut. Clips with too few events to
// support the protocol are counted and skipped.
struct Dataset {
  std::vector<std::string> clip_ids;
  std::vector<MemoryExample> examples;
  std::size_t skipped = 0;
};

Dataset build_dataset(const std::vector<ClipAnnotation>& anns,
                      const std::vector<FeatureSequence>& feats,
                      const Config& cfg);

std::map<std::string, ActionSequence> dataset_truths(const Dataset& data);

// every (verb, noun) event in the split, clip order
std::vector<SlotPair> all_event_pairs(const std::vector<ClipAnnotation>& anns);

struct StepLoss {
  std::size_t step = 0;
  double lr = 0;
  double grad_norm = 0;
  double total = 0;
  double verb = 0;
  double noun = 0;
  double action = 0;
  double aux_verb = 0;
  double aux_noun = 0;
};

struct TrainResult {
  std::vector<StepLoss> curve;
  std::size_t steps = 0;
  std::string checkpoint_path;  // empty when out_dir was empty
};

struct TrainOptions {
  std::string out_dir;   // writes model.ckpt and loss_curve.csv when set
  bool verbose = false;  // per-epoch progress on stderr
};

// Minibatch AdamW with cosine decay and global-norm clipping. Gradients
// accumulate example by example on a fresh tape each time, so memory stays
// flat in the batch size. Throws if the loss ever goes non-finite. The rng
// drives epoch shuffling only.
TrainResult train_model(Forecaster& model, const Dataset& data,
                        const ActionTaxonomy* taxonomy, Rng& rng,
                        const TrainOptions& opts = {});

void save_loss_curve(const std::string& path,
                     const std::vector<StepLoss>& curve);

struct InferenceOptions {
  std::string mode = "argmax";  // argmax emits one candidate, sample emits k
  std::size_t k = 1;
  bool use_interaction = false;
};

// Candidates for one observation. cooc is required iff use_interaction; its
// vocabulary must match the model's. Sampling without interaction draws from
// the same per-slot joint construction so candidate streams line up draw for
// draw with the interaction path.
std::vector<ActionSequence> infer_example(const Forecaster& model,
                                          const Tensor& memory,
                                          const CooccurrenceMatrix* cooc,
                                          const InferenceOptions& opts,
                                          Rng& rng);

// Runs infer_example per clip with an independent stream forked from
// base_seed by the clip id hash, so results are order-independent.
std::vector<std::pair<std::string, std::vector<ActionSequence>>> infer_dataset(
    const Forecaster& model, const Dataset& data,
    const CooccurrenceMatrix* cooc, const InferenceOptions& opts,
    std::uint64_t base_seed);

// Slot-wise modal prediction from training targets: at each slot the most
// frequent verb and most frequent noun, ties to the smaller id.
ActionSequence marginal_baseline_sequence(const Dataset& train,
                                          std::size_t vocab_verbs,
                                          std::size_t vocab_nouns);

struct AblationReport {
  EditDistanceReport with_action;
  EditDistanceReport without_action;
};

// Trains two models from the same seed, differing only in the action-level
// loss term, and scores both on the validation split with argmax decoding.
AblationReport run_action_loss_ablation(const Config& base_cfg,
                                        const Dataset& train,
                                        const Dataset& val,
                                        const ActionTaxonomy& taxonomy,
                                        const std::string& out_dir = "",
                                        bool verbose = false);

std::string ablation_to_text(const AblationReport& report);
void save_ablation(const std::string& path, const AblationReport& report);

}  // namespace ssmcast
