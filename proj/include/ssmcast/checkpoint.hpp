#pragma once

#include <cstdint>
#include <string>

#include "ssmcast/config.hpp"
#include "ssmcast/model.hpp"
#include "ssmcast/params.hpp"
#include "ssmcast/rng.hpp"

namespace ssmcast {

// Everything in a checkpoint besides the weights themselves.
struct CheckpointMeta {
  Config config;
  std::size_t action_classes = 0;
  std::uint64_t step = 0;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_state = 0;
};

// Binary checkpoint: config text, trainer position, and every named weight
// with its shape and raw values. Written to a temp file and renamed into
// place so a crash never leaves a half-written checkpoint behind. Values are
// stored at the build's precision; reloading in the same build is bitwise.
void save_checkpoint(const std::string& path, const Forecaster& model,
                     std::uint64_t step, const Rng& rng);

CheckpointMeta read_checkpoint_meta(const std::string& path);

// Overwrites the registry's tensors from the file. Names, count and shapes
// must match exactly.
void load_checkpoint_params(const std::string& path, ParamRegistry& params);

// Rebuilds the model the checkpoint describes and restores its weights.
Forecaster load_model(const std::string& path,
                      CheckpointMeta* meta_out = nullptr);

}  // namespace ssmcast
