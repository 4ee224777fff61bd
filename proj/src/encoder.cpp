#include "ssmcast/encoder.hpp"

#include <stdexcept>
#include <string>

#include "ssmcast/ops.hpp"

namespace ssmcast {

EncoderWeights::EncoderWeights(const EncoderConfig& c, Rng& rng,
                               ParamRegistry& reg, const std::string& prefix)
    : cfg(c) {
  if (cfg.short_tokens == 0)
    throw std::invalid_argument("encoder: short_tokens must be >= 1");
  if (cfg.input_dim == 0 || cfg.d_model == 0 || cfg.layers == 0)
    throw std::invalid_argument("encoder: input_dim, d_model, layers must be >= 1");
  cfg.block.d_model = cfg.d_model;

  w_proj = linear_init(rng, cfg.input_dim, cfg.d_model);
  b_proj = Tensor({cfg.d_model}, Real(0));
  reg.add(prefix + ".proj.w", w_proj);
  reg.add(prefix + ".proj.b", b_proj);

  blocks.reserve(cfg.layers);
  for (std::size_t i = 0; i < cfg.layers; ++i)
    blocks.emplace_back(cfg.block, rng, reg,
                        prefix + ".block" + std::to_string(i));

  ln_f_g = Tensor({cfg.d_model}, Real(1));
  ln_f_b = Tensor({cfg.d_model}, Real(0));
  reg.add(prefix + ".ln_f.g", ln_f_g);
  reg.add(prefix + ".ln_f.b", ln_f_b);
}

Tensor project_input(const Tensor& m, const EncoderWeights& w) {
  if (m.rank() != 2 || m.dim(1) != w.cfg.input_dim)
    throw std::invalid_argument(
        "encoder: memory must be [rows, " + std::to_string(w.cfg.input_dim) +
        "], got width " + std::to_string(m.rank() == 2 ? m.dim(1) : 0));
  return linear(m, w.w_proj, &w.b_proj);
}

EncodedMemory encode(const Tensor& m, const EncoderWeights& w) {
  const std::size_t rows = w.cfg.long_tokens + w.cfg.short_tokens;
  if (m.rank() != 2 || m.dim(0) != rows)
    throw std::invalid_argument(
        "encoder: expected " + std::to_string(rows) + " memory rows, got " +
        std::to_string(m.rank() >= 1 ? m.dim(0) : 0));

  Tensor h = project_input(m, w);
  for (const auto& blk : w.blocks) h = mamba_block_forward(h, blk);
  h = layer_norm(h, w.ln_f_g, w.ln_f_b);

  EncodedMemory out;
  if (w.cfg.long_tokens > 0)
    out.long_mem = slice(h, 0, 0, w.cfg.long_tokens);
  out.short_mem = slice(h, 0, w.cfg.long_tokens, w.cfg.short_tokens);
  return out;
}

}  // namespace ssmcast
