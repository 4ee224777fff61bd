#include "ssmcast/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ssmcast {

namespace {

constexpr char kMagic[8] = {'s', 's', 'm', 'c', 'k', 'p', 't', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in, const std::string& what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw std::runtime_error("checkpoint: truncated reading " + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const std::string& what) {
  const std::uint64_t n = get_u64(in, what + " length");
  if (n > (1ull << 30))
    throw std::runtime_error("checkpoint: implausible " + what + " length");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw std::runtime_error("checkpoint: truncated reading " + what);
  return s;
}

std::ifstream open_and_check_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error(path + " is not a checkpoint file");
  const std::uint64_t real_size = get_u64(in, "value width");
  if (real_size != sizeof(Real))
    throw std::runtime_error(
        "checkpoint " + path + " stores " + std::to_string(real_size) +
        "-byte values, this build uses " + std::to_string(sizeof(Real)));
  return in;
}

}  // namespace

void save_checkpoint(const std::string& path, const Forecaster& model,
                     std::uint64_t step, const Rng& rng) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(kMagic, 8);
    put_u64(out, sizeof(Real));
    put_u64(out, step);
    put_u64(out, rng.seed());
    put_u64(out, rng.state());
    put_u64(out, model.action_classes);
    put_string(out, config_to_text(model.cfg));
    put_u64(out, model.params.items().size());
    for (const auto& [name, t] : model.params.items()) {
      put_string(out, name);
      put_u64(out, t.rank());
      for (std::size_t d = 0; d < t.rank(); ++d) put_u64(out, t.dim(d));
      out.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(Real)));
    }
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  std::ifstream in = open_and_check_header(path);
  CheckpointMeta meta;
  meta.step = get_u64(in, "step");
  meta.rng_seed = get_u64(in, "rng seed");
  meta.rng_state = get_u64(in, "rng state");
  meta.action_classes =
      static_cast<std::size_t>(get_u64(in, "action classes"));
  meta.config = config_from_text(get_string(in, "config"));
  return meta;
}

void load_checkpoint_params(const std::string& path, ParamRegistry& params) {
  std::ifstream in = open_and_check_header(path);
  get_u64(in, "step");
  get_u64(in, "rng seed");
  get_u64(in, "rng state");
  get_u64(in, "action classes");
  get_string(in, "config");
  const std::uint64_t n = get_u64(in, "parameter count");
  if (n != params.items().size())
    throw std::runtime_error("checkpoint has " + std::to_string(n) +
                             " parameters, model has " +
                             std::to_string(params.items().size()));
  for (auto& [name, t] : params.items()) {
    const std::string stored = get_string(in, "parameter name");
    if (stored != name)
      throw std::runtime_error("checkpoint parameter '" + stored +
                               "' does not match model parameter '" + name +
                               "'");
    const std::uint64_t rank = get_u64(in, name + " rank");
    if (rank != t.rank())
      throw std::runtime_error("checkpoint rank mismatch for " + name);
    for (std::size_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = get_u64(in, name + " shape");
      if (dim != t.dim(d))
        throw std::runtime_error("checkpoint shape mismatch for " + name);
    }
    if (!in.read(reinterpret_cast<char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(Real))))
      throw std::runtime_error("checkpoint: truncated reading " + name);
  }
  char extra;
  if (in.read(&extra, 1))
    throw std::runtime_error("checkpoint " + path +
                             " has trailing bytes after the last parameter");
}

Forecaster load_model(const std::string& path, CheckpointMeta* meta_out) {
  CheckpointMeta meta = read_checkpoint_meta(path);
  Rng scratch(meta.rng_seed);  // placeholder init, weights overwritten next
  Forecaster model(meta.config, scratch, meta.action_classes);
  load_checkpoint_params(path, model.params);
  if (meta_out) *meta_out = meta;
  return model;
}

}  // namespace ssmcast
