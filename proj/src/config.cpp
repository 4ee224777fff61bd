#include "ssmcast/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ssmcast {

namespace {

struct Field {
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) a++;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) b--;
  return s.substr(a, b - a);
}

std::size_t parse_size(const std::string& v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("expected a nonnegative integer, got '" + v +
                                "'");
  }
  if (pos != v.size())
    throw std::invalid_argument("trailing characters in integer '" + v + "'");
  return static_cast<std::size_t>(n);
}

std::uint64_t parse_u64(const std::string& v) {
  return static_cast<std::uint64_t>(parse_size(v));
}

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("expected a number, got '" + v + "'");
  }
  if (pos != v.size())
    throw std::invalid_argument("trailing characters in number '" + v + "'");
  return d;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw std::invalid_argument("expected 0/1/true/false, got '" + v + "'");
}

std::string fmt_double(double d) {
  std::ostringstream out;
  out.precision(17);
  out << d;
  return out.str();
}

#define SIZE_FIELD(name)                                                  \
  {                                                                       \
    #name, Field {                                                        \
      [](Config& c, const std::string& v) { c.name = parse_size(v); },    \
          [](const Config& c) { return std::to_string(c.name); }          \
    }                                                                     \
  }
#define U64_FIELD(name)                                                   \
  {                                                                       \
    #name, Field {                                                        \
      [](Config& c, const std::string& v) { c.name = parse_u64(v); },     \
          [](const Config& c) { return std::to_string(c.name); }          \
    }                                                                     \
  }
#define BOOL_FIELD(name)                                                  \
  {                                                                       \
    #name, Field {                                                        \
      [](Config& c, const std::string& v) { c.name = parse_bool(v); },    \
          [](const Config& c) { return std::string(c.name ? "1" : "0"); } \
    }                                                                     \
  }
#define REAL_FIELD(name)                                                  \
  {                                                                       \
    #name, Field {                                                        \
      [](Config& c, const std::string& v) { c.name = parse_double(v); },  \
          [](const Config& c) { return fmt_double(c.name); }              \
    }                                                                     \
  }

const std::map<std::string, Field>& field_table() {
  static const std::map<std::string, Field> table = {
      SIZE_FIELD(input_dim),
      SIZE_FIELD(d_model),
      SIZE_FIELD(enc_layers),
      SIZE_FIELD(dec_layers),
      SIZE_FIELD(heads),
      SIZE_FIELD(n_state),
      SIZE_FIELD(expand),
      SIZE_FIELD(conv_width),
      SIZE_FIELD(long_tokens),
      SIZE_FIELD(short_tokens),
      SIZE_FIELD(queries),
      SIZE_FIELD(ffn_mult),
      BOOL_FIELD(decoder_self_attention),
      BOOL_FIELD(learnable_queries),
      BOOL_FIELD(key_positional),
      SIZE_FIELD(vocab_verbs),
      SIZE_FIELD(vocab_nouns),
      BOOL_FIELD(loss_verb),
      BOOL_FIELD(loss_noun),
      BOOL_FIELD(loss_action),
      BOOL_FIELD(loss_aux),
      SIZE_FIELD(batch_size),
      REAL_FIELD(learning_rate),
      REAL_FIELD(weight_decay),
      REAL_FIELD(beta1),
      REAL_FIELD(beta2),
      REAL_FIELD(clip_norm),
      REAL_FIELD(lr_final_frac),
      SIZE_FIELD(epochs),
      SIZE_FIELD(max_steps),
      REAL_FIELD(stop_loss),
      U64_FIELD(seed),
      {"decode_mode",
       Field{[](Config& c, const std::string& v) {
               if (v != "argmax" && v != "sample")
                 throw std::invalid_argument(
                     "decode_mode must be argmax or sample, got '" + v + "'");
               c.decode_mode = v;
             },
             [](const Config& c) { return c.decode_mode; }}},
      SIZE_FIELD(k_candidates),
      BOOL_FIELD(use_interaction),
      REAL_FIELD(window_seconds),
  };
  return table;
}

#undef SIZE_FIELD
#undef U64_FIELD
#undef BOOL_FIELD
#undef REAL_FIELD

}  // namespace

void Config::validate() const {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + msg);
  };
  need(input_dim >= 1, "input_dim must be positive");
  need(d_model >= 1, "d_model must be positive");
  need(heads >= 1 && d_model % heads == 0, "heads must divide d_model");
  need(enc_layers >= 1, "enc_layers must be positive");
  need(dec_layers >= 1, "dec_layers must be positive");
  need(n_state >= 1, "n_state must be positive");
  need(expand >= 1, "expand must be positive");
  need(conv_width >= 1, "conv_width must be positive");
  need(short_tokens >= 1, "short_tokens must be positive");
  need(queries >= 1, "queries must be positive");
  need(ffn_mult >= 1, "ffn_mult must be positive");
  need(vocab_verbs >= 1, "vocab_verbs must be positive");
  need(vocab_nouns >= 1, "vocab_nouns must be positive");
  need(loss_verb || loss_noun, "at least one of loss_verb/loss_noun required");
  need(batch_size >= 1, "batch_size must be positive");
  need(learning_rate > 0, "learning_rate must be positive");
  need(weight_decay >= 0, "weight_decay must be nonnegative");
  need(beta1 >= 0 && beta1 < 1, "beta1 must be in [0,1)");
  need(beta2 >= 0 && beta2 < 1, "beta2 must be in [0,1)");
  need(clip_norm >= 0, "clip_norm must be nonnegative");
  need(lr_final_frac >= 0 && lr_final_frac <= 1,
       "lr_final_frac must be in [0,1]");
  need(epochs >= 1, "epochs must be positive");
  need(k_candidates >= 1, "k_candidates must be positive");
  need(window_seconds > 0, "window_seconds must be positive");
  need(decode_mode == "argmax" || decode_mode == "sample",
       "decode_mode must be argmax or sample");
}

void apply_config_kv(Config& cfg, const std::string& key,
                     const std::string& value) {
  auto it = field_table().find(key);
  if (it == field_table().end())
    throw std::invalid_argument("unknown config key '" + key + "'");
  try {
    it->second.set(cfg, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("config key '" + key + "': " + e.what());
  }
}

void apply_config_text(Config& cfg, const std::string& text,
                       const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": empty key");
    try {
      apply_config_kv(cfg, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": " + e.what());
    }
  }
}

void apply_config_file(Config& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path);
}

std::string config_to_text(const Config& cfg) {
  std::ostringstream out;
  for (const auto& [key, field] : field_table())
    out << key << "=" << field.get(cfg) << "\n";
  return out.str();
}

Config config_from_text(const std::string& text) {
  Config cfg;
  apply_config_text(cfg, text, "<text>");
  return cfg;
}

}  // namespace ssmcast
