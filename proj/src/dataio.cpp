#include "ssmcast/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ssmcast {

std::vector<Real> SyntheticWorldSpec::prototype(
    std::size_t action_index) const {
  std::vector<Real> p(feature_dim);
  Rng base(prototype_seed);
  if (!two_stream) {
    Rng r = base.fork(action_index);
    for (auto& x : p) x = Real(r.normal());
    return p;
  }
  // verb half and noun half come from separate streams so that actions
  // sharing a verb share half their prototype
  const SlotPair a = actions[action_index];
  const std::size_t half = (feature_dim + 1) / 2;
  Rng rv = base.fork(1000000 + a.verb);
  Rng rn = base.fork(2000000 + a.noun);
  for (std::size_t i = 0; i < half; ++i) p[i] = Real(rv.normal());
  for (std::size_t i = half; i < feature_dim; ++i) p[i] = Real(rn.normal());
  return p;
}

SyntheticWorldSpec generate_world(std::uint64_t seed,
                                  std::size_t vocab_verbs,
                                  std::size_t vocab_nouns, double sparsity,
                                  std::size_t feature_dim,
                                  double emission_noise, bool two_stream) {
  if (vocab_verbs < 2 || vocab_nouns < 2)
    throw std::invalid_argument("world: vocab sizes must be >= 2");
  if (!(sparsity > 0.0) || sparsity > 1.0)
    throw std::invalid_argument("world: sparsity must be in (0, 1]");
  if (feature_dim == 0)
    throw std::invalid_argument("world: feature_dim must be >= 1");
  if (emission_noise < 0)
    throw std::invalid_argument("world: emission_noise must be >= 0");

  SyntheticWorldSpec w;
  w.seed = seed;
  w.vocab_verbs = vocab_verbs;
  w.vocab_nouns = vocab_nouns;
  w.feature_dim = feature_dim;
  w.sparsity = sparsity;
  w.emission_noise = emission_noise;
  w.two_stream = two_stream;

  Rng rng(seed);
  w.prototype_seed = rng.next_u64();

  w.mask.assign(vocab_verbs * vocab_nouns, 0);
  for (std::size_t v = 0; v < vocab_verbs; ++v)
    for (std::size_t n = 0; n < vocab_nouns; ++n)
      w.mask[v * vocab_nouns + n] = rng.uniform() < sparsity ? 1 : 0;
  // a noun nobody can act on would make the world inconsistent: redraw its
  // column until some verb is permitted
  for (std::size_t n = 0; n < vocab_nouns; ++n) {
    auto column_empty = [&] {
      for (std::size_t v = 0; v < vocab_verbs; ++v)
        if (w.mask[v * vocab_nouns + n]) return false;
      return true;
    };
    while (column_empty())
      for (std::size_t v = 0; v < vocab_verbs; ++v)
        w.mask[v * vocab_nouns + n] = rng.uniform() < sparsity ? 1 : 0;
  }

  for (std::size_t v = 0; v < vocab_verbs; ++v)
    for (std::size_t n = 0; n < vocab_nouns; ++n)
      if (w.mask[v * vocab_nouns + n])
        w.actions.push_back({std::uint32_t(v), std::uint32_t(n)});

  const std::size_t na = w.actions.size();
  w.duration_mean.resize(na);
  for (auto& d : w.duration_mean) d = rng.uniform(2.0, 5.0);

  w.transitions.assign(na * na, 0.0);
  const double raw[3] = {0.55, 0.30, 0.15};
  for (std::size_t a = 0; a < na; ++a) {
    const std::size_t k = std::min<std::size_t>(3, na - 1);
    std::vector<std::size_t> succ;
    while (succ.size() < k) {
      const std::size_t cand = rng.uniform_int(na);
      if (cand == a) continue;
      if (std::find(succ.begin(), succ.end(), cand) != succ.end()) continue;
      succ.push_back(cand);
    }
    double wsum = 0;
    for (std::size_t i = 0; i < k; ++i) wsum += raw[i];
    for (std::size_t i = 0; i < k; ++i)
      w.transitions[a * na + succ[i]] = raw[i] / wsum;
  }
  validate_world(w);
  return w;
}

void validate_world(const SyntheticWorldSpec& w) {
  if (w.mask.size() != w.vocab_verbs * w.vocab_nouns)
    throw std::invalid_argument("world: mask size mismatch");
  for (std::size_t n = 0; n < w.vocab_nouns; ++n) {
    bool any = false;
    for (std::size_t v = 0; v < w.vocab_verbs; ++v)
      any = any || w.permitted(v, n);
    if (!any)
      throw std::invalid_argument("world: noun " + std::to_string(n) +
                                  " has no permitted verb");
  }
  const std::size_t na = w.actions.size();
  if (na < 2) throw std::invalid_argument("world: fewer than 2 actions");
  for (const SlotPair& p : w.actions)
    if (!w.permitted(p.verb, p.noun))
      throw std::invalid_argument("world: action list disagrees with mask");
  if (w.transitions.size() != na * na || w.duration_mean.size() != na)
    throw std::invalid_argument("world: transition/duration size mismatch");
  for (std::size_t a = 0; a < na; ++a) {
    if (w.transitions[a * na + a] != 0.0)
      throw std::invalid_argument("world: self transition at " +
                                  std::to_string(a));
    double s = 0;
    for (std::size_t b = 0; b < na; ++b) {
      if (w.transitions[a * na + b] < 0)
        throw std::invalid_argument("world: negative transition");
      s += w.transitions[a * na + b];
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw std::invalid_argument("world: row " + std::to_string(a) +
                                  " sums to " + std::to_string(s));
  }
  for (double d : w.duration_mean)
    if (!(d > 0)) throw std::invalid_argument("world: nonpositive duration");
}

GeneratedClip generate_clip(const SyntheticWorldSpec& world,
                            std::uint64_t clip_seed,
                            const std::string& clip_id, double duration_s,
                            std::size_t min_events) {
  if (!(duration_s > 0))
    throw std::invalid_argument("clip: duration must be positive");
  const std::size_t na = world.actions.size();

  Rng rng(clip_seed);
  GeneratedClip out;
  out.annotation.clip_id = clip_id;
  out.annotation.vocab_verbs = world.vocab_verbs;
  out.annotation.vocab_nouns = world.vocab_nouns;

  std::size_t cur = rng.uniform_int(na);
  double t = 0;
  for (;;) {
    const double dur = world.duration_mean[cur] * rng.uniform(0.8, 1.2);
    const SlotPair a = world.actions[cur];
    out.annotation.events.push_back(
        {t, std::min(t + dur, duration_s), a.verb, a.noun});
    t += dur;
    if (t >= duration_s) break;
    const double u = rng.uniform();
    double cum = 0;
    std::size_t next = na;  // sentinel
    for (std::size_t b = 0; b < na; ++b) {
      cum += world.transitions[cur * na + b];
      if (cum >= u && world.transitions[cur * na + b] > 0) {
        next = b;
        break;
      }
    }
    if (next == na) {  // rounding pushed u past the cumulative tail
      for (std::size_t b = na; b-- > 0;)
        if (world.transitions[cur * na + b] > 0) {
          next = b;
          break;
        }
    }
    cur = next;
  }
  if (out.annotation.events.size() < min_events)
    throw std::runtime_error(
        "clip " + clip_id + ": only " +
        std::to_string(out.annotation.events.size()) + " events fit in " +
        std::to_string(duration_s) + "s, need " + std::to_string(min_events));

  FeatureSequence& feat = out.features;
  feat.clip_id = clip_id;
  feat.dim = world.feature_dim;
  feat.rows = std::size_t(duration_s / feat.window_seconds + 1e-9);
  feat.data.resize(feat.rows * feat.dim);

  // midpoint of each window picks the active event; events are contiguous
  std::vector<std::vector<Real>> protos;  // built lazily per action index
  protos.resize(na);
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> pair_to_act;
  for (std::size_t a = 0; a < na; ++a)
    pair_to_act[{world.actions[a].verb, world.actions[a].noun}] = a;

  std::size_t ev = 0;
  for (std::size_t r = 0; r < feat.rows; ++r) {
    const double mid = (double(r) + 0.5) * feat.window_seconds;
    while (ev + 1 < out.annotation.events.size() &&
           mid >= out.annotation.events[ev].end_s)
      ++ev;
    const ClipEvent& e = out.annotation.events[ev];
    const std::size_t a = pair_to_act.at({e.verb, e.noun});
    if (protos[a].empty()) protos[a] = world.prototype(a);
    Real* row = feat.data.data() + r * feat.dim;
    for (std::size_t d = 0; d < feat.dim; ++d)
      row[d] = protos[a][d] + Real(world.emission_noise * rng.normal());
  }
  return out;
}

MemoryExample make_example(const ClipAnnotation& ann,
                           const FeatureSequence& feat, double cut_time,
                           std::size_t long_tokens, std::size_t short_tokens,
                           std::size_t targets_z) {
  if (short_tokens == 0 || targets_z == 0)
    throw std::invalid_argument("example: short_tokens and Z must be >= 1");
  if (feat.dim == 0) throw std::invalid_argument("example: features empty");
  if (ann.clip_id != feat.clip_id)
    throw std::invalid_argument("example: annotation/feature clip mismatch");

  // only windows that finished before the cut are observable
  const std::size_t full_windows =
      std::size_t(std::max(0.0, cut_time / feat.window_seconds + 1e-9));
  const std::size_t t_obs = std::min(feat.rows, full_windows);
  if (t_obs == 0)
    throw std::runtime_error("example: no observed window before cut at " +
                             std::to_string(cut_time) + "s");

  std::size_t fi = 0;
  while (fi < ann.events.size() && ann.events[fi].start_s < cut_time - 1e-9)
    ++fi;
  if (ann.events.size() - fi < targets_z)
    throw std::runtime_error(
        "example: only " + std::to_string(ann.events.size() - fi) +
        " future actions after cut, need " + std::to_string(targets_z));

  MemoryExample ex;
  const std::size_t rows = long_tokens + short_tokens;
  ex.memory = Tensor({rows, feat.dim}, Real(0));
  ex.observed.assign(rows, 0);
  ex.aux_verbs.assign(short_tokens, -1);
  ex.aux_nouns.assign(short_tokens, -1);

  const std::size_t s_n = std::min(short_tokens, t_obs);
  const std::size_t l_n = std::min(long_tokens, t_obs - s_n);
  // short block holds the freshest windows, right-aligned so the most
  // recent one is always the last memory row
  for (std::size_t i = 0; i < s_n; ++i) {
    const std::size_t mrow = rows - s_n + i;
    const std::size_t frow = t_obs - s_n + i;
    std::copy(feat.data.begin() + frow * feat.dim,
              feat.data.begin() + (frow + 1) * feat.dim,
              ex.memory.data() + mrow * feat.dim);
    ex.observed[mrow] = 1;
  }
  for (std::size_t i = 0; i < l_n; ++i) {
    const std::size_t mrow = long_tokens - l_n + i;
    const std::size_t frow = t_obs - s_n - l_n + i;
    std::copy(feat.data.begin() + frow * feat.dim,
              feat.data.begin() + (frow + 1) * feat.dim,
              ex.memory.data() + mrow * feat.dim);
    ex.observed[mrow] = 1;
  }

  // per-row labels for the recent block: whatever event covers the window
  // midpoint; padding rows and gaps keep -1
  for (std::size_t i = 0; i < s_n; ++i) {
    const std::size_t srow = short_tokens - s_n + i;
    const std::size_t frow = t_obs - s_n + i;
    const double mid = (double(frow) + 0.5) * feat.window_seconds;
    for (const ClipEvent& e : ann.events)
      if (mid >= e.start_s && mid < e.end_s) {
        ex.aux_verbs[srow] = std::int64_t(e.verb);
        ex.aux_nouns[srow] = std::int64_t(e.noun);
        break;
      }
  }

  ex.targets.resize(targets_z);
  for (std::size_t z = 0; z < targets_z; ++z)
    ex.targets[z] = {ann.events[fi + z].verb, ann.events[fi + z].noun};
  return ex;
}

double eval_cut_time(const ClipAnnotation& ann, std::size_t targets_z) {
  if (ann.events.size() < targets_z + 1)
    throw std::runtime_error("clip " + ann.clip_id + ": " +
                             std::to_string(ann.events.size()) +
                             " events cannot give " +
                             std::to_string(targets_z) +
                             " targets plus an observation");
  return ann.events[ann.events.size() - targets_z].start_s;
}

// --- persistence ---

void save_world(const std::string& path, const SyntheticWorldSpec& w) {
  nlohmann::json j;
  j["seed"] = w.seed;
  j["verbs"] = w.vocab_verbs;
  j["nouns"] = w.vocab_nouns;
  j["feature_dim"] = w.feature_dim;
  j["sparsity"] = w.sparsity;
  j["emission_noise"] = w.emission_noise;
  j["two_stream"] = w.two_stream;
  j["prototype_seed"] = w.prototype_seed;
  j["mask"] = w.mask;
  nlohmann::json acts = nlohmann::json::array();
  for (const SlotPair& p : w.actions)
    acts.push_back(nlohmann::json::array({p.verb, p.noun}));
  j["actions"] = std::move(acts);
  j["transitions"] = w.transitions;
  j["duration_mean"] = w.duration_mean;
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << "\n";
}

SyntheticWorldSpec load_world(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  SyntheticWorldSpec w;
  w.seed = j.at("seed").get<std::uint64_t>();
  w.vocab_verbs = j.at("verbs").get<std::size_t>();
  w.vocab_nouns = j.at("nouns").get<std::size_t>();
  w.feature_dim = j.at("feature_dim").get<std::size_t>();
  w.sparsity = j.at("sparsity").get<double>();
  w.emission_noise = j.at("emission_noise").get<double>();
  w.two_stream = j.at("two_stream").get<bool>();
  w.prototype_seed = j.at("prototype_seed").get<std::uint64_t>();
  w.mask = j.at("mask").get<std::vector<std::uint8_t>>();
  for (const auto& jp : j.at("actions"))
    w.actions.push_back({jp.at(0).get<std::uint32_t>(),
                         jp.at(1).get<std::uint32_t>()});
  w.transitions = j.at("transitions").get<std::vector<double>>();
  w.duration_mean = j.at("duration_mean").get<std::vector<double>>();
  validate_world(w);
  return w;
}

void save_annotations(const std::string& path,
                      const std::vector<ClipAnnotation>& clips) {
  std::ostringstream os;
  for (const ClipAnnotation& c : clips) {
    nlohmann::json j;
    j["clip_id"] = c.clip_id;
    j["verbs"] = c.vocab_verbs;
    j["nouns"] = c.vocab_nouns;
    nlohmann::json evs = nlohmann::json::array();
    for (const ClipEvent& e : c.events)
      evs.push_back(
          nlohmann::json::array({e.start_s, e.end_s, e.verb, e.noun}));
    j["events"] = std::move(evs);
    os << j.dump() << "\n";
  }
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << os.str();
}

namespace {

void check_events_ordered(const ClipAnnotation& c, const std::string& where) {
  for (std::size_t i = 0; i < c.events.size(); ++i) {
    const ClipEvent& e = c.events[i];
    if (!(e.end_s >= e.start_s))
      throw std::runtime_error(where + ": event " + std::to_string(i) +
                               " ends before it starts");
    if (i > 0 && e.start_s < c.events[i - 1].end_s - 1e-9)
      throw std::runtime_error(where + ": event " + std::to_string(i) +
                               " overlaps its predecessor");
    if (e.verb >= c.vocab_verbs || e.noun >= c.vocab_nouns)
      throw std::runtime_error(where + ": event " + std::to_string(i) +
                               " outside vocab");
  }
}

}  // namespace

std::vector<ClipAnnotation> load_annotations(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::vector<ClipAnnotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
    ClipAnnotation c;
    c.clip_id = j.at("clip_id").get<std::string>();
    c.vocab_verbs = j.at("verbs").get<std::size_t>();
    c.vocab_nouns = j.at("nouns").get<std::size_t>();
    for (const auto& je : j.at("events"))
      c.events.push_back({je.at(0).get<double>(), je.at(1).get<double>(),
                          je.at(2).get<std::uint32_t>(),
                          je.at(3).get<std::uint32_t>()});
    check_events_ordered(c, path + ":" + std::to_string(lineno));
    out.push_back(std::move(c));
  }
  return out;
}

void save_features(const std::string& dir, const FeatureSequence& feat) {
  std::filesystem::create_directories(dir);
  const std::string base = dir + "/" + feat.clip_id;
  {
    nlohmann::json j;
    j["clip_id"] = feat.clip_id;
    j["rows"] = feat.rows;
    j["dim"] = feat.dim;
    j["window_seconds"] = feat.window_seconds;
    std::ofstream f(base + ".json", std::ios::trunc | std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + base + ".json");
    f << j.dump(2) << "\n";
  }
  std::ofstream f(base + ".bin", std::ios::trunc | std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + base + ".bin");
  std::vector<unsigned char> bytes(feat.data.size() * 4);
  for (std::size_t i = 0; i < feat.data.size(); ++i) {
    const float v = float(feat.data[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    bytes[i * 4 + 0] = (unsigned char)(bits & 0xFF);
    bytes[i * 4 + 1] = (unsigned char)((bits >> 8) & 0xFF);
    bytes[i * 4 + 2] = (unsigned char)((bits >> 16) & 0xFF);
    bytes[i * 4 + 3] = (unsigned char)((bits >> 24) & 0xFF);
  }
  f.write(reinterpret_cast<const char*>(bytes.data()),
          std::streamsize(bytes.size()));
}

FeatureSequence load_features(const std::string& dir,
                              const std::string& clip_id) {
  const std::string base = dir + "/" + clip_id;
  FeatureSequence feat;
  {
    std::ifstream f(base + ".json");
    if (!f) throw std::runtime_error("cannot read " + base + ".json");
    nlohmann::json j;
    f >> j;
    feat.clip_id = j.at("clip_id").get<std::string>();
    feat.rows = j.at("rows").get<std::size_t>();
    feat.dim = j.at("dim").get<std::size_t>();
    feat.window_seconds = j.at("window_seconds").get<double>();
  }
  if (feat.clip_id != clip_id)
    throw std::runtime_error(base + ".json: clip_id mismatch");
  std::ifstream f(base + ".bin", std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + base + ".bin");
  std::vector<unsigned char> bytes(feat.rows * feat.dim * 4);
  f.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  if (std::size_t(f.gcount()) != bytes.size())
    throw std::runtime_error(base + ".bin: truncated, expected " +
                             std::to_string(bytes.size()) + " bytes");
  char extra;
  if (f.read(&extra, 1))
    throw std::runtime_error(base + ".bin: trailing bytes beyond " +
                             std::to_string(bytes.size()));
  feat.data.resize(feat.rows * feat.dim);
  for (std::size_t i = 0; i < feat.data.size(); ++i) {
    const std::uint32_t bits = std::uint32_t(bytes[i * 4 + 0]) |
                               (std::uint32_t(bytes[i * 4 + 1]) << 8) |
                               (std::uint32_t(bytes[i * 4 + 2]) << 16) |
                               (std::uint32_t(bytes[i * 4 + 3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    feat.data[i] = Real(v);
  }
  return feat;
}

std::vector<ClipAnnotation> load_ego4d_annotations(const std::string& path,
                                                   std::size_t vocab_verbs,
                                                   std::size_t vocab_nouns) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  struct Seg {
    std::int64_t idx;
    ClipEvent ev;
  };
  std::map<std::string, std::vector<Seg>> by_clip;
  for (const auto& je : j.at("clips")) {
    Seg s;
    s.idx = je.at("action_idx").get<std::int64_t>();
    s.ev.verb = je.at("verb_label").get<std::uint32_t>();
    s.ev.noun = je.at("noun_label").get<std::uint32_t>();
    s.ev.start_s = je.at("action_clip_start_sec").get<double>();
    s.ev.end_s = je.at("action_clip_end_sec").get<double>();
    by_clip[je.at("clip_uid").get<std::string>()].push_back(s);
  }
  std::vector<ClipAnnotation> out;
  for (auto& it : by_clip) {
    std::sort(it.second.begin(), it.second.end(),
              [](const Seg& a, const Seg& b) { return a.idx < b.idx; });
    ClipAnnotation c;
    c.clip_id = it.first;
    c.vocab_verbs = vocab_verbs;
    c.vocab_nouns = vocab_nouns;
    for (const Seg& s : it.second) {
      ClipEvent e = s.ev;
      // real segments occasionally overlap by a hair; snap to the previous
      // end so downstream code can rely on ordering
      if (!c.events.empty() && e.start_s < c.events.back().end_s)
        e.start_s = c.events.back().end_s;
      if (e.end_s < e.start_s) e.end_s = e.start_s;
      c.events.push_back(e);
    }
    check_events_ordered(c, path + " clip " + c.clip_id);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace ssmcast
