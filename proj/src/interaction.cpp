#include "ssmcast/interaction.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ssmcast/ops.hpp"

namespace ssmcast {

namespace {

void normalize_o(CooccurrenceMatrix& m) {
  const std::size_t cells = m.vocab_verbs * m.vocab_nouns;
  m.o.assign(cells, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < cells; ++i)
    total += double(m.counts[i]) + m.smoothing;
  if (total <= 0.0)
    throw std::invalid_argument(
        "co-occurrence: no observations to normalize");
  for (std::size_t i = 0; i < cells; ++i)
    m.o[i] = (double(m.counts[i]) + m.smoothing) / total;
}

}  // namespace

CooccurrenceMatrix build_cooccurrence(const std::vector<SlotPair>& pairs,
                                      std::size_t vocab_verbs,
                                      std::size_t vocab_nouns,
                                      const std::string& source_split,
                                      double smoothing) {
  if (vocab_verbs == 0 || vocab_nouns == 0)
    throw std::invalid_argument("co-occurrence: vocab sizes must be >= 1");
  if (smoothing < 0)
    throw std::invalid_argument("co-occurrence: smoothing must be >= 0");
  if (pairs.empty())
    throw std::invalid_argument(
        "co-occurrence: empty annotation stream, nothing to normalize");

  CooccurrenceMatrix m;
  m.vocab_verbs = vocab_verbs;
  m.vocab_nouns = vocab_nouns;
  m.smoothing = smoothing;
  m.source_split = source_split;
  m.counts.assign(vocab_verbs * vocab_nouns, 0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const SlotPair& p = pairs[i];
    if (p.verb >= vocab_verbs || p.noun >= vocab_nouns)
      throw std::out_of_range(
          "co-occurrence: record " + std::to_string(i) + " has pair (" +
          std::to_string(p.verb) + "," + std::to_string(p.noun) +
          ") outside vocab " + std::to_string(vocab_verbs) + "x" +
          std::to_string(vocab_nouns));
    m.counts[p.verb * vocab_nouns + p.noun] += 1;
  }
  normalize_o(m);
  return m;
}

ActionTaxonomy build_taxonomy(const CooccurrenceMatrix& cooc) {
  ActionTaxonomy tax;
  tax.vocab_verbs = cooc.vocab_verbs;
  tax.vocab_nouns = cooc.vocab_nouns;
  tax.pair_to_id.assign(cooc.vocab_verbs * cooc.vocab_nouns, -1);
  // row-major walk is already (verb, noun) sorted
  for (std::size_t v = 0; v < cooc.vocab_verbs; ++v)
    for (std::size_t n = 0; n < cooc.vocab_nouns; ++n)
      if (cooc.count_at(v, n) >= 1) {
        tax.pair_to_id[v * cooc.vocab_nouns + n] =
            std::int64_t(tax.actions.size());
        tax.actions.push_back(
            {std::uint32_t(v), std::uint32_t(n)});
      }
  return tax;
}

Tensor joint_probabilities(const Tensor& verbs, const Tensor& nouns) {
  if (verbs.rank() != 2 || nouns.rank() != 2 || verbs.dim(0) != nouns.dim(0))
    throw std::invalid_argument(
        "joint: verbs and nouns must be [Z,V] and [Z,N]");
  for (const Tensor* t : {&verbs, &nouns}) {
    const std::size_t rows = t->dim(0), cols = t->dim(1);
    for (std::size_t z = 0; z < rows; ++z) {
      double s = 0;
      for (std::size_t j = 0; j < cols; ++j) {
        const double p = double(t->data()[z * cols + j]);
        if (p < 0)
          throw std::invalid_argument("joint: negative probability in row " +
                                      std::to_string(z));
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-6)
        throw std::invalid_argument(
            "joint: row " + std::to_string(z) + " sums to " +
            std::to_string(s) + ", expected 1 within 1e-6");
    }
  }
  return outer(verbs, nouns);
}

AdjustedJoint apply_interaction(const Tensor& joint,
                                const CooccurrenceMatrix& cooc) {
  if (joint.rank() != 3 || joint.dim(1) != cooc.vocab_verbs ||
      joint.dim(2) != cooc.vocab_nouns)
    throw std::invalid_argument(
        "interaction: joint must be [Z," + std::to_string(cooc.vocab_verbs) +
        "," + std::to_string(cooc.vocab_nouns) + "]");
  const std::size_t nz = joint.dim(0);
  const std::size_t cells = cooc.vocab_verbs * cooc.vocab_nouns;

  AdjustedJoint out;
  out.adjusted = Tensor(joint.shape());
  for (std::size_t z = 0; z < nz; ++z) {
    const Real* src = joint.data() + z * cells;
    Real* dst = out.adjusted.data() + z * cells;
    double mass = 0;
    for (std::size_t i = 0; i < cells; ++i) {
      dst[i] = src[i] * Real(cooc.o[i]);
      mass += double(dst[i]);
    }
    if (mass > 0) {
      const Real inv = Real(1.0 / mass);
      for (std::size_t i = 0; i < cells; ++i) dst[i] *= inv;
    } else {
      // the decoder put all its mass on never-seen pairs; keep its own
      // distribution rather than refusing to forecast
      for (std::size_t i = 0; i < cells; ++i) dst[i] = src[i];
      out.fallback_slots.push_back(z);
    }
  }
  return out;
}

namespace {

// Inverse-CDF draw over weights[0..len); returns the first index where the
// running sum reaches u * total, skipping zero-weight cells by construction
// (they never move the running sum past the threshold). Falls back to the
// last positive cell if rounding pushes u past the final cumulative value.
std::size_t draw_index(const Real* weights, std::size_t stride,
                       std::size_t len, double total, double u) {
  const double target = u * total;
  double cum = 0;
  std::size_t last_positive = 0;
  bool seen_positive = false;
  for (std::size_t i = 0; i < len; ++i) {
    const double wi = double(weights[i * stride]);
    if (wi > 0) {
      last_positive = i;
      seen_positive = true;
      cum += wi;
      if (cum >= target) return i;
    }
  }
  if (!seen_positive)
    throw std::logic_error("sampling: distribution has no mass");
  return last_positive;
}

}  // namespace

std::vector<ActionSequence> sample_sequences(const Tensor& adjusted,
                                             std::size_t k, Rng& rng) {
  if (k == 0) throw std::invalid_argument("sampling: K must be >= 1");
  if (adjusted.rank() != 3)
    throw std::invalid_argument("sampling: adjusted must be [Z,V,N]");
  const std::size_t nz = adjusted.dim(0), nv = adjusted.dim(1),
                    nn = adjusted.dim(2);

  std::vector<ActionSequence> out(k);
  std::vector<double> marg(nv);
  for (std::size_t c = 0; c < k; ++c) {
    out[c].resize(nz);
    for (std::size_t z = 0; z < nz; ++z) {
      const Real* slot = adjusted.data() + z * nv * nn;
      double total = 0;
      for (std::size_t v = 0; v < nv; ++v) {
        double s = 0;
        for (std::size_t n = 0; n < nn; ++n) s += double(slot[v * nn + n]);
        marg[v] = s;
        total += s;
      }
      const double u1 = rng.uniform();
      double cum = 0;
      std::size_t verb = 0, last_pos = 0;
      bool found = false, seen = false;
      for (std::size_t v = 0; v < nv && !found; ++v)
        if (marg[v] > 0) {
          seen = true;
          last_pos = v;
          cum += marg[v];
          if (cum >= u1 * total) {
            verb = v;
            found = true;
          }
        }
      if (!found) {
        if (!seen) throw std::logic_error("sampling: slot has no mass");
        verb = last_pos;
      }
      const double u2 = rng.uniform();
      const std::size_t noun =
          draw_index(slot + verb * nn, 1, nn, marg[verb], u2);
      out[c][z] = {std::uint32_t(verb), std::uint32_t(noun)};
    }
  }
  return out;
}

ActionSequence argmax_sequence(const Tensor& adjusted) {
  if (adjusted.rank() != 3)
    throw std::invalid_argument("argmax: adjusted must be [Z,V,N]");
  const std::size_t nz = adjusted.dim(0), nv = adjusted.dim(1),
                    nn = adjusted.dim(2);
  ActionSequence seq(nz);
  for (std::size_t z = 0; z < nz; ++z) {
    const Real* slot = adjusted.data() + z * nv * nn;
    std::size_t best = 0;
    for (std::size_t i = 1; i < nv * nn; ++i)
      if (slot[i] > slot[best]) best = i;  // strict keeps the first maximum
    seq[z] = {std::uint32_t(best / nn), std::uint32_t(best % nn)};
  }
  return seq;
}

void save_cooccurrence(const std::string& path,
                       const CooccurrenceMatrix& cooc) {
  std::ostringstream os;
  os << "version,1\n";
  os << "verbs," << cooc.vocab_verbs << "\n";
  os << "nouns," << cooc.vocab_nouns << "\n";
  os << "split," << cooc.source_split << "\n";
  os << "smoothing," << cooc.smoothing << "\n";
  os << "verb_id,noun_id,count\n";
  for (std::size_t v = 0; v < cooc.vocab_verbs; ++v)
    for (std::size_t n = 0; n < cooc.vocab_nouns; ++n)
      if (cooc.count_at(v, n) != 0)
        os << v << "," << n << "," << cooc.count_at(v, n) << "\n";
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << os.str();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      parts.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  parts.push_back(cur);
  return parts;
}

[[noreturn]] void bad_line(const std::string& path, std::size_t lineno,
                           const std::string& why) {
  throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + why);
}

}  // namespace

CooccurrenceMatrix load_cooccurrence(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  CooccurrenceMatrix m;
  std::string line;
  std::size_t lineno = 0;
  bool in_header = true;
  bool have_verbs = false, have_nouns = false;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto parts = split_csv(line);
    if (in_header) {
      if (parts[0] == "verb_id") {
        if (!have_verbs || !have_nouns)
          bad_line(path, lineno, "vocab sizes missing before data rows");
        m.counts.assign(m.vocab_verbs * m.vocab_nouns, 0);
        in_header = false;
        continue;
      }
      if (parts.size() != 2) bad_line(path, lineno, "expected key,value");
      if (parts[0] == "version") {
        if (parts[1] != "1") bad_line(path, lineno, "unknown version");
      } else if (parts[0] == "verbs") {
        m.vocab_verbs = std::stoul(parts[1]);
        have_verbs = true;
      } else if (parts[0] == "nouns") {
        m.vocab_nouns = std::stoul(parts[1]);
        have_nouns = true;
      } else if (parts[0] == "split") {
        m.source_split = parts[1];
      } else if (parts[0] == "smoothing") {
        m.smoothing = std::stod(parts[1]);
      } else {
        bad_line(path, lineno, "unknown header key " + parts[0]);
      }
      continue;
    }
    if (parts.size() != 3) bad_line(path, lineno, "expected verb,noun,count");
    std::size_t v, n;
    long long cnt;
    try {
      v = std::stoul(parts[0]);
      n = std::stoul(parts[1]);
      cnt = std::stoll(parts[2]);
    } catch (const std::exception&) {
      bad_line(path, lineno, "malformed integer");
    }
    if (v >= m.vocab_verbs || n >= m.vocab_nouns)
      bad_line(path, lineno, "pair outside declared vocab");
    if (cnt < 0) bad_line(path, lineno, "negative count");
    if (m.counts[v * m.vocab_nouns + n] != 0)
      bad_line(path, lineno, "duplicate pair");
    m.counts[v * m.vocab_nouns + n] = cnt;
  }
  if (in_header) throw std::runtime_error(path + ": no data section");
  normalize_o(m);
  return m;
}

void save_taxonomy(const std::string& path, const ActionTaxonomy& tax) {
  std::ostringstream os;
  os << "version,1\n";
  os << "verbs," << tax.vocab_verbs << "\n";
  os << "nouns," << tax.vocab_nouns << "\n";
  os << "action_id,verb_id,noun_id\n";
  for (std::size_t i = 0; i < tax.actions.size(); ++i)
    os << i << "," << tax.actions[i].verb << "," << tax.actions[i].noun
       << "\n";
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << os.str();
}

ActionTaxonomy load_taxonomy(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  ActionTaxonomy tax;
  std::string line;
  std::size_t lineno = 0;
  bool in_header = true;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto parts = split_csv(line);
    if (in_header) {
      if (parts[0] == "action_id") {
        if (tax.vocab_verbs == 0 || tax.vocab_nouns == 0)
          bad_line(path, lineno, "vocab sizes missing before data rows");
        tax.pair_to_id.assign(tax.vocab_verbs * tax.vocab_nouns, -1);
        in_header = false;
        continue;
      }
      if (parts.size() != 2) bad_line(path, lineno, "expected key,value");
      if (parts[0] == "version") {
        if (parts[1] != "1") bad_line(path, lineno, "unknown version");
      } else if (parts[0] == "verbs") {
        tax.vocab_verbs = std::stoul(parts[1]);
      } else if (parts[0] == "nouns") {
        tax.vocab_nouns = std::stoul(parts[1]);
      } else {
        bad_line(path, lineno, "unknown header key " + parts[0]);
      }
      continue;
    }
    if (parts.size() != 3) bad_line(path, lineno, "expected id,verb,noun");
    std::size_t id, v, n;
    try {
      id = std::stoul(parts[0]);
      v = std::stoul(parts[1]);
      n = std::stoul(parts[2]);
    } catch (const std::exception&) {
      bad_line(path, lineno, "malformed integer");
    }
    if (id != tax.actions.size())
      bad_line(path, lineno, "action ids must be dense and ordered");
    if (v >= tax.vocab_verbs || n >= tax.vocab_nouns)
      bad_line(path, lineno, "pair outside declared vocab");
    if (tax.pair_to_id[v * tax.vocab_nouns + n] != -1)
      bad_line(path, lineno, "duplicate pair");
    tax.pair_to_id[v * tax.vocab_nouns + n] = std::int64_t(id);
    tax.actions.push_back({std::uint32_t(v), std::uint32_t(n)});
  }
  if (in_header) throw std::runtime_error(path + ": no data section");
  return tax;
}

}  // namespace ssmcast
