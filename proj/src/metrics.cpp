#include "ssmcast/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ssmcast {

namespace {

inline bool tokens_equal(const SlotPair& a, const SlotPair& b, SeqView view) {
  switch (view) {
    case SeqView::verb:
      return a.verb == b.verb;
    case SeqView::noun:
      return a.noun == b.noun;
    default:
      return a == b;
  }
}

}  // namespace

std::size_t levenshtein(const ActionSequence& a, const ActionSequence& b,
                        SeqView view) {
  const std::size_t la = a.size(), lb = b.size();
  std::vector<std::size_t> prev(lb + 1), cur(lb + 1);
  for (std::size_t j = 0; j <= lb; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= la; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= lb; ++j) {
      const std::size_t sub =
          prev[j - 1] + (tokens_equal(a[i - 1], b[j - 1], view) ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[lb];
}

double edit_distance(const ActionSequence& pred, const ActionSequence& truth,
                     SeqView view) {
  if (pred.size() != truth.size())
    throw std::invalid_argument(
        "edit distance: length mismatch, " + std::to_string(pred.size()) +
        " vs " + std::to_string(truth.size()));
  if (truth.empty())
    throw std::invalid_argument("edit distance: empty sequences");
  return double(levenshtein(pred, truth, view)) / double(truth.size());
}

BestOfK min_over_k(const std::vector<ActionSequence>& candidates,
                   const ActionSequence& truth, SeqView view) {
  if (candidates.empty())
    throw std::invalid_argument("min over K: no candidates");
  BestOfK best;
  best.value = edit_distance(candidates[0], truth, view);
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const double d = edit_distance(candidates[k], truth, view);
    if (d < best.value) {
      best.value = d;
      best.best_index = k;
    }
  }
  return best;
}

EditDistanceReport evaluate_dataset(
    const std::map<std::string, std::vector<ActionSequence>>& predictions,
    const std::map<std::string, ActionSequence>& truths) {
  std::string missing;
  for (const auto& it : truths)
    if (predictions.find(it.first) == predictions.end())
      missing += (missing.empty() ? "" : ", ") + it.first;
  if (!missing.empty())
    throw std::invalid_argument("evaluate: no predictions for: " + missing);
  for (const auto& it : predictions)
    if (truths.find(it.first) == truths.end())
      missing += (missing.empty() ? "" : ", ") + it.first;
  if (!missing.empty())
    throw std::invalid_argument("evaluate: no ground truth for: " + missing);
  if (truths.empty()) throw std::invalid_argument("evaluate: no clips");

  EditDistanceReport rep;
  for (const auto& it : truths) {
    const auto& cands = predictions.at(it.first);
    rep.verb_ed += min_over_k(cands, it.second, SeqView::verb).value;
    rep.noun_ed += min_over_k(cands, it.second, SeqView::noun).value;
    rep.action_ed += min_over_k(cands, it.second, SeqView::action).value;
  }
  rep.num_clips = truths.size();
  rep.verb_ed /= double(rep.num_clips);
  rep.noun_ed /= double(rep.num_clips);
  rep.action_ed /= double(rep.num_clips);
  return rep;
}

void save_predictions(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<ActionSequence>>>&
        predictions) {
  std::ostringstream os;
  for (const auto& clip : predictions) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& seq : clip.second) {
      nlohmann::json jseq = nlohmann::json::array();
      for (const SlotPair& p : seq)
        jseq.push_back(nlohmann::json::array({p.verb, p.noun}));
      cands.push_back(std::move(jseq));
    }
    nlohmann::json line;
    line["clip_id"] = clip.first;
    line["candidates"] = std::move(cands);
    os << line.dump() << "\n";
  }
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << os.str();
}

std::map<std::string, std::vector<ActionSequence>> load_predictions(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::map<std::string, std::vector<ActionSequence>> out;
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
    const std::string id = j.at("clip_id").get<std::string>();
    if (out.count(id))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": duplicate clip_id " + id);
    std::vector<ActionSequence> cands;
    for (const auto& jseq : j.at("candidates")) {
      ActionSequence seq;
      for (const auto& jp : jseq)
        seq.push_back({jp.at(0).get<std::uint32_t>(),
                       jp.at(1).get<std::uint32_t>()});
      cands.push_back(std::move(seq));
    }
    out.emplace(id, std::move(cands));
  }
  return out;
}

void save_report(const std::string& path, const EditDistanceReport& report) {
  nlohmann::json j;
  j["verb_ed"] = report.verb_ed;
  j["noun_ed"] = report.noun_ed;
  j["action_ed"] = report.action_ed;
  j["num_clips"] = report.num_clips;
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << "\n";
}

EditDistanceReport load_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  f >> j;
  EditDistanceReport rep;
  rep.verb_ed = j.at("verb_ed").get<double>();
  rep.noun_ed = j.at("noun_ed").get<double>();
  rep.action_ed = j.at("action_ed").get<double>();
  rep.num_clips = j.at("num_clips").get<std::size_t>();
  return rep;
}

}  // namespace ssmcast
