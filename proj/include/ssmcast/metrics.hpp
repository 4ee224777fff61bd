#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ssmcast/actions.hpp"

namespace ssmcast {

// Which component of the (verb, noun) pair counts for a match. `action`
// requires both components to match.
enum class SeqView { action, verb, noun };

// Unnormalized Levenshtein distance (unit-cost insert/delete/substitute)
// between token sequences of any lengths.
std::size_t levenshtein(const ActionSequence& a, const ActionSequence& b,
                        SeqView view);

// The challenge metric for one candidate: Levenshtein divided by the
// sequence length. Both sequences must have the same nonzero length.
double edit_distance(const ActionSequence& pred, const ActionSequence& truth,
                     SeqView view);

struct BestOfK {
  double value = 0.0;
  std::size_t best_index = 0;  // first candidate achieving the minimum
};

// min over candidates of edit_distance(candidate, truth, view).
BestOfK min_over_k(const std::vector<ActionSequence>& candidates,
                   const ActionSequence& truth, SeqView view);

struct EditDistanceReport {
  double verb_ed = 0.0;
  double noun_ed = 0.0;
  double action_ed = 0.0;
  std::size_t num_clips = 0;
};

// Unweighted mean of per-clip best-of-K distances for all three views.
// The two key sets must match exactly; mismatches raise an error listing
// the offending clip ids.
EditDistanceReport evaluate_dataset(
    const std::map<std::string, std::vector<ActionSequence>>& predictions,
    const std::map<std::string, ActionSequence>& truths);

// Predictions persist as JSON lines, one clip per line:
//   {"clip_id": "...", "candidates": [[[verb, noun] * Z] * K]}
// Writing is deterministic, so identical inputs give identical bytes.
void save_predictions(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<ActionSequence>>>&
        predictions);
std::map<std::string, std::vector<ActionSequence>> load_predictions(
    const std::string& path);

void save_report(const std::string& path, const EditDistanceReport& report);
EditDistanceReport load_report(const std::string& path);

}  // namespace ssmcast
