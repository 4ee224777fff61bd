#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "doctest.h"
#include "ssmcast/dataio.hpp"

using namespace ssmcast;

namespace {

std::string tmp_path(const char* name) {
  return std::string("/tmp/ssmcast_test_") + name;
}

}  // namespace

TEST_CASE("world generation is deterministic and well formed") {
  SyntheticWorldSpec a = generate_world(123, 10, 20, 0.2);
  SyntheticWorldSpec b = generate_world(123, 10, 20, 0.2);
  CHECK(a.mask == b.mask);
  CHECK(a.transitions == b.transitions);
  CHECK(a.duration_mean == b.duration_mean);
  CHECK(a.prototype_seed == b.prototype_seed);
  CHECK(a.prototype(0) == b.prototype(0));
  validate_world(a);

  // sparsity 0.2 on a 10x20 grid keeps about 40 pairs (noun rescue bumps it)
  CHECK(a.actions.size() > 20);
  CHECK(a.actions.size() < 80);

  SyntheticWorldSpec c = generate_world(7, 10, 20, 0.2);
  CHECK(a.mask != c.mask);
}

TEST_CASE("sparsity 1 permits every pair") {
  SyntheticWorldSpec w = generate_world(5, 3, 4, 1.0);
  CHECK(w.actions.size() == 12);
  for (std::uint32_t v = 0; v < 3; ++v)
    for (std::uint32_t n = 0; n < 4; ++n) CHECK(w.permitted(v, n));
}

TEST_CASE("every noun keeps at least one verb even at low sparsity") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticWorldSpec w = generate_world(seed, 4, 30, 0.05);
    for (std::size_t n = 0; n < 30; ++n) {
      bool any = false;
      for (std::size_t v = 0; v < 4; ++v) any = any || w.permitted(v, n);
      CHECK(any);
    }
  }
}

TEST_CASE("world rejects bad arguments") {
  CHECK_THROWS_AS(generate_world(1, 1, 5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(generate_world(1, 5, 5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(generate_world(1, 5, 5, 1.5), std::invalid_argument);
}

TEST_CASE("two-stream prototypes share halves across common components") {
  SyntheticWorldSpec w = generate_world(9, 4, 4, 1.0, 10, 0.1, true);
  // actions are (verb,noun) sorted; (0,0) and (0,1) share a verb,
  // (0,0) and (1,0) share a noun
  auto p00 = w.prototype(0);
  auto p01 = w.prototype(1);
  auto p10 = w.prototype(4);
  const std::size_t half = 5;
  for (std::size_t i = 0; i < half; ++i) CHECK(p00[i] == p01[i]);
  for (std::size_t i = half; i < 10; ++i) CHECK(p00[i] == p10[i]);
  bool tail_differs = false;
  for (std::size_t i = half; i < 10; ++i)
    tail_differs = tail_differs || p00[i] != p01[i];
  CHECK(tail_differs);
}

TEST_CASE("clip generation: determinism, consistency, mask compliance") {
  SyntheticWorldSpec w = generate_world(11, 5, 6, 0.4);
  GeneratedClip a = generate_clip(w, 42, "clip_a", 120.0);
  GeneratedClip b = generate_clip(w, 42, "clip_a", 120.0);
  CHECK(a.features.data == b.features.data);
  REQUIRE(a.annotation.events.size() == b.annotation.events.size());

  CHECK(a.features.rows == std::size_t(120.0 / 0.533));
  CHECK(a.features.dim == w.feature_dim);

  const auto& evs = a.annotation.events;
  REQUIRE(evs.size() >= 2);
  CHECK(evs.front().start_s == 0.0);
  CHECK(evs.back().end_s == doctest::Approx(120.0));
  for (std::size_t i = 0; i < evs.size(); ++i) {
    CHECK(w.permitted(evs[i].verb, evs[i].noun));
    if (i > 0) {
      CHECK(evs[i].start_s == doctest::Approx(evs[i - 1].end_s));
      // the chain never repeats an action back to back
      bool same = evs[i].verb == evs[i - 1].verb &&
                  evs[i].noun == evs[i - 1].noun;
      CHECK_FALSE(same);
    }
  }

  GeneratedClip c = generate_clip(w, 43, "clip_b", 120.0);
  CHECK(a.features.data != c.features.data);
}

TEST_CASE("zero emission noise gives exact prototypes per window") {
  SyntheticWorldSpec w = generate_world(13, 4, 4, 0.5, 8, 0.0);
  GeneratedClip g = generate_clip(w, 1, "c", 30.0);
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> to_act;
  for (std::size_t i = 0; i < w.actions.size(); ++i)
    to_act[{w.actions[i].verb, w.actions[i].noun}] = i;
  for (std::size_t r = 0; r < g.features.rows; ++r) {
    const double mid = (double(r) + 0.5) * g.features.window_seconds;
    const ClipEvent* ev = nullptr;
    for (const auto& e : g.annotation.events)
      if (mid >= e.start_s && mid < e.end_s) {
        ev = &e;
        break;
      }
    REQUIRE(ev != nullptr);
    auto proto = w.prototype(to_act.at({ev->verb, ev->noun}));
    for (std::size_t d = 0; d < g.features.dim; ++d)
      CHECK(g.features.data[r * g.features.dim + d] == proto[d]);
  }
}

TEST_CASE("insufficient duration raises") {
  SyntheticWorldSpec w = generate_world(17, 4, 4, 0.5);
  // duration_mean is at least 2s, so 1s holds one event at most
  CHECK_THROWS_AS(generate_clip(w, 1, "c", 1.0, 2), std::runtime_error);
}

TEST_CASE("empirical chain transitions match the Markov matrix") {
  SyntheticWorldSpec w = generate_world(19, 3, 3, 0.6);
  const std::size_t na = w.actions.size();
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> to_act;
  for (std::size_t i = 0; i < na; ++i)
    to_act[{w.actions[i].verb, w.actions[i].noun}] = i;

  // rarely visited actions need time to accumulate visits; run until every
  // row estimate has a standard error well under the 2% tolerance
  std::vector<std::size_t> visits(na, 0);
  std::vector<std::size_t> moves(na * na, 0);
  for (std::uint64_t s = 0;; ++s) {
    GeneratedClip g = generate_clip(w, 1000 + s, "c", 7000.0);
    const auto& evs = g.annotation.events;
    for (std::size_t i = 1; i < evs.size(); ++i) {
      const std::size_t from =
          to_act.at({evs[i - 1].verb, evs[i - 1].noun});
      const std::size_t to = to_act.at({evs[i].verb, evs[i].noun});
      visits[from]++;
      moves[from * na + to]++;
    }
    if (*std::min_element(visits.begin(), visits.end()) >= 4000) break;
    REQUIRE(s < 10000);  // the chain must reach every action reasonably often
  }
  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t b = 0; b < na; ++b) {
      const double emp = double(moves[a * na + b]) / double(visits[a]);
      CHECK(std::abs(emp - w.transitions[a * na + b]) < 0.02);
    }
  }
}

TEST_CASE("example assembly: full observation and target round-trip") {
  SyntheticWorldSpec w = generate_world(23, 5, 6, 0.4, 8);
  GeneratedClip g = generate_clip(w, 5, "c", 200.0);
  const std::size_t L = 6, S = 4, Z = 3;
  const double cut = eval_cut_time(g.annotation, Z);
  MemoryExample ex = make_example(g.annotation, g.features, cut, L, S, Z);

  REQUIRE(ex.memory.dim(0) == L + S);
  REQUIRE(ex.memory.dim(1) == 8);
  // long clip: everything observed
  for (std::size_t r = 0; r < L + S; ++r) CHECK(ex.observed[r] == 1);

  // targets are exactly the last Z events
  const auto& evs = g.annotation.events;
  REQUIRE(ex.targets.size() == Z);
  for (std::size_t z = 0; z < Z; ++z) {
    CHECK(ex.targets[z].verb == evs[evs.size() - Z + z].verb);
    CHECK(ex.targets[z].noun == evs[evs.size() - Z + z].noun);
  }

  // the last memory row is the most recent observed window
  const std::size_t t_obs = std::size_t(cut / g.features.window_seconds);
  for (std::size_t d = 0; d < 8; ++d)
    CHECK(ex.memory.at({L + S - 1, d}) ==
          g.features.data[(t_obs - 1) * 8 + d]);

  // aux labels name events that cover the corresponding midpoints
  for (std::size_t i = 0; i < S; ++i) {
    REQUIRE(ex.aux_verbs[i] >= 0);
    const double mid =
        (double(t_obs - S + i) + 0.5) * g.features.window_seconds;
    bool found = false;
    for (const auto& e : evs)
      if (mid >= e.start_s && mid < e.end_s) {
        CHECK(std::int64_t(e.verb) == ex.aux_verbs[i]);
        CHECK(std::int64_t(e.noun) == ex.aux_nouns[i]);
        found = true;
      }
    CHECK(found);
  }
}

TEST_CASE("example assembly: minimal observation pads the memory") {
  SyntheticWorldSpec w = generate_world(29, 5, 6, 0.4, 8);
  GeneratedClip g = generate_clip(w, 6, "c", 200.0);
  const std::size_t L = 6, S = 4, Z = 2;
  // cut right after the second window
  const double cut = 2.0 * g.features.window_seconds + 1e-6;
  MemoryExample ex = make_example(g.annotation, g.features, cut, L, S, Z);
  // two observed rows sit at the end of the short block
  for (std::size_t r = 0; r < L + S; ++r)
    CHECK(ex.observed[r] == (r >= L + S - 2 ? 1 : 0));
  for (std::size_t d = 0; d < 8; ++d) {
    CHECK(ex.memory.at({0, d}) == Real(0));
    CHECK(ex.memory.at({L + S - 1, d}) == g.features.data[1 * 8 + d]);
  }
  CHECK(ex.aux_verbs[0] == -1);
  CHECK(ex.aux_verbs[S - 1] >= 0);
}

TEST_CASE("example assembly failure modes") {
  SyntheticWorldSpec w = generate_world(31, 5, 6, 0.4, 8);
  GeneratedClip g = generate_clip(w, 7, "c", 60.0);
  // cut before the first full window
  CHECK_THROWS_AS(make_example(g.annotation, g.features, 0.1, 4, 4, 2),
                  std::runtime_error);
  // cut so late that fewer than Z events remain
  const double late = g.annotation.events.back().start_s + 0.01;
  CHECK_THROWS_AS(make_example(g.annotation, g.features, late, 4, 4, 2),
                  std::runtime_error);
  // eval cut needs Z+1 events
  CHECK_THROWS_AS(eval_cut_time(g.annotation, g.annotation.events.size()),
                  std::runtime_error);
}

TEST_CASE("world file round-trips") {
  SyntheticWorldSpec w = generate_world(37, 6, 7, 0.3, 16, 0.2, true);
  const std::string path = tmp_path("world.json");
  save_world(path, w);
  SyntheticWorldSpec r = load_world(path);
  CHECK(r.seed == w.seed);
  CHECK(r.mask == w.mask);
  CHECK(r.actions == w.actions);
  CHECK(r.transitions == w.transitions);
  CHECK(r.duration_mean == w.duration_mean);
  CHECK(r.prototype_seed == w.prototype_seed);
  CHECK(r.two_stream == w.two_stream);
  CHECK(r.prototype(3) == w.prototype(3));
  std::remove(path.c_str());
}

TEST_CASE("annotation file round-trips and validates") {
  SyntheticWorldSpec w = generate_world(41, 5, 6, 0.4);
  std::vector<ClipAnnotation> clips;
  for (int i = 0; i < 3; ++i)
    clips.push_back(
        generate_clip(w, 50 + i, "clip_" + std::to_string(i), 60.0)
            .annotation);
  const std::string path = tmp_path("ann.jsonl");
  save_annotations(path, clips);
  auto loaded = load_annotations(path);
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded[i].clip_id == clips[i].clip_id);
    REQUIRE(loaded[i].events.size() == clips[i].events.size());
    for (std::size_t e = 0; e < clips[i].events.size(); ++e) {
      CHECK(loaded[i].events[e].start_s == clips[i].events[e].start_s);
      CHECK(loaded[i].events[e].end_s == clips[i].events[e].end_s);
      CHECK(loaded[i].events[e].verb == clips[i].events[e].verb);
      CHECK(loaded[i].events[e].noun == clips[i].events[e].noun);
    }
  }
  {
    std::ofstream f(path);
    f << R"({"clip_id":"x","verbs":2,"nouns":2,"events":[[0,5,0,0],[3,8,1,1]]})"
      << "\n";
  }
  CHECK_THROWS_AS(load_annotations(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("feature files round-trip through float32") {
  SyntheticWorldSpec w = generate_world(43, 4, 4, 0.5, 8);
  FeatureSequence feat = generate_clip(w, 9, "clip_f", 40.0).features;
  const std::string dir = tmp_path("featdir");
  save_features(dir, feat);
  FeatureSequence r = load_features(dir, "clip_f");
  CHECK(r.rows == feat.rows);
  CHECK(r.dim == feat.dim);
  CHECK(r.window_seconds == feat.window_seconds);
  REQUIRE(r.data.size() == feat.data.size());
  for (std::size_t i = 0; i < feat.data.size(); ++i)
    CHECK(r.data[i] == Real(float(feat.data[i])));

  // truncated payload is rejected
  {
    std::ofstream f(dir + "/clip_f.bin",
                    std::ios::trunc | std::ios::binary);
    f << "abc";
  }
  CHECK_THROWS_AS(load_features(dir, "clip_f"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("external annotation adapter groups and orders segments") {
  const std::string path = tmp_path("ego.json");
  {
    std::ofstream f(path);
    f << R"({"clips":[
      {"clip_uid":"b","action_idx":1,"verb_label":2,"noun_label":3,
       "action_clip_start_sec":4.0,"action_clip_end_sec":6.0},
      {"clip_uid":"a","action_idx":0,"verb_label":0,"noun_label":1,
       "action_clip_start_sec":0.0,"action_clip_end_sec":2.5},
      {"clip_uid":"b","action_idx":0,"verb_label":1,"noun_label":0,
       "action_clip_start_sec":0.5,"action_clip_end_sec":4.2},
      {"clip_uid":"a","action_idx":1,"verb_label":3,"noun_label":2,
       "action_clip_start_sec":2.5,"action_clip_end_sec":5.0}
    ]})";
  }
  auto clips = load_ego4d_annotations(path, 5, 5);
  REQUIRE(clips.size() == 2);
  CHECK(clips[0].clip_id == "a");
  CHECK(clips[1].clip_id == "b");
  REQUIRE(clips[1].events.size() == 2);
  CHECK(clips[1].events[0].verb == 1);
  CHECK(clips[1].events[1].verb == 2);
  // the slight overlap 4.0 < 4.2 was snapped forward
  CHECK(clips[1].events[1].start_s == doctest::Approx(4.2));
  std::remove(path.c_str());
}
