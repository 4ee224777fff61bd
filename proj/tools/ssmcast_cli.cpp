// Command-line front end: synthetic data generation, statistics, training,
// inference and evaluation, each as a subcommand over the library.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssmcast/checkpoint.hpp"
#include "ssmcast/config.hpp"
#include "ssmcast/dataio.hpp"
#include "ssmcast/interaction.hpp"
#include "ssmcast/metrics.hpp"
#include "ssmcast/model.hpp"
#include "ssmcast/pipeline.hpp"

using namespace ssmcast;

namespace {

// defaults, then the file, then explicit --set pairs
Config assemble_config(const std::string& file,
                       const std::vector<std::string>& sets) {
  Config cfg;
  if (!file.empty()) apply_config_file(cfg, file);
  for (const std::string& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    apply_config_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

std::vector<FeatureSequence> load_split_features(
    const std::string& dir, const std::vector<ClipAnnotation>& anns) {
  std::vector<FeatureSequence> feats;
  feats.reserve(anns.size());
  for (const ClipAnnotation& ann : anns)
    feats.push_back(load_features(dir, ann.clip_id));
  return feats;
}

Dataset load_split(const std::string& annotations, const std::string& features,
                   const Config& cfg) {
  const auto anns = load_annotations(annotations);
  const auto feats = load_split_features(features, anns);
  Dataset data = build_dataset(anns, feats, cfg);
  if (data.skipped > 0)
    std::cerr << "note: skipped " << data.skipped
              << " clips too short for the cut protocol\n";
  if (data.examples.empty())
    throw std::runtime_error("no usable clips in " + annotations);
  return data;
}

void print_report(const EditDistanceReport& r) {
  std::printf("clips      %zu\n", r.num_clips);
  std::printf("verb ED    %.4f\n", r.verb_ed);
  std::printf("noun ED    %.4f\n", r.noun_ed);
  std::printf("action ED  %.4f\n", r.action_ed);
}

struct GenWorldArgs {
  std::uint64_t seed = 1;
  std::size_t verbs = 12, nouns = 24, feature_dim = 32;
  double sparsity = 0.2, noise = 0.1;
  bool two_stream = false;
  std::string out;
};

struct GenDataArgs {
  std::string world, prefix = "clip", annotations, features;
  std::size_t clips = 100;
  double duration = 120.0;
  std::uint64_t seed = 1;
};

struct BuildCoocArgs {
  std::string annotations, out, split = "train";
  double smoothing = 0.0;
};

struct TrainArgs {
  std::string config, annotations, features, out_dir, taxonomy;
  std::vector<std::string> sets;
  bool verbose = false;
};

struct InferArgs {
  std::string checkpoint, annotations, features, out, cooc, mode;
  std::size_t k = 0;  // 0 = use the checkpoint's setting
  std::uint64_t seed = 0;
  bool seed_set = false;
  int interaction = -1;  // -1 follow checkpoint, else forced off/on
};

struct EvalArgs {
  std::string predictions, annotations, out;
  std::size_t queries = 8;
};

struct AblateArgs {
  std::string config, train_annotations, train_features, val_annotations,
      val_features, taxonomy, out_dir;
  std::vector<std::string> sets;
  bool verbose = false;
};

int run_gen_world(const GenWorldArgs& a) {
  SyntheticWorldSpec world =
      generate_world(a.seed, a.verbs, a.nouns, a.sparsity, a.feature_dim,
                     a.noise, a.two_stream);
  save_world(a.out, world);
  std::printf("wrote %s: %zux%zu vocabulary, %zu permitted actions\n",
              a.out.c_str(), world.vocab_verbs, world.vocab_nouns,
              world.actions.size());
  return 0;
}

int run_gen_data(const GenDataArgs& a) {
  SyntheticWorldSpec world = load_world(a.world);
  Rng base(a.seed);
  std::vector<ClipAnnotation> anns;
  std::size_t total_events = 0;
  for (std::size_t i = 0; i < a.clips; ++i) {
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%06zu", a.prefix.c_str(), i);
    GeneratedClip clip =
        generate_clip(world, base.fork(i).seed(), id, a.duration);
    total_events += clip.annotation.events.size();
    save_features(a.features, clip.features);
    anns.push_back(std::move(clip.annotation));
  }
  save_annotations(a.annotations, anns);
  std::printf("wrote %zu clips (%zu events) to %s + %s\n", anns.size(),
              total_events, a.annotations.c_str(), a.features.c_str());
  return 0;
}

int run_build_cooc(const BuildCoocArgs& a) {
  const auto anns = load_annotations(a.annotations);
  if (anns.empty()) throw std::runtime_error("no clips in " + a.annotations);
  CooccurrenceMatrix cooc =
      build_cooccurrence(all_event_pairs(anns), anns.front().vocab_verbs,
                         anns.front().vocab_nouns, a.split, a.smoothing);
  save_cooccurrence(a.out, cooc);
  std::size_t nonzero = 0;
  for (std::int64_t c : cooc.counts) nonzero += c > 0;
  std::printf("wrote %s: %zu of %zu pairs observed\n", a.out.c_str(), nonzero,
              cooc.counts.size());
  return 0;
}

int run_build_taxonomy(const std::string& cooc_path, const std::string& out) {
  ActionTaxonomy tax = build_taxonomy(load_cooccurrence(cooc_path));
  save_taxonomy(out, tax);
  std::printf("wrote %s: %zu actions\n", out.c_str(), tax.size());
  return 0;
}

int run_train(const TrainArgs& a) {
  Config cfg = assemble_config(a.config, a.sets);
  if (cfg.loss_action && a.taxonomy.empty())
    throw std::invalid_argument(
        "loss_action=1 requires --taxonomy (build one with build-taxonomy)");
  ActionTaxonomy tax;
  if (!a.taxonomy.empty()) tax = load_taxonomy(a.taxonomy);

  Dataset data = load_split(a.annotations, a.features, cfg);
  std::printf("training on %zu clips\n", data.examples.size());

  Rng root(cfg.seed);
  Rng init = root.fork(kRngModelInit);
  Forecaster model(cfg, init, cfg.loss_action ? tax.size() : 0);
  std::printf("model has %zu parameters\n", model.params.total_size());

  Rng shuffle = root.fork(kRngTrainShuffle);
  TrainOptions opts;
  opts.out_dir = a.out_dir;
  opts.verbose = a.verbose;
  TrainResult res = train_model(model, data, cfg.loss_action ? &tax : nullptr,
                                shuffle, opts);
  std::printf("finished %zu steps, final loss %.6f\n", res.steps,
              res.curve.empty() ? 0.0 : res.curve.back().total);
  std::printf("checkpoint: %s\n", res.checkpoint_path.c_str());
  return 0;
}

int run_infer(const InferArgs& a) {
  CheckpointMeta meta;
  Forecaster model = load_model(a.checkpoint, &meta);
  Config cfg = meta.config;

  InferenceOptions opts;
  opts.mode = a.mode.empty() ? cfg.decode_mode : a.mode;
  opts.k = a.k > 0 ? a.k : cfg.k_candidates;
  opts.use_interaction =
      a.interaction < 0 ? cfg.use_interaction : a.interaction > 0;

  CooccurrenceMatrix cooc;
  if (opts.use_interaction) {
    if (a.cooc.empty())
      throw std::invalid_argument("interaction decoding requires --cooc");
    cooc = load_cooccurrence(a.cooc);
  }

  Dataset data = load_split(a.annotations, a.features, cfg);
  const std::uint64_t seed = a.seed_set ? a.seed : cfg.seed;
  auto preds = infer_dataset(model, data,
                             opts.use_interaction ? &cooc : nullptr, opts,
                             seed);
  save_predictions(a.out, preds);
  std::printf("wrote %zu predictions (%s, %zu candidates each) to %s\n",
              preds.size(), opts.mode.c_str(),
              opts.mode == "argmax" ? std::size_t{1} : opts.k,
              a.out.c_str());
  return 0;
}

int run_eval(const EvalArgs& a) {
  const auto preds = load_predictions(a.predictions);
  const auto anns = load_annotations(a.annotations);
  std::map<std::string, ActionSequence> truths;
  for (const ClipAnnotation& ann : anns) {
    if (ann.events.size() < a.queries + 1) continue;  // same skip as infer
    ActionSequence t;
    for (std::size_t i = ann.events.size() - a.queries; i < ann.events.size();
         ++i)
      t.push_back({ann.events[i].verb, ann.events[i].noun});
    truths[ann.clip_id] = std::move(t);
  }
  EditDistanceReport report = evaluate_dataset(preds, truths);
  print_report(report);
  if (!a.out.empty()) {
    save_report(a.out, report);
    std::printf("wrote %s\n", a.out.c_str());
  }
  return 0;
}

int run_ablate(const AblateArgs& a) {
  Config cfg = assemble_config(a.config, a.sets);
  Dataset train = load_split(a.train_annotations, a.train_features, cfg);
  Dataset val = load_split(a.val_annotations, a.val_features, cfg);

  ActionTaxonomy tax;
  if (!a.taxonomy.empty()) {
    tax = load_taxonomy(a.taxonomy);
  } else {
    const auto anns = load_annotations(a.train_annotations);
    tax = build_taxonomy(build_cooccurrence(
        all_event_pairs(anns), cfg.vocab_verbs, cfg.vocab_nouns));
  }
  std::printf("taxonomy: %zu actions; train %zu clips, val %zu clips\n",
              tax.size(), train.examples.size(), val.examples.size());

  AblationReport report =
      run_action_loss_ablation(cfg, train, val, tax, a.out_dir, a.verbose);
  std::fputs(ablation_to_text(report).c_str(), stdout);
  if (!a.out_dir.empty()) {
    save_ablation(a.out_dir + "/ablation.json", report);
    std::printf("wrote %s/ablation.json\n", a.out_dir.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"action forecasting over desk-scale synthetic worlds"};
  app.require_subcommand(1);

  GenWorldArgs gw;
  CLI::App* gen_world = app.add_subcommand(
      "gen-world", "sample an affordance mask, action chain and prototypes");
  gen_world->add_option("--seed", gw.seed, "world seed");
  gen_world->add_option("--verbs", gw.verbs, "verb vocabulary size");
  gen_world->add_option("--nouns", gw.nouns, "noun vocabulary size");
  gen_world->add_option("--sparsity", gw.sparsity,
                        "fraction of verb-noun pairs permitted");
  gen_world->add_option("--feature-dim", gw.feature_dim, "embedding width");
  gen_world->add_option("--noise", gw.noise, "emission noise stddev");
  gen_world->add_flag("--two-stream", gw.two_stream,
                      "verb/noun split embeddings");
  gen_world->add_option("--out", gw.out, "world json path")->required();

  GenDataArgs gd;
  CLI::App* gen_data = app.add_subcommand(
      "gen-data", "roll out clips from a world and save features");
  gen_data->add_option("--world", gd.world, "world json")->required();
  gen_data->add_option("--clips", gd.clips, "number of clips");
  gen_data->add_option("--duration", gd.duration, "seconds per clip");
  gen_data->add_option("--seed", gd.seed, "split seed");
  gen_data->add_option("--prefix", gd.prefix, "clip id prefix");
  gen_data->add_option("--annotations", gd.annotations, "output jsonl")
      ->required();
  gen_data->add_option("--features", gd.features, "output directory")
      ->required();

  BuildCoocArgs bc;
  CLI::App* build_cooc = app.add_subcommand(
      "build-cooc", "tally verb-noun co-occurrence from annotations");
  build_cooc->add_option("--annotations", bc.annotations, "input jsonl")
      ->required();
  build_cooc->add_option("--out", bc.out, "output csv")->required();
  build_cooc->add_option("--smoothing", bc.smoothing, "additive smoothing");
  build_cooc->add_option("--split", bc.split, "split label stored in the csv");

  std::string bt_cooc, bt_out;
  CLI::App* build_tax = app.add_subcommand(
      "build-taxonomy", "enumerate observed pairs as an action vocabulary");
  build_tax->add_option("--cooc", bt_cooc, "co-occurrence csv")->required();
  build_tax->add_option("--out", bt_out, "output csv")->required();

  TrainArgs tr;
  CLI::App* train = app.add_subcommand("train", "fit a forecaster");
  train->add_option("--config", tr.config, "key=value config file");
  train->add_option("--set", tr.sets, "override, key=value (repeatable)");
  train->add_option("--annotations", tr.annotations, "training jsonl")
      ->required();
  train->add_option("--features", tr.features, "features directory")
      ->required();
  train->add_option("--out-dir", tr.out_dir, "checkpoint + curve directory")
      ->required();
  train->add_option("--taxonomy", tr.taxonomy,
                    "action taxonomy csv (required when loss_action=1)");
  train->add_flag("--verbose", tr.verbose, "per-epoch progress");

  InferArgs inf;
  CLI::App* infer = app.add_subcommand("infer", "forecast upcoming actions");
  infer->add_option("--checkpoint", inf.checkpoint, "trained model")
      ->required();
  infer->add_option("--annotations", inf.annotations, "jsonl for the cuts")
      ->required();
  infer->add_option("--features", inf.features, "features directory")
      ->required();
  infer->add_option("--out", inf.out, "predictions jsonl")->required();
  infer->add_option("--cooc", inf.cooc, "co-occurrence csv for interaction");
  infer->add_option("--mode", inf.mode, "argmax or sample")
      ->check(CLI::IsMember({"argmax", "sample"}));
  infer->add_option("--k", inf.k, "candidates per clip in sample mode");
  infer->add_option("--seed", inf.seed, "sampling seed")
      ->each([&inf](const std::string&) { inf.seed_set = true; });
  infer->add_flag("--interaction{1},--no-interaction{0}", inf.interaction,
                  "force statistical reweighting on or off");

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand(
      "eval", "edit-distance metrics for a prediction file");
  eval->add_option("--predictions", ev.predictions, "predictions jsonl")
      ->required();
  eval->add_option("--annotations", ev.annotations, "ground truth jsonl")
      ->required();
  eval->add_option("--queries", ev.queries, "forecast slots per clip");
  eval->add_option("--out", ev.out, "also write the report json here");

  AblateArgs ab;
  CLI::App* ablate = app.add_subcommand(
      "ablate-action-loss",
      "train twins with and without the action-level loss and compare");
  ablate->add_option("--config", ab.config, "key=value config file");
  ablate->add_option("--set", ab.sets, "override, key=value (repeatable)");
  ablate->add_option("--train-annotations", ab.train_annotations)->required();
  ablate->add_option("--train-features", ab.train_features)->required();
  ablate->add_option("--val-annotations", ab.val_annotations)->required();
  ablate->add_option("--val-features", ab.val_features)->required();
  ablate->add_option("--taxonomy", ab.taxonomy,
                     "action taxonomy csv (default: built from train)");
  ablate->add_option("--out-dir", ab.out_dir, "report + checkpoint directory");
  ablate->add_flag("--verbose", ab.verbose, "per-epoch progress");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_world->parsed()) return run_gen_world(gw);
    if (gen_data->parsed()) return run_gen_data(gd);
    if (build_cooc->parsed()) return run_build_cooc(bc);
    if (build_tax->parsed()) return run_build_taxonomy(bt_cooc, bt_out);
    if (train->parsed()) return run_train(tr);
    if (infer->parsed()) return run_infer(inf);
    if (eval->parsed()) return run_eval(ev);
    if (ablate->parsed()) return run_ablate(ab);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
