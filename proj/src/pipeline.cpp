#include "ssmcast/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "ssmcast/checkpoint.hpp"
#include "ssmcast/ops.hpp"
#include "ssmcast/optim.hpp"

namespace ssmcast {

Dataset build_dataset(const std::vector<ClipAnnotation>& anns,
                      const std::vector<FeatureSequence>& feats,
                      const Config& cfg) {
  std::unordered_map<std::string, const FeatureSequence*> by_id;
  for (const FeatureSequence& f : feats) by_id[f.clip_id] = &f;

  Dataset out;
  for (const ClipAnnotation& ann : anns) {
    if (ann.vocab_verbs != cfg.vocab_verbs ||
        ann.vocab_nouns != cfg.vocab_nouns)
      throw std::runtime_error(
          "clip " + ann.clip_id + " uses a " +
          std::to_string(ann.vocab_verbs) + "x" +
          std::to_string(ann.vocab_nouns) + " vocabulary, config expects " +
          std::to_string(cfg.vocab_verbs) + "x" +
          std::to_string(cfg.vocab_nouns));
    auto it = by_id.find(ann.clip_id);
    if (it == by_id.end())
      throw std::runtime_error("no features for clip " + ann.clip_id);
    if (ann.events.size() < cfg.queries + 1) {
      out.skipped++;
      continue;
    }
    try {
      const double cut = eval_cut_time(ann, cfg.queries);
      out.examples.push_back(make_example(ann, *it->second, cut,
                                          cfg.long_tokens, cfg.short_tokens,
                                          cfg.queries));
      out.clip_ids.push_back(ann.clip_id);
    } catch (const std::runtime_error&) {
      out.skipped++;  // cut protocol unsatisfiable for this clip
    }
  }
  return out;
}

std::map<std::string, ActionSequence> dataset_truths(const Dataset& data) {
  std::map<std::string, ActionSequence> out;
  for (std::size_t i = 0; i < data.examples.size(); ++i)
    out[data.clip_ids[i]] = data.examples[i].targets;
  return out;
}

std::vector<SlotPair> all_event_pairs(
    const std::vector<ClipAnnotation>& anns) {
  std::vector<SlotPair> pairs;
  for (const ClipAnnotation& ann : anns)
    for (const ClipEvent& e : ann.events) pairs.push_back({e.verb, e.noun});
  return pairs;
}

TrainResult train_model(Forecaster& model, const Dataset& data,
                        const ActionTaxonomy* taxonomy, Rng& rng,
                        const TrainOptions& opts) {
  const Config& cfg = model.cfg;
  const std::size_t n = data.examples.size();
  if (n == 0) throw std::invalid_argument("train_model: empty dataset");

  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::size_t total = cfg.epochs * steps_per_epoch;
  if (cfg.max_steps > 0) total = std::min(total, cfg.max_steps);

  AdamWConfig ocfg;
  ocfg.lr = cfg.learning_rate;
  ocfg.beta1 = cfg.beta1;
  ocfg.beta2 = cfg.beta2;
  ocfg.weight_decay = cfg.weight_decay;
  AdamW opt(model.params, ocfg);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  result.curve.reserve(total);
  std::size_t step = 0;
  bool done = total == 0;
  while (!done) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    double epoch_loss = 0;
    std::size_t epoch_steps = 0;
    for (std::size_t b0 = 0; b0 < n && !done; b0 += cfg.batch_size) {
      const std::size_t bsize = std::min(cfg.batch_size, n - b0);
      model.params.zero_grads();
      StepLoss row;
      row.step = step;
      for (std::size_t j = 0; j < bsize; ++j) {
        const MemoryExample& ex = data.examples[order[b0 + j]];
        Tape tape;
        TapeScope scope(tape);
        Forecaster::Output out = model.forward(ex.memory);
        LossBreakdown bd = compute_loss(model, out, ex, taxonomy);
        Tensor scaled = scale(bd.total, static_cast<Real>(1.0 / bsize));
        tape.backward(scaled);
        const double inv = 1.0 / static_cast<double>(bsize);
        row.total += bd.total.item() * inv;
        row.verb += bd.verb * inv;
        row.noun += bd.noun * inv;
        row.action += bd.action * inv;
        row.aux_verb += bd.aux_verb * inv;
        row.aux_noun += bd.aux_noun * inv;
      }
      if (!std::isfinite(row.total)) {
        std::ostringstream msg;
        msg << "training diverged at step " << step << ": loss=" << row.total
            << " verb=" << row.verb << " noun=" << row.noun
            << " action=" << row.action << " aux_verb=" << row.aux_verb
            << " aux_noun=" << row.aux_noun
            << "; lower the learning rate or tighten clip_norm";
        throw std::runtime_error(msg.str());
      }
      row.grad_norm = clip_global_norm(model.params, cfg.clip_norm);
      const double sched = cosine_lr(step, total, 1.0, cfg.lr_final_frac);
      row.lr = cfg.learning_rate * sched;
      opt.step(sched);
      result.curve.push_back(row);
      epoch_loss += row.total;
      epoch_steps++;
      step++;
      if (step >= total) done = true;
      if (cfg.stop_loss > 0 && row.total < cfg.stop_loss) done = true;
    }
    if (opts.verbose && epoch_steps > 0)
      std::fprintf(stderr, "step %zu/%zu mean loss %.6f\n", step, total,
                   epoch_loss / static_cast<double>(epoch_steps));
  }
  result.steps = step;

  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    result.checkpoint_path = opts.out_dir + "/model.ckpt";
    save_checkpoint(result.checkpoint_path, model, step, rng);
    save_loss_curve(opts.out_dir + "/loss_curve.csv", result.curve);
  }
  return result;
}

void save_loss_curve(const std::string& path,
                     const std::vector<StepLoss>& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "step,lr,grad_norm,total,verb,noun,action,aux_verb,aux_noun\n";
  out.precision(10);
  for (const StepLoss& r : curve)
    out << r.step << ',' << r.lr << ',' << r.grad_norm << ',' << r.total
        << ',' << r.verb << ',' << r.noun << ',' << r.action << ','
        << r.aux_verb << ',' << r.aux_noun << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<ActionSequence> infer_example(const Forecaster& model,
                                          const Tensor& memory,
                                          const CooccurrenceMatrix* cooc,
                                          const InferenceOptions& opts,
                                          Rng& rng) {
  if (opts.mode != "argmax" && opts.mode != "sample")
    throw std::invalid_argument("infer: unknown decode mode '" + opts.mode +
                                "'");
  if (opts.use_interaction) {
    if (cooc == nullptr)
      throw std::invalid_argument(
          "infer: interaction requested without a co-occurrence matrix");
    if (cooc->vocab_verbs != model.cfg.vocab_verbs ||
        cooc->vocab_nouns != model.cfg.vocab_nouns)
      throw std::invalid_argument(
          "infer: co-occurrence vocabulary " +
          std::to_string(cooc->vocab_verbs) + "x" +
          std::to_string(cooc->vocab_nouns) + " does not match model " +
          std::to_string(model.cfg.vocab_verbs) + "x" +
          std::to_string(model.cfg.vocab_nouns));
  }

  NoGradScope no_grad;
  Forecaster::Output out = model.forward(memory);
  SlotDistributions dist = classify_heads(out.slots, model.heads);
  Tensor joint = joint_probabilities(dist.verbs, dist.nouns);
  if (opts.use_interaction) joint = apply_interaction(joint, *cooc).adjusted;

  if (opts.mode == "argmax") return {argmax_sequence(joint)};
  return sample_sequences(joint, opts.k, rng);
}

std::vector<std::pair<std::string, std::vector<ActionSequence>>> infer_dataset(
    const Forecaster& model, const Dataset& data,
    const CooccurrenceMatrix* cooc, const InferenceOptions& opts,
    std::uint64_t base_seed) {
  std::vector<std::pair<std::string, std::vector<ActionSequence>>> preds;
  preds.reserve(data.examples.size());
  Rng base(base_seed);
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    Rng stream = base.fork(hash_str(data.clip_ids[i].c_str()));
    preds.emplace_back(data.clip_ids[i],
                       infer_example(model, data.examples[i].memory, cooc,
                                     opts, stream));
  }
  return preds;
}

ActionSequence marginal_baseline_sequence(const Dataset& train,
                                          std::size_t vocab_verbs,
                                          std::size_t vocab_nouns) {
  if (train.examples.empty())
    throw std::invalid_argument("marginal baseline: empty training set");
  const std::size_t z = train.examples.front().targets.size();
  ActionSequence seq(z);
  std::vector<std::size_t> vc(vocab_verbs), nc(vocab_nouns);
  for (std::size_t s = 0; s < z; ++s) {
    std::fill(vc.begin(), vc.end(), 0);
    std::fill(nc.begin(), nc.end(), 0);
    for (const MemoryExample& ex : train.examples) {
      vc[ex.targets[s].verb]++;
      nc[ex.targets[s].noun]++;
    }
    // strict > keeps the smallest id on ties
    seq[s].verb = static_cast<std::uint32_t>(
        std::max_element(vc.begin(), vc.end()) - vc.begin());
    seq[s].noun = static_cast<std::uint32_t>(
        std::max_element(nc.begin(), nc.end()) - nc.begin());
  }
  return seq;
}

AblationReport run_action_loss_ablation(const Config& base_cfg,
                                        const Dataset& train,
                                        const Dataset& val,
                                        const ActionTaxonomy& taxonomy,
                                        const std::string& out_dir,
                                        bool verbose) {
  const auto truths = dataset_truths(val);
  AblationReport report;
  for (bool with_action : {true, false}) {
    Config cfg = base_cfg;
    cfg.loss_action = with_action;
    Rng root(cfg.seed);
    Rng init = root.fork(kRngModelInit);
    Forecaster model(cfg, init, with_action ? taxonomy.size() : 0);
    Rng shuffle = root.fork(kRngTrainShuffle);
    TrainOptions topts;
    topts.verbose = verbose;
    if (!out_dir.empty())
      topts.out_dir =
          out_dir + (with_action ? "/with_action" : "/without_action");
    train_model(model, train, with_action ? &taxonomy : nullptr, shuffle,
                topts);

    InferenceOptions iopts;
    iopts.mode = "argmax";
    auto preds = infer_dataset(model, val, nullptr, iopts, cfg.seed);
    std::map<std::string, std::vector<ActionSequence>> by_id(preds.begin(),
                                                             preds.end());
    EditDistanceReport r = evaluate_dataset(by_id, truths);
    (with_action ? report.with_action : report.without_action) = r;
  }
  return report;
}

std::string ablation_to_text(const AblationReport& report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "action loss   verb ED   noun ED   action ED   clips\n";
  auto row = [&out](const char* label, const EditDistanceReport& r) {
    out << label << "   " << r.verb_ed << "    " << r.noun_ed << "    "
        << r.action_ed << "      " << r.num_clips << "\n";
  };
  row("with      ", report.with_action);
  row("without   ", report.without_action);
  return out.str();
}

void save_ablation(const std::string& path, const AblationReport& report) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  auto obj = [](const EditDistanceReport& r) {
    std::ostringstream s;
    s.precision(17);
    s << "{\"action_ed\": " << r.action_ed << ", \"noun_ed\": " << r.noun_ed
      << ", \"num_clips\": " << r.num_clips << ", \"verb_ed\": " << r.verb_ed
      << "}";
    return s.str();
  };
  out << "{\n  \"with_action_loss\": " << obj(report.with_action)
      << ",\n  \"without_action_loss\": " << obj(report.without_action)
      << "\n}\n";
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace ssmcast
