#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lexmlc/common.hpp"
#include "lexmlc/corpus.hpp"
#include "lexmlc/eurovoc.hpp"
#include "lexmlc/metrics.hpp"
#include "lexmlc/model.hpp"
#include "lexmlc/tokenizer.hpp"

namespace lexmlc {

// ---------------------------------------------------------------------------
// Optimizer: adaptive moments with decoupled weight decay. Moment state is
// keyed per tensor and starts when the tensor first receives a gradient, so
// a freshly unfrozen group warms up its own bias correction.
// ---------------------------------------------------------------------------
struct OptimizerSettings {
  double learning_rate = 5e-4;
  double warmup_fraction = 0.1;
  int batch_size = 16;
  int epochs = 4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  void validate() const {
    require(learning_rate > 0.0, "optimizer: learning_rate must be > 0");
    require(warmup_fraction >= 0.0 && warmup_fraction <= 1.0,
            "optimizer: warmup_fraction must be in [0,1]");
    require(batch_size >= 1, "optimizer: batch_size must be >= 1");
    require(epochs >= 1, "optimizer: epochs must be >= 1");
  }
};

class AdamW {
 public:
  explicit AdamW(const OptimizerSettings& settings) : s_(settings) {}

  void step(EncoderModel<float>& model, const GradientSet<float>& grads,
            double lr) {
    for (const auto& [group, tensors] : grads.by_group) {
      for (const auto& [name, grad] : tensors) {
        Mat<float>* param = model.find(group, name);
        require(param != nullptr, "optimizer: unknown tensor ", group, "/", name);
        State& st = states_[group + "/" + name];
        if (st.t == 0) {
          st.m = Mat<float>::Zero(grad.rows(), grad.cols());
          st.v = Mat<float>::Zero(grad.rows(), grad.cols());
        }
        st.t += 1;
        const float b1 = static_cast<float>(s_.beta1);
        const float b2 = static_cast<float>(s_.beta2);
        st.m = b1 * st.m + (1.0f - b1) * grad;
        st.v = (b2 * st.v.array() + (1.0f - b2) * grad.array().square()).matrix();
        const float bc1 =
            1.0f - std::pow(b1, static_cast<float>(st.t));
        const float bc2 =
            1.0f - std::pow(b2, static_cast<float>(st.t));
        const float flr = static_cast<float>(lr);
        param->array() -=
            flr * ((st.m.array() / bc1) /
                       ((st.v.array() / bc2).sqrt() +
                        static_cast<float>(s_.epsilon)) +
                   static_cast<float>(s_.weight_decay) * param->array());
      }
    }
  }

 private:
  struct State {
    Mat<float> m, v;
    long t = 0;
  };
  OptimizerSettings s_;
  std::map<std::string, State> states_;
};

// Triangular profile: linear warmup to the configured peak, then linear
// decay toward zero. The peak is reached exactly at the last warmup step.
inline double triangular_lr(double peak, double warmup_fraction,
                            std::size_t step, std::size_t total_steps) {
  require(total_steps > 0, "schedule: total_steps must be > 0");
  require(step < total_steps, "schedule: step out of range");
  const std::size_t warmup = std::max<std::size_t>(
      1, static_cast<std::size_t>(warmup_fraction *
                                  static_cast<double>(total_steps)));
  if (step < warmup) {
    return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  return peak * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

// ---------------------------------------------------------------------------
// Gradual unfreezing: stage k enables the k-th group of the top-down list;
// the classifier head is trainable from step zero in every mode.
// ---------------------------------------------------------------------------
struct UnfreezeSchedule {
  enum class Mode { none, gradual };
  Mode mode = Mode::gradual;
  std::vector<std::string> target_groups;  // top-down order
  int epochs_per_stage = 1;

  void validate(const std::vector<std::string>& model_groups) const {
    require(epochs_per_stage >= 1, "unfreeze: epochs_per_stage must be >= 1");
    for (const std::string& g : target_groups) {
      require(std::find(model_groups.begin(), model_groups.end(), g) !=
                  model_groups.end(),
              "unfreeze: group '", g, "' is not a model freeze-group");
    }
  }

  std::set<std::string> trainable_at(int epoch_one_based) const {
    std::set<std::string> out{kGroupClsHead};
    std::size_t unfrozen = target_groups.size();
    if (mode == Mode::gradual) {
      const std::size_t stage =
          (static_cast<std::size_t>(epoch_one_based) +
           static_cast<std::size_t>(epochs_per_stage) - 1) /
          static_cast<std::size_t>(epochs_per_stage);
      unfrozen = std::min(stage, target_groups.size());
    }
    for (std::size_t i = 0; i < unfrozen; ++i) {
      out.insert(target_groups[i]);
    }
    return out;
  }
};

// Top-down layer list for "last k layers"; optionally all layers + EMB.
inline std::vector<std::string> last_k_layer_groups(int layers, int k,
                                                    bool include_embeddings) {
  require(k >= 1 && k <= layers, "unfrozen layer count ", k,
          " out of range for ", layers, " layers");
  std::vector<std::string> groups;
  for (int i = layers; i > layers - k; --i) {
    groups.push_back(layer_group_name(i));
  }
  if (include_embeddings) groups.push_back(kGroupEmb);
  return groups;
}

// ---------------------------------------------------------------------------
// Transfer schemes and the training plan
// ---------------------------------------------------------------------------
enum class Scheme { zsl, tl, jt };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::zsl: return "zsl";
    case Scheme::tl: return "tl";
    case Scheme::jt: return "jt";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "zsl") return Scheme::zsl;
  if (s == "tl") return Scheme::tl;
  if (s == "jt") return Scheme::jt;
  fail("unknown scheme '", s, "' (expected zsl|tl|jt)");
}

struct TrainPlan {
  Scheme scheme = Scheme::zsl;
  std::set<LanguageCode> source_languages;
  std::set<LanguageCode> target_languages;
  std::set<LanguageCode> lmft_languages;  // empty means: every corpus language
  int lmft_cycles = 0;
  UnfreezeSchedule unfreeze;
  OptimizerSettings optimizer;
  std::uint64_t seed = 0;

  void validate() const {
    optimizer.validate();
    require(lmft_cycles >= 0, "plan: lmft_cycles must be >= 0");
    require(!source_languages.empty(), "plan: source_languages is empty");
    require(!target_languages.empty(), "plan: target_languages is empty");
    if (scheme == Scheme::jt) {
      require(source_languages == target_languages,
              "plan: joint training requires source == target languages");
    } else {
      for (const LanguageCode& l : source_languages) {
        require(target_languages.count(l) == 0, "plan: language '", l.code,
                "' appears in both source and target under ", scheme_name(scheme));
      }
    }
  }

  // Dev sets that drive model selection, per scheme definition.
  std::set<LanguageCode> selection_languages() const {
    switch (scheme) {
      case Scheme::zsl: return source_languages;
      case Scheme::tl: return target_languages;
      case Scheme::jt: {
        std::set<LanguageCode> pooled = source_languages;
        pooled.insert(target_languages.begin(), target_languages.end());
        return pooled;
      }
    }
    fail("bad scheme");
  }
};

struct DevMetrics {
  double micro_f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based, strictly increasing
  std::map<LanguageCode, DevMetrics> dev;
  std::filesystem::path checkpoint;
};

struct SelectionLog {
  std::vector<EpochRecord> epochs;
};

// Test/observability hooks into the classifier training loop.
struct TrainHooks {
  std::function<void(int epoch, const std::set<std::string>& trainable)>
      on_epoch_start;
  std::function<void(std::size_t step, EncoderModel<float>& model)> on_step;
};

// ---------------------------------------------------------------------------
// Encoding and prediction plumbing
// ---------------------------------------------------------------------------
inline std::vector<TokenSequence> encode_documents(
    const std::vector<const Document*>& docs, const Vocab& vocab,
    int max_seq_len) {
  std::vector<TokenSequence> out;
  out.reserve(docs.size());
  for (const Document* d : docs) {
    out.push_back(encode(vocab, d->text(), max_seq_len));
  }
  return out;
}

// Gold label indices for one document; labels missing from the index (never
// observed in training) are unpredictable and dropped.
inline std::set<std::size_t> gold_indices(const Document& doc,
                                          const LabelIndex& index) {
  std::set<std::size_t> out;
  for (const std::string& label : doc.labels) {
    auto it = index.id_to_index.find(label);
    if (it != index.id_to_index.end()) out.insert(it->second);
  }
  return out;
}

inline std::set<std::string> observed_labels(const CorpusSet& corpus,
                                             const std::set<LanguageCode>& languages,
                                             Split split = Split::train) {
  std::set<std::string> out;
  for (const LanguageCode& lang : languages) {
    for (const Document* d : corpus.read(lang, split)) {
      out.insert(d->labels.begin(), d->labels.end());
    }
  }
  return out;
}

// Label index straight from observed IDs (no thesaurus available).
inline LabelIndex label_index_from_ids(const std::set<std::string>& ids) {
  LabelIndex index;
  index.index_to_id.assign(ids.begin(), ids.end());
  for (std::size_t i = 0; i < index.index_to_id.size(); ++i) {
    index.id_to_index[index.index_to_id[i]] = i;
  }
  return index;
}

inline std::vector<PredictionRow> predict(const EncoderModel<float>& model,
                                          const std::vector<const Document*>& docs,
                                          const Vocab& vocab,
                                          const LabelIndex& index,
                                          int batch_size = 32) {
  require(batch_size >= 1, "predict: batch_size must be >= 1");
  std::vector<PredictionRow> rows;
  rows.reserve(docs.size());
  const std::vector<TokenSequence> seqs =
      encode_documents(docs, vocab, model.config().max_seq_len);
  for (std::size_t start = 0; start < docs.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(docs.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<TokenSequence> chunk(seqs.begin() + static_cast<std::ptrdiff_t>(start),
                                     seqs.begin() + static_cast<std::ptrdiff_t>(end));
    GoldLabels gold;
    for (std::size_t d = start; d < end; ++d) {
      gold.push_back(gold_indices(*docs[d], index));
    }
    const auto [loss, logits] = forward_classify(model, pad_batch(chunk), gold);
    for (std::size_t d = start; d < end; ++d) {
      PredictionRow row;
      row.celex_id = docs[d]->celex_id;
      row.gold = gold[d - start];
      row.scores.resize(static_cast<std::size_t>(logits.cols()));
      for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        const float z = logits(static_cast<Eigen::Index>(d - start), j);
        row.scores[static_cast<std::size_t>(j)] =
            1.0 / (1.0 + std::exp(-static_cast<double>(z)));
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Language-model finetuning: `cycles` full passes over the pool under the
// MLM objective with a per-cycle triangular learning rate. Every freeze-group
// (including MLM_HEAD) is trainable here. cycles == 0 returns the model
// untouched.
// ---------------------------------------------------------------------------
inline EncoderModel<float> run_lmft(EncoderModel<float> model,
                                    const std::vector<const Document*>& pool,
                                    int cycles, const Vocab& vocab,
                                    const OptimizerSettings& settings,
                                    std::uint64_t seed,
                                    double mask_ratio = 0.15) {
  require(cycles >= 0, "run_lmft: cycles must be >= 0");
  if (cycles == 0) return model;
  require(!pool.empty(), "run_lmft: pool is empty but cycles > 0");
  settings.validate();

  const std::vector<TokenSequence> seqs =
      encode_documents(pool, vocab, model.config().max_seq_len);
  std::set<std::string> all_groups;
  for (const std::string& g : model.group_names()) all_groups.insert(g);

  Rng rng(seed);
  AdamW optimizer(settings);
  const std::size_t batch = static_cast<std::size_t>(settings.batch_size);
  const std::size_t steps_per_cycle = (pool.size() + batch - 1) / batch;

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int cycle = 0; cycle < cycles; ++cycle) {
    rng.shuffle(order);
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++step) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<TokenSequence> corrupted;
      MlmTargets targets;
      for (std::size_t i = start; i < end; ++i) {
        MaskedSequence masked =
            mask_for_mlm(seqs[order[i]], rng, model.config().vocab_size, mask_ratio);
        corrupted.push_back(std::move(masked.corrupted));
        targets.push_back(std::move(masked.targets));
      }
      nn::ForwardCache<float> cache;
      forward_mlm(model, pad_batch(corrupted), targets, &cache);
      const GradientSet<float> grads = backward(model, cache, all_groups);
      const double lr = triangular_lr(settings.learning_rate,
                                      settings.warmup_fraction, step,
                                      steps_per_cycle);
      optimizer.step(model, grads, lr);
    }
  }
  return model;
}

// Deterministically masked MLM loss over held-out documents (no updates).
inline float mlm_eval_loss(const EncoderModel<float>& model,
                           const std::vector<const Document*>& docs,
                           const Vocab& vocab, std::uint64_t seed,
                           double mask_ratio = 0.15, int batch_size = 16) {
  require(!docs.empty(), "mlm_eval_loss: no documents");
  const std::vector<TokenSequence> seqs =
      encode_documents(docs, vocab, model.config().max_seq_len);
  Rng rng(seed);
  double loss_sum = 0.0;
  std::size_t masked_total = 0;
  const std::size_t batch = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < seqs.size(); start += batch) {
    const std::size_t end = std::min(seqs.size(), start + batch);
    std::vector<TokenSequence> corrupted;
    MlmTargets targets;
    std::size_t batch_masked = 0;
    for (std::size_t i = start; i < end; ++i) {
      MaskedSequence masked =
          mask_for_mlm(seqs[i], rng, model.config().vocab_size, mask_ratio);
      batch_masked += masked.targets.size();
      corrupted.push_back(std::move(masked.corrupted));
      targets.push_back(std::move(masked.targets));
    }
    if (batch_masked == 0) continue;
    const auto [loss, logits] =
        forward_mlm(model, pad_batch(corrupted), targets);
    loss_sum += static_cast<double>(loss) * static_cast<double>(batch_masked);
    masked_total += batch_masked;
  }
  require(masked_total > 0, "mlm_eval_loss: nothing was masked");
  return static_cast<float>(loss_sum / static_cast<double>(masked_total));
}

// ---------------------------------------------------------------------------
// Classifier training with gradual unfreezing and per-epoch dev selection
// metrics. Trains on the union of source-language train splits; logs dev
// metrics for the scheme's selection languages; saves one checkpoint per
// epoch under run_dir.
// ---------------------------------------------------------------------------
inline SelectionLog run_classifier_training(
    EncoderModel<float>& model, const TrainPlan& plan, const CorpusSet& corpus,
    const LabelIndex& index, const Vocab& vocab,
    const std::filesystem::path& run_dir, const TrainHooks& hooks = {}) {
  plan.validate();
  plan.unfreeze.validate(model.group_names());
  require(static_cast<int>(index.size()) == model.config().label_count,
          "label index size ", index.size(),
          " does not match model label_count ", model.config().label_count);

  // Selection dev sets must exist before any training happens.
  for (const LanguageCode& lang : plan.selection_languages()) {
    require(corpus.has_any(lang, Split::dev),
            "no dev split for selection language '", lang.code, "'");
  }

  std::vector<const Document*> train_docs;
  for (const LanguageCode& lang : plan.source_languages) {
    std::vector<const Document*> docs = corpus.read(lang, Split::train);
    require(!docs.empty(), "no training documents for source language '",
            lang.code, "'");
    train_docs.insert(train_docs.end(), docs.begin(), docs.end());
  }

  const std::vector<TokenSequence> seqs =
      encode_documents(train_docs, vocab, model.config().max_seq_len);
  std::vector<std::set<std::size_t>> gold;
  gold.reserve(train_docs.size());
  for (const Document* d : train_docs) gold.push_back(gold_indices(*d, index));

  std::filesystem::create_directories(run_dir);

  Rng rng(plan.seed);
  Rng shuffle_rng = rng.fork(1);
  AdamW optimizer(plan.optimizer);
  const std::size_t batch = static_cast<std::size_t>(plan.optimizer.batch_size);
  const std::size_t steps_per_epoch = (train_docs.size() + batch - 1) / batch;
  const std::size_t total_steps =
      steps_per_epoch * static_cast<std::size_t>(plan.optimizer.epochs);

  std::vector<std::size_t> order(train_docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  SelectionLog log;
  std::size_t global_step = 0;
  for (int epoch = 1; epoch <= plan.optimizer.epochs; ++epoch) {
    const std::set<std::string> trainable = plan.unfreeze.trainable_at(epoch);
    if (hooks.on_epoch_start) hooks.on_epoch_start(epoch, trainable);

    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<TokenSequence> chunk;
      GoldLabels chunk_gold;
      for (std::size_t i = start; i < end; ++i) {
        chunk.push_back(seqs[order[i]]);
        chunk_gold.push_back(gold[order[i]]);
      }
      nn::ForwardCache<float> cache;
      forward_classify(model, pad_batch(chunk), chunk_gold, &cache);
      const GradientSet<float> grads = backward(model, cache, trainable);
      const double lr =
          triangular_lr(plan.optimizer.learning_rate,
                        plan.optimizer.warmup_fraction, global_step, total_steps);
      optimizer.step(model, grads, lr);
      ++global_step;
      if (hooks.on_step) hooks.on_step(global_step, model);
    }

    EpochRecord record;
    record.epoch = epoch;
    for (const LanguageCode& lang : plan.selection_languages()) {
      const std::vector<const Document*> dev_docs = corpus.read(lang, Split::dev);
      require(!dev_docs.empty(), "no dev documents for selection language '",
              lang.code, "'");
      const std::vector<PredictionRow> rows =
          predict(model, dev_docs, vocab, index, plan.optimizer.batch_size);
      const MicroF1Result f1 = micro_f1(rows);
      record.dev[lang] = DevMetrics{f1.f1, f1.precision, f1.recall};
    }
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
    record.checkpoint = run_dir / name;
    save_checkpoint(model, record.checkpoint);
    log.epochs.push_back(std::move(record));
  }
  return log;
}

// Best epoch under the scheme's selection rule: argmax of the mean dev
// micro-F1 over the selection languages, earlier epoch on ties.
inline const EpochRecord& select_checkpoint(const SelectionLog& log,
                                            const TrainPlan& plan) {
  require(!log.epochs.empty(), "select_checkpoint: empty selection log");
  const std::set<LanguageCode> langs = plan.selection_languages();
  const EpochRecord* best = nullptr;
  double best_score = -1.0;
  for (const EpochRecord& rec : log.epochs) {
    double sum = 0.0;
    for (const LanguageCode& lang : langs) {
      auto it = rec.dev.find(lang);
      require(it != rec.dev.end(), "selection log epoch ", rec.epoch,
              " lacks dev metrics for language '", lang.code, "'");
      sum += it->second.micro_f1;
    }
    const double mean = sum / static_cast<double>(langs.size());
    if (mean > best_score) {
      best_score = mean;
      best = &rec;
    }
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Per-language test-set evaluation of a trained checkpoint.
// ---------------------------------------------------------------------------
struct LanguageEvaluation {
  EvalReport report;
  std::vector<PredictionRow> rows;
};

inline std::map<LanguageCode, LanguageEvaluation> evaluate_transfer(
    const EncoderModel<float>& model, const CorpusSet& corpus,
    const std::set<LanguageCode>& languages, const LabelIndex& index,
    const Vocab& vocab, const std::vector<int>& ks = {3, 5},
    double threshold = 0.5, int batch_size = 32) {
  std::map<LanguageCode, LanguageEvaluation> out;
  for (const LanguageCode& lang : languages) {
    require(corpus.languages().count(lang) > 0, "evaluate: unknown language '",
            lang.code, "'");
    const std::vector<const Document*> docs = corpus.read(lang, Split::test);
    require(!docs.empty(), "evaluate: no test documents for language '",
            lang.code, "'");
    LanguageEvaluation ev;
    ev.rows = predict(model, docs, vocab, index, batch_size);
    ev.report = make_report(lang.code, ev.rows, ks, threshold);
    out.emplace(lang, std::move(ev));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whole training pipeline: LMFT pool assembly (scheme-aware), LM finetuning,
// classifier training, checkpoint selection. Under ZSL/TL the pool takes
// only unlabeled (split=none) text from non-source languages, so no
// target-language train/dev document is ever read.
// ---------------------------------------------------------------------------
struct TrainOutcome {
  SelectionLog log;
  int selected_epoch = 0;
  std::filesystem::path selected_checkpoint;
};

inline std::vector<const Document*> scheme_lmft_pool(const CorpusSet& corpus,
                                                     const TrainPlan& plan) {
  std::set<LanguageCode> langs = plan.lmft_languages;
  if (langs.empty()) langs = corpus.languages();
  std::vector<const Document*> pool;
  for (const LanguageCode& lang : langs) {
    if (plan.source_languages.count(lang) > 0) {
      for (const Document* d : corpus.read(lang, Split::train)) pool.push_back(d);
    }
    for (const Document* d : corpus.read(lang, Split::none)) pool.push_back(d);
  }
  return pool;
}

inline TrainOutcome run_training_pipeline(const TrainPlan& plan,
                                          const CorpusSet& corpus,
                                          const LabelIndex& index,
                                          const Vocab& vocab,
                                          ModelConfig config,
                                          const std::filesystem::path& run_dir,
                                          const TrainHooks& hooks = {}) {
  plan.validate();
  config.vocab_size = vocab.size();
  config.label_count = static_cast<int>(index.size());
  config.validate();

  EncoderModel<float> model(config, plan.seed);
  if (plan.lmft_cycles > 0) {
    const std::vector<const Document*> pool = scheme_lmft_pool(corpus, plan);
    model = run_lmft(std::move(model), pool, plan.lmft_cycles, vocab,
                     plan.optimizer, plan.seed ^ 0x9e3779b97f4a7c15ULL);
  }
  TrainOutcome outcome;
  outcome.log =
      run_classifier_training(model, plan, corpus, index, vocab, run_dir, hooks);
  const EpochRecord& best = select_checkpoint(outcome.log, plan);
  outcome.selected_epoch = best.epoch;
  outcome.selected_checkpoint = best.checkpoint;
  return outcome;
}

}  // namespace lexmlc
