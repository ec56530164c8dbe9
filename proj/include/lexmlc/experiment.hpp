#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lexmlc/common.hpp"
#include "lexmlc/corpus.hpp"
#include "lexmlc/metrics.hpp"
#include "lexmlc/model.hpp"
#include "lexmlc/tokenizer.hpp"
#include "lexmlc/training.hpp"

namespace lexmlc {

// ---------------------------------------------------------------------------
// Ablation grids: one axis (unfrozen layer count, LM-finetuning cycles, or
// gradual unfreezing on/off), a seed list, and the full transfer pipeline
// per grid point per seed. Reports per-language means plus relative
// improvement against the axis baseline (the first grid value).
// ---------------------------------------------------------------------------
enum class AblationAxis { unfrozen_layers, lmft_cycles, gduf };

inline const char* ablation_axis_name(AblationAxis a) {
  switch (a) {
    case AblationAxis::unfrozen_layers: return "unfrozen_layers";
    case AblationAxis::lmft_cycles: return "lmft_cycles";
    case AblationAxis::gduf: return "gduf";
  }
  return "?";
}

inline AblationAxis parse_ablation_axis(std::string_view s) {
  if (s == "unfrozen_layers") return AblationAxis::unfrozen_layers;
  if (s == "lmft_cycles") return AblationAxis::lmft_cycles;
  if (s == "gduf") return AblationAxis::gduf;
  fail("unknown ablation axis '", s,
       "' (expected unfrozen_layers|lmft_cycles|gduf)");
}

struct AblationSpec {
  AblationAxis axis = AblationAxis::gduf;
  std::vector<std::string> values;  // first value is the baseline
  std::vector<std::uint64_t> seeds;
  TrainPlan base_plan;
  ModelConfig arch;  // vocab_size/label_count filled by the harness

  void validate() const {
    require(values.size() >= 2, "ablation: need at least two grid values");
    require(!seeds.empty(), "ablation: need at least one seed");
  }
};

// Applies one axis value to a plan copy.
inline TrainPlan apply_axis(const TrainPlan& base, AblationAxis axis,
                            const std::string& value, int model_layers) {
  TrainPlan plan = base;
  switch (axis) {
    case AblationAxis::unfrozen_layers: {
      bool with_emb = false;
      std::string count = value;
      const std::size_t plus = value.find('+');
      if (plus != std::string::npos) {
        require(value.substr(plus + 1) == "EMB", "bad unfrozen_layers value '",
                value, "' (expected e.g. 5 or 6+EMB)");
        with_emb = true;
        count = value.substr(0, plus);
      }
      plan.unfreeze.mode = UnfreezeSchedule::Mode::gradual;
      plan.unfreeze.target_groups =
          last_k_layer_groups(model_layers, std::stoi(count), with_emb);
      break;
    }
    case AblationAxis::lmft_cycles:
      plan.lmft_cycles = std::stoi(value);
      break;
    case AblationAxis::gduf: {
      require(value == "on" || value == "off", "bad gduf value '", value,
              "' (expected on|off)");
      plan.unfreeze.mode = value == "on" ? UnfreezeSchedule::Mode::gradual
                                         : UnfreezeSchedule::Mode::none;
      if (plan.unfreeze.target_groups.empty()) {
        plan.unfreeze.target_groups =
            last_k_layer_groups(model_layers, model_layers, false);
      }
      break;
    }
  }
  return plan;
}

struct AblationCell {
  std::string value;
  // seed order follows spec.seeds; inner map is per target language.
  std::vector<std::map<LanguageCode, EvalReport>> per_seed;
  std::map<LanguageCode, EvalReport> mean;
  std::map<LanguageCode, double> f1_improvement_vs_baseline;  // percent
};

struct AblationOutcome {
  AblationAxis axis;
  std::vector<AblationCell> cells;
};

inline AblationOutcome run_ablation(const AblationSpec& spec,
                                    const CorpusSet& corpus, const Vocab& vocab,
                                    const LabelIndex& index,
                                    const std::filesystem::path& work_dir) {
  spec.validate();
  AblationOutcome outcome;
  outcome.axis = spec.axis;

  for (const std::string& value : spec.values) {
    AblationCell cell;
    cell.value = value;
    TrainPlan plan = apply_axis(spec.base_plan, spec.axis, value, spec.arch.layers);
    for (std::uint64_t seed : spec.seeds) {
      plan.seed = seed;
      const std::filesystem::path run_dir =
          work_dir / (std::string(ablation_axis_name(spec.axis)) + "_" + value) /
          ("seed_" + std::to_string(seed));
      const TrainOutcome trained = run_training_pipeline(
          plan, corpus, index, vocab, spec.arch, run_dir);
      const EncoderModel<float> best = load_checkpoint(trained.selected_checkpoint);
      std::map<LanguageCode, EvalReport> reports;
      for (auto& [lang, ev] :
           evaluate_transfer(best, corpus, plan.target_languages, index, vocab)) {
        reports.emplace(lang, std::move(ev.report));
      }
      cell.per_seed.push_back(std::move(reports));
    }

    // Per-language means over seeds.
    for (const LanguageCode& lang : spec.base_plan.target_languages) {
      EvalReport mean;
      mean.language = lang.code;
      for (const auto& seed_reports : cell.per_seed) {
        const EvalReport& r = seed_reports.at(lang);
        mean.n_docs = r.n_docs;
        mean.threshold = r.threshold;
        mean.micro_f1 += r.micro_f1;
        mean.precision += r.precision;
        mean.recall += r.recall;
        for (const auto& [k, v] : r.rp_at) mean.rp_at[k] += v;
        for (const auto& [k, v] : r.ndcg_at) mean.ndcg_at[k] += v;
      }
      const double n = static_cast<double>(cell.per_seed.size());
      mean.micro_f1 /= n;
      mean.precision /= n;
      mean.recall /= n;
      for (auto& [k, v] : mean.rp_at) v /= n;
      for (auto& [k, v] : mean.ndcg_at) v /= n;
      cell.mean.emplace(lang, std::move(mean));
    }
    outcome.cells.push_back(std::move(cell));
  }

  const AblationCell& baseline = outcome.cells.front();
  for (AblationCell& cell : outcome.cells) {
    for (const auto& [lang, mean] : cell.mean) {
      const double base = baseline.mean.at(lang).micro_f1;
      cell.f1_improvement_vs_baseline[lang] =
          base > 0.0 ? relative_improvement(base, mean.micro_f1) : 0.0;
    }
  }
  return outcome;
}

// Shared vocabulary for an experiment, trained on the same scheme-aware
// pool LM finetuning uses (source train + unlabeled text of every language),
// so even vocabulary construction never reads target train/dev documents.
inline Vocab experiment_vocab(const CorpusSet& corpus, const TrainPlan& plan,
                              int size) {
  std::vector<std::string> texts;
  for (const Document* d : scheme_lmft_pool(corpus, plan)) {
    texts.push_back(d->text());
  }
  return train_vocab(texts, size, corpus.languages());
}

}  // namespace lexmlc
