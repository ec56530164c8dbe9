// lexmlc: cross-lingual multi-label classification toolkit for legal text.
//
// Subcommands cover the full workflow: synthesizing or ingesting corpora,
// learning the shared subword vocabulary, MLM pretraining, transfer-scheme
// training with gradual unfreezing, per-language evaluation, and one-axis
// ablation grids. Every run writes a manifest describing its inputs.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lexmlc/common.hpp"
#include "lexmlc/corpus.hpp"
#include "lexmlc/eurovoc.hpp"
#include "lexmlc/experiment.hpp"
#include "lexmlc/metrics.hpp"
#include "lexmlc/model.hpp"
#include "lexmlc/synth.hpp"
#include "lexmlc/tokenizer.hpp"
#include "lexmlc/training.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

using namespace lexmlc;

// ---------------------------------------------------------------------------
// Settings resolution: command-line flag > config file > built-in default.
// ---------------------------------------------------------------------------
struct Settings {
  KeyValueConfig config;
  CLI::App* cmd = nullptr;

  std::string get(const std::string& key, const std::string& fallback) const {
    const std::string flag = "--" + key;
    if (cmd != nullptr && cmd->count(flag) > 0) {
      return cmd->get_option(flag)->as<std::string>();
    }
    auto it = config.find(key);
    return it == config.end() ? fallback : it->second;
  }

  double get_num(const std::string& key, double fallback) const {
    return std::stod(get(key, std::to_string(fallback)));
  }

  int get_int(const std::string& key, int fallback) const {
    return std::stoi(get(key, std::to_string(fallback)));
  }
};

// Every subcommand that resolves settings registers the same option names,
// so config keys and flags stay one vocabulary.
void add_common_options(CLI::App* cmd) {
  for (const char* name :
       {"--layers", "--hidden", "--heads", "--ff_dim", "--max_seq_len",
        "--vocab_size", "--learning_rate", "--warmup_fraction", "--batch_size",
        "--epochs", "--weight_decay", "--lmft-cycles", "--gduf",
        "--unfrozen-layers", "--epochs_per_stage", "--mask_ratio", "--k",
        "--threshold", "--languages"}) {
    cmd->add_option(name);
  }
}

ModelConfig arch_from(const Settings& s) {
  ModelConfig config;
  config.layers = s.get_int("layers", 6);
  config.hidden = s.get_int("hidden", 128);
  config.heads = s.get_int("heads", 4);
  config.ff_dim = s.get_int("ff_dim", 512);
  config.max_seq_len = s.get_int("max_seq_len", 256);
  return config;
}

OptimizerSettings optimizer_from(const Settings& s) {
  OptimizerSettings opt;
  opt.learning_rate = s.get_num("learning_rate", 5e-4);
  opt.warmup_fraction = s.get_num("warmup_fraction", 0.1);
  opt.batch_size = s.get_int("batch_size", 16);
  opt.epochs = s.get_int("epochs", 6);
  opt.weight_decay = s.get_num("weight_decay", 0.01);
  return opt;
}

std::set<LanguageCode> parse_language_list(const std::string& csv) {
  std::set<LanguageCode> out;
  for (const std::string& code : split(csv, ',')) {
    if (!trim(code).empty()) out.insert(parse_language(trim(code)));
  }
  return out;
}

std::vector<int> parse_k_list(const std::string& csv) {
  std::vector<int> out;
  for (const std::string& k : split(csv, ',')) {
    if (!trim(k).empty()) out.push_back(std::stoi(trim(k)));
  }
  require(!out.empty(), "empty K list");
  return out;
}

// Relative output paths live under the artifact root when the environment
// names one.
fs::path resolve_out(const std::string& flag_value) {
  fs::path p(flag_value);
  if (p.is_absolute()) return p;
  const char* root = std::getenv("LEXMLC_ARTIFACT_ROOT");
  return root == nullptr ? p : fs::path(root) / p;
}

std::string timestamp_utc() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------
class ManifestWriter {
 public:
  ManifestWriter(int argc, char** argv, const Settings& settings,
                 std::uint64_t seed) {
    std::string cmdline;
    for (int i = 0; i < argc; ++i) {
      if (i > 0) cmdline += " ";
      cmdline += argv[i];
    }
    manifest_["command_line"] = cmdline;
    manifest_["config_hash"] = hex64(fnv1a(dump_key_values(settings.config)));
    manifest_["seed"] = seed;
    manifest_["started_at"] = timestamp_utc();
    manifest_["corpus_hashes"] = ordered_json::object();
    manifest_["artifacts"] = ordered_json::array();
  }

  void add_corpus(const fs::path& path) {
    manifest_["corpus_hashes"][path.string()] = hex64(file_fingerprint(path));
  }

  void add_artifact(const fs::path& path) {
    manifest_["artifacts"].push_back(path.string());
  }

  void write(const fs::path& dir) {
    manifest_["finished_at"] = timestamp_utc();
    fs::create_directories(dir);
    write_file_atomic(dir / "manifest.json", manifest_.dump(2) + "\n");
  }

 private:
  ordered_json manifest_;
};

// ---------------------------------------------------------------------------
// Corpus loading (normalized JSONL, language taken from the first record)
// ---------------------------------------------------------------------------
LanguageCode peek_language(const fs::path& path) {
  for (const std::string& line : split(read_file(path), '\n')) {
    if (trim(line).empty()) continue;
    const auto record = nlohmann::json::parse(line);
    require(record.contains("language"), path.string(),
            ": first record lacks a language field");
    return parse_language(record["language"].get<std::string>());
  }
  fail("empty corpus file: ", path.string());
}

Corpus load_normalized_corpus(const fs::path& path) {
  return ingest(path, peek_language(path), CorpusFormat::jsonl);
}

CorpusSet load_corpus_set(const std::vector<std::string>& paths) {
  require(!paths.empty(), "no corpus files given");
  std::vector<Corpus> corpora;
  for (const std::string& p : paths) {
    corpora.push_back(load_normalized_corpus(p));
  }
  return CorpusSet(std::move(corpora));
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string format_metric_row(const std::string& lang, const EvalReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s %.3f %.3f %.3f %.3f %.3f",
                upper(lang).c_str(), r.micro_f1,
                r.rp_at.count(3) ? r.rp_at.at(3) : 0.0,
                r.rp_at.count(5) ? r.rp_at.at(5) : 0.0,
                r.ndcg_at.count(3) ? r.ndcg_at.at(3) : 0.0,
                r.ndcg_at.count(5) ? r.ndcg_at.at(5) : 0.0);
  return buf;
}

ordered_json report_to_json(const EvalReport& r) {
  return ordered_json::parse(serialize_report(r));
}

void write_language_reports(const fs::path& dir,
                            const std::map<LanguageCode, LanguageEvaluation>& evals,
                            ManifestWriter& manifest) {
  fs::create_directories(dir);
  std::string table = "Language F1 RP@3 RP@5 nDCG@3 nDCG@5\n";
  for (const auto& [lang, ev] : evals) {
    table += format_metric_row(lang.code, ev.report) + "\n";
    const fs::path report_path = dir / ("report_" + lang.code + ".json");
    write_file_atomic(report_path, serialize_report(ev.report));
    manifest.add_artifact(report_path);

    std::string predictions;
    std::string details;
    for (const PredictionRow& row : ev.rows) {
      ordered_json p;
      p["celex_id"] = row.celex_id;
      p["scores"] = row.scores;
      predictions += p.dump() + "\n";
      ordered_json d;
      d["celex_id"] = row.celex_id;
      d["gold"] = std::vector<std::size_t>(row.gold.begin(), row.gold.end());
      const std::vector<std::size_t> ranked = detail::ranked_labels(row.scores);
      ordered_json top = ordered_json::array();
      for (std::size_t i = 0; i < ranked.size() && i < 10; ++i) {
        top.push_back({{"label", ranked[i]}, {"score", row.scores[ranked[i]]}});
      }
      d["top"] = top;
      details += d.dump() + "\n";
    }
    const fs::path pred_path = dir / ("predictions_" + lang.code + ".jsonl");
    write_file_atomic(pred_path, predictions);
    manifest.add_artifact(pred_path);
    const fs::path detail_path = dir / ("details_" + lang.code + ".jsonl");
    write_file_atomic(detail_path, details);
    manifest.add_artifact(detail_path);
  }
  const fs::path table_path = dir / "report.txt";
  write_file_atomic(table_path, table);
  manifest.add_artifact(table_path);
  std::cout << table;
}

// Shared plan assembly for train/ablate.
TrainPlan plan_from(const Settings& s, const std::string& scheme,
                    const std::string& source, const std::string& target,
                    const std::string& lmft_langs, std::uint64_t seed,
                    int layers) {
  TrainPlan plan;
  plan.scheme = parse_scheme(scheme);
  plan.source_languages = parse_language_list(source);
  plan.target_languages = parse_language_list(target);
  plan.lmft_languages = parse_language_list(lmft_langs);
  plan.lmft_cycles = s.get_int("lmft-cycles", 1);
  plan.optimizer = optimizer_from(s);
  plan.seed = seed;

  const std::string gduf = s.get("gduf", "on");
  require(gduf == "on" || gduf == "off", "--gduf must be on|off");
  plan.unfreeze.mode = gduf == "on" ? UnfreezeSchedule::Mode::gradual
                                    : UnfreezeSchedule::Mode::none;
  plan.unfreeze.epochs_per_stage = s.get_int("epochs_per_stage", 1);
  const std::string unfrozen = s.get("unfrozen-layers", std::to_string(layers));
  bool with_emb = false;
  std::string count = unfrozen;
  if (const std::size_t plus = unfrozen.find('+'); plus != std::string::npos) {
    require(unfrozen.substr(plus + 1) == "EMB", "--unfrozen-layers expects e.g. 5 or 6+EMB");
    with_emb = true;
    count = unfrozen.substr(0, plus);
  }
  plan.unfreeze.target_groups =
      last_k_layer_groups(layers, std::stoi(count), with_emb);
  return plan;
}

LabelIndex build_index(const CorpusSet& corpus, const TrainPlan& plan,
                       const std::string& thesaurus_path, bool full_space) {
  const std::set<std::string> observed =
      observed_labels(corpus, plan.source_languages);
  if (thesaurus_path.empty()) {
    require(!full_space, "--full-label-space requires --thesaurus");
    return label_index_from_ids(observed);
  }
  const DescriptorGraph graph = parse_thesaurus(thesaurus_path);
  if (full_space) {
    std::set<std::string> all_active;
    for (const auto& [id, d] : graph.descriptors) {
      if (d.active()) all_active.insert(id);
    }
    return build_label_index(graph, all_active);
  }
  return build_label_index(graph, observed);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------
int cmd_ingest(int argc, char** argv, const Settings& s,
               const std::vector<std::string>& inputs,
               const std::vector<std::string>& languages,
               const std::string& format, const std::string& splits_path,
               const std::string& anchor, const std::string& out_dir) {
  require(inputs.size() == languages.size(),
          "--input and --language counts differ");
  const CorpusFormat fmt = parse_corpus_format(format);
  SplitMap splits;
  if (!splits_path.empty()) splits = load_split_map(splits_path);

  std::vector<Corpus> corpora;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    corpora.push_back(
        ingest(inputs[i], parse_language(languages[i]), fmt, splits));
  }
  if (!anchor.empty()) {
    corpora = assign_parallel_splits(corpora, parse_language(anchor));
  }

  ManifestWriter manifest(argc, argv, s, 0);
  const fs::path dir = resolve_out(out_dir);
  fs::create_directories(dir);
  for (const Corpus& corpus : corpora) {
    for (const LanguageCode& lang : corpus.languages()) {
      const fs::path path = dir / ("corpus_" + lang.code + ".jsonl");
      write_corpus(corpus, path);
      manifest.add_artifact(path);
      manifest.add_corpus(path);
    }
  }
  std::cout << format_split_table(corpora);
  manifest.write(dir);
  return 0;
}

int cmd_build_vocab(int argc, char** argv, const Settings& s,
                    const std::vector<std::string>& corpus_paths,
                    const std::string& out) {
  const CorpusSet corpus = load_corpus_set(corpus_paths);
  std::vector<std::string> texts;
  for (const LanguageCode& lang : corpus.languages()) {
    for (const Document* d : corpus.read(lang, Split::train)) texts.push_back(d->text());
    for (const Document* d : corpus.read(lang, Split::none)) texts.push_back(d->text());
  }
  const Vocab vocab =
      train_vocab(texts, s.get_int("vocab_size", 8000), corpus.languages());

  ManifestWriter manifest(argc, argv, s, 0);
  for (const std::string& p : corpus_paths) manifest.add_corpus(p);
  const fs::path out_path = resolve_out(out);
  fs::create_directories(out_path.parent_path().empty() ? "." : out_path.parent_path());
  write_vocab(vocab, out_path);
  manifest.add_artifact(out_path);
  manifest.write(out_path.parent_path().empty() ? "." : out_path.parent_path());
  std::cout << "vocab size " << vocab.size() << " (" << vocab.merges().size()
            << " merges)\n";
  return 0;
}

int cmd_pretrain(int argc, char** argv, const Settings& s,
                 const std::vector<std::string>& corpus_paths,
                 const std::string& vocab_path, const std::string& init_path,
                 std::uint64_t seed, const std::string& out) {
  const CorpusSet corpus = load_corpus_set(corpus_paths);
  const Vocab vocab = load_vocab(vocab_path);
  std::set<LanguageCode> langs = parse_language_list(s.get("languages", ""));
  if (langs.empty()) langs = corpus.languages();

  std::vector<const Document*> pool;
  for (const LanguageCode& lang : langs) {
    for (const Document* d : corpus.read(lang, Split::train)) pool.push_back(d);
    for (const Document* d : corpus.read(lang, Split::none)) pool.push_back(d);
  }

  EncoderModel<float> model = [&] {
    if (!init_path.empty()) return load_checkpoint(init_path);
    ModelConfig config = arch_from(s);
    config.vocab_size = vocab.size();
    config.label_count = std::max(1, s.get_int("label_count", 1));
    return EncoderModel<float>(config, seed);
  }();

  const int cycles = s.get_int("lmft-cycles", 1);
  model = run_lmft(std::move(model), pool, cycles, vocab, optimizer_from(s),
                   seed, s.get_num("mask_ratio", 0.15));

  ManifestWriter manifest(argc, argv, s, seed);
  for (const std::string& p : corpus_paths) manifest.add_corpus(p);
  const fs::path out_path = resolve_out(out);
  if (!out_path.parent_path().empty()) fs::create_directories(out_path.parent_path());
  save_checkpoint(model, out_path);
  manifest.add_artifact(out_path);
  manifest.write(out_path.parent_path().empty() ? fs::path(".") : out_path.parent_path());
  std::cout << "pretrained " << cycles << " cycle(s) over " << pool.size()
            << " documents -> " << out_path.string() << "\n";
  return 0;
}

int cmd_train(int argc, char** argv, const Settings& s,
              const std::vector<std::string>& corpus_paths,
              const std::string& vocab_path, const std::string& thesaurus,
              bool full_space, const std::string& scheme,
              const std::string& source, const std::string& target,
              const std::string& lmft_langs, std::uint64_t seed,
              const std::string& out_dir) {
  const CorpusSet corpus = load_corpus_set(corpus_paths);
  const Vocab vocab = load_vocab(vocab_path);
  const ModelConfig arch = arch_from(s);
  const TrainPlan plan =
      plan_from(s, scheme, source, target, lmft_langs, seed, arch.layers);
  plan.validate();
  const LabelIndex index = build_index(corpus, plan, thesaurus, full_space);

  ManifestWriter manifest(argc, argv, s, seed);
  for (const std::string& p : corpus_paths) manifest.add_corpus(p);

  const fs::path dir = resolve_out(out_dir);
  const TrainOutcome outcome =
      run_training_pipeline(plan, corpus, index, vocab, arch, dir);

  const fs::path index_path = dir / "label_index.tsv";
  write_label_index(index, index_path);
  manifest.add_artifact(index_path);

  const fs::path selected = dir / "selected.ckpt";
  write_file_atomic(selected, read_file(outcome.selected_checkpoint));
  manifest.add_artifact(selected);

  std::string log_lines;
  for (const EpochRecord& rec : outcome.log.epochs) {
    ordered_json j;
    j["epoch"] = rec.epoch;
    j["dev"] = ordered_json::object();
    for (const auto& [lang, m] : rec.dev) {
      j["dev"][lang.code] = {{"micro_f1", m.micro_f1},
                             {"precision", m.precision},
                             {"recall", m.recall}};
    }
    j["checkpoint"] = rec.checkpoint.filename().string();
    log_lines += j.dump() + "\n";
    manifest.add_artifact(rec.checkpoint);
  }
  const fs::path log_path = dir / "selection_log.jsonl";
  write_file_atomic(log_path, log_lines);
  manifest.add_artifact(log_path);
  manifest.write(dir);

  std::cout << "selected epoch " << outcome.selected_epoch << " -> "
            << selected.string() << "\n";
  for (const EpochRecord& rec : outcome.log.epochs) {
    std::cout << "epoch " << rec.epoch;
    for (const auto& [lang, m] : rec.dev) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), " %s dev F1 %.3f", lang.code.c_str(),
                    m.micro_f1);
      std::cout << buf;
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_evaluate(int argc, char** argv, const Settings& s,
                 const std::vector<std::string>& corpus_paths,
                 const std::string& vocab_path, const std::string& ckpt,
                 const std::string& index_path, const std::string& languages,
                 const std::string& out_dir) {
  const CorpusSet corpus = load_corpus_set(corpus_paths);
  const Vocab vocab = load_vocab(vocab_path);
  const LabelIndex index = load_label_index(index_path);
  const EncoderModel<float> model = load_checkpoint(ckpt);
  require(static_cast<int>(index.size()) == model.config().label_count,
          "label index size does not match checkpoint label_count");
  const std::set<LanguageCode> langs =
      parse_language_list(languages.empty() ? s.get("languages", "") : languages);
  require(!langs.empty(), "no evaluation languages given");

  const auto evals = evaluate_transfer(
      model, corpus, langs, index, vocab, parse_k_list(s.get("k", "3,5")),
      s.get_num("threshold", 0.5), s.get_int("batch_size", 16));

  ManifestWriter manifest(argc, argv, s, 0);
  for (const std::string& p : corpus_paths) manifest.add_corpus(p);
  const fs::path dir = resolve_out(out_dir);
  write_language_reports(dir, evals, manifest);
  manifest.write(dir);
  return 0;
}

int cmd_ablate(int argc, char** argv, const Settings& s,
               const std::vector<std::string>& corpus_paths,
               const std::string& axis, const std::string& values_csv,
               const std::string& seeds_csv, const std::string& scheme,
               const std::string& source, const std::string& target,
               const std::string& lmft_langs, const std::string& out_dir) {
  const CorpusSet corpus = load_corpus_set(corpus_paths);

  AblationSpec spec;
  spec.axis = parse_ablation_axis(axis);
  for (const std::string& v : split(values_csv, ',')) {
    if (!trim(v).empty()) spec.values.push_back(trim(v));
  }
  for (const std::string& v : split(seeds_csv, ',')) {
    if (!trim(v).empty()) spec.seeds.push_back(std::stoull(trim(v)));
  }
  spec.arch = arch_from(s);
  spec.base_plan = plan_from(s, scheme, source, target, lmft_langs,
                             spec.seeds.empty() ? 0 : spec.seeds[0],
                             spec.arch.layers);
  spec.validate();
  spec.base_plan.validate();

  const Vocab vocab =
      experiment_vocab(corpus, spec.base_plan, s.get_int("vocab_size", 8000));
  const LabelIndex index = label_index_from_ids(
      observed_labels(corpus, spec.base_plan.source_languages));

  ManifestWriter manifest(argc, argv, s, spec.seeds[0]);
  for (const std::string& p : corpus_paths) manifest.add_corpus(p);
  const fs::path dir = resolve_out(out_dir);
  fs::create_directories(dir);

  const AblationOutcome outcome = run_ablation(spec, corpus, vocab, index, dir);

  std::string table = "axis=" + std::string(ablation_axis_name(spec.axis)) +
                      " seeds=" + std::to_string(spec.seeds.size()) + "\n";
  table += "value language F1 RP@3 RP@5 nDCG@3 nDCG@5 dF1%\n";
  ordered_json json_out;
  json_out["axis"] = ablation_axis_name(spec.axis);
  json_out["cells"] = ordered_json::array();
  for (const AblationCell& cell : outcome.cells) {
    ordered_json jcell;
    jcell["value"] = cell.value;
    jcell["mean"] = ordered_json::object();
    jcell["per_seed"] = ordered_json::array();
    for (const auto& seed_reports : cell.per_seed) {
      ordered_json per = ordered_json::object();
      for (const auto& [lang, report] : seed_reports) {
        per[lang.code] = report_to_json(report);
      }
      jcell["per_seed"].push_back(per);
    }
    for (const auto& [lang, mean] : cell.mean) {
      char buf[200];
      std::snprintf(buf, sizeof(buf), "%s %s %.3f %.3f %.3f %.3f %.3f %+.1f\n",
                    cell.value.c_str(), upper(lang.code).c_str(), mean.micro_f1,
                    mean.rp_at.count(3) ? mean.rp_at.at(3) : 0.0,
                    mean.rp_at.count(5) ? mean.rp_at.at(5) : 0.0,
                    mean.ndcg_at.count(3) ? mean.ndcg_at.at(3) : 0.0,
                    mean.ndcg_at.count(5) ? mean.ndcg_at.at(5) : 0.0,
                    cell.f1_improvement_vs_baseline.at(lang));
      table += buf;
      jcell["mean"][lang.code] = report_to_json(mean);
      jcell["mean"][lang.code]["f1_improvement_vs_baseline"] =
          cell.f1_improvement_vs_baseline.at(lang);
    }
    json_out["cells"].push_back(jcell);
  }
  const fs::path table_path = dir / "ablation.txt";
  write_file_atomic(table_path, table);
  manifest.add_artifact(table_path);
  const fs::path json_path = dir / "ablation.json";
  write_file_atomic(json_path, json_out.dump(2) + "\n");
  manifest.add_artifact(json_path);
  manifest.write(dir);
  std::cout << table;
  return 0;
}

int cmd_synth(int argc, char** argv, const Settings& s, const std::string& what,
              std::uint64_t seed, int docs, int dev, int test, int none,
              int concepts, const std::string& out_dir,
              const std::string& out_file) {
  ManifestWriter manifest(argc, argv, s, seed);
  if (what == "corpus") {
    SynthCorpusSpec spec;
    spec.languages = parse_language_list(s.get("languages", "en,fr,de"));
    spec.train_docs = docs;
    spec.dev_docs = dev;
    spec.test_docs = test;
    spec.none_docs = none;
    spec.concepts = concepts;
    spec.seed = seed;
    const std::vector<Corpus> corpora = generate_parallel_corpus(spec);
    const fs::path dir = resolve_out(out_dir);
    fs::create_directories(dir);
    for (const Corpus& corpus : corpora) {
      for (const LanguageCode& lang : corpus.languages()) {
        const fs::path path = dir / ("corpus_" + lang.code + ".jsonl");
        write_corpus(corpus, path);
        manifest.add_artifact(path);
      }
    }
    std::cout << format_split_table(corpora);
    manifest.write(dir);
    return 0;
  }
  if (what == "thesaurus") {
    SynthThesaurusSpec spec;
    spec.seed = seed;
    const fs::path out_path = resolve_out(out_file);
    if (!out_path.parent_path().empty()) fs::create_directories(out_path.parent_path());
    write_file_atomic(out_path, generate_thesaurus_triples(spec));
    manifest.add_artifact(out_path);
    manifest.write(out_path.parent_path().empty() ? fs::path(".")
                                                  : out_path.parent_path());
    std::cout << "thesaurus fixture -> " << out_path.string() << "\n";
    return 0;
  }
  fail("--what must be corpus|thesaurus");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-lingual multi-label classification toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "key=value defaults file")
      ->envname("LEXMLC_CONFIG");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "normalize corpora and print split counts");
  std::vector<std::string> in_inputs, in_langs;
  std::string in_format = "jsonl", in_splits, in_anchor, in_out = "data";
  ingest_cmd->add_option("--input", in_inputs)->required();
  ingest_cmd->add_option("--language", in_langs)->required();
  ingest_cmd->add_option("--format", in_format);
  ingest_cmd->add_option("--splits", in_splits);
  ingest_cmd->add_option("--anchor", in_anchor);
  ingest_cmd->add_option("--out-dir", in_out);

  // build-vocab
  auto* vocab_cmd = app.add_subcommand("build-vocab", "learn the shared subword vocabulary");
  std::vector<std::string> bv_corpora;
  std::string bv_out = "vocab.txt";
  vocab_cmd->add_option("--corpus", bv_corpora)->required();
  vocab_cmd->add_option("--out", bv_out);
  add_common_options(vocab_cmd);

  // pretrain
  auto* pre_cmd = app.add_subcommand("pretrain", "masked-LM finetuning cycles");
  std::vector<std::string> pre_corpora;
  std::string pre_vocab, pre_init, pre_out = "pretrained.ckpt";
  std::uint64_t pre_seed = 0;
  pre_cmd->add_option("--corpus", pre_corpora)->required();
  pre_cmd->add_option("--vocab", pre_vocab)->required();
  pre_cmd->add_option("--init", pre_init);
  pre_cmd->add_option("--seed", pre_seed);
  pre_cmd->add_option("--out", pre_out);
  pre_cmd->add_option("--label_count");
  add_common_options(pre_cmd);

  // train
  auto* train_cmd = app.add_subcommand("train", "transfer-scheme classifier training");
  std::vector<std::string> tr_corpora;
  std::string tr_vocab, tr_thes, tr_scheme = "zsl", tr_source = "en",
              tr_target = "fr,de", tr_lmft_langs, tr_out = "run";
  bool tr_full_space = false;
  std::uint64_t tr_seed = 0;
  train_cmd->add_option("--corpus", tr_corpora)->required();
  train_cmd->add_option("--vocab", tr_vocab)->required();
  train_cmd->add_option("--thesaurus", tr_thes);
  train_cmd->add_flag("--full-label-space", tr_full_space);
  train_cmd->add_option("--scheme", tr_scheme);
  train_cmd->add_option("--source", tr_source);
  train_cmd->add_option("--target", tr_target);
  train_cmd->add_option("--lmft-languages", tr_lmft_langs);
  train_cmd->add_option("--seed", tr_seed);
  train_cmd->add_option("--out-dir", tr_out);
  add_common_options(train_cmd);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "per-language test metrics");
  std::vector<std::string> ev_corpora;
  std::string ev_vocab, ev_ckpt, ev_index, ev_langs, ev_out = "eval";
  eval_cmd->add_option("--corpus", ev_corpora)->required();
  eval_cmd->add_option("--vocab", ev_vocab)->required();
  eval_cmd->add_option("--checkpoint", ev_ckpt)->required();
  eval_cmd->add_option("--label-index", ev_index)->required();
  eval_cmd->add_option("--eval-languages", ev_langs);
  eval_cmd->add_option("--out-dir", ev_out);
  add_common_options(eval_cmd);

  // ablate
  auto* abl_cmd = app.add_subcommand("ablate", "one-axis ablation grid");
  std::vector<std::string> ab_corpora;
  std::string ab_axis, ab_values, ab_seeds = "1,2,3,4,5", ab_scheme = "zsl",
              ab_source = "en", ab_target = "fr,de", ab_lmft_langs,
              ab_out = "ablation";
  abl_cmd->add_option("--axis", ab_axis)->required();
  abl_cmd->add_option("--values", ab_values)->required();
  abl_cmd->add_option("--seeds", ab_seeds);
  abl_cmd->add_option("--scheme", ab_scheme);
  abl_cmd->add_option("--source", ab_source);
  abl_cmd->add_option("--target", ab_target);
  abl_cmd->add_option("--lmft-languages", ab_lmft_langs);
  abl_cmd->add_option("--out-dir", ab_out);
  add_common_options(abl_cmd);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "synthetic corpora and thesaurus fixtures");
  std::string sy_what = "corpus", sy_out_dir = "synth", sy_out_file = "thesaurus.tsv";
  std::uint64_t sy_seed = 7;
  int sy_docs = 500, sy_dev = 60, sy_test = 100, sy_none = 150, sy_concepts = 60;
  synth_cmd->add_option("--what", sy_what);
  synth_cmd->add_option("--seed", sy_seed);
  synth_cmd->add_option("--docs", sy_docs);
  synth_cmd->add_option("--dev", sy_dev);
  synth_cmd->add_option("--test", sy_test);
  synth_cmd->add_option("--none", sy_none);
  synth_cmd->add_option("--concepts", sy_concepts);
  synth_cmd->add_option("--out-dir", sy_out_dir);
  synth_cmd->add_option("--out", sy_out_file);
  add_common_options(synth_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    Settings settings;
    if (!config_path.empty()) settings.config = load_key_values(config_path);

    if (app.got_subcommand(ingest_cmd)) {
      settings.cmd = ingest_cmd;
      return cmd_ingest(argc, argv, settings, in_inputs, in_langs, in_format,
                        in_splits, in_anchor, in_out);
    }
    if (app.got_subcommand(vocab_cmd)) {
      settings.cmd = vocab_cmd;
      return cmd_build_vocab(argc, argv, settings, bv_corpora, bv_out);
    }
    if (app.got_subcommand(pre_cmd)) {
      settings.cmd = pre_cmd;
      return cmd_pretrain(argc, argv, settings, pre_corpora, pre_vocab,
                          pre_init, pre_seed, pre_out);
    }
    if (app.got_subcommand(train_cmd)) {
      settings.cmd = train_cmd;
      return cmd_train(argc, argv, settings, tr_corpora, tr_vocab, tr_thes,
                       tr_full_space, tr_scheme, tr_source, tr_target,
                       tr_lmft_langs, tr_seed, tr_out);
    }
    if (app.got_subcommand(eval_cmd)) {
      settings.cmd = eval_cmd;
      return cmd_evaluate(argc, argv, settings, ev_corpora, ev_vocab, ev_ckpt,
                          ev_index, ev_langs, ev_out);
    }
    if (app.got_subcommand(abl_cmd)) {
      settings.cmd = abl_cmd;
      return cmd_ablate(argc, argv, settings, ab_corpora, ab_axis, ab_values,
                        ab_seeds, ab_scheme, ab_source, ab_target,
                        ab_lmft_langs, ab_out);
    }
    if (app.got_subcommand(synth_cmd)) {
      settings.cmd = synth_cmd;
      return cmd_synth(argc, argv, settings, sy_what, sy_seed, sy_docs, sy_dev,
                       sy_test, sy_none, sy_concepts, sy_out_dir, sy_out_file);
    }
    std::cerr << "no subcommand given\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
