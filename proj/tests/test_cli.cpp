// End-to-end checks of the command-line tool: each test shells out to the
// built binary with fixture files and inspects exit codes and artifacts.
#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lexmlc/corpus.hpp"
#include "lexmlc/eurovoc.hpp"
#include "lexmlc/model.hpp"
#include "lexmlc/synth.hpp"
#include "lexmlc/tokenizer.hpp"
#include "lexmlc/training.hpp"

using namespace lexmlc;
namespace fs = std::filesystem;

namespace {

#ifndef LEXMLC_CLI_PATH
#error "LEXMLC_CLI_PATH must be defined by the build"
#endif

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run_cli(const fixtures::ScratchDir& dir, const std::string& args) {
  const fs::path log = dir.path() / "cli_output.log";
  const std::string cmd = std::string(LEXMLC_CLI_PATH) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.output = fs::exists(log) ? read_file(log) : "";
  return result;
}

void write_tiny_world(const fixtures::ScratchDir& dir, int train = 24,
                      int dev = 6, int test = 6, int none = 8) {
  SynthCorpusSpec spec;
  spec.concepts = 10;
  spec.train_docs = train;
  spec.dev_docs = dev;
  spec.test_docs = test;
  spec.none_docs = none;
  spec.labels_min = 1;
  spec.labels_max = 3;
  spec.sentences_per_label = 1;
  spec.seed = 19;
  for (const Corpus& corpus : generate_parallel_corpus(spec)) {
    const std::string lang = corpus.languages().begin()->code;
    write_corpus(corpus, dir.path() / ("corpus_" + lang + ".jsonl"));
  }
}

std::string tiny_model_flags() {
  return " --layers 2 --hidden 16 --heads 2 --ff_dim 32 --max_seq_len 48"
         " --batch_size 8 --epochs 2 --learning_rate 2e-3 --unfrozen-layers 2"
         " --lmft-cycles 0 --vocab_size 320";
}

TEST(Cli, BadPathFailsWithoutPartialOutputs) {
  fixtures::ScratchDir dir;
  const RunResult r = run_cli(
      dir, "ingest --input " + (dir.path() / "missing.jsonl").string() +
               " --language en --out-dir " + (dir.path() / "out").string());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_FALSE(fs::exists(dir.path() / "out" / "corpus_en.jsonl"));
  EXPECT_FALSE(fs::exists(dir.path() / "out" / "manifest.json"));
}

TEST(Cli, IngestPrintsSplitCountRow) {
  fixtures::ScratchDir dir;
  std::string jsonl;
  for (int i = 0; i < 7; ++i) {
    const char* split = i < 4 ? "train" : (i < 5 ? "dev" : "test");
    jsonl += R"({"celex_id":"C)" + std::to_string(i) +
             R"(","language":"en","title":"t","body":"b","labels":["9"],"split":")" +
             split + "\"}\n";
  }
  jsonl += R"({"celex_id":"C9","language":"en","title":"t","body":"b","labels":[]})" "\n";
  const auto input = dir.file("raw_en.jsonl", jsonl);
  const RunResult r = run_cli(
      dir, "ingest --input " + input.string() + " --language en --out-dir " +
               (dir.path() / "out").string());
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("EN 4 1 2 1 8"), std::string::npos) << r.output;
  EXPECT_TRUE(fs::exists(dir.path() / "out" / "corpus_en.jsonl"));
  EXPECT_TRUE(fs::exists(dir.path() / "out" / "manifest.json"));
}

TEST(Cli, IngestWithAnchorAlignsParallelSplits) {
  fixtures::ScratchDir dir;
  const auto en = dir.file(
      "en.jsonl",
      R"({"celex_id":"X","language":"en","title":"t","body":"b","labels":["9"],"split":"test"})" "\n");
  const auto fr = dir.file(
      "fr.jsonl",
      R"({"celex_id":"X","language":"fr","title":"t","body":"b","labels":["9"],"split":"train"})" "\n");
  const RunResult r = run_cli(
      dir, "ingest --input " + en.string() + " --language en --input " +
               fr.string() + " --language fr --anchor en --out-dir " +
               (dir.path() / "out").string());
  EXPECT_EQ(r.exit_code, 0) << r.output;
  const Corpus fr_out =
      ingest(dir.path() / "out" / "corpus_fr.jsonl", LanguageCode{"fr"},
             CorpusFormat::jsonl);
  EXPECT_EQ(fr_out.documents()[0].split, Split::test);
}

TEST(Cli, TrainRejectsOverlappingZslLanguages) {
  fixtures::ScratchDir dir;
  write_tiny_world(dir);
  const RunResult vocab = run_cli(
      dir, "build-vocab --corpus " + (dir.path() / "corpus_en.jsonl").string() +
               " --vocab_size 320 --out " + (dir.path() / "vocab.txt").string());
  ASSERT_EQ(vocab.exit_code, 0) << vocab.output;
  const RunResult r = run_cli(
      dir, "train --corpus " + (dir.path() / "corpus_en.jsonl").string() +
               " --corpus " + (dir.path() / "corpus_fr.jsonl").string() +
               " --vocab " + (dir.path() / "vocab.txt").string() +
               " --scheme zsl --source en,fr --target fr" + tiny_model_flags() +
               " --out-dir " + (dir.path() / "run").string());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("source and target"), std::string::npos) << r.output;
}

TEST(Cli, TrainTwiceIsByteIdentical) {
  fixtures::ScratchDir dir;
  write_tiny_world(dir);
  const std::string corpora =
      " --corpus " + (dir.path() / "corpus_en.jsonl").string() + " --corpus " +
      (dir.path() / "corpus_fr.jsonl").string() + " --corpus " +
      (dir.path() / "corpus_de.jsonl").string();
  ASSERT_EQ(run_cli(dir, "build-vocab" + corpora + " --vocab_size 320 --out " +
                             (dir.path() / "vocab.txt").string())
                .exit_code,
            0);
  const std::string train_args =
      "train" + corpora + " --vocab " + (dir.path() / "vocab.txt").string() +
      " --scheme zsl --source en --target fr,de --seed 11" + tiny_model_flags();
  ASSERT_EQ(run_cli(dir, train_args + " --out-dir " + (dir.path() / "a").string())
                .exit_code,
            0);
  ASSERT_EQ(run_cli(dir, train_args + " --out-dir " + (dir.path() / "b").string())
                .exit_code,
            0);
  EXPECT_EQ(read_file(dir.path() / "a" / "selected.ckpt"),
            read_file(dir.path() / "b" / "selected.ckpt"));
  EXPECT_EQ(read_file(dir.path() / "a" / "selection_log.jsonl"),
            read_file(dir.path() / "b" / "selection_log.jsonl"));
  EXPECT_EQ(read_file(dir.path() / "a" / "label_index.tsv"),
            read_file(dir.path() / "b" / "label_index.tsv"));

  // Evaluation of the identical checkpoints is byte-identical too.
  const std::string eval_args =
      "evaluate --corpus " + (dir.path() / "corpus_fr.jsonl").string() +
      " --vocab " + (dir.path() / "vocab.txt").string() +
      " --eval-languages fr --batch_size 8";
  ASSERT_EQ(run_cli(dir, eval_args + " --checkpoint " +
                             (dir.path() / "a" / "selected.ckpt").string() +
                             " --label-index " +
                             (dir.path() / "a" / "label_index.tsv").string() +
                             " --out-dir " + (dir.path() / "ea").string())
                .exit_code,
            0);
  ASSERT_EQ(run_cli(dir, eval_args + " --checkpoint " +
                             (dir.path() / "b" / "selected.ckpt").string() +
                             " --label-index " +
                             (dir.path() / "b" / "label_index.tsv").string() +
                             " --out-dir " + (dir.path() / "eb").string())
                .exit_code,
            0);
  EXPECT_EQ(read_file(dir.path() / "ea" / "report_fr.json"),
            read_file(dir.path() / "eb" / "report_fr.json"));
  EXPECT_EQ(read_file(dir.path() / "ea" / "predictions_fr.jsonl"),
            read_file(dir.path() / "eb" / "predictions_fr.jsonl"));
}

TEST(Cli, EvaluatePerfectPredictorPrintsOnes) {
  fixtures::ScratchDir dir;

  // Corpus whose test documents all carry labels {first, second}; a fixed
  // checkpoint whose constant logits rank exactly those labels on top.
  std::vector<Document> docs;
  for (int i = 0; i < 5; ++i) {
    Document d;
    d.celex_id = "T" + std::to_string(i);
    d.language = LanguageCode{"fr"};
    d.title = "alpha";
    d.body = "beta gamma";
    d.labels = {"L0", "L1"};
    d.split = Split::test;
    docs.push_back(d);
  }
  write_corpus(Corpus(docs), dir.path() / "corpus_fr.jsonl");

  const Vocab vocab = train_vocab(std::vector<std::string>{"alpha beta gamma"},
                                  320, {LanguageCode{"fr"}});
  write_vocab(vocab, dir.path() / "vocab.txt");
  const LabelIndex index = label_index_from_ids({"L0", "L1", "L2", "L3"});
  write_label_index(index, dir.path() / "index.tsv");

  ModelConfig config;
  config.layers = 1;
  config.hidden = 8;
  config.heads = 2;
  config.ff_dim = 16;
  config.max_seq_len = 32;
  config.vocab_size = vocab.size();
  config.label_count = 4;
  EncoderModel<float> model(config, 1);
  model.cls.out_w.setZero();
  model.cls.out_b.setConstant(-9.0f);
  model.cls.out_b(0, 0) = 9.0f;
  model.cls.out_b(0, 1) = 9.0f;
  save_checkpoint(model, dir.path() / "perfect.ckpt");

  const RunResult r = run_cli(
      dir, "evaluate --corpus " + (dir.path() / "corpus_fr.jsonl").string() +
               " --vocab " + (dir.path() / "vocab.txt").string() +
               " --checkpoint " + (dir.path() / "perfect.ckpt").string() +
               " --label-index " + (dir.path() / "index.tsv").string() +
               " --eval-languages fr --out-dir " + (dir.path() / "eval").string());
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("FR 1.000 1.000 1.000 1.000 1.000"),
            std::string::npos)
      << r.output;
}

TEST(Cli, ConfigFileSuppliesDefaultsFlagsOverride) {
  fixtures::ScratchDir dir;
  write_tiny_world(dir);
  const auto config = dir.file("desk.cfg",
                               "layers=2\nhidden=16\nheads=2\nff_dim=32\n"
                               "max_seq_len=48\nbatch_size=8\nepochs=3\n"
                               "learning_rate=2e-3\nunfrozen-layers=2\n"
                               "lmft-cycles=0\nvocab_size=320\n");
  const std::string corpora =
      " --corpus " + (dir.path() / "corpus_en.jsonl").string() + " --corpus " +
      (dir.path() / "corpus_fr.jsonl").string();
  ASSERT_EQ(run_cli(dir, "--config " + config.string() + " build-vocab" +
                             corpora + " --out " +
                             (dir.path() / "vocab.txt").string())
                .exit_code,
            0);
  const RunResult r = run_cli(
      dir, "--config " + config.string() + " train" + corpora + " --vocab " +
               (dir.path() / "vocab.txt").string() +
               " --scheme zsl --source en --target fr --epochs 2 --out-dir " +
               (dir.path() / "run").string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  // epochs flag (2) overrides the config value (3).
  EXPECT_TRUE(fs::exists(dir.path() / "run" / "epoch_002.ckpt"));
  EXPECT_FALSE(fs::exists(dir.path() / "run" / "epoch_003.ckpt"));
}

TEST(Cli, SynthThesaurusRoundTripsThroughParser) {
  fixtures::ScratchDir dir;
  const RunResult r = run_cli(
      dir, "synth --what thesaurus --seed 2 --out " +
               (dir.path() / "thesaurus.tsv").string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const DescriptorGraph graph = parse_thesaurus(dir.path() / "thesaurus.tsv");
  EXPECT_EQ(graph.micro_thesauri.size(), 127u);
  EXPECT_EQ(graph.descriptors.size(), 7221u);
}

}  // namespace
