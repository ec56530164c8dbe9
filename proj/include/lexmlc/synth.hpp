#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lexmlc/common.hpp"
#include "lexmlc/corpus.hpp"

namespace lexmlc {

// ---------------------------------------------------------------------------
// Synthetic parallel corpora. Every document exists in all configured
// languages under one celex_id with one shared label set, so transfer
// quality is measurable without real data. Concept surface forms either
// share a stem across languages (subword overlap carries the label signal
// cross-lingually) or are language-specific (only in-language text teaches
// them), mirroring cognate vs non-cognate vocabulary.
// ---------------------------------------------------------------------------
struct SynthCorpusSpec {
  std::set<LanguageCode> languages = default_language_registry();
  int concepts = 60;
  int train_docs = 500;
  int dev_docs = 60;
  int test_docs = 100;
  int none_docs = 150;  // unlabeled, LM-finetuning pool only
  int labels_min = 2;
  int labels_max = 4;
  int sentences_per_label = 2;
  double shared_stem_fraction = 0.65;
  double zipf_exponent = 1.0;
  // When > 0, concepts are grouped into this many themes and a document
  // draws its labels within one theme (like descriptors clustering under a
  // micro-thesaurus), giving the label space a co-occurrence structure.
  int themes = 0;
  double off_theme_fraction = 0.15;
  std::uint64_t seed = 7;
};

namespace synth_detail {

inline const std::vector<std::string>& consonants() {
  static const std::vector<std::string> c = {"b", "d", "f", "g", "k", "l", "m",
                                             "n", "p", "r", "s", "t", "v", "z"};
  return c;
}

inline const std::vector<std::string>& vowels() {
  static const std::vector<std::string> v = {"a", "e", "i", "o", "u"};
  return v;
}

inline std::string syllable(Rng& rng) {
  return consonants()[rng.next_below(consonants().size())] +
         vowels()[rng.next_below(vowels().size())];
}

inline std::string stem(Rng& rng, int syllables) {
  std::string out;
  for (int i = 0; i < syllables; ++i) out += syllable(rng);
  return out;
}

inline std::string language_suffix(const LanguageCode& lang, Rng& rng) {
  static const std::map<std::string, std::vector<std::string>> suffixes = {
      {"en", {"", "ing", "ment", "s"}},
      {"fr", {"e", "ion", "eur", "age"}},
      {"de", {"en", "ung", "heit", "ert"}},
  };
  auto it = suffixes.find(lang.code);
  if (it == suffixes.end()) {
    // Languages outside the default registry get a stable synthetic suffix.
    return std::string(1, lang.code[0]) + "um";
  }
  return it->second[rng.next_below(it->second.size())];
}

// Zipf(s) over ranks 1..n via inverse CDF on precomputed cumulative weights.
class ZipfSampler {
 public:
  ZipfSampler(int n, double exponent) {
    cumulative_.reserve(static_cast<std::size_t>(n));
    double total = 0.0;
    for (int r = 1; r <= n; ++r) {
      total += 1.0 / std::pow(static_cast<double>(r), exponent);
      cumulative_.push_back(total);
    }
  }

  int sample(Rng& rng) const {  // 0-based rank
    const double u = rng.next_unit() * cumulative_.back();
    const auto it =
        std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<int>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

}  // namespace synth_detail

// One corpus per language, parallel by construction.
inline std::vector<Corpus> generate_parallel_corpus(const SynthCorpusSpec& spec) {
  require(!spec.languages.empty(), "synth: no languages");
  require(spec.concepts >= spec.labels_max && spec.labels_min >= 1 &&
              spec.labels_max >= spec.labels_min,
          "synth: bad concept/label counts");
  Rng rng(spec.seed);

  // Concept surface forms per language: the stem is one standalone word
  // (byte-identical across languages when shared, so the learned subword
  // inventory carries it cross-lingually) followed by a language-specific
  // marker word.
  std::map<std::string, std::vector<std::string>> words;  // lang -> concept
  std::vector<std::string> label_ids;
  for (int c = 0; c < spec.concepts; ++c) {
    char id[16];
    std::snprintf(id, sizeof(id), "%06d", 100001 + c);
    label_ids.emplace_back(id);
    const bool shared = rng.next_unit() < spec.shared_stem_fraction;
    const std::string shared_stem = synth_detail::stem(rng, 3);
    for (const LanguageCode& lang : spec.languages) {
      const std::string base =
          shared ? shared_stem : synth_detail::stem(rng, 3);
      const std::string marker = synth_detail::language_suffix(lang, rng);
      words[lang.code].push_back(marker.empty() ? base : base + " " + marker);
    }
  }

  // Language-specific filler vocabulary (function-word stand-ins).
  std::map<std::string, std::vector<std::string>> fillers;
  for (const LanguageCode& lang : spec.languages) {
    for (int i = 0; i < 24; ++i) {
      fillers[lang.code].push_back(synth_detail::stem(rng, i % 3 == 0 ? 1 : 2));
    }
  }

  const synth_detail::ZipfSampler zipf(spec.concepts, spec.zipf_exponent);

  struct DocPlan {
    std::string celex;
    Split split;
    std::vector<int> concepts;        // label concepts, or topic-only for none
    bool labeled;
    std::vector<std::vector<int>> sentence_words;  // -1 marks a filler slot
  };

  std::vector<DocPlan> plans;
  const int total =
      spec.train_docs + spec.dev_docs + spec.test_docs + spec.none_docs;
  for (int n = 0; n < total; ++n) {
    DocPlan plan;
    char celex[24];
    std::snprintf(celex, sizeof(celex), "SYN%06d", n + 1);
    plan.celex = celex;
    if (n < spec.train_docs) plan.split = Split::train;
    else if (n < spec.train_docs + spec.dev_docs) plan.split = Split::dev;
    else if (n < spec.train_docs + spec.dev_docs + spec.test_docs) plan.split = Split::test;
    else plan.split = Split::none;
    plan.labeled = plan.split != Split::none;

    const int k = spec.labels_min +
                  static_cast<int>(rng.next_below(static_cast<std::uint64_t>(
                      spec.labels_max - spec.labels_min + 1)));
    std::set<int> chosen;
    if (spec.themes > 0) {
      // Theme-structured draw: most labels come from one theme's concepts
      // (concept c belongs to theme c % themes).
      const int theme = static_cast<int>(rng.next_below(
          static_cast<std::uint64_t>(spec.themes)));
      const int theme_size = (spec.concepts + spec.themes - 1) / spec.themes;
      while (static_cast<int>(chosen.size()) < k) {
        if (rng.next_unit() < spec.off_theme_fraction) {
          chosen.insert(zipf.sample(rng));
        } else {
          // Quadratic skew keeps per-theme label frequencies long-tailed.
          const double u = rng.next_unit();
          const int within = static_cast<int>(u * u * theme_size);
          const int concept_id = theme + within * spec.themes;
          if (concept_id < spec.concepts) chosen.insert(concept_id);
        }
      }
    } else {
      while (static_cast<int>(chosen.size()) < k) chosen.insert(zipf.sample(rng));
    }
    plan.concepts.assign(chosen.begin(), chosen.end());

    // Shared sentence plan; rendered per language below.
    for (int concept_id : plan.concepts) {
      for (int s = 0; s < spec.sentences_per_label; ++s) {
        std::vector<int> sentence;
        const int lead = 1 + static_cast<int>(rng.next_below(2));
        for (int w = 0; w < lead; ++w) sentence.push_back(-1);
        sentence.push_back(concept_id);
        if (rng.next_unit() < 0.5) sentence.push_back(-1);
        if (rng.next_unit() < 0.35) sentence.push_back(concept_id);
        plan.sentence_words.push_back(std::move(sentence));
      }
    }
    std::vector<int> noise;
    for (int w = 0; w < 4; ++w) noise.push_back(-1);
    plan.sentence_words.push_back(std::move(noise));
    plans.push_back(std::move(plan));
  }

  // Filler choices differ per language but are drawn deterministically per
  // (document, slot) so corpora stay parallel in structure.
  std::vector<Corpus> corpora;
  for (const LanguageCode& lang : spec.languages) {
    Rng filler_rng = Rng(spec.seed ^ fnv1a(lang.code));
    std::vector<Document> docs;
    docs.reserve(plans.size());
    for (const DocPlan& plan : plans) {
      Document d;
      d.celex_id = plan.celex;
      d.language = lang;
      d.split = plan.split;
      if (plan.labeled) {
        for (int concept_id : plan.concepts) {
          d.labels.insert(label_ids[static_cast<std::size_t>(concept_id)]);
        }
      }
      const std::vector<std::string>& lang_words = words[lang.code];
      const std::vector<std::string>& lang_fillers = fillers[lang.code];
      std::string title;
      for (std::size_t i = 0; i < plan.concepts.size() && i < 2; ++i) {
        if (!title.empty()) title += " ";
        title += lang_words[static_cast<std::size_t>(plan.concepts[i])];
      }
      d.title = title;
      std::string body;
      for (const std::vector<int>& sentence : plan.sentence_words) {
        std::string line;
        for (int word : sentence) {
          if (!line.empty()) line += " ";
          if (word < 0) {
            line += lang_fillers[filler_rng.next_below(lang_fillers.size())];
          } else {
            line += lang_words[static_cast<std::size_t>(word)];
          }
        }
        body += line + ".\n";
      }
      d.body = std::move(body);
      docs.push_back(std::move(d));
    }
    corpora.emplace_back(std::move(docs));
  }
  return corpora;
}

// ---------------------------------------------------------------------------
// EuroVoc-scale thesaurus fixture: domains hold micro-thesauri, descriptors
// attach to one or two micro-thesauri, broader edges always point at a
// lower-numbered descriptor (acyclic by construction), and a tail of
// descriptors carries replacedBy pointers.
// ---------------------------------------------------------------------------
struct SynthThesaurusSpec {
  int domains = 21;
  int micro_thesauri = 127;
  int descriptors = 7221;
  int replaced = 40;
  std::uint64_t seed = 11;
};

inline std::string generate_thesaurus_triples(const SynthThesaurusSpec& spec) {
  require(spec.domains >= 1 && spec.micro_thesauri >= spec.domains &&
              spec.descriptors >= spec.micro_thesauri,
          "synth thesaurus: inconsistent sizes");
  require(spec.replaced < spec.descriptors, "synth thesaurus: too many replacements");
  Rng rng(spec.seed);
  std::string out;
  out.reserve(static_cast<std::size_t>(spec.descriptors) * 160);

  std::vector<std::string> domain_ids;
  for (int d = 0; d < spec.domains; ++d) {
    char id[8];
    std::snprintf(id, sizeof(id), "%02d", d + 4);
    domain_ids.emplace_back(id);
    out += domain_ids.back() + "\ttype\tdomain\n";
    out += domain_ids.back() + "\tprefLabel\tdomain " + domain_ids.back() + "\n";
  }

  std::vector<std::string> mt_ids;
  std::vector<int> mt_counter(static_cast<std::size_t>(spec.domains), 0);
  for (int m = 0; m < spec.micro_thesauri; ++m) {
    const int dom = m % spec.domains;
    char id[8];
    std::snprintf(id, sizeof(id), "%02d%02d", dom + 4,
                  ++mt_counter[static_cast<std::size_t>(dom)]);
    mt_ids.emplace_back(id);
    out += mt_ids.back() + "\ttype\tmicro_thesaurus\n";
    out += mt_ids.back() + "\tprefLabel\tmicro-thesaurus " + mt_ids.back() + "\n";
    out += mt_ids.back() + "\tinDomain\t" + domain_ids[static_cast<std::size_t>(dom)] + "\n";
  }

  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(spec.descriptors));
  std::map<std::string, std::vector<int>> mt_members;
  for (int i = 0; i < spec.descriptors; ++i) {
    char id[8];
    std::snprintf(id, sizeof(id), "%06d", 100001 + i);
    ids.emplace_back(id);
    out += ids.back() + "\ttype\tdescriptor\n";
    for (const char* lang : {"en", "fr", "de"}) {
      out += ids.back() + "\tprefLabel\tconcept " + std::to_string(i) + " " +
             lang + "@" + lang + "\n";
    }
    const std::string& mt =
        mt_ids[static_cast<std::size_t>(i) % mt_ids.size()];
    out += ids.back() + "\tinScheme\t" + mt + "\n";
    if (rng.next_unit() < 0.15) {
      out += ids.back() + "\tinScheme\t" +
             mt_ids[rng.next_below(mt_ids.size())] + "\n";
    }
    std::vector<int>& members = mt_members[mt];
    if (!members.empty() && rng.next_unit() < 0.7) {
      const int parent = members[members.size() > 8 ? members.size() - 1 -
                                                          rng.next_below(8)
                                                    : rng.next_below(members.size())];
      out += ids.back() + "\tbroader\t" +
             ids[static_cast<std::size_t>(parent)] + "\n";
    }
    if (i > 0 && rng.next_unit() < 0.1) {
      out += ids.back() + "\trelated\t" +
             ids[rng.next_below(static_cast<std::uint64_t>(i))] + "\n";
    }
    if (rng.next_unit() < 0.2) {
      out += ids.back() + "\tusedFor\talt name " + std::to_string(i) + "\n";
    }
    members.push_back(i);
  }
  for (int r = 0; r < spec.replaced; ++r) {
    const std::size_t victim =
        static_cast<std::size_t>(spec.descriptors - 1 - r);
    out += ids[victim] + "\treplacedBy\t" +
           ids[rng.next_below(static_cast<std::uint64_t>(spec.descriptors -
                                                         spec.replaced))] +
           "\n";
  }
  return out;
}

}  // namespace lexmlc
