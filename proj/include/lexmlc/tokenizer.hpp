#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "lexmlc/common.hpp"
#include "lexmlc/corpus.hpp"

namespace lexmlc {

// Reserved token ids. Byte tokens follow at 5..260, merge tokens after that.
struct SpecialTokens {
  static constexpr int pad = 0;
  static constexpr int unk = 1;  // unreachable under byte-level coverage
  static constexpr int cls = 2;
  static constexpr int sep = 3;
  static constexpr int mask = 4;
  static constexpr int count = 5;
};

constexpr int kByteTokenBase = SpecialTokens::count;
constexpr int kBaseVocabSize = kByteTokenBase + 256;

// Shared multilingual subword vocabulary learned by byte-level pair merging.
class Vocab {
 public:
  Vocab() = default;
  Vocab(std::vector<std::pair<int, int>> merges,
        std::set<LanguageCode> languages)
      : merges_(std::move(merges)), languages_(std::move(languages)) {
    rebuild();
  }

  int size() const { return kBaseVocabSize + static_cast<int>(merges_.size()); }
  const std::vector<std::pair<int, int>>& merges() const { return merges_; }
  const std::set<LanguageCode>& languages() const { return languages_; }

  // Byte string of a non-special token.
  const std::string& token_string(int id) const {
    require(id >= kByteTokenBase && id < size(), "token id ", id,
            " has no string form");
    return strings_[static_cast<std::size_t>(id - kByteTokenBase)];
  }

  int merge_rank(int left, int right) const {
    auto it = ranks_.find(key(left, right));
    return it == ranks_.end() ? -1 : it->second;
  }

  static bool is_special(int id) { return id < SpecialTokens::count; }

 private:
  static std::uint64_t key(int left, int right) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(left)) << 32) |
           static_cast<std::uint32_t>(right);
  }

  void rebuild() {
    strings_.clear();
    strings_.reserve(256 + merges_.size());
    for (int b = 0; b < 256; ++b) {
      strings_.push_back(std::string(1, static_cast<char>(b)));
    }
    ranks_.clear();
    for (std::size_t i = 0; i < merges_.size(); ++i) {
      const auto [l, r] = merges_[i];
      const int next_id = kBaseVocabSize + static_cast<int>(i);
      require(l >= kByteTokenBase && l < next_id && r >= kByteTokenBase &&
                  r < next_id,
              "merge rule ", i, " references an out-of-range token");
      strings_.push_back(token_string(l) + token_string(r));
      ranks_[key(l, r)] = static_cast<int>(i);
    }
  }

  std::vector<std::pair<int, int>> merges_;
  std::set<LanguageCode> languages_;
  std::vector<std::string> strings_;  // token id - kByteTokenBase
  std::unordered_map<std::uint64_t, int> ranks_;
};

struct TokenSequence {
  std::vector<int> ids;  // ids[0] == [CLS], ids.back() == [SEP]
  std::size_t length() const { return ids.size(); }
};

namespace detail {

// Runs of whitespace / non-whitespace bytes. Merges never cross run
// boundaries, and concatenating runs reproduces the input byte-exactly.
inline std::vector<std::string> pretokenize(std::string_view text) {
  std::vector<std::string> runs;
  std::size_t start = 0;
  auto ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)); };
  for (std::size_t i = 1; i <= text.size(); ++i) {
    if (i == text.size() || ws(text[i]) != ws(text[start])) {
      runs.emplace_back(text.substr(start, i - start));
      start = i;
    }
  }
  return runs;
}

inline std::vector<int> bytes_to_ids(std::string_view word) {
  std::vector<int> ids;
  ids.reserve(word.size());
  for (unsigned char c : word) {
    ids.push_back(kByteTokenBase + c);
  }
  return ids;
}

}  // namespace detail

// Learns merge rules by iterated most-frequent-pair replacement over the
// corpus. Deterministic: ties on pair frequency are broken by the merged
// byte string (then by the left constituent), never by hash order.
template <typename TextRange>
Vocab train_vocab(const TextRange& texts, int size,
                  const std::set<LanguageCode>& languages) {
  require(size >= 300, "vocab size must be >= 300, got ", size);

  std::map<std::string, std::uint64_t> word_freq;
  std::uint64_t total_bytes = 0;
  for (const auto& text : texts) {
    for (std::string& run : detail::pretokenize(text)) {
      total_bytes += run.size();
      word_freq[std::move(run)] += 1;
    }
  }
  require(total_bytes > 0, "cannot train a vocabulary on an empty corpus");

  struct Word {
    std::vector<int> ids;
    std::uint64_t freq;
  };
  std::vector<Word> words;
  words.reserve(word_freq.size());
  for (const auto& [w, f] : word_freq) {
    words.push_back({detail::bytes_to_ids(w), f});
  }

  std::vector<std::pair<int, int>> merges;
  std::vector<std::string> strings;  // id - kByteTokenBase -> byte string
  for (int b = 0; b < 256; ++b) strings.push_back(std::string(1, char(b)));
  auto str_of = [&](int id) -> const std::string& {
    return strings[static_cast<std::size_t>(id - kByteTokenBase)];
  };

  const int max_merges = size - kBaseVocabSize;
  while (static_cast<int>(merges.size()) < max_merges) {
    std::map<std::pair<int, int>, std::uint64_t> pair_count;
    for (const Word& w : words) {
      for (std::size_t i = 0; i + 1 < w.ids.size(); ++i) {
        pair_count[{w.ids[i], w.ids[i + 1]}] += w.freq;
      }
    }
    bool found = false;
    std::pair<int, int> best{};
    std::uint64_t best_count = 1;  // a pair must repeat to be worth a merge
    std::string best_merged, best_left;
    for (const auto& [p, count] : pair_count) {
      if (count < best_count) continue;
      std::string merged = str_of(p.first) + str_of(p.second);
      if (count > best_count ||
          (found && (merged < best_merged ||
                     (merged == best_merged && str_of(p.first) < best_left)))) {
        best = p;
        best_count = count;
        best_merged = std::move(merged);
        best_left = str_of(p.first);
        found = true;
      }
    }
    if (!found) break;

    const int new_id = kBaseVocabSize + static_cast<int>(merges.size());
    merges.push_back(best);
    strings.push_back(best_merged);
    for (Word& w : words) {
      std::size_t out = 0;
      for (std::size_t i = 0; i < w.ids.size(); ++i) {
        if (i + 1 < w.ids.size() && w.ids[i] == best.first &&
            w.ids[i + 1] == best.second) {
          w.ids[out++] = new_id;
          ++i;
        } else {
          w.ids[out++] = w.ids[i];
        }
      }
      w.ids.resize(out);
    }
  }
  return Vocab(std::move(merges), languages);
}

// Applies merge rules (lowest rank first) to one pre-tokenized run.
inline void apply_merges(const Vocab& vocab, std::vector<int>& ids) {
  for (;;) {
    int best_rank = -1;
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      const int rank = vocab.merge_rank(ids[i], ids[i + 1]);
      if (rank >= 0 && (best_rank < 0 || rank < best_rank)) best_rank = rank;
    }
    if (best_rank < 0) return;
    const auto [l, r] = vocab.merges()[static_cast<std::size_t>(best_rank)];
    const int new_id = kBaseVocabSize + best_rank;
    std::size_t out = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i + 1 < ids.size() && ids[i] == l && ids[i + 1] == r) {
        ids[out++] = new_id;
        ++i;
      } else {
        ids[out++] = ids[i];
      }
    }
    ids.resize(out);
  }
}

inline std::vector<int> encode_subwords(const Vocab& vocab, std::string_view text) {
  std::vector<int> out;
  for (const std::string& run : detail::pretokenize(text)) {
    std::vector<int> ids = detail::bytes_to_ids(run);
    apply_merges(vocab, ids);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

// [CLS] + subwords + [SEP], truncated to max_seq_len with [SEP] kept last.
// Padding is the batcher's job, never done here.
inline TokenSequence encode(const Vocab& vocab, std::string_view text,
                            int max_seq_len) {
  require(max_seq_len >= 2, "max_seq_len must be >= 2, got ", max_seq_len);
  std::vector<int> ids = encode_subwords(vocab, text);
  const std::size_t budget = static_cast<std::size_t>(max_seq_len) - 2;
  if (ids.size() > budget) ids.resize(budget);
  TokenSequence seq;
  seq.ids.reserve(ids.size() + 2);
  seq.ids.push_back(SpecialTokens::cls);
  seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
  seq.ids.push_back(SpecialTokens::sep);
  return seq;
}

// Byte-exact inverse of encode when no truncation occurred.
inline std::string decode(const Vocab& vocab, const TokenSequence& seq) {
  std::string out;
  for (int id : seq.ids) {
    if (Vocab::is_special(id)) continue;
    out += vocab.token_string(id);
  }
  return out;
}

struct MaskedSequence {
  TokenSequence corrupted;
  std::map<std::size_t, int> targets;  // masked position -> original id
};

// BERT-style corruption: each non-special position is selected independently
// with probability `ratio`; selected positions become [MASK] (80%), a random
// non-special token (10%), or stay unchanged (10%).
inline MaskedSequence mask_for_mlm(const TokenSequence& seq, Rng& rng,
                                   int vocab_size, double ratio = 0.15,
                                   double mask_frac = 0.8,
                                   double random_frac = 0.1) {
  require(ratio > 0.0 && ratio < 1.0, "mask ratio must be in (0,1), got ", ratio);
  require(mask_frac >= 0.0 && random_frac >= 0.0 &&
              mask_frac + random_frac <= 1.0,
          "corruption split fractions must be nonnegative and sum to <= 1");
  MaskedSequence out;
  out.corrupted = seq;
  for (std::size_t p = 0; p < seq.ids.size(); ++p) {
    if (Vocab::is_special(seq.ids[p])) continue;
    if (rng.next_unit() >= ratio) continue;
    out.targets[p] = seq.ids[p];
    const double roll = rng.next_unit();
    if (roll < mask_frac) {
      out.corrupted.ids[p] = SpecialTokens::mask;
    } else if (roll < mask_frac + random_frac) {
      out.corrupted.ids[p] =
          kByteTokenBase +
          static_cast<int>(rng.next_below(
              static_cast<std::uint64_t>(vocab_size - kByteTokenBase)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocab file: header, one token per line (byte strings hex-encoded so
// newline bytes cannot corrupt the framing), then merge rules in order.
// ---------------------------------------------------------------------------
inline std::string serialize_vocab(const Vocab& vocab) {
  std::string out = "lexmlc-vocab v1\n";
  out += "size=" + std::to_string(vocab.size()) + "\n";
  out += "specials=[PAD],[UNK],[CLS],[SEP],[MASK]\n";
  std::string langs;
  for (const LanguageCode& l : vocab.languages()) {
    if (!langs.empty()) langs += ",";
    langs += l.code;
  }
  out += "languages=" + langs + "\n";
  out += "tokens:\n";
  static const char* digits = "0123456789abcdef";
  for (int id = kByteTokenBase; id < vocab.size(); ++id) {
    const std::string& s = vocab.token_string(id);
    std::string hex;
    hex.reserve(s.size() * 2);
    for (unsigned char c : s) {
      hex += digits[c >> 4];
      hex += digits[c & 0xf];
    }
    out += hex + "\n";
  }
  out += "merges:\n";
  for (const auto& [l, r] : vocab.merges()) {
    out += std::to_string(l) + " " + std::to_string(r) + "\n";
  }
  return out;
}

inline void write_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_vocab(vocab));
}

inline Vocab load_vocab(const std::filesystem::path& path) {
  const std::vector<std::string> lines = split(read_file(path), '\n');
  require(!lines.empty() && trim(lines[0]) == "lexmlc-vocab v1",
          "not a lexmlc vocab file: ", path.string());
  int declared_size = -1;
  std::set<LanguageCode> languages;
  std::size_t i = 1;
  for (; i < lines.size() && trim(lines[i]) != "tokens:"; ++i) {
    const std::string line = trim(lines[i]);
    if (starts_with(line, "size=")) declared_size = std::stoi(line.substr(5));
    if (starts_with(line, "languages=") && line.size() > 10) {
      for (const std::string& code : split(line.substr(10), ',')) {
        languages.insert(parse_language(code));
      }
    }
  }
  require(i < lines.size(), path.string(), ": missing tokens section");
  for (++i; i < lines.size() && trim(lines[i]) != "merges:"; ++i) {
  }
  require(i < lines.size(), path.string(), ": missing merges section");
  std::vector<std::pair<int, int>> merges;
  for (++i; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty()) continue;
    const std::vector<std::string> cols = split(line, ' ');
    require(cols.size() == 2, path.string(), " line ", i + 1,
            ": expected 'left right' merge rule");
    merges.emplace_back(std::stoi(cols[0]), std::stoi(cols[1]));
  }
  Vocab vocab(std::move(merges), std::move(languages));
  require(declared_size == vocab.size(), path.string(),
          ": header size ", declared_size, " != reconstructed size ",
          vocab.size());
  return vocab;
}

}  // namespace lexmlc
