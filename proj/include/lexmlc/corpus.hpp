#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexmlc/common.hpp"

namespace lexmlc {

struct LanguageCode {
  std::string code;  // two lowercase letters
  auto operator<=>(const LanguageCode&) const = default;
};

inline LanguageCode parse_language(std::string_view s) {
  require(s.size() == 2 && std::islower(static_cast<unsigned char>(s[0])) &&
              std::islower(static_cast<unsigned char>(s[1])),
          "language code must be two lowercase letters, got '", s, "'");
  return LanguageCode{std::string(s)};
}

using LanguageRegistry = std::set<LanguageCode>;

inline LanguageRegistry default_language_registry() {
  return {LanguageCode{"en"}, LanguageCode{"fr"}, LanguageCode{"de"}};
}

enum class Split { train, dev, test, none };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
    case Split::none: return "none";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  if (s == "none") return Split::none;
  fail("unknown split '", s, "' (expected train|dev|test|none)");
}

// One legal text in one language. split == none marks a document that is
// usable for language-model finetuning only.
struct Document {
  std::string celex_id;
  LanguageCode language;
  std::string title;
  std::string body;
  std::set<std::string> labels;
  Split split = Split::none;

  std::string text() const { return title.empty() ? body : title + "\n" + body; }
};

struct SplitCounts {
  std::uint64_t train = 0;
  std::uint64_t dev = 0;
  std::uint64_t test = 0;
  std::uint64_t none = 0;

  std::uint64_t total() const { return train + dev + test + none; }
  std::uint64_t& of(Split s) {
    switch (s) {
      case Split::train: return train;
      case Split::dev: return dev;
      case Split::test: return test;
      case Split::none: return none;
    }
    fail("bad split");
  }
  bool operator==(const SplitCounts&) const = default;
};

class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> documents)
      : documents_(std::move(documents)) {
    recompute();
  }

  const std::vector<Document>& documents() const { return documents_; }
  const std::set<LanguageCode>& languages() const { return languages_; }
  const std::map<LanguageCode, SplitCounts>& split_counts() const {
    return split_counts_;
  }

  SplitCounts counts_for(const LanguageCode& lang) const {
    auto it = split_counts_.find(lang);
    return it == split_counts_.end() ? SplitCounts{} : it->second;
  }

 private:
  void recompute() {
    languages_.clear();
    split_counts_.clear();
    std::set<std::pair<std::string, LanguageCode>> seen;
    for (const Document& d : documents_) {
      require(!d.celex_id.empty(), "document with empty celex_id");
      require(seen.emplace(d.celex_id, d.language).second,
              "duplicate (celex_id, language): ", d.celex_id, ", ",
              d.language.code);
      languages_.insert(d.language);
      split_counts_[d.language].of(d.split) += 1;
    }
  }

  std::vector<Document> documents_;
  std::set<LanguageCode> languages_;
  std::map<LanguageCode, SplitCounts> split_counts_;
};

// Descriptor frequencies over one split of a corpus.
struct LabelStats {
  std::map<std::string, std::uint64_t> frequency;
  std::vector<std::uint64_t> rank_frequency;  // non-increasing
};

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

enum class CorpusFormat { jsonl, jrc_xml };

inline CorpusFormat parse_corpus_format(std::string_view s) {
  if (s == "jsonl") return CorpusFormat::jsonl;
  if (s == "jrc_xml") return CorpusFormat::jrc_xml;
  fail("unknown corpus format '", s, "' (expected jsonl|jrc_xml)");
}

// Optional celex_id -> split sidecar, used by XML ingestion whose source
// format carries no split information.
using SplitMap = std::map<std::string, Split>;

inline SplitMap load_split_map(const std::filesystem::path& path) {
  SplitMap out;
  std::size_t lineno = 0;
  for (const std::string& raw : split(read_file(path), '\n')) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> cols = split(line, '\t');
    require(cols.size() == 2, "split map line ", lineno,
            ": expected 'celex<TAB>split'");
    out[trim(cols[0])] = parse_split(trim(cols[1]));
  }
  return out;
}

namespace detail {

// A labeled record must carry a real split; an unlabeled record must not.
// Silent split assignment is the main threat to zero-shot validity, so both
// violations are rejected at the source.
inline void check_split_rule(const Document& d, bool split_given,
                             const std::string& where) {
  if (d.labels.empty()) {
    require(!split_given || d.split == Split::none, where,
            ": unlabeled record for celex_id ", d.celex_id,
            " carries split=", split_name(d.split));
  } else {
    require(split_given && d.split != Split::none, where,
            ": labeled record for celex_id ", d.celex_id,
            " lacks a train/dev/test split");
  }
}

inline Corpus ingest_jsonl(const std::filesystem::path& path,
                           const LanguageCode& language) {
  std::vector<Document> docs;
  const std::string content = read_file(path);
  std::size_t lineno = 0;
  std::set<std::string> seen;
  for (const std::string& raw : split(content, '\n')) {
    ++lineno;
    if (trim(raw).empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      fail(path.string(), " line ", lineno, ": malformed JSON: ", e.what());
    }
    const std::string where = path.string() + " line " + std::to_string(lineno);
    require(record.is_object(), where, ": record is not an object");
    for (const char* field : {"celex_id", "language", "title", "body"}) {
      require(record.contains(field) && record[field].is_string(), where,
              ": missing or non-string field '", field, "'");
    }
    require(record.contains("labels") && record["labels"].is_array(), where,
            ": missing or non-array field 'labels'");

    Document d;
    d.celex_id = record["celex_id"].get<std::string>();
    require(!d.celex_id.empty(), where, ": empty celex_id");
    d.language = parse_language(record["language"].get<std::string>());
    require(d.language == language, where, ": record language '",
            d.language.code, "' does not match declared language '",
            language.code, "'");
    d.title = record["title"].get<std::string>();
    d.body = record["body"].get<std::string>();
    for (const auto& l : record["labels"]) {
      require(l.is_string(), where, ": non-string label");
      d.labels.insert(l.get<std::string>());
    }
    bool split_given = false;
    if (record.contains("split")) {
      require(record["split"].is_string(), where, ": non-string split");
      d.split = parse_split(record["split"].get<std::string>());
      split_given = true;
    }
    check_split_rule(d, split_given, where);

    require(seen.insert(d.celex_id).second, where,
            ": duplicate celex_id ", d.celex_id);
    docs.push_back(std::move(d));
  }
  return Corpus(std::move(docs));
}

// Minimal scanner for the documented JRC-Acquis TEI subset: a root element
// carrying n="CELEX" and lang attributes, <classCode scheme="eurovoc">
// labels, one <title>, and <p> paragraphs joined by newline.
struct XmlTag {
  std::string name;
  std::map<std::string, std::string> attrs;
  bool closing = false;
  bool self_closing = false;
  std::size_t end = 0;  // offset just past '>'
};

inline std::string xml_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    const std::size_t semi = s.find(';', i);
    const std::string_view ent =
        semi == std::string_view::npos ? std::string_view{} : s.substr(i + 1, semi - i - 1);
    if (ent == "amp") out += '&';
    else if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "quot") out += '"';
    else if (ent == "apos") out += '\'';
    else { out += s[i]; continue; }
    i = semi;
  }
  return out;
}

inline std::optional<XmlTag> next_tag(std::string_view xml, std::size_t from,
                                      const std::string& where) {
  const std::size_t lt = xml.find('<', from);
  if (lt == std::string_view::npos) return std::nullopt;
  const std::size_t gt = xml.find('>', lt);
  require(gt != std::string_view::npos, where, ": unterminated tag");
  std::string_view inner = xml.substr(lt + 1, gt - lt - 1);
  XmlTag tag;
  tag.end = gt + 1;
  if (starts_with(inner, "?") || starts_with(inner, "!")) {
    tag.name = "";  // declaration or comment; callers skip these
    return tag;
  }
  if (starts_with(inner, "/")) {
    tag.closing = true;
    inner.remove_prefix(1);
  }
  if (!inner.empty() && inner.back() == '/') {
    tag.self_closing = true;
    inner.remove_suffix(1);
  }
  std::size_t i = 0;
  while (i < inner.size() && !std::isspace(static_cast<unsigned char>(inner[i]))) ++i;
  tag.name = std::string(inner.substr(0, i));
  while (i < inner.size()) {
    while (i < inner.size() && std::isspace(static_cast<unsigned char>(inner[i]))) ++i;
    if (i >= inner.size()) break;
    const std::size_t eq = inner.find('=', i);
    require(eq != std::string_view::npos, where, ": malformed attribute in <",
            tag.name, ">");
    const std::string key = trim(inner.substr(i, eq - i));
    std::size_t vstart = eq + 1;
    while (vstart < inner.size() &&
           std::isspace(static_cast<unsigned char>(inner[vstart]))) ++vstart;
    require(vstart < inner.size() && inner[vstart] == '"', where,
            ": attribute '", key, "' is not quoted");
    const std::size_t vend = inner.find('"', vstart + 1);
    require(vend != std::string_view::npos, where, ": unterminated attribute '",
            key, "'");
    tag.attrs[key] = xml_unescape(inner.substr(vstart + 1, vend - vstart - 1));
    i = vend + 1;
  }
  return tag;
}

// Text content between a tag and its matching close tag (no nesting of the
// same element expected in this subset).
inline std::string element_text(std::string_view xml, std::size_t content_start,
                                const std::string& name, const std::string& where) {
  const std::string close = "</" + name;
  const std::size_t end = xml.find(close, content_start);
  require(end != std::string_view::npos, where, ": missing </", name, ">");
  return xml_unescape(trim(xml.substr(content_start, end - content_start)));
}

inline Document parse_jrc_xml(std::string_view xml, const LanguageCode& language,
                              const std::string& where) {
  Document d;
  std::size_t pos = 0;
  bool root_seen = false;
  std::vector<std::string> paragraphs;
  while (auto tag = next_tag(xml, pos, where)) {
    const std::size_t content_start = tag->end;
    pos = tag->end;
    if (tag->name.empty() || tag->closing) continue;
    if (!root_seen) {
      require(tag->attrs.count("n") > 0, where,
              ": root element <", tag->name, "> lacks the n=\"CELEX\" attribute");
      d.celex_id = tag->attrs.at("n");
      require(!d.celex_id.empty(), where, ": empty celex attribute");
      if (tag->attrs.count("lang") > 0) {
        require(parse_language(tag->attrs.at("lang")) == language, where,
                ": document lang '", tag->attrs.at("lang"),
                "' does not match declared language '", language.code, "'");
      }
      root_seen = true;
      continue;
    }
    if (tag->self_closing) continue;
    if (tag->name == "title" && d.title.empty()) {
      d.title = element_text(xml, content_start, "title", where);
    } else if (tag->name == "classCode") {
      auto scheme = tag->attrs.find("scheme");
      if (scheme != tag->attrs.end() && scheme->second == "eurovoc") {
        const std::string id = element_text(xml, content_start, "classCode", where);
        require(!id.empty(), where, ": empty eurovoc classCode");
        d.labels.insert(id);
      }
    } else if (tag->name == "p") {
      paragraphs.push_back(element_text(xml, content_start, "p", where));
    }
  }
  require(root_seen, where, ": no root element found");
  d.language = language;
  std::string body;
  for (std::size_t i = 0; i < paragraphs.size(); ++i) {
    if (i > 0) body += "\n";
    body += paragraphs[i];
  }
  d.body = std::move(body);
  return d;
}

inline Corpus ingest_jrc_xml(const std::filesystem::path& path,
                             const LanguageCode& language,
                             const SplitMap& splits) {
  // One document per file; a directory ingests every *.xml inside it.
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.path().extension() == ".xml") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  require(!files.empty(), "no .xml files under ", path.string());
  std::vector<Document> docs;
  std::set<std::string> seen;
  for (const auto& file : files) {
    Document d = parse_jrc_xml(read_file(file), language, file.string());
    const auto it = splits.find(d.celex_id);
    const bool split_given = it != splits.end();
    if (split_given) d.split = it->second;
    check_split_rule(d, split_given, file.string());
    require(seen.insert(d.celex_id).second, file.string(),
            ": duplicate celex_id ", d.celex_id);
    docs.push_back(std::move(d));
  }
  return Corpus(std::move(docs));
}

}  // namespace detail

inline Corpus ingest(const std::filesystem::path& path,
                     const LanguageCode& language, CorpusFormat format,
                     const SplitMap& splits = {},
                     const LanguageRegistry& registry = default_language_registry()) {
  require(registry.count(language) > 0, "language '", language.code,
          "' is not in the configured registry");
  switch (format) {
    case CorpusFormat::jsonl:
      return detail::ingest_jsonl(path, language);
    case CorpusFormat::jrc_xml:
      return detail::ingest_jrc_xml(path, language, splits);
  }
  fail("bad corpus format");
}

// Normalized corpus serialization: one record per line with canonical key
// order (celex_id, language, title, body, labels ascending, split), so
// export -> ingest -> export is byte-identical.
inline std::string export_jsonl(const Corpus& corpus) {
  std::string out;
  for (const Document& d : corpus.documents()) {
    nlohmann::ordered_json record;
    record["celex_id"] = d.celex_id;
    record["language"] = d.language.code;
    record["title"] = d.title;
    record["body"] = d.body;
    record["labels"] = std::vector<std::string>(d.labels.begin(), d.labels.end());
    record["split"] = split_name(d.split);
    out += record.dump();
    out += "\n";
  }
  return out;
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, export_jsonl(corpus));
}

// ---------------------------------------------------------------------------
// Split assignment across parallel corpora
// ---------------------------------------------------------------------------

// Copies the anchor language's splits onto every parallel document (matched
// by celex_id). Labeled documents missing from the anchor fall back to
// split=none; unlabeled documents always stay none.
inline std::vector<Corpus> assign_parallel_splits(
    const std::vector<Corpus>& corpora, const LanguageCode& anchor) {
  const Corpus* anchor_corpus = nullptr;
  for (const Corpus& c : corpora) {
    if (c.languages().count(anchor) > 0) {
      require(anchor_corpus == nullptr,
              "anchor language '", anchor.code,
              "' appears in more than one corpus");
      anchor_corpus = &c;
    }
  }
  require(anchor_corpus != nullptr, "anchor language '", anchor.code,
          "' missing from input corpora");

  std::map<std::string, Split> anchor_split;
  for (const Document& d : anchor_corpus->documents()) {
    if (d.language != anchor) continue;
    if (!d.labels.empty()) {
      require(d.split != Split::none, "anchor document ", d.celex_id,
              " is labeled but has no split");
    }
    anchor_split[d.celex_id] = d.split;
  }

  std::vector<Corpus> out;
  out.reserve(corpora.size());
  for (const Corpus& c : corpora) {
    std::vector<Document> docs = c.documents();
    for (Document& d : docs) {
      if (d.language == anchor) continue;
      if (d.labels.empty()) {
        d.split = Split::none;
        continue;
      }
      const auto it = anchor_split.find(d.celex_id);
      d.split = it == anchor_split.end() ? Split::none : it->second;
    }
    out.emplace_back(std::move(docs));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregations
// ---------------------------------------------------------------------------

inline LabelStats label_stats(const Corpus& corpus, Split split) {
  require(split != Split::none,
          "label_stats: split must be one of train/dev/test");
  LabelStats stats;
  for (const Document& d : corpus.documents()) {
    if (d.split != split) continue;
    for (const std::string& label : d.labels) {
      stats.frequency[label] += 1;
    }
  }
  for (const auto& [label, count] : stats.frequency) {
    stats.rank_frequency.push_back(count);
  }
  std::sort(stats.rank_frequency.begin(), stats.rank_frequency.end(),
            std::greater<>());
  return stats;
}

// Union of split=train and split=none documents in the requested languages:
// the language-model finetuning pool. Never touches dev or test.
inline std::vector<Document> lmft_pool(const std::vector<Corpus>& corpora,
                                       const std::set<LanguageCode>& languages) {
  for (const LanguageCode& lang : languages) {
    bool found = false;
    for (const Corpus& c : corpora) {
      found = found || c.languages().count(lang) > 0;
    }
    require(found, "lmft_pool: language '", lang.code,
            "' not present in any corpus");
  }
  std::vector<Document> pool;
  for (const Corpus& c : corpora) {
    for (const Document& d : c.documents()) {
      if (languages.count(d.language) == 0) continue;
      if (d.split == Split::train || d.split == Split::none) {
        pool.push_back(d);
      }
    }
  }
  return pool;
}

// Split-count table, one row per language (uppercased), in the layout used
// for corpus statistics reporting.
inline std::string format_split_table(const std::vector<Corpus>& corpora) {
  std::string out = "Language train dev test none total\n";
  for (const Corpus& corpus : corpora) {
    for (const LanguageCode& lang : corpus.languages()) {
      const SplitCounts c = corpus.counts_for(lang);
      std::string code = lang.code;
      for (char& ch : code) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      out += code + " " + std::to_string(c.train) + " " + std::to_string(c.dev) +
             " " + std::to_string(c.test) + " " + std::to_string(c.none) + " " +
             std::to_string(c.total()) + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Audited read access, used by training so transfer-scheme isolation is
// checkable: every document handed out is counted under (language, split).
// ---------------------------------------------------------------------------
class CorpusSet {
 public:
  explicit CorpusSet(std::vector<Corpus> corpora)
      : corpora_(std::move(corpora)) {}

  std::set<LanguageCode> languages() const {
    std::set<LanguageCode> out;
    for (const Corpus& c : corpora_) {
      out.insert(c.languages().begin(), c.languages().end());
    }
    return out;
  }

  // Reads (and counts) every document of one language and split.
  std::vector<const Document*> read(const LanguageCode& lang, Split split) const {
    std::vector<const Document*> out;
    for (const Corpus& c : corpora_) {
      for (const Document& d : c.documents()) {
        if (d.language == lang && d.split == split) out.push_back(&d);
      }
    }
    audit_[{lang, split}] += out.size();
    return out;
  }

  bool has_any(const LanguageCode& lang, Split split) const {
    for (const Corpus& c : corpora_) {
      auto it = c.split_counts().find(lang);
      if (it == c.split_counts().end()) continue;
      SplitCounts counts = it->second;
      if (counts.of(split) > 0) return true;
    }
    return false;
  }

  std::uint64_t reads(const LanguageCode& lang, Split split) const {
    auto it = audit_.find({lang, split});
    return it == audit_.end() ? 0 : it->second;
  }

  const std::vector<Corpus>& corpora() const { return corpora_; }

 private:
  std::vector<Corpus> corpora_;
  mutable std::map<std::pair<LanguageCode, Split>, std::uint64_t> audit_;
};

}  // namespace lexmlc
