#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lexmlc/common.hpp"
#include "lexmlc/corpus.hpp"

namespace lexmlc {

struct Descriptor {
  std::string id;
  std::map<LanguageCode, std::string> pref_label;
  std::set<std::string> micro_thesauri;
  std::set<std::string> broader;
  std::set<std::string> related;
  std::set<std::string> used_for;
  std::optional<std::string> replaced_by;

  bool active() const { return !replaced_by.has_value(); }
};

struct MicroThesaurus {
  std::string label;
  std::string domain;
};

// The EuroVoc descriptor graph: descriptors attach to micro-thesauri, which
// belong to domains; broader edges between descriptors form a DAG.
class DescriptorGraph {
 public:
  std::map<std::string, Descriptor> descriptors;
  std::map<std::string, MicroThesaurus> micro_thesauri;
  std::map<std::string, std::string> domains;  // id -> label
  std::map<std::string, std::uint64_t> ignored_predicates;

  bool has_descriptor(const std::string& id) const {
    return descriptors.count(id) > 0;
  }

  // Follows replacement pointers to the surviving descriptor.
  std::string resolve(std::string id) const {
    std::set<std::string> visited;
    for (;;) {
      auto it = descriptors.find(id);
      require(it != descriptors.end(), "unknown descriptor '", id, "'");
      if (!it->second.replaced_by) return id;
      require(visited.insert(id).second,
              "replacement cycle involving descriptor '", id, "'");
      id = *it->second.replaced_by;
    }
  }
};

// ---------------------------------------------------------------------------
// Thesaurus file: UTF-8, one subject<TAB>predicate<TAB>object triple per
// line, '#' comments. Predicates:
//   type        object in {descriptor, micro_thesaurus, domain}
//   prefLabel   literal, optionally language-tagged as "text@xx"
//   broader     descriptor -> descriptor
//   related     descriptor -> descriptor
//   usedFor     descriptor -> literal   (altLabel accepted as an alias)
//   inScheme    descriptor -> micro-thesaurus
//   inDomain    micro-thesaurus -> domain
//   replacedBy  descriptor -> descriptor
// Unknown predicates are ignored with a counted warning.
// ---------------------------------------------------------------------------
inline DescriptorGraph parse_thesaurus(const std::filesystem::path& path) {
  DescriptorGraph graph;
  struct Triple {
    std::size_t lineno;
    std::string subject, predicate, object;
  };
  std::vector<Triple> edges;  // checked after all declarations are known

  std::size_t lineno = 0;
  for (const std::string& raw : split(read_file(path), '\n')) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> cols = split(line, '\t');
    require(cols.size() == 3, path.string(), " line ", lineno,
            ": expected subject<TAB>predicate<TAB>object");
    const std::string subject = trim(cols[0]);
    const std::string predicate = trim(cols[1]);
    const std::string object = trim(cols[2]);
    require(!subject.empty() && !object.empty(), path.string(), " line ",
            lineno, ": empty subject or object");

    if (predicate == "type") {
      if (object == "descriptor") {
        graph.descriptors[subject].id = subject;
      } else if (object == "micro_thesaurus") {
        graph.micro_thesauri[subject];
      } else if (object == "domain") {
        graph.domains[subject];
      } else {
        fail(path.string(), " line ", lineno, ": unknown type '", object, "'");
      }
    } else if (predicate == "prefLabel" || predicate == "broader" ||
               predicate == "related" || predicate == "usedFor" ||
               predicate == "altLabel" || predicate == "inScheme" ||
               predicate == "inDomain" || predicate == "replacedBy") {
      edges.push_back({lineno, subject, predicate, object});
    } else {
      graph.ignored_predicates[predicate] += 1;
    }
  }

  std::vector<std::string> dangling;
  auto descriptor_of = [&](const Triple& t) -> Descriptor* {
    auto it = graph.descriptors.find(t.subject);
    if (it == graph.descriptors.end()) {
      dangling.push_back("line " + std::to_string(t.lineno) + ": " + t.subject +
                         " " + t.predicate + " " + t.object);
      return nullptr;
    }
    return &it->second;
  };
  auto check_descriptor_object = [&](const Triple& t) {
    if (!graph.has_descriptor(t.object)) {
      dangling.push_back("line " + std::to_string(t.lineno) + ": " + t.subject +
                         " " + t.predicate + " " + t.object);
      return false;
    }
    return true;
  };

  for (const Triple& t : edges) {
    if (t.predicate == "prefLabel") {
      const std::size_t at = t.object.rfind('@');
      if (graph.micro_thesauri.count(t.subject) > 0) {
        graph.micro_thesauri[t.subject].label =
            at == std::string::npos ? t.object : t.object.substr(0, at);
      } else if (graph.domains.count(t.subject) > 0) {
        graph.domains[t.subject] =
            at == std::string::npos ? t.object : t.object.substr(0, at);
      } else if (Descriptor* d = descriptor_of(t)) {
        require(at != std::string::npos && at + 3 == t.object.size(),
                path.string(), " line ", t.lineno,
                ": descriptor prefLabel must be language-tagged as text@xx");
        d->pref_label[parse_language(t.object.substr(at + 1))] =
            t.object.substr(0, at);
      }
    } else if (t.predicate == "broader") {
      if (Descriptor* d = descriptor_of(t)) {
        if (check_descriptor_object(t)) d->broader.insert(t.object);
      }
    } else if (t.predicate == "related") {
      if (Descriptor* d = descriptor_of(t)) {
        if (check_descriptor_object(t)) d->related.insert(t.object);
      }
    } else if (t.predicate == "usedFor" || t.predicate == "altLabel") {
      if (Descriptor* d = descriptor_of(t)) d->used_for.insert(t.object);
    } else if (t.predicate == "inScheme") {
      if (Descriptor* d = descriptor_of(t)) {
        if (graph.micro_thesauri.count(t.object) > 0) {
          d->micro_thesauri.insert(t.object);
        } else {
          dangling.push_back("line " + std::to_string(t.lineno) + ": " +
                             t.subject + " " + t.predicate + " " + t.object);
        }
      }
    } else if (t.predicate == "inDomain") {
      auto it = graph.micro_thesauri.find(t.subject);
      if (it == graph.micro_thesauri.end() ||
          graph.domains.count(t.object) == 0) {
        dangling.push_back("line " + std::to_string(t.lineno) + ": " +
                           t.subject + " " + t.predicate + " " + t.object);
      } else {
        it->second.domain = t.object;
      }
    } else if (t.predicate == "replacedBy") {
      if (Descriptor* d = descriptor_of(t)) {
        if (check_descriptor_object(t)) {
          require(!d->replaced_by, path.string(), " line ", t.lineno,
                  ": descriptor '", t.subject, "' replaced twice");
          d->replaced_by = t.object;
        }
      }
    }
  }

  if (!dangling.empty()) {
    std::string msg = "dangling edge endpoints in " + path.string() + ":";
    for (std::size_t i = 0; i < dangling.size() && i < 10; ++i) {
      msg += "\n  " + dangling[i];
    }
    if (dangling.size() > 10) {
      msg += "\n  ... and " + std::to_string(dangling.size() - 10) + " more";
    }
    throw Error(msg);
  }

  // broader must be acyclic; report one cycle when it is not.
  {
    std::map<std::string, int> state;  // 0 new, 1 on stack, 2 done
    std::vector<std::string> stack;
    auto dfs = [&](auto&& self, const std::string& id) -> void {
      state[id] = 1;
      stack.push_back(id);
      for (const std::string& up : graph.descriptors.at(id).broader) {
        const int s = state.count(up) ? state.at(up) : 0;
        if (s == 1) {
          std::string cycle = up;
          for (auto it = std::find(stack.begin(), stack.end(), up);
               it != stack.end(); ++it) {
            if (*it != up) cycle += " -> " + *it;
          }
          cycle += " -> " + up;
          fail("broader cycle: ", cycle);
        }
        if (s == 0) self(self, up);
      }
      stack.pop_back();
      state[id] = 2;
    };
    for (const auto& [id, d] : graph.descriptors) {
      if (!state.count(id)) dfs(dfs, id);
    }
  }

  for (const auto& [id, d] : graph.descriptors) {
    require(!d.active() || !d.micro_thesauri.empty(),
            "descriptor '", id, "' belongs to no micro-thesaurus");
  }
  for (const auto& [id, mt] : graph.micro_thesauri) {
    require(!mt.domain.empty(), "micro-thesaurus '", id,
            "' references no domain");
  }
  return graph;
}

// ---------------------------------------------------------------------------
// Label index: the contiguous, lexicographically ordered mapping between
// observed descriptor IDs and classifier output positions.
// ---------------------------------------------------------------------------
struct LabelIndex {
  std::map<std::string, std::size_t> id_to_index;
  std::vector<std::string> index_to_id;

  std::size_t size() const { return index_to_id.size(); }

  std::size_t index_of(const std::string& id) const {
    auto it = id_to_index.find(id);
    require(it != id_to_index.end(), "descriptor '", id,
            "' is not in the label index");
    return it->second;
  }
};

// Replaced descriptors are resolved to their replacement before indexing;
// IDs must exist in the graph.
inline LabelIndex build_label_index(const DescriptorGraph& graph,
                                    const std::set<std::string>& observed) {
  std::set<std::string> resolved;
  for (const std::string& id : observed) {
    require(graph.has_descriptor(id),
            "observed label '", id, "' is not in the descriptor graph");
    resolved.insert(graph.resolve(id));
  }
  LabelIndex index;
  index.index_to_id.assign(resolved.begin(), resolved.end());  // sorted set
  for (std::size_t i = 0; i < index.index_to_id.size(); ++i) {
    index.id_to_index[index.index_to_id[i]] = i;
  }
  return index;
}

inline std::string serialize_label_index(const LabelIndex& index) {
  std::string out = std::to_string(index.size()) + "\n";
  for (std::size_t i = 0; i < index.size(); ++i) {
    out += index.index_to_id[i] + "\t" + std::to_string(i) + "\n";
  }
  return out;
}

inline void write_label_index(const LabelIndex& index,
                              const std::filesystem::path& path) {
  write_file_atomic(path, serialize_label_index(index));
}

inline LabelIndex load_label_index(const std::filesystem::path& path) {
  const std::vector<std::string> lines = split(read_file(path), '\n');
  require(!lines.empty(), "empty label index file: ", path.string());
  const std::size_t count = std::stoull(trim(lines[0]));
  LabelIndex index;
  index.index_to_id.resize(count);
  std::size_t seen = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::vector<std::string> cols = split(lines[i], '\t');
    require(cols.size() == 2, path.string(), " line ", i + 1,
            ": expected descriptor_id<TAB>index");
    const std::size_t idx = std::stoull(cols[1]);
    require(idx < count, path.string(), " line ", i + 1, ": index out of range");
    index.index_to_id[idx] = cols[0];
    ++seen;
  }
  require(seen == count, path.string(), ": header says ", count,
          " labels but found ", seen);
  for (std::size_t i = 0; i < count; ++i) {
    index.id_to_index[index.index_to_id[i]] = i;
  }
  require(index.id_to_index.size() == count, path.string(),
          ": duplicate descriptor IDs");
  return index;
}

// labels plus all transitive broader ancestors. Analysis utility only;
// training always targets the assigned descriptors.
inline std::set<std::string> expand_ancestors(const DescriptorGraph& graph,
                                              const std::set<std::string>& labels) {
  std::set<std::string> out;
  std::vector<std::string> frontier(labels.begin(), labels.end());
  while (!frontier.empty()) {
    const std::string id = frontier.back();
    frontier.pop_back();
    require(graph.has_descriptor(id), "unknown descriptor '", id, "'");
    if (!out.insert(id).second) continue;
    const Descriptor& d = graph.descriptors.at(id);
    frontier.insert(frontier.end(), d.broader.begin(), d.broader.end());
  }
  return out;
}

}  // namespace lexmlc
