#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lexmlc {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

template <typename... Args>
[[noreturn]] void fail(Args&&... parts) {
  std::ostringstream oss;
  (oss << ... << parts);
  throw Error(oss.str());
}

template <typename... Args>
void require(bool cond, Args&&... parts) {
  if (!cond) {
    fail(std::forward<Args>(parts)...);
  }
}

// ---------------------------------------------------------------------------
// Deterministic randomness. std::mt19937_64 is bit-exact by definition; the
// distribution helpers below are hand-rolled because the standard library's
// distributions are implementation-defined.
// ---------------------------------------------------------------------------
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Unbiased integer in [0, n), n > 0.
  std::uint64_t next_below(std::uint64_t n) {
    require(n > 0, "next_below: n must be positive");
    const std::uint64_t limit = n * (UINT64_MAX / n);
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x < limit) {
        return x % n;
      }
    }
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_below(i)]);
    }
  }

  // Independent stream derived from this one; stable under call order.
  Rng fork(std::uint64_t stream) {
    std::uint64_t s = next_u64();
    s ^= 0x9e3779b97f4a7c15ULL * (stream + 1);
    return Rng(s);
  }

 private:
  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// FNV-1a, used for content fingerprints in manifests and reports.
// ---------------------------------------------------------------------------
inline std::uint64_t fnv1a(std::string_view data,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Small string helpers.
// ---------------------------------------------------------------------------
inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

// ---------------------------------------------------------------------------
// File helpers. Writes go through a temp file + rename so partially written
// artifacts are never observed.
// ---------------------------------------------------------------------------
inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: ", path.string());
  std::ostringstream oss;
  oss << in.rdbuf();
  return oss.str();
}

inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot write file: ", tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    require(out.good(), "short write: ", tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::uint64_t file_fingerprint(const std::filesystem::path& path) {
  return fnv1a(read_file(path));
}

// ---------------------------------------------------------------------------
// Flat key=value config files ('#' starts a comment, blank lines ignored).
// ---------------------------------------------------------------------------
using KeyValueConfig = std::map<std::string, std::string>;

inline KeyValueConfig parse_key_values(std::string_view text) {
  KeyValueConfig out;
  std::size_t lineno = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, "config line ", lineno,
            ": expected key=value, got '", line, "'");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

inline KeyValueConfig load_key_values(const std::filesystem::path& path) {
  return parse_key_values(read_file(path));
}

inline std::string dump_key_values(const KeyValueConfig& kv) {
  std::ostringstream oss;
  for (const auto& [k, v] : kv) {
    oss << k << "=" << v << "\n";
  }
  return oss.str();
}

}  // namespace lexmlc
