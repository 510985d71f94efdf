#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cikg {

// Error taxonomy shared by the C API and the CLI exit codes.
enum class ErrorCode : int {
  generic = 1,
  config = 2,
  data = 3,
  numeric = 4,
  llm = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(ErrorCode::config, msg) {}
};
struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(ErrorCode::data, msg) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(ErrorCode::numeric, msg) {}
};
struct LlmError : Error {
  explicit LlmError(const std::string& msg) : Error(ErrorCode::llm, msg) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG plumbing. Every stochastic component draws from its own
// stream derived from (seed, purpose tag, epoch/step), so adding or removing
// one consumer never shifts another's randomness.

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t sub_seed(uint64_t seed, uint64_t tag, uint64_t a = 0, uint64_t b = 0) {
  uint64_t h = splitmix64(seed ^ 0x2545f4914f6cdd1dULL);
  h = splitmix64(h ^ splitmix64(tag));
  h = splitmix64(h ^ splitmix64(a));
  h = splitmix64(h ^ splitmix64(b));
  return h;
}

namespace seed_tag {
constexpr uint64_t init = 1;
constexpr uint64_t split = 2;
constexpr uint64_t bpr = 3;
constexpr uint64_t mask = 4;
constexpr uint64_t noise = 5;
constexpr uint64_t kg_neg = 6;
constexpr uint64_t synth = 7;
constexpr uint64_t cluster = 8;
constexpr uint64_t probe = 9;
}  // namespace seed_tag

// xoshiro-free minimal generator: std::mt19937_64 seeded via splitmix.
// Bounded draws are hand-rolled (rejection sampling) so sampled indices do
// not depend on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : s_(splitmix64(seed)) {}

  uint64_t next_u64() {
    s_ = splitmix64(s_ + 0x9e3779b97f4a7c15ULL);
    return s_;
  }

  // Uniform integer in [0, n), n >= 1.
  size_t next_index(size_t n) {
    const uint64_t span = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return static_cast<size_t>(v % span);
  }

  // Uniform double in [0, 1) with 53 bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Marsaglia polar, deterministic given the stream.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_index(i)]);
    }
  }

 private:
  uint64_t s_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Small string helpers for the TSV ingestion paths.

inline std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r' || s[a] == '\n')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r' || s[b - 1] == '\n')) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string to_lower(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

}  // namespace cikg
