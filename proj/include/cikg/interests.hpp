#pragma once

// User-interest pipeline: prompt rendering, LLM completion (live HTTP or
// fixture file), completion parsing, and tf-idf + k-means clustering of the
// collected phrases into canonical interests.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cikg/common.hpp"
#include "cikg/data.hpp"

namespace cikg {

enum class PhraseSource : uint8_t { llm = 0, fixture = 1 };

struct InterestCorpus {
  // Indexed by dense user id; phrases are trimmed and non-empty.
  std::vector<std::vector<std::string>> per_user;
  std::vector<PhraseSource> source;             // per user
  std::map<int, std::string> failures;          // user -> transport error after retries
  std::vector<std::string> warnings;            // unparseable completions etc.

  size_t n_phrases() const {
    size_t n = 0;
    for (const auto& v : per_user) n += v.size();
    return n;
  }
};

struct PromptTemplate {
  std::string system_text;
  // Placeholders: {history} expands to one "- <title>" line per item,
  // {max_interests} to the phrase budget.
  std::string user_text_template;
};

PromptTemplate default_prompt_template();

// Renders the user text for one user. Keeps at most `budget` most recent
// titles (the tail of the history). Throws ConfigError on an empty history.
std::string render_prompt(const PromptTemplate& tmpl, const std::vector<std::string>& history,
                          int max_interests, int budget);

// Extracts interest phrases from a completion: a JSON string array if the
// content parses as one, otherwise one phrase per line with list bullets and
// numbering stripped.
std::vector<std::string> parse_interest_completion(const std::string& content);

struct LlmResult {
  bool ok = false;
  std::string content;
  std::string error;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual LlmResult complete(const std::string& system_text, const std::string& user_text) = 0;
};

struct LlmOptions {
  std::string endpoint_url;  // full URL including path
  std::string model = "gpt-3.5-turbo-0125";
  std::string api_key;       // empty -> no Authorization header
  double temperature = 0.0;
  int max_retries = 3;
  int backoff_ms = 250;      // doubled per retry
  int timeout_s = 60;
};

// OpenAI-style chat-completions client over cpp-httplib with exponential
// backoff on transport errors and HTTP 5xx/429.
std::unique_ptr<LlmClient> make_http_llm_client(const LlmOptions& options);

struct PromptBatchEntry {
  int user = -1;
  std::string user_raw;
  std::string prompt;
};

// One completion per entry with bounded concurrency; per-user failures are
// recorded and do not abort the batch.
InterestCorpus infer_interests(LlmClient& client, const std::string& system_text,
                               const std::vector<PromptBatchEntry>& batch, int n_users,
                               int parallelism);

// Fixture mode: JSON Lines of {"user": raw_id, "interests": [...]}. Users
// absent from the file get an empty list; unknown raw ids are ignored with a
// warning.
InterestCorpus load_fixture_interests(const std::string& path, const InteractionSet& ix);

void write_interest_corpus(const InterestCorpus& corpus, const InteractionSet& ix,
                           const std::string& path);

struct InterestAssignment {
  int kappa = 0;                                // clusters after clamping
  std::vector<std::string> representative;      // per cluster
  std::vector<std::vector<int>> membership;     // per user, sorted unique cluster ids
  std::unordered_map<std::string, int> phrase_cluster;  // distinct phrase -> cluster
  std::vector<std::string> warnings;

  size_t n_membership_edges() const {
    size_t n = 0;
    for (const auto& v : membership) n += v.size();
    return n;
  }
};

// tf-idf over lowercase alphanumeric unigrams (length >= 2), L2-normalized,
// clustered by seeded k-means++ with spherical updates. kappa is clamped to
// the number of distinct phrases (with a warning) when it exceeds it.
InterestAssignment cluster_interests(const InterestCorpus& corpus, int kappa, uint64_t seed);

void write_interest_assignment(const InterestAssignment& assignment, const InteractionSet& ix,
                               const std::string& clusters_path, const std::string& memberships_path);

// Reads the two TSVs written above back into an assignment.
InterestAssignment load_interest_assignment(const std::string& clusters_path,
                                            const std::string& memberships_path,
                                            const InteractionSet& ix);

}  // namespace cikg
