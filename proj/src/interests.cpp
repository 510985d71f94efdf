#include "cikg/interests.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace cikg {

PromptTemplate default_prompt_template() {
  PromptTemplate t;
  t.system_text =
      "You analyze a reader's history and summarize their interests as short, "
      "reusable phrases.";
  t.user_text_template =
      "A user has interacted with the following items, oldest first:\n"
      "{history}\n"
      "List up to {max_interests} short phrases describing this user's interests, "
      "one per line. Reply with the phrases only.";
  return t;
}

namespace {

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

}  // namespace

std::string render_prompt(const PromptTemplate& tmpl, const std::vector<std::string>& history,
                          int max_interests, int budget) {
  if (history.empty()) throw ConfigError("render_prompt: empty history");
  const size_t keep = budget > 0 ? std::min<size_t>(history.size(), static_cast<size_t>(budget))
                                 : history.size();
  std::ostringstream lines;
  for (size_t i = history.size() - keep; i < history.size(); ++i) {
    lines << "- " << history[i];
    if (i + 1 < history.size()) lines << '\n';
  }
  std::string text = replace_all(tmpl.user_text_template, "{history}", lines.str());
  return replace_all(text, "{max_interests}", std::to_string(max_interests));
}

std::vector<std::string> parse_interest_completion(const std::string& content) {
  std::vector<std::string> phrases;
  auto push = [&phrases](const std::string& raw) {
    std::string p = trim(raw);
    if (!p.empty()) phrases.push_back(p);
  };

  // JSON array form, either the whole content or embedded in surrounding text.
  auto try_array = [&push](const std::string& text) {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (!j.is_array()) return false;
    bool any = false;
    for (const auto& item : j) {
      if (item.is_string()) {
        push(item.get<std::string>());
        any = true;
      }
    }
    return any;
  };
  if (try_array(content)) return phrases;
  const size_t lb = content.find('[');
  const size_t rb = content.rfind(']');
  if (lb != std::string::npos && rb != std::string::npos && rb > lb) {
    if (try_array(content.substr(lb, rb - lb + 1))) return phrases;
  }

  // Line form: strip bullets ("-", "*", "+") and "1." / "1)" numbering.
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    std::string s = trim(line);
    if (s.empty()) continue;
    if (s[0] == '-' || s[0] == '*' || s[0] == '+') {
      s = trim(s.substr(1));
    } else {
      size_t d = 0;
      while (d < s.size() && s[d] >= '0' && s[d] <= '9') ++d;
      if (d > 0 && d < s.size() && (s[d] == '.' || s[d] == ')')) s = trim(s.substr(d + 1));
    }
    push(s);
  }
  return phrases;
}

namespace {

struct ParsedUrl {
  bool https = false;
  std::string host;
  int port = 80;
  std::string path = "/";
};

ParsedUrl parse_url(const std::string& url) {
  ParsedUrl p;
  std::string rest = url;
  if (rest.rfind("https://", 0) == 0) {
    p.https = true;
    p.port = 443;
    rest = rest.substr(8);
  } else if (rest.rfind("http://", 0) == 0) {
    rest = rest.substr(7);
  } else {
    throw ConfigError("llm.endpoint_url must start with http:// or https://");
  }
  size_t slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  if (slash != std::string::npos) p.path = rest.substr(slash);
  size_t colon = hostport.find(':');
  if (colon != std::string::npos) {
    p.host = hostport.substr(0, colon);
    p.port = std::stoi(hostport.substr(colon + 1));
  } else {
    p.host = hostport;
  }
  if (p.host.empty()) throw ConfigError("llm.endpoint_url has no host");
  return p;
}

class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(const LlmOptions& opt) : opt_(opt), url_(parse_url(opt.endpoint_url)) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url_.https) throw ConfigError("https endpoints require an SSL-enabled build");
#endif
  }

  LlmResult complete(const std::string& system_text, const std::string& user_text) override {
    nlohmann::json body = {
        {"model", opt_.model},
        {"temperature", opt_.temperature},
        {"messages",
         {{{"role", "system"}, {"content", system_text}},
          {{"role", "user"}, {"content", user_text}}}},
    };
    const std::string payload = body.dump();

    LlmResult out;
    int backoff = opt_.backoff_ms;
    for (int attempt = 0; attempt <= opt_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
      }
      auto res = post(payload);
      if (!res) {
        out.error = "transport error";
        continue;
      }
      if (res->status >= 500 || res->status == 429) {
        out.error = "http status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        out.error = "http status " + std::to_string(res->status);
        return out;  // 4xx other than 429: retrying will not help
      }
      auto j = nlohmann::json::parse(res->body, nullptr, false);
      if (j.is_discarded() || !j.contains("choices") || j["choices"].empty() ||
          !j["choices"][0].contains("message")) {
        out.error = "malformed completion response";
        return out;
      }
      out.ok = true;
      out.content = j["choices"][0]["message"].value("content", "");
      return out;
    }
    return out;
  }

 private:
  httplib::Result post(const std::string& payload) {
    httplib::Headers headers;
    if (!opt_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opt_.api_key);
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url_.https) {
      httplib::SSLClient cli(url_.host, url_.port);
      cli.set_read_timeout(opt_.timeout_s, 0);
      cli.set_connection_timeout(opt_.timeout_s, 0);
      return cli.Post(url_.path, headers, payload, "application/json");
    }
#endif
    httplib::Client cli(url_.host, url_.port);
    cli.set_read_timeout(opt_.timeout_s, 0);
    cli.set_connection_timeout(opt_.timeout_s, 0);
    return cli.Post(url_.path, headers, payload, "application/json");
  }

  LlmOptions opt_;
  ParsedUrl url_;
};

}  // namespace

std::unique_ptr<LlmClient> make_http_llm_client(const LlmOptions& options) {
  return std::make_unique<HttpLlmClient>(options);
}

InterestCorpus infer_interests(LlmClient& client, const std::string& system_text,
                               const std::vector<PromptBatchEntry>& batch, int n_users,
                               int parallelism) {
  InterestCorpus corpus;
  corpus.per_user.assign(n_users, {});
  corpus.source.assign(n_users, PhraseSource::llm);

  std::mutex mu;
  std::atomic<size_t> next{0};
  const int n_workers = std::max(1, std::min<int>(parallelism, static_cast<int>(batch.size())));

  auto worker = [&]() {
    while (true) {
      const size_t idx = next.fetch_add(1);
      if (idx >= batch.size()) return;
      const PromptBatchEntry& entry = batch[idx];
      LlmResult res = client.complete(system_text, entry.prompt);
      std::lock_guard<std::mutex> lock(mu);
      if (!res.ok) {
        corpus.failures[entry.user] = res.error;
        continue;
      }
      auto phrases = parse_interest_completion(res.content);
      if (phrases.empty()) {
        corpus.warnings.push_back("user " + entry.user_raw + ": unparseable completion");
      }
      corpus.per_user[entry.user] = std::move(phrases);
    }
  };

  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return corpus;
}

InterestCorpus load_fixture_interests(const std::string& path, const InteractionSet& ix) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interest fixture: " + path);

  InterestCorpus corpus;
  corpus.per_user.assign(ix.n_users, {});
  corpus.source.assign(ix.n_users, PhraseSource::fixture);

  std::string line;
  size_t lineno = 0;
  size_t unknown = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("user") || !j.contains("interests")) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed interest record");
    }
    const std::string raw = j["user"].get<std::string>();
    auto it = ix.user_id.find(raw);
    if (it == ix.user_id.end()) {
      ++unknown;
      continue;
    }
    std::vector<std::string> phrases;
    for (const auto& p : j["interests"]) {
      std::string s = trim(p.get<std::string>());
      if (!s.empty()) phrases.push_back(std::move(s));
    }
    corpus.per_user[it->second] = std::move(phrases);
  }
  if (unknown > 0) {
    corpus.warnings.push_back(std::to_string(unknown) + " fixture user(s) not in the dataset");
  }
  return corpus;
}

void write_interest_corpus(const InterestCorpus& corpus, const InteractionSet& ix,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (int u = 0; u < ix.n_users; ++u) {
    nlohmann::ordered_json j;
    j["user"] = ix.user_raw[u];
    j["interests"] = corpus.per_user[u];
    j["source"] = corpus.source[u] == PhraseSource::fixture ? "fixture" : "llm";
    out << j.dump() << '\n';
  }
}

}  // namespace cikg
