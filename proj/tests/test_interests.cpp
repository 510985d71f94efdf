#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cikg/interests.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

using namespace cikg;
namespace fs = std::filesystem;

namespace {

size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  size_t n = 0, pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit TestServer(httplib::Server::Handler handler) {
    server.Post("/v1/chat/completions", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"; }
};

std::string completion_body(const std::string& content) {
  nlohmann::json j = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
  return j.dump();
}

}  // namespace

TEST_CASE("render_prompt mentions every title once and is deterministic") {
  PromptTemplate tmpl = default_prompt_template();
  std::vector<std::string> history = {"The First Book", "A Second Title"};
  const std::string text = render_prompt(tmpl, history, 5, 20);
  CHECK(count_occurrences(text, "The First Book") == 1);
  CHECK(count_occurrences(text, "A Second Title") == 1);
  CHECK(text.find("5") != std::string::npos);
  CHECK(render_prompt(tmpl, history, 5, 20) == text);

  CHECK_THROWS_AS(render_prompt(tmpl, {}, 5, 20), ConfigError);
}

TEST_CASE("render_prompt keeps only the most recent titles under a budget") {
  PromptTemplate tmpl = default_prompt_template();
  std::vector<std::string> history;
  for (int i = 0; i < 30; ++i) history.push_back("title_number_" + std::to_string(i) + "_end");
  const std::string text = render_prompt(tmpl, history, 5, 20);
  for (int i = 0; i < 30; ++i) {
    const size_t n = count_occurrences(text, history[i]);
    CHECK(n == (i >= 10 ? 1u : 0u));
  }
}

TEST_CASE("completion parsing handles lists, json and noise") {
  CHECK(parse_interest_completion("- sci-fi\n- cooking") ==
        std::vector<std::string>{"sci-fi", "cooking"});
  CHECK(parse_interest_completion("1. history\n2) biography\n\n* cooking") ==
        std::vector<std::string>{"history", "biography", "cooking"});
  CHECK(parse_interest_completion("[\"fantasy epics\", \"military history\"]") ==
        std::vector<std::string>{"fantasy epics", "military history"});
  CHECK(parse_interest_completion("Sure! Here you go: [\"a\", \"b\"]") ==
        std::vector<std::string>{"a", "b"});
  CHECK(parse_interest_completion("").empty());
  CHECK(parse_interest_completion("   \n \n").empty());
}

TEST_CASE("fixture interests pass through verbatim") {
  auto ix = build_interactions({{"u1", "i1"}, {"u2", "i1"}}, 1);
  const fs::path p = fs::temp_directory_path() / "cikg_fixture.jsonl";
  {
    std::ofstream out(p);
    out << R"({"user": "u1", "interests": ["fantasy epics", "military history"]})" << "\n";
    out << R"({"user": "ghost", "interests": ["unused"]})" << "\n";
  }
  InterestCorpus corpus = load_fixture_interests(p.string(), ix);
  CHECK(corpus.per_user[ix.user_id.at("u1")] ==
        std::vector<std::string>{"fantasy epics", "military history"});
  CHECK(corpus.per_user[ix.user_id.at("u2")].empty());
  CHECK(corpus.warnings.size() == 1);  // unknown fixture user
  CHECK(corpus.source[0] == PhraseSource::fixture);
}

TEST_CASE("corpus round-trips through the jsonl writer") {
  auto ix = build_interactions({{"u1", "i1"}, {"u2", "i1"}}, 1);
  InterestCorpus corpus;
  corpus.per_user = {{"alpha", "beta"}, {}};
  corpus.source.assign(2, PhraseSource::llm);
  const fs::path p = fs::temp_directory_path() / "cikg_corpus_roundtrip.jsonl";
  write_interest_corpus(corpus, ix, p.string());
  InterestCorpus back = load_fixture_interests(p.string(), ix);
  CHECK(back.per_user == corpus.per_user);
}

TEST_CASE("live client recovers after transient 500s") {
  std::atomic<int> calls{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    const int n = ++calls;
    if (n <= 2) {
      res.status = 500;
      return;
    }
    res.set_content(completion_body("- sci-fi\n- cooking"), "application/json");
  });

  LlmOptions opt;
  opt.endpoint_url = server.url();
  opt.max_retries = 3;
  opt.backoff_ms = 1;
  auto client = make_http_llm_client(opt);

  LlmResult res = client->complete("sys", "user text");
  CHECK(res.ok);
  CHECK(parse_interest_completion(res.content) == std::vector<std::string>{"sci-fi", "cooking"});
  CHECK(calls == 3);
}

TEST_CASE("per-user transport failures do not poison the batch") {
  TestServer server([&](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    const std::string user_text = body["messages"][1]["content"];
    if (user_text.find("poison") != std::string::npos) {
      res.status = 500;
      return;
    }
    res.set_content(completion_body("- reading"), "application/json");
  });

  LlmOptions opt;
  opt.endpoint_url = server.url();
  opt.max_retries = 2;
  opt.backoff_ms = 1;
  auto client = make_http_llm_client(opt);

  std::vector<PromptBatchEntry> batch = {
      {0, "u0", "history: poison pill"},
      {1, "u1", "history: normal"},
      {2, "u2", "history: normal too"},
  };
  InterestCorpus corpus = infer_interests(*client, "sys", batch, 3, 2);
  CHECK(corpus.failures.size() == 1);
  CHECK(corpus.failures.count(0) == 1);
  CHECK(corpus.per_user[1] == std::vector<std::string>{"reading"});
  CHECK(corpus.per_user[2] == std::vector<std::string>{"reading"});
}

TEST_CASE("unparseable completions become empty lists with a warning") {
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion_body("   \n  "), "application/json");
  });
  LlmOptions opt;
  opt.endpoint_url = server.url();
  opt.backoff_ms = 1;
  auto client = make_http_llm_client(opt);
  InterestCorpus corpus = infer_interests(*client, "sys", {{0, "u0", "p"}}, 1, 1);
  CHECK(corpus.failures.empty());
  CHECK(corpus.per_user[0].empty());
  CHECK(corpus.warnings.size() == 1);
}
