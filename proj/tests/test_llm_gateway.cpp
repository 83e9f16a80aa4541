#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <deque>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "augmentor/llm_gateway.hpp"
#include "augmentor/text_util.hpp"
#include "test_support.hpp"

using namespace augmentor;
using nlohmann::json;
using test_support::error_kind;
using test_support::TempDir;

namespace {

ChatRequest sample_request(double t = 0.5, const std::string& user = "Write ten.") {
  ChatRequest r;
  r.system_prompt = "You write tutor messages.";
  r.user_prompt = user;
  r.temperature = t;
  return r;
}

std::string ok_body(const std::string& text) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

// Replies from a script; records every call.
class FakeTransport : public HttpTransport {
 public:
  explicit FakeTransport(std::deque<HttpResult> script, std::chrono::milliseconds hold = {})
      : script_(std::move(script)), hold_(hold) {}

  HttpResult post(const std::string& url,
                  const std::vector<std::pair<std::string, std::string>>& headers,
                  const std::string& body) override {
    int now = ++active_;
    int prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
    }
    if (hold_.count() > 0) std::this_thread::sleep_for(hold_);
    HttpResult r;
    {
      std::lock_guard lock(mu_);
      urls.push_back(url);
      bodies.push_back(body);
      last_headers = headers;
      if (script_.empty()) {
        r = {200, ok_body("reply " + std::to_string(bodies.size())), ""};
      } else {
        r = script_.front();
        script_.pop_front();
      }
    }
    --active_;
    return r;
  }

  int peak() const { return peak_; }

  std::vector<std::string> urls;
  std::vector<std::string> bodies;
  std::vector<std::pair<std::string, std::string>> last_headers;

 private:
  std::mutex mu_;
  std::deque<HttpResult> script_;
  std::chrono::milliseconds hold_;
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

struct LiveSetup {
  FakeTransport* transport = nullptr;
  std::vector<std::chrono::milliseconds> sleeps;
  std::unique_ptr<Gateway> gateway;
};

std::unique_ptr<LiveSetup> live(std::deque<HttpResult> script, GatewayOptions opts = {},
                                std::chrono::milliseconds hold = {}) {
  auto s = std::make_unique<LiveSetup>();
  auto t = std::make_unique<FakeTransport>(std::move(script), hold);
  s->transport = t.get();
  opts.mode = GatewayMode::kLive;
  if (opts.api_key.empty()) opts.api_key = "test-key";
  opts.endpoint_url = "https://example.invalid/v1/chat/completions";
  auto* sleeps = &s->sleeps;
  s->gateway = std::make_unique<Gateway>(opts, std::move(t),
                                         [sleeps](std::chrono::milliseconds d) { sleeps->push_back(d); });
  return s;
}

}  // namespace

TEST_CASE("fingerprint is SHA-256 of the canonical request array") {
  // Oracle: Python hashlib over ["gpt-4o-2024-08-06",0.5,"You write tutor messages.","Write ten.",1024].
  CHECK(fingerprint(sample_request()) ==
        "78283f9e36010f44942ff41b109d8e4e6b686e0435cd390b324f814f23bd8a5e");
  CHECK(fingerprint(sample_request()) == fingerprint(sample_request()));
  CHECK(fingerprint(sample_request(0.3)) != fingerprint(sample_request(0.5)));
  auto r = sample_request();
  r.max_tokens = 10;
  CHECK(fingerprint(r) != fingerprint(sample_request()));
}

TEST_CASE("request validation") {
  auto r = sample_request(2.5);
  CHECK(error_kind([&] { validate(r); }) == "InvalidRequest");
  r = sample_request();
  r.user_prompt = "   ";
  CHECK(error_kind([&] { validate(r); }) == "InvalidRequest");
  CHECK(chat_request_from_json(json::parse(to_json(sample_request()).dump())) == sample_request());
}

TEST_CASE("chat-completion body pins the model and carries both roles") {
  auto body = chat_completion_body(sample_request());
  CHECK(body["model"] == "gpt-4o-2024-08-06");
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][1]["role"] == "user");
  CHECK(body["messages"][1]["content"] == "Write ten.");
  CHECK(body["temperature"] == 0.5);
  CHECK(body["max_tokens"] == 1024);
}

TEST_CASE("retry policy delays are nondecreasing and capped") {
  RetryPolicy p;
  CHECK(p.delay(0).count() == 500);
  CHECK(p.delay(1).count() == 1000);
  CHECK(p.delay(2).count() == 2000);
  for (int i = 0; i < 20; ++i) CHECK(p.delay(i) <= p.delay(i + 1));
  CHECK(p.delay(30).count() == 30000);
}

TEST_CASE("live: success, headers and body") {
  auto s = live({});
  auto resp = s->gateway->complete(sample_request());
  CHECK(resp.raw_text == "reply 1");
  CHECK(resp.mode == GatewayMode::kLive);
  CHECK(resp.request_fingerprint == fingerprint(sample_request()));
  REQUIRE(s->transport->bodies.size() == 1);
  CHECK(json::parse(s->transport->bodies[0])["model"] == "gpt-4o-2024-08-06");
  bool auth = false;
  for (const auto& [k, v] : s->transport->last_headers) auth |= k == "Authorization" && v == "Bearer test-key";
  CHECK(auth);
}

TEST_CASE("live: transient failures are retried with backoff") {
  auto s = live({{503, "", ""}, {429, "", ""}, {200, ok_body("finally"), ""}});
  CHECK(s->gateway->complete(sample_request()).raw_text == "finally");
  CHECK(s->gateway->http_attempts() == 3);
  REQUIRE(s->sleeps.size() == 2);
  CHECK(s->sleeps[0].count() == 500);
  CHECK(s->sleeps[1].count() == 1000);
}

TEST_CASE("live: retries are bounded") {
  auto s = live({{429, "", ""}, {429, "", ""}, {429, "", ""}, {429, "", ""}, {429, "", ""}});
  CHECK(error_kind([&] { s->gateway->complete(sample_request()); }) == "RateLimited");
  CHECK(s->gateway->http_attempts() == 4);
  CHECK(s->sleeps.size() == 3);
  for (std::size_t i = 1; i < s->sleeps.size(); ++i) CHECK(s->sleeps[i - 1] <= s->sleeps[i]);

  auto t = live({{0, "", "connection refused"}, {0, "", "x"}, {0, "", "x"}, {0, "", "x"}});
  CHECK(error_kind([&] { t->gateway->complete(sample_request()); }) == "TransportError");
}

TEST_CASE("live: auth and client errors are not retried") {
  auto s = live({{401, "", ""}});
  CHECK(error_kind([&] { s->gateway->complete(sample_request()); }) == "AuthError");
  CHECK(s->gateway->http_attempts() == 1);

  auto t = live({{400, "bad", ""}});
  CHECK(error_kind([&] { t->gateway->complete(sample_request()); }) == "TransportError");
  CHECK(t->gateway->http_attempts() == 1);

  auto u = live({{200, "{\"nope\":1}", ""}});
  CHECK(error_kind([&] { u->gateway->complete(sample_request()); }) == "TransportError");
}

TEST_CASE("live: missing credential is an AuthError") {
  GatewayOptions opts;
  opts.mode = GatewayMode::kLive;
  Gateway gw(opts, std::make_unique<FakeTransport>(std::deque<HttpResult>{}));
  CHECK(error_kind([&] { gw.complete(sample_request()); }) == "AuthError");
}

TEST_CASE("in-flight bound holds under fan-out") {
  GatewayOptions opts;
  opts.max_in_flight = 3;
  auto s = live({}, opts, std::chrono::milliseconds(5));
  std::vector<ChatRequest> reqs;
  for (int i = 0; i < 24; ++i) reqs.push_back(sample_request(0.5, "req " + std::to_string(i)));
  auto out = s->gateway->complete_all(reqs);
  REQUIRE(out.size() == 24);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].request_index == i);
    CHECK(out[i].request_fingerprint == fingerprint(reqs[i]));
  }
  CHECK(s->gateway->peak_in_flight() <= 3);
  CHECK(s->transport->peak() <= 3);
  CHECK(s->transport->peak() >= 1);
}

TEST_CASE("complete_all reports the failing request index") {
  GatewayOptions opts;
  opts.max_in_flight = 1;
  auto s = live({{200, ok_body("a"), ""}, {401, "", ""}}, opts);
  try {
    s->gateway->complete_all({sample_request(0.1), sample_request(0.2), sample_request(0.3)});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == "AuthError");
    CHECK(e.detail().rfind("request 1: ", 0) == 0);
  }
}

TEST_CASE("record then replay gives identical text, variants in order") {
  TempDir dir;
  GatewayOptions opts;
  opts.record = true;
  opts.fixture_dir = dir.path().string();
  opts.max_in_flight = 1;  // keeps "reply N" numbering in list order
  auto s = live({}, opts);
  std::vector<ChatRequest> reqs = {sample_request(0.3), sample_request(0.5), sample_request(0.5)};
  CHECK(record_session(*s->gateway, reqs) == 3);
  FixtureStore store(dir.path().string());
  CHECK(store.entry_count() == 3);
  CHECK(store.variant_count(fingerprint(sample_request(0.5))) == 2);

  auto replay = Gateway::replay(dir.path().string());
  auto out = replay->complete_all(reqs);
  CHECK(out[0].raw_text == "reply 1");
  CHECK(out[1].raw_text == "reply 2");
  CHECK(out[2].raw_text == "reply 3");
  CHECK(out[2].variant == 1);
  CHECK(out[2].mode == GatewayMode::kReplay);

  // A second replay gateway starts from variant 0 again.
  auto again = Gateway::replay(dir.path().string());
  CHECK(again->complete(sample_request(0.5)).raw_text == "reply 2");
  CHECK(again->complete(sample_request(0.5)).raw_text == "reply 3");
  CHECK(error_kind([&] { again->complete(sample_request(0.5)); }) == "FixtureMiss");
}

TEST_CASE("recording appends variants after existing ones") {
  TempDir dir;
  GatewayOptions opts;
  opts.record = true;
  opts.fixture_dir = dir.path().string();
  auto first = live({}, opts);
  first->gateway->complete(sample_request());
  auto second = live({{200, ok_body("second session"), ""}}, opts);
  second->gateway->complete(sample_request());
  auto replay = Gateway::replay(dir.path().string());
  CHECK(replay->complete(sample_request(), 1).raw_text == "second session");
}

TEST_CASE("2 prompts x 4 temperatures record 8 entries; empty session records none") {
  TempDir dir;
  GatewayOptions opts;
  opts.record = true;
  opts.fixture_dir = dir.path().string();
  auto s = live({}, opts);
  std::vector<ChatRequest> reqs;
  for (double t : {0.3, 0.5, 0.7, 1.0}) {
    reqs.push_back(sample_request(t, "positive"));
    reqs.push_back(sample_request(t, "negative"));
  }
  record_session(*s->gateway, reqs);
  CHECK(FixtureStore(dir.path().string()).entry_count() == 8);

  TempDir empty;
  opts.fixture_dir = empty.path().string();
  auto e = live({}, opts);
  CHECK(record_session(*e->gateway, {}) == 0);
  CHECK(FixtureStore(empty.path().string()).entry_count() == 0);
}

TEST_CASE("replay: unknown fingerprint, corrupt fixture, missing directory") {
  TempDir dir;
  auto gw = Gateway::replay(dir.path().string());
  CHECK(error_kind([&] { gw->complete(sample_request()); }) == "FixtureMiss");

  FixtureStore store(dir.path().string());
  auto other = sample_request(0.9);
  // A file named after one request but holding another.
  store.store(other, fingerprint(sample_request()), 0, "x");
  CHECK(error_kind([&] { gw->complete(sample_request(), 0); }) == "FixtureCorrupt");

  write_file(dir.file(FixtureStore::file_name(fingerprint(other), 0)), "{broken");
  CHECK(error_kind([&] { gw->complete(other, 0); }) == "FixtureCorrupt");

  CHECK(error_kind([&] { Gateway::replay(dir.file("missing")); }) == "FileNotFound");
}

TEST_CASE("recording gateways are required for record_session") {
  TempDir dir;
  auto gw = Gateway::replay(dir.path().string());
  CHECK(error_kind([&] { record_session(*gw, {}); }) == "InvalidConfig");
}

TEST_CASE("httplib transport talks to a local server") {
  httplib::Server server;
  std::string seen_auth, seen_body;
  int calls = 0;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    seen_auth = req.get_header_value("Authorization");
    seen_body = req.body;
    if (calls == 1) {
      res.status = 500;
      return;
    }
    res.set_content(ok_body("from server"), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  GatewayOptions opts;
  opts.mode = GatewayMode::kLive;
  opts.api_key = "k";
  opts.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  opts.retry.base_delay = std::chrono::milliseconds(1);
  Gateway gw(opts);
  auto resp = gw.complete(sample_request());
  server.stop();
  th.join();

  CHECK(resp.raw_text == "from server");
  CHECK(calls == 2);
  CHECK(seen_auth == "Bearer k");
  CHECK(json::parse(seen_body)["messages"][0]["content"] == "You write tutor messages.");
}

TEST_CASE("live options come from the environment") {
  ::setenv(kApiKeyEnv, "env-key", 1);
  ::setenv(kApiUrlEnv, "http://localhost:1/x", 1);
  auto opts = live_options_from_env();
  CHECK(opts.api_key == "env-key");
  CHECK(opts.endpoint_url == "http://localhost:1/x");
  ::unsetenv(kApiUrlEnv);
  ::unsetenv(kApiKeyEnv);
  CHECK(live_options_from_env().endpoint_url == kDefaultEndpoint);
}
