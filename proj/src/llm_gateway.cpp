#include "augmentor/llm_gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "augmentor/error.hpp"
#include "augmentor/text_util.hpp"

namespace augmentor {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void validate(const ChatRequest& req) {
  if (!std::isfinite(req.temperature) || req.temperature < 0.0 || req.temperature > 2.0) {
    throw PreconditionError("InvalidRequest", "temperature must be within [0, 2]");
  }
  if (trim(req.system_prompt).empty() || trim(req.user_prompt).empty()) {
    throw PreconditionError("InvalidRequest", "prompts must be non-empty");
  }
  if (req.max_tokens < 1) throw PreconditionError("InvalidRequest", "max_tokens must be >= 1");
  if (req.model_name.empty()) throw PreconditionError("InvalidRequest", "model_name is empty");
}

std::string fingerprint(const ChatRequest& req) {
  json canonical = json::array(
      {req.model_name, req.temperature, req.system_prompt, req.user_prompt, req.max_tokens});
  return sha256_hex(canonical.dump(-1, ' ', false, json::error_handler_t::replace));
}

ordered_json to_json(const ChatRequest& req) {
  ordered_json j;
  j["model_name"] = req.model_name;
  j["temperature"] = req.temperature;
  j["max_tokens"] = req.max_tokens;
  j["system_prompt"] = req.system_prompt;
  j["user_prompt"] = req.user_prompt;
  return j;
}

ChatRequest chat_request_from_json(const json& j) {
  try {
    ChatRequest req;
    req.system_prompt = j.at("system_prompt").get<std::string>();
    req.user_prompt = j.at("user_prompt").get<std::string>();
    req.temperature = j.at("temperature").get<double>();
    req.max_tokens = j.value("max_tokens", kDefaultMaxTokens);
    req.model_name = j.value("model_name", std::string(kDefaultModel));
    return req;
  } catch (const json::exception& e) {
    throw PreconditionError("InvalidRequest", e.what());
  }
}

ordered_json chat_completion_body(const ChatRequest& req) {
  ordered_json body;
  body["model"] = req.model_name;
  body["messages"] = ordered_json::array({
      ordered_json{{"role", "system"}, {"content", req.system_prompt}},
      ordered_json{{"role", "user"}, {"content", req.user_prompt}},
  });
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_tokens;
  return body;
}

std::chrono::milliseconds RetryPolicy::delay(int retry) const {
  double ms = static_cast<double>(base_delay.count()) * std::pow(multiplier, retry);
  ms = std::min(ms, static_cast<double>(max_delay.count()));
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

// ---------------------------------------------------------------------------

FixtureStore::FixtureStore(std::string dir) : dir_(std::move(dir)) {}

std::string FixtureStore::file_name(const std::string& fp, std::size_t variant) {
  return variant == 0 ? fp + ".json" : fp + "#" + std::to_string(variant) + ".json";
}

std::optional<std::string> FixtureStore::lookup(const ChatRequest& req, const std::string& fp,
                                                std::size_t variant) const {
  fs::path path = fs::path(dir_) / file_name(fp, variant);
  if (!fs::exists(path)) return std::nullopt;
  json j = json::parse(read_file(path.string()), nullptr, false);
  if (j.is_discarded() || !j.contains("raw_text") || !j["raw_text"].is_string()) {
    throw ExternalError("FixtureCorrupt", path.string());
  }
  if (j.contains("request")) {
    ChatRequest recorded = chat_request_from_json(j["request"]);
    if (fingerprint(recorded) != fp || !(recorded == req)) {
      throw ExternalError("FixtureCorrupt", path.string() + " holds a different request");
    }
  }
  return j["raw_text"].get<std::string>();
}

void FixtureStore::store(const ChatRequest& req, const std::string& fp, std::size_t variant,
                         const std::string& raw_text) const {
  fs::create_directories(dir_);
  ordered_json j;
  j["fingerprint"] = fp;
  j["variant"] = variant;
  j["request"] = to_json(req);
  j["raw_text"] = raw_text;
  write_file((fs::path(dir_) / file_name(fp, variant)).string(),
             j.dump(2, ' ', false, json::error_handler_t::replace) + "\n");
}

std::size_t FixtureStore::variant_count(const std::string& fp) const {
  std::size_t k = 0;
  while (fs::exists(fs::path(dir_) / file_name(fp, k))) ++k;
  return k;
}

std::size_t FixtureStore::entry_count() const {
  if (!fs::exists(dir_)) return 0;
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------

GatewayOptions live_options_from_env() {
  GatewayOptions opts;
  opts.mode = GatewayMode::kLive;
  if (const char* url = std::getenv(kApiUrlEnv); url && *url) opts.endpoint_url = url;
  if (const char* key = std::getenv(kApiKeyEnv); key) opts.api_key = key;
  return opts;
}

Gateway::Gateway(GatewayOptions options, std::unique_ptr<HttpTransport> transport,
                 Sleeper sleeper)
    : options_(std::move(options)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  if (options_.max_in_flight == 0) {
    throw PreconditionError("InvalidConfig", "max_in_flight must be >= 1");
  }
  if (options_.retry.max_retries < 0) {
    throw PreconditionError("InvalidConfig", "max_retries must be >= 0");
  }
  if (options_.mode == GatewayMode::kReplay) {
    if (options_.record) throw PreconditionError("InvalidConfig", "cannot record in replay mode");
    if (!fs::is_directory(options_.fixture_dir)) {
      throw PreconditionError("FileNotFound", "fixture directory " + options_.fixture_dir);
    }
    fixtures_.emplace(options_.fixture_dir);
  } else {
    if (options_.record) {
      if (options_.fixture_dir.empty()) {
        throw PreconditionError("InvalidConfig", "recording needs a fixture directory");
      }
      fixtures_.emplace(options_.fixture_dir);
    }
    if (!transport_) transport_ = make_http_transport(options_.http_timeout);
  }
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::unique_ptr<Gateway> Gateway::replay(const std::string& fixture_dir,
                                         std::size_t max_in_flight) {
  GatewayOptions opts;
  opts.mode = GatewayMode::kReplay;
  opts.fixture_dir = fixture_dir;
  opts.max_in_flight = max_in_flight;
  return std::make_unique<Gateway>(std::move(opts));
}

std::size_t Gateway::reserve_variant(const std::string& fp) {
  std::lock_guard lock(mutex_);
  std::size_t base = 0;
  if (options_.mode == GatewayMode::kLive && options_.record) {
    // Recording appends after whatever the directory already holds.
    auto it = record_base_.find(fp);
    if (it == record_base_.end()) {
      it = record_base_.emplace(fp, fixtures_->variant_count(fp)).first;
    }
    base = it->second;
  }
  return base + next_variant_[fp]++;
}

void Gateway::acquire_slot() {
  std::unique_lock lock(mutex_);
  slot_free_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
  ++in_flight_;
  peak_in_flight_ = std::max(peak_in_flight_, in_flight_);
}

void Gateway::release_slot() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  slot_free_.notify_one();
}

std::size_t Gateway::peak_in_flight() const {
  std::lock_guard lock(mutex_);
  return peak_in_flight_;
}

std::size_t Gateway::http_attempts() const {
  std::lock_guard lock(mutex_);
  return http_attempts_;
}

namespace {

std::string extract_assistant_text(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw ExternalError("TransportError", "response body is not JSON");
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.get<std::string>();
  } catch (const json::exception&) {
    throw ExternalError("TransportError", "response lacks choices[0].message.content");
  }
}

bool is_transient(int status) { return status == 0 || status == 429 || status >= 500; }

}  // namespace

std::string Gateway::post_with_retries(const ChatRequest& req) {
  if (options_.api_key.empty()) {
    throw ExternalError("AuthError", std::string(kApiKeyEnv) + " is not set");
  }
  const std::string body = chat_completion_body(req).dump(-1, ' ', false,
                                                          json::error_handler_t::replace);
  const std::vector<std::pair<std::string, std::string>> headers = {
      {"Authorization", "Bearer " + options_.api_key},
      {"Content-Type", "application/json"},
  };

  HttpResult last;
  for (int attempt = 0; attempt <= options_.retry.max_retries; ++attempt) {
    if (attempt > 0) sleeper_(options_.retry.delay(attempt - 1));
    {
      std::lock_guard lock(mutex_);
      ++http_attempts_;
    }
    last = transport_->post(options_.endpoint_url, headers, body);
    if (last.status == 200) return extract_assistant_text(last.body);
    if (last.status == 401 || last.status == 403) {
      throw ExternalError("AuthError", "HTTP " + std::to_string(last.status));
    }
    if (!is_transient(last.status)) {
      throw ExternalError("TransportError", "HTTP " + std::to_string(last.status) + ": " +
                                                std::string(last.body.substr(0, 200)));
    }
  }
  const std::string attempts = std::to_string(options_.retry.max_retries + 1) + " attempts";
  if (last.status == 429) throw ExternalError("RateLimited", "HTTP 429 after " + attempts);
  if (last.status == 0) throw ExternalError("TransportError", last.error + " after " + attempts);
  throw ExternalError("TransportError", "HTTP " + std::to_string(last.status) + " after " + attempts);
}

ChatResponse Gateway::complete(const ChatRequest& req) {
  return complete(req, reserve_variant(fingerprint(req)));
}

ChatResponse Gateway::complete(const ChatRequest& req, std::size_t variant) {
  validate(req);
  ChatResponse resp;
  resp.request_fingerprint = fingerprint(req);
  resp.mode = options_.mode;
  resp.variant = variant;

  acquire_slot();
  struct SlotGuard {
    Gateway* gw;
    ~SlotGuard() { gw->release_slot(); }
  } guard{this};

  auto start = std::chrono::steady_clock::now();
  if (options_.mode == GatewayMode::kReplay) {
    auto text = fixtures_->lookup(req, resp.request_fingerprint, variant);
    if (!text) {
      throw ExternalError("FixtureMiss", resp.request_fingerprint + "#" + std::to_string(variant));
    }
    resp.raw_text = std::move(*text);
  } else {
    resp.raw_text = post_with_retries(req);
    if (options_.record) fixtures_->store(req, resp.request_fingerprint, variant, resp.raw_text);
  }
  resp.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  return resp;
}

std::vector<ChatResponse> Gateway::complete_all(const std::vector<ChatRequest>& reqs) {
  std::vector<std::size_t> variants(reqs.size());
  for (std::size_t i = 0; i < reqs.size(); ++i) variants[i] = reserve_variant(fingerprint(reqs[i]));

  std::vector<std::optional<ChatResponse>> results(reqs.size());
  std::vector<std::exception_ptr> errors(reqs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < reqs.size(); i = next++) {
      try {
        results[i] = complete(reqs[i], variants[i]);
        results[i]->request_index = i;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  std::size_t n_workers = std::min(options_.max_in_flight, reqs.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  }

  for (std::size_t i = 0; i < reqs.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.category(), e.kind(), "request " + std::to_string(i) + ": " + e.detail());
    }
  }
  std::vector<ChatResponse> out;
  out.reserve(reqs.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

std::size_t record_session(Gateway& gateway, const std::vector<ChatRequest>& reqs) {
  if (gateway.mode() != GatewayMode::kLive || !gateway.options().record) {
    throw PreconditionError("InvalidConfig", "record_session needs a recording live gateway");
  }
  return gateway.complete_all(reqs).size();
}

}  // namespace augmentor
