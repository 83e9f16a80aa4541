#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace augmentor {

inline constexpr const char* kDefaultModel = "gpt-4o-2024-08-06";
inline constexpr int kDefaultMaxTokens = 1024;
inline constexpr const char* kDefaultEndpoint = "https://api.openai.com/v1/chat/completions";
inline constexpr const char* kApiKeyEnv = "AUGMENTOR_API_KEY";
inline constexpr const char* kApiUrlEnv = "AUGMENTOR_API_URL";

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  int max_tokens = kDefaultMaxTokens;
  std::string model_name = kDefaultModel;

  bool operator==(const ChatRequest&) const = default;
};

void validate(const ChatRequest& req);

// SHA-256 over the canonical JSON array
// [model_name, temperature, system_prompt, user_prompt, max_tokens].
std::string fingerprint(const ChatRequest& req);

nlohmann::ordered_json to_json(const ChatRequest& req);
ChatRequest chat_request_from_json(const nlohmann::json& j);

// Body of an OpenAI-style chat-completion POST.
nlohmann::ordered_json chat_completion_body(const ChatRequest& req);

enum class GatewayMode { kLive, kReplay };

struct ChatResponse {
  std::string raw_text;
  std::string request_fingerprint;
  std::chrono::milliseconds latency{0};
  GatewayMode mode = GatewayMode::kReplay;
  std::size_t request_index = 0;  // position in a complete_all batch
  std::size_t variant = 0;        // which recorded batch for this fingerprint
};

struct HttpResult {
  int status = 0;  // 0 means the request never got an HTTP response
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post(const std::string& url,
                          const std::vector<std::pair<std::string, std::string>>& headers,
                          const std::string& body) = 0;
};

// cpp-httplib backed transport (http and https).
std::unique_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout);

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30000};

  // Delay before retry number `retry` (0-based); nondecreasing in retry.
  std::chrono::milliseconds delay(int retry) const;
};

// Fixture directory: one JSON file per (fingerprint, variant) holding
// {fingerprint, variant, request, raw_text}. Variant 0 is "<fp>.json",
// later variants "<fp>#<k>.json".
class FixtureStore {
 public:
  explicit FixtureStore(std::string dir);

  const std::string& dir() const { return dir_; }
  static std::string file_name(const std::string& fp, std::size_t variant);

  std::optional<std::string> lookup(const ChatRequest& req, const std::string& fp,
                                    std::size_t variant) const;
  void store(const ChatRequest& req, const std::string& fp, std::size_t variant,
             const std::string& raw_text) const;
  // Number of consecutive variants stored for fp, starting at 0.
  std::size_t variant_count(const std::string& fp) const;
  std::size_t entry_count() const;

 private:
  std::string dir_;
};

struct GatewayOptions {
  GatewayMode mode = GatewayMode::kReplay;
  std::string fixture_dir;                // replay source, or record target in live mode
  bool record = false;                    // live mode: persist responses to fixture_dir
  std::string endpoint_url = kDefaultEndpoint;
  std::string api_key;
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  std::chrono::seconds http_timeout{120};
};

// Fills endpoint_url and api_key from AUGMENTOR_API_URL / AUGMENTOR_API_KEY.
GatewayOptions live_options_from_env();

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Chat-completion client. Thread-safe; at most max_in_flight requests are
// outstanding at any time regardless of how many threads call in.
class Gateway {
 public:
  explicit Gateway(GatewayOptions options, std::unique_ptr<HttpTransport> transport = nullptr,
                   Sleeper sleeper = nullptr);
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  static std::unique_ptr<Gateway> replay(const std::string& fixture_dir,
                                         std::size_t max_in_flight = 4);

  GatewayMode mode() const { return options_.mode; }
  const GatewayOptions& options() const { return options_; }

  // Uses the next unused variant of this request's fingerprint.
  ChatResponse complete(const ChatRequest& req);
  ChatResponse complete(const ChatRequest& req, std::size_t variant);

  // Issues all requests with bounded concurrency. Identical requests get
  // consecutive variants in list order. Results come back in list order;
  // the first failing index is rethrown with "request <i>" prepended.
  std::vector<ChatResponse> complete_all(const std::vector<ChatRequest>& reqs);

  std::size_t peak_in_flight() const;
  std::size_t http_attempts() const;

 private:
  std::size_t reserve_variant(const std::string& fp);
  std::string post_with_retries(const ChatRequest& req);
  void acquire_slot();
  void release_slot();

  GatewayOptions options_;
  std::unique_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
  std::optional<FixtureStore> fixtures_;

  mutable std::mutex mutex_;
  std::condition_variable slot_free_;
  std::size_t in_flight_ = 0;
  std::size_t peak_in_flight_ = 0;
  std::size_t http_attempts_ = 0;
  std::map<std::string, std::size_t> next_variant_;
  std::map<std::string, std::size_t> record_base_;
};

// Runs every request through a recording live gateway. Returns the number of
// fixture entries written.
std::size_t record_session(Gateway& recording_gateway, const std::vector<ChatRequest>& reqs);

}  // namespace augmentor
