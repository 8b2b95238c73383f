#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>

namespace cirlab::data {

struct ServiceRequest {
  std::string prompt;
  std::optional<std::filesystem::path> image;  ///< sent alongside the prompt when present
  int max_tokens = 128;
};

struct ServiceResponse {
  std::string text;
  double latency_ms = 0.0;
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

/// Worth retrying: timeouts, rate limiting, 5xx.
class TransientServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Not worth retrying: bad request, auth failure, exhausted budget.
class PermanentServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A text-generation service (vision-language captioner or text LLM). Implementations
/// must be safe to call from several threads.
class ServiceClient {
 public:
  virtual ~ServiceClient() = default;
  virtual std::string tag() const = 0;
  virtual ServiceResponse complete(const ServiceRequest& request) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;  ///< total attempts, including the first
  std::chrono::milliseconds base_delay{200};
  double multiplier = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Retries transient failures with exponential backoff (base, base*m, ...). The last
/// transient error is rethrown as PermanentServiceError once attempts run out.
ServiceResponse complete_with_retry(ServiceClient& client, const ServiceRequest& request, const RetryPolicy& policy,
                                    const Sleeper& sleep = {});

struct ServiceBudget {
  std::size_t max_requests = 0;     ///< 0 = unlimited
  std::size_t max_concurrent = 4;
  std::chrono::milliseconds min_interval{0};  ///< between request starts
};

/// Enforces a request cap, a concurrency cap and a start-rate limit around another client.
class BudgetedClient final : public ServiceClient {
 public:
  BudgetedClient(std::shared_ptr<ServiceClient> inner, ServiceBudget budget);
  std::string tag() const override { return inner_->tag(); }
  ServiceResponse complete(const ServiceRequest& request) override;
  std::size_t requests_made() const { return made_.load(); }

 private:
  std::shared_ptr<ServiceClient> inner_;
  ServiceBudget budget_;
  std::atomic<std::size_t> made_{0};
  std::counting_semaphore<> slots_;
  std::mutex rate_mutex_;
  std::chrono::steady_clock::time_point next_start_{};
};

struct HttpServiceOptions {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env = "CIRLAB_API_KEY";
  std::chrono::seconds timeout{60};
};

/// OpenAI-compatible chat-completions client. Images are sent inline as base64 PNG/JPEG
/// data URLs. The API key is read from the environment when the client is built.
class HttpChatClient final : public ServiceClient {
 public:
  explicit HttpChatClient(HttpServiceOptions options);
  std::string tag() const override { return "http:" + options_.model; }
  ServiceResponse complete(const ServiceRequest& request) override;

 private:
  HttpServiceOptions options_;
  std::string api_key_;
};

/// Deterministic local captioner. Reads the Category, Description and Attributes lines of
/// the caption prompt and writes "a <attribute values> <category>", adding the
/// description when there are no attributes.
class MockCaptionClient final : public ServiceClient {
 public:
  std::string tag() const override { return "mock-caption-v1"; }
  ServiceResponse complete(const ServiceRequest& request) override;
};

/// Deterministic local text synthesiser. Reads the last Reference/Target lines of the
/// synthesis prompt and describes the words the target adds, or answers with the
/// no-change sentinel when it adds none.
class MockSynthesisClient final : public ServiceClient {
 public:
  std::string tag() const override { return "mock-synthesis-v1"; }
  ServiceResponse complete(const ServiceRequest& request) override;
};

inline constexpr const char* kNoChangeSentinel = "no visible difference";

}  // namespace cirlab::data
