#include "cirlab/pipeline/services.hpp"

#include "cirlab/text.hpp"

#include <set>
#include <sstream>
#include <thread>
#include <vector>

namespace cirlab::data {

namespace {

ServiceResponse timed_response(std::string text, const std::string& prompt,
                               std::chrono::steady_clock::time_point started) {
  ServiceResponse r;
  r.text = std::move(text);
  r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  r.prompt_tokens = static_cast<int>(count_whitespace_tokens(prompt));
  r.completion_tokens = static_cast<int>(count_whitespace_tokens(r.text));
  return r;
}

// Value of the last line starting with `label`, if any.
std::optional<std::string> last_field(const std::string& prompt, std::string_view label) {
  std::optional<std::string> value;
  std::istringstream in(prompt);
  for (std::string line; std::getline(in, line);)
    if (line.rfind(label, 0) == 0) value = trim(std::string_view(line).substr(label.size()));
  return value;
}

}  // namespace

ServiceResponse complete_with_retry(ServiceClient& client, const ServiceRequest& request, const RetryPolicy& policy,
                                    const Sleeper& sleep) {
  const int attempts = std::max(policy.max_attempts, 1);
  auto delay = policy.base_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      return client.complete(request);
    } catch (const TransientServiceError& e) {
      if (attempt >= attempts)
        throw PermanentServiceError("gave up after " + std::to_string(attempts) + " attempts: " + e.what());
    }
    if (sleep) {
      sleep(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
    delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * policy.multiplier));
  }
}

BudgetedClient::BudgetedClient(std::shared_ptr<ServiceClient> inner, ServiceBudget budget)
    : inner_(std::move(inner)),
      budget_(budget),
      slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(budget.max_concurrent, 1))) {}

ServiceResponse BudgetedClient::complete(const ServiceRequest& request) {
  if (made_.fetch_add(1) >= budget_.max_requests && budget_.max_requests > 0)
    throw PermanentServiceError("request budget of " + std::to_string(budget_.max_requests) + " exhausted");
  if (budget_.min_interval.count() > 0) {
    std::chrono::steady_clock::time_point start;
    {
      std::lock_guard lock(rate_mutex_);
      const auto now = std::chrono::steady_clock::now();
      start = std::max(now, next_start_);
      next_start_ = start + budget_.min_interval;
    }
    std::this_thread::sleep_until(start);
  }
  slots_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{slots_};
  return inner_->complete(request);
}

ServiceResponse MockCaptionClient::complete(const ServiceRequest& request) {
  const auto started = std::chrono::steady_clock::now();
  const std::string category = last_field(request.prompt, "Category:").value_or("garment");
  const std::string description = last_field(request.prompt, "Description:").value_or("");
  const std::string attributes = last_field(request.prompt, "Attributes:").value_or("");
  std::vector<std::string> values;
  if (attributes != "(none)") {
    std::istringstream in(attributes);
    for (std::string item; std::getline(in, item, ';');) {
      const auto colon = item.find(':');
      if (colon != std::string::npos) values.push_back(trim(std::string_view(item).substr(colon + 1)));
    }
  }
  std::string caption = "a";
  for (const auto& v : values) caption += " " + v;
  caption += " " + category;
  if (values.empty() && !description.empty() && description != "(none)") caption += ", listed as " + to_lower(description);
  return timed_response(caption, request.prompt, started);
}

ServiceResponse MockSynthesisClient::complete(const ServiceRequest& request) {
  const auto started = std::chrono::steady_clock::now();
  const auto reference = last_field(request.prompt, "Reference:");
  const auto target = last_field(request.prompt, "Target:");
  if (!reference || !target) throw PermanentServiceError("mock synthesis: prompt has no Reference/Target lines");
  const auto ref_words = tokenize_words(*reference);
  const std::set<std::string> known(ref_words.begin(), ref_words.end());
  std::vector<std::string> added;
  std::set<std::string> seen;
  for (const auto& w : tokenize_words(*target))
    if (!known.contains(w) && seen.insert(w).second) added.push_back(w);
  std::string text = kNoChangeSentinel;
  if (!added.empty()) {
    text = "make it";
    for (const auto& w : added) text += " " + w;
  }
  return timed_response(text, request.prompt, started);
}

}  // namespace cirlab::data
