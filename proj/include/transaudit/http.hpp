#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace transaudit::http {

struct Response {
  int status = 0;  // 0 = transport failure (connection refused, timeout, ...)
  std::string body;
  std::string error;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// POST `body` to an absolute http(s) URL.
Response post(const std::string& url, const Headers& headers, const std::string& body,
              const std::string& content_type, std::chrono::seconds timeout = std::chrono::seconds(60));

std::string url_encode(std::string_view s);
/// `a=1&b=2` with every key and value percent-encoded. Keys may repeat.
std::string form_encode(const std::vector<std::pair<std::string, std::string>>& fields);

/// Joins a base URL and a path without doubling or dropping the slash.
std::string join_url(std::string_view base, std::string_view path);

enum class Outcome { ok, retryable, auth, fatal };
Outcome classify(const Response& r) noexcept;

/// Exponential backoff: delay(n) = base * 2^(n-1) scaled by a jitter factor in
/// [1 - jitter, 1 + jitter]. Waits go through `sleep` so tests can skip them.
struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double jitter = 0.2;
  std::uint64_t jitter_seed = 0x5eed;
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to std::this_thread::sleep_for
};

/// Runs `attempt` until it succeeds, fails fatally or retries run out. Returns
/// the last response; the caller inspects `classify` on it.
Response with_retries(const RetryPolicy& policy, const std::function<Response()>& attempt);

}  // namespace transaudit::http
