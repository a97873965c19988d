#include "transaudit/http.hpp"

#include <cctype>
#include <cmath>
#include <random>
#include <thread>

#include <httplib.h>

namespace transaudit::http {

namespace {

std::pair<std::string, std::string> split_origin(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

Response post(const std::string& url, const Headers& headers, const std::string& body,
              const std::string& content_type, std::chrono::seconds timeout) {
  const auto [origin, path] = split_origin(url);
  Response out;
  try {
    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, content_type);
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

std::string url_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (const char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 0xF];
    }
  }
  return out;
}

std::string form_encode(const std::vector<std::pair<std::string, std::string>>& fields) {
  std::string out;
  for (const auto& [k, v] : fields) {
    if (!out.empty()) out += '&';
    out += url_encode(k);
    out += '=';
    out += url_encode(v);
  }
  return out;
}

std::string join_url(std::string_view base, std::string_view path) {
  std::string out(base);
  while (!out.empty() && out.back() == '/') out.pop_back();
  if (!path.empty() && path.front() != '/') out += '/';
  out += path;
  return out;
}

Outcome classify(const Response& r) noexcept {
  if (r.status >= 200 && r.status < 300) return Outcome::ok;
  if (r.status == 0 || r.status == 429 || r.status >= 500) return Outcome::retryable;
  if (r.status == 401 || r.status == 403) return Outcome::auth;
  return Outcome::fatal;
}

Response with_retries(const RetryPolicy& policy, const std::function<Response()>& attempt) {
  std::mt19937_64 jitter_rng(policy.jitter_seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Response last;
  for (int n = 1; n <= policy.max_attempts; ++n) {
    last = attempt();
    if (classify(last) != Outcome::retryable || n == policy.max_attempts) return last;
    const double scale = std::ldexp(1.0, n - 1) * (1.0 + policy.jitter * unit(jitter_rng));
    const auto delay = std::chrono::milliseconds(
        static_cast<std::int64_t>(std::llround(static_cast<double>(policy.base_delay.count()) * scale)));
    if (policy.sleep) {
      policy.sleep(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
  }
  return last;
}

}  // namespace transaudit::http
