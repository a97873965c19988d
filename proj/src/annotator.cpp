#include <algorithm>
#include <cctype>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "transaudit/error.hpp"
#include "transaudit/judge.hpp"

namespace transaudit {

namespace {

constexpr std::string_view kReask =
    "\n\nYour previous reply could not be read. Reply with the JSON object only, exactly as specified above.";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// A short excerpt of the text between "Translation (...):" and "Answer:" used as span text.
std::string excerpt(const std::string& prompt) {
  const auto marker = prompt.rfind("Translation (");
  if (marker == std::string::npos) return "text";
  const auto start = prompt.find('\n', marker);
  if (start == std::string::npos) return "text";
  auto body = prompt.substr(start + 1, 24);
  if (const auto nl = body.find('\n'); nl != std::string::npos) body.resize(nl);
  while (!body.empty() && (static_cast<unsigned char>(body.back()) & 0xC0) == 0x80) body.pop_back();
  if (!body.empty() && static_cast<unsigned char>(body.back()) >= 0xC0) body.pop_back();
  return body.empty() ? "text" : body;
}

std::string seeded_response(const std::string& id, const std::string& prompt) {
  static constexpr std::array<std::array<std::string_view, 2>, 3> kCategories = {{
      {"accuracy/mistranslation", "accuracy/omission"},
      {"fluency/grammar", "style/awkward"},
      {"terminology/inconsistent", "locale-convention/number-format"},
  }};
  const auto h = fnv1a(id + '\n' + prompt);
  const auto n_spans = h % 3;
  nlohmann::ordered_json errors = nlohmann::ordered_json::array();
  for (std::uint64_t i = 0; i < n_spans; ++i) {
    const auto bits = h >> (8 + 8 * i);
    errors.push_back({{"span", excerpt(prompt)},
                      {"category", kCategories[bits % 3][(bits >> 2) % 2]},
                      {"severity", ((bits >> 4) % 2) == 0 ? "major" : "minor"}});
  }
  return nlohmann::ordered_json{{"errors", errors}}.dump();
}

}  // namespace

std::string judge_env_name(std::string_view annotator_id, std::string_view suffix) {
  std::string id;
  for (const unsigned char c : annotator_id) id += std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_';
  return fmt::format("TRANSAUDIT_JUDGE_{}_{}", id, suffix);
}

void validate_pool(std::span<const AnnotatorConfig> pool) {
  if (pool.size() < 2) throw Error(ErrorKind::ConfigError, fmt::format("annotator pool needs M >= 2, got {}", pool.size()));
  std::set<std::string> ids;
  for (const auto& a : pool) {
    if (a.annotator_id.empty()) throw Error(ErrorKind::ConfigError, "annotator without id");
    if (!ids.insert(a.annotator_id).second) {
      throw Error(ErrorKind::ConfigError, "duplicate annotator id '" + a.annotator_id + "'");
    }
    if (a.temperature < 0.0) throw Error(ErrorKind::ConfigError, "negative temperature for " + a.annotator_id);
    if (a.max_retries < 1) throw Error(ErrorKind::ConfigError, "max_retries must be >= 1 for " + a.annotator_id);
  }
}

ChatAnnotator::ChatAnnotator(AnnotatorConfig config, std::string api_key, http::RetryPolicy retry)
    : config_(std::move(config)), api_key_(std::move(api_key)), retry_(std::move(retry)) {
  retry_.max_attempts = config_.max_retries;
}

std::string ChatAnnotator::complete(const std::string& prompt) {
  if (config_.min_interval.count() > 0) {
    std::chrono::steady_clock::time_point start;
    {
      std::lock_guard lock(pacing_);
      start = std::max(next_slot_, std::chrono::steady_clock::now());
      next_slot_ = start + config_.min_interval;
    }
    std::this_thread::sleep_until(start);
  }
  nlohmann::json body;
  body["model"] = config_.model_name;
  body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = config_.temperature;
  const http::Headers headers{{"Authorization", "Bearer " + api_key_}};
  const auto url = http::join_url(config_.endpoint, "/chat/completions");
  const auto payload = body.dump();
  const auto response =
      http::with_retries(retry_, [&] { return http::post(url, headers, payload, "application/json"); });
  switch (http::classify(response)) {
    case http::Outcome::ok: break;
    case http::Outcome::auth:
      throw Error(ErrorKind::AuthFailure,
                  fmt::format("annotator {} rejected credentials (HTTP {})", config_.annotator_id, response.status));
    case http::Outcome::retryable:
      if (response.status == 429) {
        throw Error(ErrorKind::RateLimited, fmt::format("annotator {} still rate limited after {} attempts",
                                                        config_.annotator_id, retry_.max_attempts));
      }
      throw Error(ErrorKind::EngineUnavailable,
                  fmt::format("annotator {} unavailable (HTTP {}{}{})", config_.annotator_id, response.status,
                              response.error.empty() ? "" : ", ", response.error));
    case http::Outcome::fatal:
      throw Error(ErrorKind::EngineUnavailable,
                  fmt::format("annotator {} refused the request (HTTP {})", config_.annotator_id, response.status));
  }
  try {
    const auto j = nlohmann::json::parse(response.body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    // The envelope is broken; hand the raw body to the parser so it is recorded.
    spdlog::warn("annotator {} returned an unexpected envelope: {}", config_.annotator_id, e.what());
    return response.body;
  }
}

MockAnnotator::MockAnnotator(std::string id, Respond respond) : id_(std::move(id)), respond_(std::move(respond)) {}

std::unique_ptr<MockAnnotator> MockAnnotator::from_spec(std::string id, std::string_view spec) {
  if (spec == "mock:clean") {
    return std::make_unique<MockAnnotator>(std::move(id), [](const std::string&, std::size_t) {
      return std::string(R"({"errors":[]})");
    });
  }
  if (spec == "mock" || spec == "mock:seeded") {
    const auto seed = id;
    return std::make_unique<MockAnnotator>(std::move(id), [seed](const std::string& prompt, std::size_t) {
      return seeded_response(seed, prompt);
    });
  }
  if (spec == "mock:garbage") {
    return std::make_unique<MockAnnotator>(std::move(id), [](const std::string&, std::size_t) {
      return std::string("I am not able to produce a structured answer for this one.");
    });
  }
  if (spec == "mock:down") {
    return std::make_unique<MockAnnotator>(std::move(id), [](const std::string&, std::size_t) -> std::string {
      throw Error(ErrorKind::EngineUnavailable, "mock annotator is down");
    });
  }
  if (spec == "mock:prose") {
    return std::make_unique<MockAnnotator>(std::move(id), [](const std::string&, std::size_t) {
      return std::string(
          "Here is my assessment of the translation.\n```json\n"
          R"({"errors":[{"span":"text","category":"fluency/grammar","severity":"minor"}]})"
          "\n```\nLet me know if anything is unclear.");
    });
  }
  throw Error(ErrorKind::ConfigError, "unknown mock annotator '" + std::string(spec) + "'");
}

std::string MockAnnotator::complete(const std::string& prompt) {
  const auto index = calls_++;
  return respond_(prompt, index);
}

ItemAnnotation call_annotator(const ItemKey& key, const std::string& prompt, Annotator& annotator) {
  ItemAnnotation a;
  a.key = key;
  a.annotator_id = annotator.id();
  auto ask = [&](const std::string& p) -> bool {
    try {
      a.raw_response = annotator.complete(p);
      a.raw_attempts.push_back(a.raw_response);
      return true;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::AuthFailure) throw;
      a.error = e.what();
      a.parse_status = ParseStatus::failed;
      return false;
    }
  };
  if (!ask(prompt)) return a;
  auto parsed = parse_response(a.raw_response);
  if (parsed.status == ParseStatus::failed) {
    spdlog::debug("annotator {} gave unparseable output for {}, asking again", a.annotator_id, key.to_string());
    if (!ask(prompt + std::string(kReask))) return a;
    parsed = parse_response(a.raw_response);
  }
  a.spans = std::move(parsed.spans);
  a.parse_status = parsed.status;
  return a;
}

JudgeRun run_judging(const Corpus& english, const Corpus& targets, std::span<Annotator* const> pool,
                     const JudgeOptions& options) {
  if (pool.empty()) throw Error(ErrorKind::ConfigError, "empty annotator pool");
  const auto& tmpl = options.prompt ? *options.prompt : PromptTemplate::builtin();
  const auto& categories = options.categories ? *options.categories : CategoryMap::builtin();

  // Resolve every source first; nothing is sent when one is missing.
  struct Job {
    std::size_t item;
    std::size_t annotator;
  };
  std::vector<const BenchmarkItem*> items;
  std::vector<std::string> prompts;
  std::size_t missing = 0;
  std::string first_missing;
  for (const auto& item : targets) {
    if (item.key.language == "en") continue;
    const auto* source = english.find(item.key.with_language("en"));
    if (source == nullptr) {
      if (missing++ == 0) first_missing = item.key.to_string();
      continue;
    }
    items.push_back(&item);
    prompts.push_back(build_prompt(item, source, options.few_shots, tmpl, categories));
  }
  if (missing > 0) {
    throw Error(ErrorKind::MissingSource, fmt::format("{} item(s) without an English source, first {}", missing,
                                                      first_missing));
  }

  JudgeRun run;
  // Later records for the same (item, annotator) supersede earlier ones. Calls
  // that failed in transport are attempted again; everything else is done.
  std::map<std::pair<ItemKey, std::string>, ItemAnnotation> previous;
  if (options.store && std::filesystem::exists(*options.store)) {
    for (auto& a : load_annotations(*options.store)) {
      auto pair_key = std::make_pair(a.key, a.annotator_id);
      previous.insert_or_assign(std::move(pair_key), std::move(a));
    }
  }
  std::set<std::pair<ItemKey, std::string>> done;
  for (const auto& [pair_key, a] : previous) {
    if (a.error.empty()) done.insert(pair_key);
  }
  run.resumed = done.size();

  std::vector<Job> jobs;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t k = 0; k < pool.size(); ++k) {
      if (!done.contains({items[i]->key, pool[k]->id()})) jobs.push_back({i, k});
    }
  }

  std::ofstream store;
  if (options.store) {
    store.open(*options.store, std::ios::app | std::ios::binary);
    if (!store) throw Error(ErrorKind::IoFailure, "cannot append to " + options.store->string());
  }
  std::mutex writer;
  std::vector<std::optional<ItemAnnotation>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr fatal;

  auto worker = [&] {
    while (!stop) {
      const auto j = next++;
      if (j >= jobs.size()) return;
      try {
        auto a = call_annotator(items[jobs[j].item]->key, prompts[jobs[j].item], *pool[jobs[j].annotator]);
        std::lock_guard lock(writer);
        if (store.is_open()) {
          store << to_json(a).dump() << '\n';
          store.flush();
        }
        results[j] = std::move(a);
      } catch (...) {
        std::lock_guard lock(writer);
        if (!fatal) fatal = std::current_exception();
        stop = true;
      }
    }
  };
  const auto n_workers = std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(jobs.size(), 1));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  std::map<std::string, std::size_t> order;
  for (std::size_t k = 0; k < pool.size(); ++k) order.emplace(pool[k]->id(), k);
  for (auto& r : results) {
    if (!r) continue;
    ++run.calls;
    if (!r->error.empty()) ++run.failed_calls;
    auto pair_key = std::make_pair(r->key, r->annotator_id);
    previous.insert_or_assign(std::move(pair_key), std::move(*r));
  }
  for (auto& [_, a] : previous) run.annotations.push_back(std::move(a));
  std::stable_sort(run.annotations.begin(), run.annotations.end(), [&](const auto& a, const auto& b) {
    if (a.key != b.key) return a.key < b.key;
    const auto ia = order.contains(a.annotator_id) ? order.at(a.annotator_id) : pool.size();
    const auto ib = order.contains(b.annotator_id) ? order.at(b.annotator_id) : pool.size();
    return ia != ib ? ia < ib : a.annotator_id < b.annotator_id;
  });

  if (run.calls > 0 && static_cast<double>(run.failed_calls) >
                           options.max_failure_fraction * static_cast<double>(run.calls)) {
    throw Error(ErrorKind::EngineUnavailable,
                fmt::format("{} of {} annotator calls failed (limit {:.0f}%)", run.failed_calls, run.calls,
                            100.0 * options.max_failure_fraction));
  }
  return run;
}

}  // namespace transaudit
