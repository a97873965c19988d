#include "transaudit/repair.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "transaudit/error.hpp"
#include "transaudit/text.hpp"

namespace transaudit {

namespace {

constexpr std::string_view kSourceLanguage = "en";

ManifestEntry entry_from_json(const nlohmann::json& j, std::size_t line_no) {
  if (!j.is_object()) throw LineError(ErrorKind::MalformedLine, line_no, "manifest entry is not an object");
  ManifestEntry e;
  auto need = [&](const char* field) {
    const auto it = j.find(field);
    if (it == j.end() || !it->is_string()) throw LineError(ErrorKind::MissingKeyField, line_no, field);
    return it->get<std::string>();
  };
  e.key.language = need("language");
  const auto ds = parse_dataset(need("dataset"));
  if (!ds) throw LineError(ErrorKind::MalformedLine, line_no, "unknown dataset");
  e.key.dataset = *ds;
  const auto sp = parse_split(need("split"));
  if (!sp) throw LineError(ErrorKind::MalformedLine, line_no, "unknown split");
  e.key.split = *sp;
  if (const auto it = j.find("subset"); it != j.end() && it->is_string()) e.key.subset = it->get<std::string>();
  if (const auto it = j.find("id"); it != j.end() && !it->is_null()) {
    e.key.id = it->is_string() ? it->get<std::string>() : it->dump();
    if (e.key.id.empty()) throw LineError(ErrorKind::MalformedLine, line_no, "empty id");
  }
  if (const auto it = j.find("fields"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw LineError(ErrorKind::MalformedLine, line_no, "fields must be an array");
    e.fields = it->get<std::vector<std::string>>();
  }
  return e;
}

std::string field_value(const BenchmarkItem& item, const FieldSlot& slot) {
  if (slot.field == "question") return item.question.value_or("");
  if (slot.field == "answer") return item.answer.value_or("");
  if (slot.field == "choices" && item.choices && slot.index >= 0 &&
      static_cast<std::size_t>(slot.index) < item.choices->size()) {
    return (*item.choices)[static_cast<std::size_t>(slot.index)];
  }
  return {};
}

void write_field(BenchmarkItem& item, const FieldSlot& slot, const std::string& value, std::size_t n_choices) {
  if (slot.field == "question") {
    item.question = value;
  } else if (slot.field == "answer") {
    item.answer = value;
  } else if (slot.field == "choices") {
    if (!item.choices) item.choices.emplace();
    const auto needed = std::max(n_choices, static_cast<std::size_t>(slot.index) + 1);
    if (item.choices->size() < needed) item.choices->resize(needed);
    (*item.choices)[static_cast<std::size_t>(slot.index)] = value;
  }
}

void check_lineage(const ItemKey& key, std::string_view when) {
  if (key.language.empty() || key.id.empty()) {
    throw Error(ErrorKind::LineageError, fmt::format("{} has no resolvable identity {}", key.to_string(), when));
  }
}

// Expands selectors to concrete slots for overlap detection.
std::set<FieldSlot> expand_slots(std::span<const std::string> fields, std::size_t n_choices) {
  std::set<FieldSlot> out;
  for (const auto& f : fields) {
    auto slot = parse_field_selector(f);
    if (slot.field == "choices" && slot.index < 0) {
      for (std::size_t i = 0; i < n_choices; ++i) out.insert({"choices", static_cast<int>(i)});
    } else {
      out.insert(std::move(slot));
    }
  }
  return out;
}

}  // namespace

RepairManifest parse_manifest(std::istream& in) {
  RepairManifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw LineError(ErrorKind::MalformedLine, line_no, e.what());
    }
    m.entries.push_back(entry_from_json(j, line_no));
  }
  const bool all_split_wide =
      !m.entries.empty() && std::all_of(m.entries.begin(), m.entries.end(), [](const auto& e) { return e.split_wide(); });
  m.scope_mode = all_split_wide ? ScopeMode::full_split : ScopeMode::manifest;
  return m;
}

RepairManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  return parse_manifest(in);
}

TranslationCache::TranslationCache(std::filesystem::path persistence) : path_(std::move(persistence)) {
  std::ifstream in(*path_);
  if (!in) return;  // a new cache
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      entries_[{j.at("target_language").get<std::string>(), j.at("source").get<std::string>()}] =
          j.at("target").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw LineError(ErrorKind::MalformedLine, line_no, path_->string() + ": " + e.what());
    }
  }
}

std::optional<std::string> TranslationCache::lookup(const std::string& target_language,
                                                    const std::string& source) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find({target_language, source});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void TranslationCache::store(const std::string& target_language, const std::string& source,
                             const std::string& target) {
  std::lock_guard lock(mutex_);
  entries_[{target_language, source}] = target;
  if (path_) {
    std::ofstream out(*path_, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot append to cache " + path_->string());
    nlohmann::ordered_json j;
    j["target_language"] = target_language;
    j["source"] = source;
    j["target"] = target;
    out << j.dump() << '\n';
  }
}

std::size_t TranslationCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::vector<std::string> defective_fields(const BenchmarkItem* item, const BenchmarkItem& source) {
  const auto& schema = schema_for(source.key.dataset);
  if (item == nullptr) return schema.translatable_fields;
  std::vector<std::string> fields;
  if (!item->question || text::is_blank(*item->question)) fields.emplace_back("question");
  if (schema.kind == TaskKind::multiple_choice) {
    const std::size_t expected = source.choices ? source.choices->size() : 0;
    if (!item->choices || item->choices->size() != expected) {
      fields.emplace_back("choices");
    } else {
      for (std::size_t i = 0; i < item->choices->size(); ++i) {
        if (text::is_blank((*item->choices)[i])) fields.push_back(fmt::format("choices[{}]", i));
      }
    }
  } else if (!item->answer || text::is_blank(*item->answer)) {
    fields.emplace_back("answer");
  }
  return fields;
}

BenchmarkItem reformat_continuation_options(const BenchmarkItem& item, ContinuationMode mode) {
  if (mode == ContinuationMode::none || !item.choices) return item;
  BenchmarkItem out = item;
  const std::string context = item.question.value_or("");
  for (auto& choice : *out.choices) choice = context + " " + choice;
  return out;
}

std::string strip_translated_context(std::string_view translated_context, std::string_view translated_option) {
  const auto context = text::trim(translated_context);
  const auto option = text::trim_left(translated_option);
  if (context.empty()) return std::string(option);
  const auto common = text::common_prefix_length(context, option);
  if (common < context.size()) {
    throw Error(ErrorKind::PrefixStripFailure,
                fmt::format("translated option '{}' does not start with translated context '{}'",
                            translated_option, translated_context));
  }
  const auto rest = text::trim_left(option.substr(common));
  if (rest.empty()) throw Error(ErrorKind::PrefixStripFailure, "nothing left after removing the context");
  return std::string(rest);
}

RepairPlan plan_repair(const Corpus& target, const Corpus& english, const RepairManifest& manifest,
                       const PlanOptions& options) {
  RepairPlan plan;

  // Expand split-wide entries and resolve sources.
  struct Resolved {
    ItemKey key;
    const BenchmarkItem* source;
    std::optional<std::vector<std::string>> fields;
  };
  std::vector<Resolved> resolved;
  for (const auto& entry : manifest.entries) {
    if (entry.key.language == kSourceLanguage) {
      plan.unresolved.push_back({entry.key, "English items are sources, not repair targets"});
      continue;
    }
    if (entry.split_wide()) {
      bool any = false;
      for (const auto& src : english) {
        const auto& k = src.key;
        if (k.dataset == entry.key.dataset && k.split == entry.key.split && k.subset == entry.key.subset) {
          resolved.push_back({k.with_language(entry.key.language), &src, entry.fields});
          any = true;
        }
      }
      if (!any) plan.unresolved.push_back({entry.key, "no English items in this split"});
      continue;
    }
    const auto* src = english.find(entry.key.with_language(std::string(kSourceLanguage)));
    if (src == nullptr) {
      plan.unresolved.push_back({entry.key, "no English counterpart"});
      continue;
    }
    resolved.push_back({entry.key, src, entry.fields});
  }

  // Overlap check across all entries for the same item.
  std::map<ItemKey, std::set<FieldSlot>> claimed;
  for (const auto& r : resolved) {
    const std::size_t n_choices = r.source->choices ? r.source->choices->size() : 0;
    const auto* current = target.find(r.key);
    const auto fields = r.fields ? *r.fields : defective_fields(current, *r.source);
    auto& taken = claimed[r.key];
    for (const auto& slot : expand_slots(fields, n_choices)) {
      if (!taken.insert(slot).second) {
        throw Error(ErrorKind::WriteConflict,
                    fmt::format("{} field {} is targeted by more than one manifest entry", r.key.to_string(),
                                slot.to_string()));
      }
    }
  }

  for (const auto& r : resolved) {
    const auto* current = target.find(r.key);
    const auto& schema = schema_for(r.key.dataset);
    const auto fields = r.fields ? *r.fields : defective_fields(current, *r.source);
    if (fields.empty()) continue;

    const bool prefix = options.continuation == ContinuationMode::prefix_context &&
                        r.key.dataset == Dataset::hellaswag &&
                        std::any_of(fields.begin(), fields.end(),
                                    [](const std::string& f) { return f.starts_with("choices"); });
    const BenchmarkItem source =
        prefix ? reformat_continuation_options(*r.source, ContinuationMode::prefix_context) : *r.source;

    auto list = extract_fragments(source, schema, fields);
    FragmentBatch batch;
    batch.source_key = r.key;
    batch.target_language = r.key.language;
    if (prefix && (list.slots.empty() || list.slots.front().field != "question")) {
      list.texts.insert(list.texts.begin(), r.source->question.value_or(""));
      list.slots.insert(list.slots.begin(), FieldSlot{std::string(kContextSlot), -1});
    }
    batch.context_prefixed = prefix;
    batch.fragments = std::move(list.texts);
    batch.slots = std::move(list.slots);
    batch.serialized = serialize_fragments(batch.fragments);
    if (current == nullptr) {
      BenchmarkItem fresh = *r.source;
      fresh.key = r.key;
      fresh.violations.clear();
      batch.create_from = std::move(fresh);
    }
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

std::vector<std::vector<std::size_t>> pack_requests(std::span<const std::string> payloads, std::size_t max_bytes,
                                                    std::size_t max_texts) {
  std::vector<std::vector<std::size_t>> requests;
  std::size_t bytes = 0;
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    const auto size = payloads[i].size();
    if (requests.empty() || requests.back().size() >= max_texts ||
        (!requests.back().empty() && bytes + size > max_bytes)) {
      requests.emplace_back();
      bytes = 0;
    }
    requests.back().push_back(i);
    bytes += size;
  }
  return requests;
}

namespace {

// Unique (language, payload) pairs that still need the engine, grouped by language.
std::map<std::string, std::vector<std::string>> pending_payloads(std::span<const FragmentBatch> batches,
                                                                 const TranslationCache& cache) {
  std::map<std::string, std::vector<std::string>> pending;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& b : batches) {
    if (cache.lookup(b.target_language, b.serialized)) continue;
    if (seen.insert({b.target_language, b.serialized}).second) {
      pending[b.target_language].push_back(b.serialized);
    }
  }
  return pending;
}

}  // namespace

std::size_t estimate_engine_calls(std::span<const FragmentBatch> batches, const TranslationCache& cache,
                                  const TranslateOptions& options) {
  std::size_t calls = 0;
  for (const auto& [lang, payloads] : pending_payloads(batches, cache)) {
    calls += pack_requests(payloads, options.max_payload_bytes, options.max_texts_per_request).size();
  }
  return calls;
}

TranslateOutcome translate_batch(std::span<const FragmentBatch> batches, TranslationEngine& engine,
                                 TranslationCache& cache, const TranslateOptions& options) {
  TranslateOutcome outcome;
  outcome.batches.reserve(batches.size());
  for (const auto& b : batches) {
    TranslatedBatch t;
    t.batch = b;
    t.engine_id = engine.id();
    outcome.batches.push_back(std::move(t));
  }

  // Requests: (language, payload list).
  struct Request {
    std::string language;
    std::vector<std::string> texts;
    std::vector<std::string> results;
    std::exception_ptr error;
  };
  std::vector<Request> requests;
  for (auto& [lang, payloads] : pending_payloads(batches, cache)) {
    for (const auto& idx : pack_requests(payloads, options.max_payload_bytes, options.max_texts_per_request)) {
      Request r;
      r.language = lang;
      for (const auto i : idx) r.texts.push_back(payloads[i]);
      requests.push_back(std::move(r));
    }
  }

  std::mutex pacing;
  auto next_slot = std::chrono::steady_clock::now();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const auto i = next++;
      if (i >= requests.size()) return;
      if (options.min_request_interval.count() > 0) {
        std::chrono::steady_clock::time_point start;
        {
          std::lock_guard lock(pacing);
          start = std::max(next_slot, std::chrono::steady_clock::now());
          next_slot = start + options.min_request_interval;
        }
        std::this_thread::sleep_until(start);
      }
      auto& r = requests[i];
      try {
        r.results = engine.translate(r.texts, options.source_language, r.language, kIgnoreTag);
        if (r.results.size() != r.texts.size()) {
          throw Error(ErrorKind::EngineUnavailable, "engine returned a different number of texts");
        }
      } catch (...) {
        r.error = std::current_exception();
      }
    }
  };
  const auto n_workers = std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(requests.size(), 1));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  outcome.engine_calls = requests.size();

  // Collect raw responses; auth problems abort the run.
  std::map<std::pair<std::string, std::string>, std::string> responses;
  std::map<std::pair<std::string, std::string>, std::string> request_errors;
  for (const auto& r : requests) {
    if (r.error) {
      try {
        std::rethrow_exception(r.error);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::AuthFailure) throw;
        outcome.engine_exhausted = true;
        for (const auto& t : r.texts) request_errors[{r.language, t}] = e.what();
      } catch (const std::exception& e) {
        outcome.engine_exhausted = true;
        for (const auto& t : r.texts) request_errors[{r.language, t}] = e.what();
      }
      continue;
    }
    for (std::size_t i = 0; i < r.texts.size(); ++i) responses[{r.language, r.texts[i]}] = r.results[i];
  }

  std::set<std::pair<std::string, std::string>> stored;
  for (auto& t : outcome.batches) {
    const std::pair<std::string, std::string> cache_key{t.batch.target_language, t.batch.serialized};
    const auto n = t.batch.fragments.size();
    if (auto hit = cache.lookup(cache_key.first, cache_key.second); hit && !stored.contains(cache_key)) {
      try {
        t.fragments = deserialize_fragments(*hit, n);
        t.cache_hit = true;
        ++outcome.cache_hits;
        continue;
      } catch (const Error& e) {
        spdlog::warn("ignoring unusable cache entry for {}: {}", t.batch.source_key.to_string(), e.what());
      }
    }
    if (const auto err = request_errors.find(cache_key); err != request_errors.end()) {
      t.status = BatchStatus::engine_failure;
      t.error = err->second;
      continue;
    }
    const auto resp = responses.find(cache_key);
    if (resp == responses.end()) {
      // Only reachable when a cached entry was unusable; translate it on its own.
      try {
        const auto payload = engine.translate_one(t.batch.serialized, options.source_language,
                                                  t.batch.target_language, kIgnoreTag);
        ++outcome.engine_calls;
        responses[cache_key] = payload;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::AuthFailure) throw;
        outcome.engine_exhausted = true;
        t.status = BatchStatus::engine_failure;
        t.error = e.what();
        continue;
      }
    }
    const auto& payload = responses.at(cache_key);
    try {
      t.fragments = deserialize_fragments(payload, n);
      if (t.batch.context_prefixed) {
        const std::string context = t.fragments.front();
        for (std::size_t i = 1; i < n; ++i) {
          if (t.batch.slots[i].field == "choices") t.fragments[i] = strip_translated_context(context, t.fragments[i]);
        }
      }
    } catch (const Error& e) {
      t.status = BatchStatus::content_failure;
      t.error = e.what();
      t.fragments.clear();
      continue;
    }
    if (!stored.contains(cache_key)) {
      cache.store(cache_key.first, cache_key.second, payload);
      stored.insert(cache_key);
    }
  }
  return outcome;
}

std::string_view to_string(DiagnosticStatus s) noexcept {
  switch (s) {
    case DiagnosticStatus::updated: return "updated";
    case DiagnosticStatus::unchanged: return "unchanged";
    case DiagnosticStatus::failed: return "failed";
    case DiagnosticStatus::manual_queue: return "manual_queue";
  }
  return "?";
}

ordered_json to_json(const DiagnosticsRecord& r) {
  ordered_json j = to_json(r.key);
  j["field"] = r.field;
  j["before"] = r.before;
  j["after"] = r.after;
  j["engine_id"] = r.engine_id;
  j["cache_hit"] = r.cache_hit;
  j["timestamp"] = r.timestamp;
  j["status"] = to_string(r.status);
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

void write_diagnostics(std::span<const DiagnosticsRecord> records, std::ostream& out) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch != nullptr && *epoch != '\0') {
    now = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

UpdateResult apply_updates(const Corpus& corpus, std::span<const TranslatedBatch> translated,
                           const RepairManifest& manifest, const Clock& clock) {
  // Every written slot must be claimed by exactly one batch.
  std::map<ItemKey, std::set<FieldSlot>> written;
  for (const auto& t : translated) {
    for (const auto& slot : t.batch.slots) {
      if (slot.field == kContextSlot) continue;
      if (!written[t.batch.source_key].insert(slot).second) {
        throw Error(ErrorKind::WriteConflict,
                    fmt::format("{} field {} written twice", t.batch.source_key.to_string(), slot.to_string()));
      }
    }
  }
  // Items outside the manifest may not be touched.
  std::set<ItemKey> explicit_keys;
  std::set<std::tuple<std::string, Dataset, std::string, Split>> split_scopes;
  for (const auto& e : manifest.entries) {
    if (e.split_wide()) {
      split_scopes.insert({e.key.language, e.key.dataset, e.key.subset, e.key.split});
    } else {
      explicit_keys.insert(e.key);
    }
  }
  auto in_manifest = [&](const ItemKey& k) {
    return explicit_keys.contains(k) || split_scopes.contains({k.language, k.dataset, k.subset, k.split});
  };

  std::vector<BenchmarkItem> items(corpus.items().begin(), corpus.items().end());
  std::vector<BenchmarkItem> created;
  std::vector<DiagnosticsRecord> diagnostics;

  for (const auto& t : translated) {
    const auto& key = t.batch.source_key;
    if (!in_manifest(key)) {
      throw Error(ErrorKind::WriteConflict, key.to_string() + " is not covered by the manifest");
    }
    check_lineage(key, "before the update");

    const auto pos = corpus.position(key);
    if (!pos && !t.batch.create_from) {
      throw Error(ErrorKind::LineageError, key.to_string() + " is neither in the corpus nor creatable");
    }
    const BenchmarkItem* current = pos ? &items[*pos] : nullptr;

    auto record_for = [&](const FieldSlot& slot) {
      DiagnosticsRecord r;
      r.key = key;
      r.field = slot.to_string();
      r.before = current ? field_value(*current, slot) : std::string();
      r.engine_id = t.engine_id;
      r.cache_hit = t.cache_hit;
      r.timestamp = clock();
      return r;
    };

    if (t.status != BatchStatus::ok) {
      for (const auto& slot : t.batch.slots) {
        if (slot.field == kContextSlot) continue;
        auto r = record_for(slot);
        r.after = r.before;
        r.status = t.status == BatchStatus::engine_failure ? DiagnosticStatus::failed : DiagnosticStatus::manual_queue;
        r.note = t.error;
        diagnostics.push_back(std::move(r));
      }
      continue;
    }

    BenchmarkItem updated = current ? *current : *t.batch.create_from;
    if (!current) {
      // Translatable fields start empty and are filled from the fragments.
      updated.question.reset();
      updated.answer.reset();
      if (updated.choices) updated.choices->assign(updated.choices->size(), std::string());
    }
    const std::size_t n_choices = t.batch.create_from && t.batch.create_from->choices
                                      ? t.batch.create_from->choices->size()
                                      : (updated.choices ? updated.choices->size() : 0);
    for (std::size_t i = 0; i < t.batch.slots.size(); ++i) {
      const auto& slot = t.batch.slots[i];
      if (slot.field == kContextSlot) continue;
      auto r = record_for(slot);
      r.after = t.fragments[i];
      write_field(updated, slot, t.fragments[i], n_choices);
      r.status = (current && r.before == r.after) ? DiagnosticStatus::unchanged : DiagnosticStatus::updated;
      diagnostics.push_back(std::move(r));
    }
    if (updated.key != key) throw Error(ErrorKind::LineageError, key.to_string() + " changed identity");
    check_lineage(updated.key, "after the update");
    if (pos) {
      items[*pos] = std::move(updated);
    } else {
      created.push_back(std::move(updated));
    }
  }
  items.insert(items.end(), std::make_move_iterator(created.begin()), std::make_move_iterator(created.end()));
  return {Corpus(std::move(items)), std::move(diagnostics)};
}

Roster validate_post_translation(const Corpus& corpus, std::vector<DiagnosticsRecord>& diagnostics,
                                 std::span<const ItemKey> keys, const Clock& clock) {
  Roster roster;
  auto check = [&](const BenchmarkItem& item) {
    if (item.key.language == kSourceLanguage) return;
    const auto problems = validate_item(item, schema_for(item.key.dataset));
    if (problems.empty()) return;
    roster.push_back(item.key);
    DiagnosticsRecord r;
    r.key = item.key;
    r.field = problems.front().substr(0, problems.front().find(':'));
    r.timestamp = clock();
    r.status = DiagnosticStatus::manual_queue;
    r.note = problems.front();
    for (std::size_t i = 1; i < problems.size(); ++i) r.note += "; " + problems[i];
    diagnostics.push_back(std::move(r));
  };
  if (keys.empty()) {
    for (const auto& item : corpus) check(item);
  } else {
    std::set<ItemKey> unique(keys.begin(), keys.end());
    for (const auto& k : unique) {
      if (const auto* item = corpus.find(k)) check(*item);
    }
  }
  std::sort(roster.begin(), roster.end());
  return roster;
}

}  // namespace transaudit
