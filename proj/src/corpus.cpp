#include "transaudit/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "transaudit/error.hpp"
#include "transaudit/text.hpp"

namespace transaudit {

namespace {

// Keep in sync with config/adapters.json (a unit test compares them).
constexpr const char* kBuiltinAdapters = R"json({
  "arc": {
    "question": ["question", "question.stem"],
    "choices": ["choices.text"],
    "choice_labels": ["choices.label"],
    "answer_index": ["answerKey"]
  },
  "gsm8k": {},
  "hellaswag": {
    "question": ["ctx"],
    "choices": ["endings"],
    "answer_index": ["label"],
    "id": ["ind"]
  },
  "mmlu": {
    "answer_index": ["answer"],
    "subset": ["subject"]
  },
  "truthfulqa": {
    "choices": ["mc1_targets.choices"],
    "answer_labels": ["mc1_targets.labels"]
  }
})json";

bool is_language_code(std::string_view s) {
  return s.size() == 2 && std::islower(static_cast<unsigned char>(s[0])) &&
         std::islower(static_cast<unsigned char>(s[1]));
}

const ordered_json* resolve_path(const ordered_json& obj, std::string_view path) {
  const ordered_json* cur = &obj;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string part(path.substr(start, dot == std::string_view::npos ? path.npos : dot - start));
    if (!cur->is_object()) return nullptr;
    const auto it = cur->find(part);
    if (it == cur->end()) return nullptr;
    cur = &*it;
    if (dot == std::string_view::npos) return cur;
    start = dot + 1;
  }
}

std::string root_of(std::string_view path) { return std::string(path.substr(0, path.find('.'))); }

template <class Pred>
std::optional<ordered_json> take_field(const ordered_json& obj, const AdapterTable::FieldMap& map,
                                       const std::string& canonical, std::set<std::string>& consumed,
                                       Pred accepts, bool try_canonical = true) {
  if (try_canonical) {
    const auto it = obj.find(canonical);
    if (it != obj.end() && !consumed.contains(canonical) && accepts(*it)) {
      consumed.insert(canonical);
      return std::optional<ordered_json>(std::in_place, *it);
    }
  }
  if (const auto m = map.find(canonical); m != map.end()) {
    for (const auto& path : m->second) {
      const auto root = root_of(path);
      // A root already claimed by a canonical field cannot feed an adapter path.
      if (consumed.contains(root) && root == path) continue;
      if (const auto* v = resolve_path(obj, path); v != nullptr && accepts(*v)) {
        consumed.insert(root);
        return std::optional<ordered_json>(std::in_place, *v);
      }
    }
  }
  return std::nullopt;
}

bool is_string(const ordered_json& v) { return v.is_string(); }
bool is_string_or_null(const ordered_json& v) { return v.is_string() || v.is_null(); }
bool is_id_like(const ordered_json& v) { return v.is_string() || v.is_number_integer() || v.is_number_unsigned(); }
bool is_string_array(const ordered_json& v) {
  return v.is_array() && std::all_of(v.begin(), v.end(), [](const auto& e) { return e.is_string() || e.is_null(); });
}
bool is_answer_like(const ordered_json& v) {
  if (v.is_number_integer() || v.is_number_unsigned() || v.is_string()) return true;
  return v.is_array() && std::all_of(v.begin(), v.end(), [](const auto& e) {
           return e.is_number_integer() || e.is_number_unsigned() || e.is_string();
         });
}
bool is_flag_array(const ordered_json& v) {
  return v.is_array() && std::all_of(v.begin(), v.end(), [](const auto& e) { return e.is_number() || e.is_boolean(); });
}
bool is_canonical_index(const ordered_json& v) {
  if (v.is_number_integer() || v.is_number_unsigned()) return true;
  return v.is_array() && std::all_of(v.begin(), v.end(), [](const auto& e) {
           return e.is_number_integer() || e.is_number_unsigned();
         });
}

std::optional<int> normalize_one(const ordered_json& v, const std::vector<std::string>* labels) {
  if (v.is_number_integer() || v.is_number_unsigned()) return v.get<int>();
  if (!v.is_string()) return std::nullopt;
  const auto s = std::string(text::trim(v.get_ref<const std::string&>()));
  if (labels != nullptr) {
    const auto it = std::find(labels->begin(), labels->end(), s);
    if (it != labels->end()) return static_cast<int>(it - labels->begin());
  }
  if (s.size() == 1 && s[0] >= 'A' && s[0] <= 'Z') return s[0] - 'A';
  if (!s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return std::stoi(s);
  }
  return std::nullopt;
}

std::optional<AnswerIndex> normalize_answer(const ordered_json& raw, const std::vector<std::string>* labels) {
  AnswerIndex out;
  if (raw.is_array()) {
    out.is_list = true;
    for (const auto& e : raw) {
      const auto idx = normalize_one(e, labels);
      if (!idx) return std::nullopt;
      out.indices.push_back(*idx);
    }
    return out;
  }
  const auto idx = normalize_one(raw, labels);
  if (!idx) return std::nullopt;
  out.indices.push_back(*idx);
  return out;
}

std::string id_string(const ordered_json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

using GroupCounter = std::map<std::tuple<Dataset, std::string, Split>, std::size_t>;

BenchmarkItem parse_record(const ordered_json& obj, std::size_t line_no, const ParseOptions& opts,
                           const TaskSchema* fixed_schema, GroupCounter& counters) {
  if (!obj.is_object()) throw LineError(ErrorKind::MalformedLine, line_no, "record is not a JSON object");

  const AdapterTable& adapters = opts.adapters != nullptr ? *opts.adapters : AdapterTable::builtin();
  std::set<std::string> consumed;

  BenchmarkItem item;
  ItemKey& key = item.key;

  // dataset first: it selects the adapter.
  std::optional<Dataset> dataset;
  if (const auto it = obj.find("dataset"); it != obj.end() && it->is_string()) {
    dataset = parse_dataset(it->get_ref<const std::string&>());
    if (!dataset) {
      throw LineError(ErrorKind::MalformedLine, line_no, "unknown dataset '" + it->get<std::string>() + "'");
    }
    consumed.insert("dataset");
  } else if (fixed_schema != nullptr) {
    dataset = fixed_schema->dataset;
  } else if (opts.dataset) {
    dataset = opts.dataset;
  }
  if (!dataset) throw LineError(ErrorKind::MissingKeyField, line_no, "dataset");
  if (fixed_schema != nullptr && *dataset != fixed_schema->dataset) {
    throw Error(ErrorKind::SchemaMismatch, fmt::format("line {}: record dataset {} does not match schema {}",
                                                       line_no, to_string(*dataset),
                                                       to_string(fixed_schema->dataset)));
  }
  key.dataset = *dataset;
  const auto& map = adapters.for_dataset(key.dataset);
  const TaskSchema& schema = schema_for(key.dataset);

  if (auto v = take_field(obj, map, "language", consumed, is_string)) {
    key.language = v->get<std::string>();
  } else if (opts.language) {
    key.language = *opts.language;
  } else {
    throw LineError(ErrorKind::MissingKeyField, line_no, "language");
  }
  if (!is_language_code(key.language)) {
    throw LineError(ErrorKind::MalformedLine, line_no, "language '" + key.language + "' is not an ISO-639-1 code");
  }

  if (auto v = take_field(obj, map, "split", consumed, is_string)) {
    const auto split = parse_split(v->get_ref<const std::string&>());
    if (!split) throw LineError(ErrorKind::MalformedLine, line_no, "unknown split '" + v->get<std::string>() + "'");
    key.split = *split;
  } else if (opts.split) {
    key.split = *opts.split;
  } else {
    throw LineError(ErrorKind::MissingKeyField, line_no, "split");
  }

  if (auto v = take_field(obj, map, "subset", consumed, is_string_or_null)) {
    key.subset = v->is_null() ? std::string() : v->get<std::string>();
  } else if (opts.subset) {
    key.subset = *opts.subset;
  }

  const std::size_t ordinal = counters[{key.dataset, key.subset, key.split}]++;
  if (auto v = take_field(obj, map, "id", consumed, is_id_like)) {
    key.id = id_string(*v);
  } else {
    key.id = fmt::format("{:06d}", ordinal);
  }

  if (auto v = take_field(obj, map, "question", consumed, is_string)) item.question = v->get<std::string>();

  if (auto v = take_field(obj, map, "choices", consumed, is_string_array)) {
    std::vector<std::string> choices;
    for (const auto& e : *v) choices.push_back(e.is_null() ? std::string() : e.get<std::string>());
    item.choices = std::move(choices);
  }

  std::optional<std::vector<std::string>> labels;
  if (auto v = take_field(obj, map, "choice_labels", consumed, is_string_array, false)) {
    labels.emplace();
    for (const auto& e : *v) labels->push_back(e.is_null() ? std::string() : e.get<std::string>());
  }

  std::optional<ordered_json> answer_original;
  if (auto v = take_field(obj, map, "answer_index", consumed, is_canonical_index)) {
    item.answer_index = normalize_answer(*v, nullptr);
  } else if (auto raw = take_field(obj, map, "answer_index", consumed, is_answer_like, false)) {
    item.answer_index = normalize_answer(*raw, labels ? &*labels : nullptr);
    answer_original = *raw;
    if (!item.answer_index) item.violations.push_back("answer_index: cannot normalise " + raw->dump());
  } else if (auto flags = take_field(obj, map, "answer_labels", consumed, is_flag_array, false)) {
    AnswerIndex idx;
    idx.is_list = true;
    for (std::size_t i = 0; i < flags->size(); ++i) {
      const auto& f = (*flags)[i];
      if ((f.is_boolean() && f.get<bool>()) || (f.is_number() && f.get<double>() != 0.0)) {
        idx.indices.push_back(static_cast<int>(i));
      }
    }
    item.answer_index = std::move(idx);
  }

  if (auto v = take_field(obj, map, "answer", consumed, is_string)) item.answer = v->get<std::string>();

  // Everything not consumed is passthrough.
  if (const auto it = obj.find("extra"); it != obj.end() && it->is_object() && !consumed.contains("extra")) {
    item.extra = *it;
    consumed.insert("extra");
  }
  for (const auto& [name, value] : obj.items()) {
    if (!consumed.contains(name)) item.extra[name] = value;
  }
  if (answer_original) item.extra["answer_original"] = *answer_original;

  auto problems = validate_item(item, schema);
  item.violations.insert(item.violations.end(), problems.begin(), problems.end());
  if (opts.strict && !item.violations.empty()) {
    throw LineError(ErrorKind::SchemaViolation, line_no, key.to_string() + ": " + item.violations.front());
  }
  return item;
}

Corpus parse_stream(std::istream& in, const ParseOptions& opts, const TaskSchema* fixed_schema) {
  std::vector<BenchmarkItem> items;
  std::map<ItemKey, std::size_t> seen;
  GroupCounter counters;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::is_blank(line)) continue;
    ordered_json obj;
    try {
      obj = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw LineError(ErrorKind::MalformedLine, line_no, e.what());
    }
    auto item = parse_record(obj, line_no, opts, fixed_schema, counters);
    if (const auto [it, inserted] = seen.emplace(item.key, line_no); !inserted) {
      throw LineError(ErrorKind::DuplicateKey, line_no,
                      item.key.to_string() + " already defined on line " + std::to_string(it->second));
    }
    items.push_back(std::move(item));
  }
  return Corpus(std::move(items));
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  return in;
}

}  // namespace

std::string_view to_string(Dataset d) noexcept {
  switch (d) {
    case Dataset::arc: return "arc";
    case Dataset::gsm8k: return "gsm8k";
    case Dataset::hellaswag: return "hellaswag";
    case Dataset::mmlu: return "mmlu";
    case Dataset::truthfulqa: return "truthfulqa";
  }
  return "?";
}

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    case Split::dev: return "dev";
  }
  return "?";
}

std::string_view to_string(TaskKind k) noexcept {
  return k == TaskKind::multiple_choice ? "multiple_choice" : "generative";
}

std::optional<Dataset> parse_dataset(std::string_view name) {
  std::string n(name);
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  n.erase(std::remove_if(n.begin(), n.end(), [](char c) { return c == '_' || c == '-' || c == ' '; }), n.end());
  if (n == "arc") return Dataset::arc;
  if (n == "gsm8k") return Dataset::gsm8k;
  if (n == "hellaswag") return Dataset::hellaswag;
  if (n == "mmlu") return Dataset::mmlu;
  if (n == "truthfulqa") return Dataset::truthfulqa;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation" || name == "val") return Split::validation;
  if (name == "test") return Split::test;
  if (name == "dev") return Split::dev;
  return std::nullopt;
}

std::string ItemKey::to_string() const {
  return fmt::format("{}/{}/{}/{}/{}", language, transaudit::to_string(dataset), subset,
                     transaudit::to_string(split), id);
}

ordered_json to_json(const ItemKey& key) {
  ordered_json j;
  j["language"] = key.language;
  j["dataset"] = to_string(key.dataset);
  j["subset"] = key.subset.empty() ? ordered_json(nullptr) : ordered_json(key.subset);
  j["split"] = to_string(key.split);
  j["id"] = key.id;
  return j;
}

namespace {
template <class Json>
ItemKey key_from_json_impl(const Json& j) {
  auto need = [&](const char* field) -> std::string {
    const auto it = j.find(field);
    if (it == j.end() || !it->is_string()) throw Error(ErrorKind::MissingKeyField, field);
    return it->template get<std::string>();
  };
  ItemKey key;
  key.language = need("language");
  const auto ds = parse_dataset(need("dataset"));
  if (!ds) throw Error(ErrorKind::MalformedLine, "unknown dataset in " + j.dump());
  key.dataset = *ds;
  const auto sp = parse_split(need("split"));
  if (!sp) throw Error(ErrorKind::MalformedLine, "unknown split in " + j.dump());
  key.split = *sp;
  if (const auto it = j.find("subset"); it != j.end() && it->is_string()) key.subset = it->template get<std::string>();
  const auto id = j.find("id");
  if (id == j.end() || !(id->is_string() || id->is_number_integer())) throw Error(ErrorKind::MissingKeyField, "id");
  key.id = id->is_string() ? id->template get<std::string>() : id->dump();
  return key;
}
}  // namespace

ItemKey key_from_json(const ordered_json& j) { return key_from_json_impl(j); }
ItemKey key_from_json(const nlohmann::json& j) { return key_from_json_impl(j); }

const TaskSchema& schema_for(Dataset dataset) {
  static const std::map<Dataset, TaskSchema> schemas = [] {
    std::map<Dataset, TaskSchema> m;
    const std::vector<std::string> mc_required{"question", "choices", "answer_index"};
    const std::vector<std::string> mc_translatable{"question", "choices"};
    for (const auto d : {Dataset::arc, Dataset::hellaswag, Dataset::mmlu, Dataset::truthfulqa}) {
      m[d] = TaskSchema{d, TaskKind::multiple_choice, mc_required, mc_translatable};
    }
    m[Dataset::gsm8k] = TaskSchema{Dataset::gsm8k, TaskKind::generative, {"question", "answer"}, {"question", "answer"}};
    return m;
  }();
  return schemas.at(dataset);
}

std::vector<int> AnswerIndex::as_set() const {
  std::vector<int> s = indices;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

std::vector<std::string> validate_item(const BenchmarkItem& item, const TaskSchema& schema) {
  std::vector<std::string> problems;
  if (!item.question || text::is_blank(*item.question)) problems.emplace_back("question: empty");
  if (schema.kind == TaskKind::multiple_choice) {
    if (!item.choices || item.choices->empty()) {
      problems.emplace_back("choices: missing");
    } else if (std::any_of(item.choices->begin(), item.choices->end(),
                           [](const std::string& c) { return text::is_blank(c); })) {
      problems.emplace_back("choices: empty option");
    }
    if (!item.answer_index || item.answer_index->indices.empty()) {
      problems.emplace_back("answer_index: missing");
    } else if (item.choices) {
      const auto n = static_cast<int>(item.choices->size());
      for (const int idx : item.answer_index->indices) {
        if (idx < 0 || idx >= n) {
          problems.emplace_back(fmt::format("answer_index: {} out of range for {} choices", idx, n));
          break;
        }
      }
    }
  } else if (!item.answer || text::is_blank(*item.answer)) {
    problems.emplace_back("answer: empty");
  }
  return problems;
}

Corpus::Corpus(std::vector<BenchmarkItem> items) : items_(std::move(items)) {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (!index_.emplace(items_[i].key, i).second) {
      throw Error(ErrorKind::DuplicateKey, items_[i].key.to_string());
    }
  }
}

const BenchmarkItem* Corpus::find(const ItemKey& key) const {
  const auto it = index_.find(key);
  return it == index_.end() ? nullptr : &items_[it->second];
}

std::optional<std::size_t> Corpus::position(const ItemKey& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const AdapterTable& AdapterTable::builtin() {
  static const AdapterTable table = from_json(nlohmann::json::parse(kBuiltinAdapters));
  return table;
}

AdapterTable AdapterTable::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "adapter table must be an object");
  AdapterTable table;
  for (const auto& [name, fields] : j.items()) {
    const auto ds = parse_dataset(name);
    if (!ds) throw Error(ErrorKind::ConfigError, "adapter table: unknown dataset '" + name + "'");
    FieldMap map;
    for (const auto& [canonical, paths] : fields.items()) {
      map[canonical] = paths.get<std::vector<std::string>>();
    }
    table.maps_[*ds] = std::move(map);
  }
  return table;
}

AdapterTable AdapterTable::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
}

const AdapterTable::FieldMap& AdapterTable::for_dataset(Dataset d) const {
  static const FieldMap empty;
  const auto it = maps_.find(d);
  return it == maps_.end() ? empty : it->second;
}

Corpus parse_jsonl_corpus(std::istream& in, const ParseOptions& options) {
  return parse_stream(in, options, nullptr);
}

Corpus parse_jsonl_corpus(const std::filesystem::path& path, const ParseOptions& options) {
  auto in = open_input(path);
  return parse_stream(in, options, nullptr);
}

Corpus parse_jsonl_corpus(const std::filesystem::path& path, const TaskSchema& schema, ParseOptions options) {
  auto in = open_input(path);
  return parse_stream(in, options, &schema);
}

ordered_json to_json(const BenchmarkItem& item) {
  ordered_json j = to_json(item.key);
  if (item.question) j["question"] = *item.question;
  if (item.choices) j["choices"] = *item.choices;
  if (item.answer_index) {
    const auto& idx = *item.answer_index;
    if (idx.is_list || idx.indices.size() != 1) {
      j["answer_index"] = idx.indices;
    } else {
      j["answer_index"] = idx.indices.front();
    }
  }
  if (item.answer) j["answer"] = *item.answer;
  if (!item.extra.empty()) j["extra"] = item.extra;
  return j;
}

void write_jsonl_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& item : corpus) {
    out << to_json(item).dump() << '\n';
  }
}

void write_jsonl_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  write_jsonl_corpus(corpus, out);
  out.flush();
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path.string());
}

}  // namespace transaudit
