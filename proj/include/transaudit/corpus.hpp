#pragma once

// In-memory model of translated benchmark corpora and their JSONL form.
//
// Canonical record layout, one JSON object per line (UTF-8):
//
//   {"language":"de","dataset":"arc","subset":"easy","split":"test","id":"Mercury_7175875",
//    "question":"...","choices":["...","..."],"answer_index":2,"extra":{...}}
//
// `answer_index` is zero-based and may be a list for multi-target items.
// Generative datasets carry `answer` instead of `choices`/`answer_index`.
// Fields the reader does not recognise are kept verbatim in `extra`.
//
// Upstream files with native field names (ARC `answerKey`, HellaSwag `ctx` /
// `endings` / `label`, MMLU `subject` / integer `answer`, TruthfulQA
// `mc1_targets`) are mapped through an AdapterTable. Letter or digit answer
// keys are normalised to integers and the original value is kept in
// `extra.answer_original`.
//
// Records without an upstream id get a synthesized one: the zero-based
// ordinal of the record among the lines of the same (dataset, subset, split)
// in that file, zero-padded to six digits ("000000", "000001", ...).

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace transaudit {

using ordered_json = nlohmann::ordered_json;

enum class Dataset { arc, gsm8k, hellaswag, mmlu, truthfulqa };
enum class Split { train, validation, test, dev };
enum class TaskKind { multiple_choice, generative };

inline constexpr Dataset kAllDatasets[] = {Dataset::arc, Dataset::gsm8k, Dataset::hellaswag,
                                           Dataset::mmlu, Dataset::truthfulqa};

std::string_view to_string(Dataset d) noexcept;
std::string_view to_string(Split s) noexcept;
std::string_view to_string(TaskKind k) noexcept;

/// Accepts the canonical names plus common aliases ("val", "hellaswag"/"hella_swag", ...).
std::optional<Dataset> parse_dataset(std::string_view name);
std::optional<Split> parse_split(std::string_view name);

/// Identity of a sample independent of its language.
struct SampleId {
  Dataset dataset{};
  std::string subset;  // empty when the dataset has no subsets
  Split split{};
  std::string id;

  auto operator<=>(const SampleId&) const = default;
  bool operator==(const SampleId&) const = default;
};

struct ItemKey {
  std::string language;
  Dataset dataset{};
  std::string subset;
  Split split{};
  std::string id;

  [[nodiscard]] SampleId sample() const { return {dataset, subset, split, id}; }
  [[nodiscard]] ItemKey with_language(std::string lang) const {
    ItemKey k = *this;
    k.language = std::move(lang);
    return k;
  }
  [[nodiscard]] std::string to_string() const;

  auto operator<=>(const ItemKey&) const = default;
  bool operator==(const ItemKey&) const = default;
};

ordered_json to_json(const ItemKey& key);
/// Reads the five key fields from an object; missing fields raise MissingKeyField.
ItemKey key_from_json(const ordered_json& j);
ItemKey key_from_json(const nlohmann::json& j);

struct TaskSchema {
  Dataset dataset{};
  TaskKind kind{};
  std::vector<std::string> required_fields;
  std::vector<std::string> translatable_fields;
};

const TaskSchema& schema_for(Dataset dataset);

struct AnswerIndex {
  std::vector<int> indices;
  bool is_list = false;  // serialized as an array even when it holds one index

  /// Sorted, de-duplicated view for order-insensitive comparison.
  [[nodiscard]] std::vector<int> as_set() const;

  bool operator==(const AnswerIndex&) const = default;
};

struct BenchmarkItem {
  ItemKey key;
  std::optional<std::string> question;
  std::optional<std::vector<std::string>> choices;
  std::optional<AnswerIndex> answer_index;
  std::optional<std::string> answer;
  ordered_json extra = ordered_json::object();

  // Schema problems noticed while parsing. Derived data; not serialized and
  // not part of equality.
  std::vector<std::string> violations;

  friend bool operator==(const BenchmarkItem& a, const BenchmarkItem& b) {
    return a.key == b.key && a.question == b.question && a.choices == b.choices &&
           a.answer_index == b.answer_index && a.answer == b.answer && a.extra == b.extra;
  }
};

/// Schema gate: returns human-readable problems, empty when the item is valid.
std::vector<std::string> validate_item(const BenchmarkItem& item, const TaskSchema& schema);

/// Immutable, indexed collection of items. Item order is preserved.
class Corpus {
 public:
  Corpus() = default;
  /// Throws DuplicateKey when two items share a key.
  explicit Corpus(std::vector<BenchmarkItem> items);

  [[nodiscard]] const std::vector<BenchmarkItem>& items() const noexcept { return items_; }
  [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }
  [[nodiscard]] bool empty() const noexcept { return items_.empty(); }
  [[nodiscard]] auto begin() const noexcept { return items_.begin(); }
  [[nodiscard]] auto end() const noexcept { return items_.end(); }

  [[nodiscard]] const BenchmarkItem* find(const ItemKey& key) const;
  [[nodiscard]] std::optional<std::size_t> position(const ItemKey& key) const;

  friend bool operator==(const Corpus& a, const Corpus& b) { return a.items_ == b.items_; }

 private:
  std::vector<BenchmarkItem> items_;
  std::map<ItemKey, std::size_t> index_;
};

/// Maps canonical field names to upstream JSON paths ("choices.text") per dataset.
/// Besides the canonical item fields, two helper targets exist:
/// `choice_labels` (labels used to resolve letter answer keys) and
/// `answer_labels` (0/1 flags per choice, read as a multi-target index list).
class AdapterTable {
 public:
  using FieldMap = std::map<std::string, std::vector<std::string>>;

  static const AdapterTable& builtin();
  /// `{"arc": {"answer_index": ["answerKey"], ...}, ...}`
  static AdapterTable from_json(const nlohmann::json& j);
  static AdapterTable load(const std::filesystem::path& path);

  [[nodiscard]] const FieldMap& for_dataset(Dataset d) const;

 private:
  std::map<Dataset, FieldMap> maps_;
};

struct ParseOptions {
  bool strict = false;  // schema violations become SchemaViolation errors
  std::optional<std::string> language;
  std::optional<Dataset> dataset;
  std::optional<Split> split;
  std::optional<std::string> subset;
  const AdapterTable* adapters = nullptr;  // builtin() when null
};

/// Each record's schema comes from its own `dataset` field (or options.dataset).
Corpus parse_jsonl_corpus(std::istream& in, const ParseOptions& options = {});
Corpus parse_jsonl_corpus(const std::filesystem::path& path, const ParseOptions& options = {});
/// Every record must belong to `schema.dataset`; others raise SchemaMismatch.
Corpus parse_jsonl_corpus(const std::filesystem::path& path, const TaskSchema& schema,
                          ParseOptions options = {});

ordered_json to_json(const BenchmarkItem& item);
void write_jsonl_corpus(const Corpus& corpus, std::ostream& out);
void write_jsonl_corpus(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace transaudit
