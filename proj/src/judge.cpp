#include "transaudit/judge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "transaudit/error.hpp"
#include "transaudit/text.hpp"

namespace transaudit {

namespace {

constexpr std::string_view kBuiltinTemplate = R"(You are an expert translator reviewing a machine translation of an item from a multiple-choice or question-answering benchmark. List every translation error as a span of the translated text.

Use exactly one of these error categories for each span:
{categories}

{severity_rule}

Reply with a single JSON object and nothing else, following this schema:
{schema}
When the translation has no errors, reply {"errors": []}.
{examples}
Source ({source_language}):
{source}

Translation ({target_language}):
{translation}

Answer:
)";

constexpr std::string_view kBuiltinBuckets = R"({
  "A+M": ["accuracy", "mistranslation", "omission", "addition", "untranslated", "untranslated text", "wrong language"],
  "F": ["fluency", "style", "grammar", "spelling", "punctuation", "register", "inconsistency", "character encoding",
        "awkward", "unnatural"],
  "O": ["terminology", "locale", "locale convention", "locale-convention", "other", "non-translation"]
})";

constexpr std::string_view kBuiltinFewShots =
    R"({"source_language":"en","target_language":"de","source":"Which gas do plants take in from the air?","translation":"Welches Gas geben Pflanzen an die Luft ab?","response":"{\"errors\":[{\"span\":\"geben Pflanzen an die Luft ab\",\"category\":\"accuracy/mistranslation\",\"severity\":\"major\"}]}"}
{"source_language":"en","target_language":"fr","source":"The cat sat quietly on the mat.","translation":"Le chat était assis tranquillement sur le tapis.","response":"{\"errors\":[]}"}
{"source_language":"en","target_language":"it","source":"She bought three apples at the market.","translation":"Lei ha comprato tre mele mele al mercato.","response":"{\"errors\":[{\"span\":\"mele mele\",\"category\":\"fluency/grammar\",\"severity\":\"minor\"}]}"}
)";

std::string lower(std::string_view s) {
  std::string out(text::trim(s));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<FewShot> parse_few_shots(std::istream& in, const std::string& origin) {
  std::vector<FewShot> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("source_language").get<std::string>(), j.at("target_language").get<std::string>(),
                     j.at("source").get<std::string>(), j.at("translation").get<std::string>(),
                     j.at("response").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw LineError(ErrorKind::MalformedLine, line_no, origin + ": " + e.what());
    }
  }
  return out;
}

// Replaces {name} tokens present in `values`; other braces are kept as written.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) break;
    const auto name = std::string(tmpl.substr(open + 1, close - open - 1));
    out.append(tmpl.substr(pos, open - pos));
    if (const auto it = values.find(name); it != values.end()) {
      out += it->second;
    } else {
      out.append(tmpl.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::string choice_label(std::size_t i) {
  if (i < 26) return std::string(1, static_cast<char>('A' + i));
  return std::to_string(i + 1);
}

// First balanced {...} object in `s`, string- and escape-aware.
std::optional<std::string_view> first_object(std::string_view s) {
  const auto start = s.find('{');
  if (start == std::string_view::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return s.substr(start, i - start + 1);
    }
  }
  return std::nullopt;
}

std::string_view strip_fences(std::string_view s) {
  const auto fence = s.find("```");
  if (fence == std::string_view::npos) return s;
  auto body = s.substr(fence + 3);
  if (const auto nl = body.find('\n'); nl != std::string_view::npos) body = body.substr(nl + 1);  // language tag
  if (const auto end = body.find("```"); end != std::string_view::npos) body = body.substr(0, end);
  return body;
}

nlohmann::ordered_json flags_json(const std::array<std::array<bool, 2>, 3>& flags) {
  nlohmann::ordered_json j;
  for (const auto b : kBuckets) {
    nlohmann::ordered_json cell;
    for (const auto s : kSeverities) cell[std::string(to_string(s))] = flags[static_cast<int>(b)][static_cast<int>(s)];
    j[std::string(to_string(b))] = std::move(cell);
  }
  return j;
}

std::string num6(double v) {
  if (v == 0.0) v = 0.0;
  return fmt::format("{:.6f}", v);
}

}  // namespace

const std::string_view kSeverityRule =
    "Severity: mark an error as major when it changes or hides the meaning of the text, and as minor when the "
    "text can still be understood correctly despite the error.";

const std::string_view kOutputSchema =
    R"({"errors": [{"span": "<exact text from the translation>", "category": "<one category>", "severity": "major" | "minor"}]})";

std::string_view to_string(Bucket b) noexcept {
  switch (b) {
    case Bucket::accuracy: return "A+M";
    case Bucket::fluency: return "F";
    case Bucket::other: return "O";
  }
  return "?";
}

std::string_view to_string(Severity s) noexcept { return s == Severity::major ? "major" : "minor"; }

std::string_view to_string(ParseStatus s) noexcept {
  switch (s) {
    case ParseStatus::ok: return "ok";
    case ParseStatus::repaired: return "repaired";
    case ParseStatus::failed: return "failed";
  }
  return "?";
}

std::optional<Bucket> parse_bucket(std::string_view s) {
  if (s == "A+M") return Bucket::accuracy;
  if (s == "F") return Bucket::fluency;
  if (s == "O") return Bucket::other;
  return std::nullopt;
}

std::optional<Severity> parse_severity(std::string_view s) {
  const auto l = lower(s);
  if (l == "major") return Severity::major;
  if (l == "minor") return Severity::minor;
  return std::nullopt;
}

// -- categories --------------------------------------------------------------

const CategoryMap& CategoryMap::builtin() {
  static const CategoryMap map = from_json(nlohmann::json::parse(kBuiltinBuckets));
  return map;
}

CategoryMap CategoryMap::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "category map must be an object");
  CategoryMap m;
  for (const auto& [name, list] : j.items()) {
    const auto bucket = parse_bucket(name);
    if (!bucket) throw Error(ErrorKind::ConfigError, "unknown bucket '" + name + "' (expected A+M, F or O)");
    if (!list.is_array()) throw Error(ErrorKind::ConfigError, "bucket '" + name + "' must list categories");
    for (const auto& c : list) {
      const auto key = lower(c.get<std::string>());
      const auto [it, fresh] = m.table_.emplace(key, *bucket);
      if (!fresh && it->second != *bucket) {
        throw Error(ErrorKind::ConfigError, "category '" + key + "' appears in two buckets");
      }
    }
  }
  return m;
}

CategoryMap CategoryMap::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
}

std::optional<Bucket> CategoryMap::lookup(std::string_view category) const {
  const auto c = lower(category);
  if (const auto it = table_.find(c); it != table_.end()) return it->second;
  if (const auto slash = c.find('/'); slash != std::string::npos) {
    if (const auto it = table_.find(lower(std::string_view(c).substr(0, slash))); it != table_.end()) {
      return it->second;
    }
    if (const auto it = table_.find(lower(std::string_view(c).substr(slash + 1))); it != table_.end()) {
      return it->second;
    }
  }
  return std::nullopt;
}

bool CategoryMap::known(std::string_view category) const { return lookup(category).has_value(); }

Bucket CategoryMap::map(std::string_view category) const {
  if (const auto b = lookup(category)) return *b;
  spdlog::warn("unknown MQM category '{}', counted as O", category);
  return Bucket::other;
}

std::vector<std::string> CategoryMap::vocabulary() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : table_) out.push_back(name);
  return out;
}

Bucket map_category(std::string_view category, const CategoryMap& map) { return map.map(category); }

// -- prompting ---------------------------------------------------------------

const PromptTemplate& PromptTemplate::builtin() {
  static const PromptTemplate t{std::string(kBuiltinTemplate)};
  return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) { return {read_file(path)}; }

const std::vector<FewShot>& builtin_few_shots() {
  static const std::vector<FewShot> shots = [] {
    std::istringstream in{std::string(kBuiltinFewShots)};
    return parse_few_shots(in, "builtin few-shots");
  }();
  return shots;
}

std::vector<FewShot> load_few_shots(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  return parse_few_shots(in, path.string());
}

std::string render_segment(const BenchmarkItem& item) {
  std::string out = item.question.value_or("");
  if (item.choices) {
    for (std::size_t i = 0; i < item.choices->size(); ++i) {
      out += fmt::format("\n{}. {}", choice_label(i), (*item.choices)[i]);
    }
  } else if (item.answer) {
    out += "\nAnswer: " + *item.answer;
  }
  return out;
}

std::string build_prompt(const BenchmarkItem& item, const BenchmarkItem* source, std::span<const FewShot> few_shots,
                         const PromptTemplate& tmpl, const CategoryMap& categories) {
  if (source == nullptr) throw Error(ErrorKind::MissingSource, item.key.to_string() + " has no source item");
  if (source->key.sample() != item.key.sample()) {
    throw Error(ErrorKind::MissingSource,
                fmt::format("{} is paired with the unrelated source {}", item.key.to_string(), source->key.to_string()));
  }
  std::string categories_text;
  for (const auto& c : categories.vocabulary()) categories_text += "- " + c + "\n";
  if (!categories_text.empty()) categories_text.pop_back();

  std::string examples;
  if (!few_shots.empty()) {
    examples = "\nExamples:\n";
    for (const auto& s : few_shots) {
      examples += fmt::format("\nSource ({}):\n{}\n\nTranslation ({}):\n{}\n\nAnswer:\n{}\n", s.source_language,
                              s.source, s.target_language, s.translation, s.response);
    }
    examples += "\nNow review this item.\n";
  }
  return fill(tmpl.text, {{"source_language", source->key.language},
                          {"target_language", item.key.language},
                          {"source", render_segment(*source)},
                          {"translation", render_segment(item)},
                          {"categories", categories_text},
                          {"severity_rule", std::string(kSeverityRule)},
                          {"schema", std::string(kOutputSchema)},
                          {"examples", examples}});
}

// -- parsing -----------------------------------------------------------------

std::vector<ErrorSpan> parse_spans_strict(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseFailed, e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::ParseFailed, "response is not a JSON object");
  const auto errors = j.find("errors");
  if (errors == j.end() || !errors->is_array()) throw Error(ErrorKind::ParseFailed, "missing \"errors\" array");
  std::vector<ErrorSpan> spans;
  for (const auto& e : *errors) {
    if (!e.is_object()) throw Error(ErrorKind::ParseFailed, "error entry is not an object");
    const auto span = e.find("span");
    const auto category = e.find("category");
    const auto severity = e.find("severity");
    if (span == e.end() || !span->is_string()) throw Error(ErrorKind::ParseFailed, "error entry without span");
    if (category == e.end() || !category->is_string() || text::is_blank(category->get<std::string>())) {
      throw Error(ErrorKind::ParseFailed, "error entry without category");
    }
    if (severity == e.end() || !severity->is_string()) throw Error(ErrorKind::ParseFailed, "error entry without severity");
    const auto sev = parse_severity(severity->get<std::string>());
    if (!sev) throw Error(ErrorKind::ParseFailed, "severity must be major or minor, got " + severity->dump());
    spans.push_back({span->get<std::string>(), category->get<std::string>(), *sev});
  }
  return spans;
}

ParsedResponse parse_response(std::string_view raw) {
  try {
    return {parse_spans_strict(text::trim(raw)), ParseStatus::ok};
  } catch (const Error&) {
  }
  const auto object = first_object(strip_fences(raw));
  if (object) {
    try {
      return {parse_spans_strict(*object), ParseStatus::repaired};
    } catch (const Error&) {
    }
  }
  return {{}, ParseStatus::failed};
}

// -- aggregation -------------------------------------------------------------

std::size_t majority_threshold(std::size_t pool_size) { return pool_size / 2 + 1; }

MajorityVerdict majority_vote(std::span<const ItemAnnotation> annotations, const CategoryMap& categories,
                              std::optional<std::size_t> pool_size) {
  if (annotations.empty()) throw Error(ErrorKind::EmptyGroup, "no annotations to vote on");
  MajorityVerdict v;
  v.key = annotations.front().key;
  for (const auto& a : annotations) {
    if (a.key != v.key) {
      throw Error(ErrorKind::KeyMismatch, fmt::format("{} voted with {}", a.key.to_string(), v.key.to_string()));
    }
  }
  v.pool_size = pool_size.value_or(annotations.size());
  const auto threshold = majority_threshold(v.pool_size);

  std::array<std::array<std::size_t, 2>, 3> votes{};
  std::size_t spanless = 0;
  for (const auto& a : annotations) {
    if (a.abstains()) continue;
    ++v.valid;
    if (a.spans.empty()) {
      ++spanless;
      continue;
    }
    std::array<std::array<bool, 2>, 3> flagged{};
    for (const auto& s : a.spans) {
      flagged[static_cast<int>(categories.map(s.category))][static_cast<int>(s.severity)] = true;
    }
    for (int b = 0; b < 3; ++b) {
      for (int s = 0; s < 2; ++s) votes[b][s] += flagged[b][s] ? 1 : 0;
    }
  }
  v.excluded = v.valid < threshold;
  if (v.excluded) return v;
  for (int b = 0; b < 3; ++b) {
    for (int s = 0; s < 2; ++s) v.raw[b][s] = votes[b][s] >= threshold;
    v.present[b] = v.raw[b][0] || v.raw[b][1];
    v.maj[b][0] = v.raw[b][0];
    v.maj[b][1] = v.raw[b][1] && !v.raw[b][0];
  }
  v.clean = spanless >= threshold;
  return v;
}

std::array<bool, 3> collapse_severity(const MajorityVerdict& v) {
  std::array<bool, 3> out{};
  for (int b = 0; b < 3; ++b) out[b] = v.raw[b][0] || v.raw[b][1];
  return out;
}

std::vector<MajorityVerdict> aggregate(std::span<const ItemAnnotation> annotations, std::size_t pool_size,
                                       const CategoryMap& categories) {
  std::map<ItemKey, std::vector<ItemAnnotation>> groups;
  for (const auto& a : annotations) groups[a.key].push_back(a);
  std::vector<MajorityVerdict> out;
  out.reserve(groups.size());
  for (const auto& [_, group] : groups) out.push_back(majority_vote(group, categories, pool_size));
  return out;
}

nlohmann::ordered_json to_json(const MajorityVerdict& v) {
  auto j = to_json(v.key);
  j["pool_size"] = v.pool_size;
  j["valid"] = v.valid;
  j["excluded"] = v.excluded;
  j["maj"] = flags_json(v.maj);
  j["raw"] = flags_json(v.raw);
  nlohmann::ordered_json present;
  for (const auto b : kBuckets) present[std::string(to_string(b))] = v.present[static_cast<int>(b)];
  j["present"] = std::move(present);
  j["clean"] = v.clean;
  return j;
}

ErrorRates error_rates(std::span<const MajorityVerdict> verdicts) {
  std::map<std::pair<std::string, Dataset>, RateCell> cells;
  std::map<std::pair<Dataset, Bucket>, SeverityShare> shares;
  ErrorRates out;
  for (const auto& v : verdicts) {
    auto& cell = cells[{v.key.language, v.key.dataset}];
    cell.language = v.key.language;
    cell.dataset = v.key.dataset;
    if (v.excluded) {
      ++cell.excluded;
      ++out.excluded_total;
      continue;
    }
    ++cell.n;
    for (const auto b : kBuckets) {
      const int bi = static_cast<int>(b);
      if (v.present[bi]) ++cell.present_count[bi];
      auto& share = shares[{v.key.dataset, b}];
      share.dataset = v.key.dataset;
      share.bucket = b;
      if (v.maj[bi][0]) ++share.major;
      if (v.maj[bi][1]) ++share.minor;
    }
    if (v.clean) ++cell.clean_count;
  }
  for (auto& [_, cell] : cells) {
    if (cell.n > 0) {
      const double n = static_cast<double>(cell.n);
      std::array<double, 3> rate{};
      for (int b = 0; b < 3; ++b) rate[b] = 1000.0 * static_cast<double>(cell.present_count[b]) / n;
      cell.rate = rate;
      cell.clean_rate = 1000.0 * static_cast<double>(cell.clean_count) / n;
    }
    out.cells.push_back(cell);
  }
  for (auto& [_, share] : shares) {
    const auto total = share.major + share.minor;
    if (total > 0) {
      const auto tenths = std::llround(1000.0 * static_cast<double>(share.major) / static_cast<double>(total));
      share.major_share = static_cast<double>(tenths) / 10.0;
      share.minor_share = static_cast<double>(1000 - tenths) / 10.0;
    }
    out.shares.push_back(share);
  }
  return out;
}

nlohmann::ordered_json to_json(const ErrorRates& r) {
  nlohmann::ordered_json j;
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : r.cells) {
    nlohmann::ordered_json cj;
    cj["language"] = c.language;
    cj["dataset"] = to_string(c.dataset);
    cj["n"] = c.n;
    cj["excluded"] = c.excluded;
    nlohmann::ordered_json counts;
    for (const auto b : kBuckets) counts[std::string(to_string(b))] = c.present_count[static_cast<int>(b)];
    counts["clean"] = c.clean_count;
    cj["counts"] = std::move(counts);
    if (c.rate) {
      nlohmann::ordered_json rates;
      for (const auto b : kBuckets) rates[std::string(to_string(b))] = (*c.rate)[static_cast<int>(b)];
      rates["clean"] = *c.clean_rate;
      cj["per_1k"] = std::move(rates);
    } else {
      cj["per_1k"] = nullptr;
    }
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  auto shares = nlohmann::ordered_json::array();
  for (const auto& s : r.shares) {
    nlohmann::ordered_json sj;
    sj["dataset"] = to_string(s.dataset);
    sj["bucket"] = to_string(s.bucket);
    sj["major"] = s.major;
    sj["minor"] = s.minor;
    sj["major_share"] = s.major_share ? nlohmann::ordered_json(*s.major_share) : nlohmann::ordered_json(nullptr);
    sj["minor_share"] = s.minor_share ? nlohmann::ordered_json(*s.minor_share) : nlohmann::ordered_json(nullptr);
    sj["display"] = s.major_share ? nlohmann::ordered_json(fmt::format("{:.1f}/{:.1f}", *s.major_share, *s.minor_share))
                                  : nlohmann::ordered_json(nullptr);
    shares.push_back(std::move(sj));
  }
  j["severity_shares"] = std::move(shares);
  j["excluded_total"] = r.excluded_total;
  return j;
}

ErrorRates rates_from_json(const nlohmann::json& j) {
  ErrorRates r;
  for (const auto& cj : j.at("cells")) {
    RateCell c;
    c.language = cj.at("language").get<std::string>();
    const auto ds = parse_dataset(cj.at("dataset").get<std::string>());
    if (!ds) throw Error(ErrorKind::SchemaViolation, "unknown dataset in rates");
    c.dataset = *ds;
    c.n = cj.at("n").get<std::size_t>();
    c.excluded = cj.value("excluded", std::size_t{0});
    if (const auto counts = cj.find("counts"); counts != cj.end()) {
      for (const auto b : kBuckets) c.present_count[static_cast<int>(b)] = counts->value(std::string(to_string(b)), std::size_t{0});
      c.clean_count = counts->value("clean", std::size_t{0});
    }
    if (const auto per = cj.find("per_1k"); per != cj.end() && per->is_object()) {
      std::array<double, 3> rate{};
      for (const auto b : kBuckets) rate[static_cast<int>(b)] = per->at(std::string(to_string(b))).get<double>();
      c.rate = rate;
      c.clean_rate = per->at("clean").get<double>();
    }
    r.cells.push_back(std::move(c));
  }
  if (const auto shares = j.find("severity_shares"); shares != j.end()) {
    for (const auto& sj : *shares) {
      SeverityShare s;
      const auto ds = parse_dataset(sj.at("dataset").get<std::string>());
      const auto b = parse_bucket(sj.at("bucket").get<std::string>());
      if (!ds || !b) throw Error(ErrorKind::SchemaViolation, "unknown dataset or bucket in severity shares");
      s.dataset = *ds;
      s.bucket = *b;
      s.major = sj.at("major").get<std::size_t>();
      s.minor = sj.at("minor").get<std::size_t>();
      if (!sj.at("major_share").is_null()) {
        s.major_share = sj.at("major_share").get<double>();
        s.minor_share = sj.at("minor_share").get<double>();
      }
      r.shares.push_back(s);
    }
  }
  r.excluded_total = j.value("excluded_total", std::size_t{0});
  return r;
}

std::string rates_csv(const ErrorRates& r) {
  std::ostringstream out;
  out << "language,dataset,n,excluded,A+M,F,O,clean\n";
  for (const auto& c : r.cells) {
    out << c.language << ',' << to_string(c.dataset) << ',' << c.n << ',' << c.excluded;
    for (int b = 0; b < 3; ++b) out << ',' << (c.rate ? num6((*c.rate)[b]) : std::string());
    out << ',' << (c.clean_rate ? num6(*c.clean_rate) : std::string()) << '\n';
  }
  return out.str();
}

std::string shares_csv(const ErrorRates& r) {
  std::ostringstream out;
  out << "dataset,bucket,major,minor,major_share,minor_share\n";
  for (const auto& s : r.shares) {
    out << to_string(s.dataset) << ',' << to_string(s.bucket) << ',' << s.major << ',' << s.minor << ','
        << (s.major_share ? fmt::format("{:.1f}", *s.major_share) : std::string()) << ','
        << (s.minor_share ? fmt::format("{:.1f}", *s.minor_share) : std::string()) << '\n';
  }
  return out.str();
}

// -- annotation records ------------------------------------------------------

nlohmann::ordered_json to_json(const ItemAnnotation& a) {
  auto j = to_json(a.key);
  j["annotator_id"] = a.annotator_id;
  j["parse_status"] = to_string(a.parse_status);
  auto spans = nlohmann::ordered_json::array();
  for (const auto& s : a.spans) {
    spans.push_back({{"span", s.span_text}, {"category", s.category}, {"severity", to_string(s.severity)}});
  }
  j["spans"] = std::move(spans);
  j["raw_response"] = a.raw_response;
  if (a.raw_attempts.size() > 1) j["raw_attempts"] = a.raw_attempts;
  if (!a.error.empty()) j["error"] = a.error;
  return j;
}

ItemAnnotation annotation_from_json(const nlohmann::json& j) {
  ItemAnnotation a;
  a.key = key_from_json(j);
  a.annotator_id = j.at("annotator_id").get<std::string>();
  const auto status = j.at("parse_status").get<std::string>();
  if (status == "ok") {
    a.parse_status = ParseStatus::ok;
  } else if (status == "repaired") {
    a.parse_status = ParseStatus::repaired;
  } else if (status == "failed") {
    a.parse_status = ParseStatus::failed;
  } else {
    throw Error(ErrorKind::SchemaViolation, "unknown parse_status '" + status + "'");
  }
  for (const auto& s : j.value("spans", nlohmann::json::array())) {
    const auto sev = parse_severity(s.at("severity").get<std::string>());
    if (!sev) throw Error(ErrorKind::SchemaViolation, "bad severity " + s.at("severity").dump());
    a.spans.push_back({s.at("span").get<std::string>(), s.at("category").get<std::string>(), *sev});
  }
  a.raw_response = j.value("raw_response", "");
  a.raw_attempts = j.value("raw_attempts", std::vector<std::string>{});
  if (a.raw_attempts.empty() && !a.raw_response.empty()) a.raw_attempts.push_back(a.raw_response);
  a.error = j.value("error", "");
  return a;
}

std::vector<ItemAnnotation> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::vector<ItemAnnotation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    try {
      out.push_back(annotation_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw LineError(ErrorKind::MalformedLine, line_no, path.string() + ": " + e.what());
    } catch (const Error& e) {
      throw LineError(e.kind(), line_no, path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace transaudit
