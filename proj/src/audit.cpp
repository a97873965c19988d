#include "transaudit/audit.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "transaudit/error.hpp"
#include "transaudit/text.hpp"

namespace transaudit {

namespace {

constexpr std::string_view kSourceLanguage = "en";

std::set<Dataset> datasets_of(const Corpus& c) {
  std::set<Dataset> out;
  for (const auto& item : c) out.insert(item.key.dataset);
  return out;
}

void sort_roster(Roster& r) {
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());
}

std::optional<std::vector<int>> mc2_set(const BenchmarkItem& item) {
  const auto it = item.extra.find("mc2_targets");
  if (it == item.extra.end() || !it->is_object()) return std::nullopt;
  const auto labels = it->find("labels");
  if (labels == it->end() || !labels->is_array()) return std::nullopt;
  std::vector<int> out;
  for (std::size_t i = 0; i < labels->size(); ++i) {
    const auto& f = (*labels)[i];
    if ((f.is_boolean() && f.get<bool>()) || (f.is_number() && f.get<double>() != 0.0)) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

bool answers_match(const BenchmarkItem& target, const BenchmarkItem& english) {
  const auto set_of = [](const BenchmarkItem& item) {
    return item.answer_index ? item.answer_index->as_set() : std::vector<int>{};
  };
  if (set_of(target) != set_of(english)) return false;
  // TruthfulQA keeps the multi-target structure in extra; check it when both have it.
  const auto t2 = mc2_set(target);
  const auto e2 = mc2_set(english);
  return !(t2 && e2 && *t2 != *e2);
}

bool is_incomplete(const BenchmarkItem& item, const TaskSchema& schema) {
  if (!item.question || text::is_blank(*item.question)) return true;
  if (schema.kind == TaskKind::multiple_choice) {
    if (!item.choices || item.choices->empty()) return true;
    return std::any_of(item.choices->begin(), item.choices->end(),
                       [](const std::string& c) { return text::is_blank(c); });
  }
  return !item.answer || text::is_blank(*item.answer);
}

}  // namespace

AlignmentResult check_answer_alignment(const Corpus& target, const Corpus& english) {
  const auto english_sets = datasets_of(english);
  for (const auto d : datasets_of(target)) {
    if (!english.empty() && !english_sets.contains(d)) {
      throw Error(ErrorKind::SchemaMismatch,
                  fmt::format("target holds {} items but the English corpus has none", to_string(d)));
    }
  }
  AlignmentResult result;
  for (const auto& item : target) {
    if (item.key.language == kSourceLanguage) continue;
    if (schema_for(item.key.dataset).kind != TaskKind::multiple_choice) continue;
    const auto* source = english.find(item.key.with_language(std::string(kSourceLanguage)));
    if (source == nullptr) {
      result.unmatched.push_back(item.key);
    } else if (!answers_match(item, *source)) {
      result.misaligned.push_back(item.key);
    }
  }
  sort_roster(result.misaligned);
  sort_roster(result.unmatched);
  return result;
}

Roster check_field_completeness(const Corpus& corpus, const TaskSchema& schema) {
  Roster roster;
  for (const auto& item : corpus) {
    if (item.key.language == kSourceLanguage || item.key.dataset != schema.dataset) continue;
    if (is_incomplete(item, schema)) roster.push_back(item.key);
  }
  sort_roster(roster);
  return roster;
}

Roster check_split_consistency(const Corpus& target, const Corpus& english) {
  std::map<std::pair<Dataset, std::string>, std::set<std::pair<Split, std::string>>> placements;
  for (const auto& item : english) {
    placements[{item.key.dataset, item.key.id}].insert({item.key.split, item.key.subset});
  }
  Roster roster;
  for (const auto& item : target) {
    if (item.key.language == kSourceLanguage) continue;
    const auto it = placements.find({item.key.dataset, item.key.id});
    if (it == placements.end()) continue;
    if (!it->second.contains({item.key.split, item.key.subset})) roster.push_back(item.key);
  }
  sort_roster(roster);
  return roster;
}

Roster check_cross_language_coverage(std::span<const Corpus> corpora,
                                     std::span<const std::string> target_languages,
                                     const Roster& exclusions) {
  const std::set<std::string> languages(target_languages.begin(), target_languages.end());
  const std::set<ItemKey> excluded(exclusions.begin(), exclusions.end());

  std::map<SampleId, std::set<std::string>> present;
  for (const auto& corpus : corpora) {
    for (const auto& item : corpus) {
      if (languages.contains(item.key.language)) present[item.key.sample()].insert(item.key.language);
    }
  }
  Roster roster;
  for (const auto& corpus : corpora) {
    for (const auto& item : corpus) {
      if (!languages.contains(item.key.language) || excluded.contains(item.key)) continue;
      if (present[item.key.sample()].size() < languages.size()) roster.push_back(item.key);
    }
  }
  sort_roster(roster);
  return roster;
}

bool AuditReport::clean() const {
  return std::all_of(groups.begin(), groups.end(), [](const GroupReport& g) {
    return g.criterion_a_ok && g.n_c == 0 && g.n_l == 0 && g.inconsistent.empty();
  });
}

const GroupReport* AuditReport::group(Dataset d, Split s) const {
  for (const auto& g : groups) {
    if (g.dataset == d && g.split == s) return &g;
  }
  return nullptr;
}

AuditReport audit(std::span<const Corpus> corpora, std::span<const Corpus> english, const AuditOptions& options) {
  std::vector<BenchmarkItem> english_items;
  for (const auto& c : english) english_items.insert(english_items.end(), c.begin(), c.end());
  const Corpus english_all(std::move(english_items));

  std::vector<BenchmarkItem> target_items;
  std::set<std::string> seen_languages;
  for (const auto& c : corpora) {
    for (const auto& item : c) {
      if (item.key.language == kSourceLanguage) continue;
      target_items.push_back(item);
      seen_languages.insert(item.key.language);
    }
  }
  const Corpus targets(std::move(target_items));

  AuditReport report;
  report.target_languages = options.target_languages.empty()
                                ? std::vector<std::string>(seen_languages.begin(), seen_languages.end())
                                : options.target_languages;

  // A-C are computed suite-wide and bucketed afterwards.
  const auto alignment = check_answer_alignment(targets, english_all);
  Roster incomplete;
  for (const auto d : kAllDatasets) {
    auto r = check_field_completeness(targets, schema_for(d));
    incomplete.insert(incomplete.end(), r.begin(), r.end());
  }
  const auto inconsistent = check_split_consistency(targets, english_all);

  Roster exclusions = incomplete;
  exclusions.insert(exclusions.end(), inconsistent.begin(), inconsistent.end());
  const Corpus* targets_ptr = &targets;
  const auto uncovered =
      check_cross_language_coverage(std::span<const Corpus>(targets_ptr, 1), report.target_languages, exclusions);

  std::map<std::pair<Dataset, Split>, GroupReport> groups;
  auto group_for = [&](const ItemKey& k) -> GroupReport& {
    auto& g = groups[{k.dataset, k.split}];
    g.dataset = k.dataset;
    g.split = k.split;
    return g;
  };
  for (const auto& item : english_all) ++group_for(item.key).n_en;
  for (const auto& item : targets) ++group_for(item.key).n_t;
  for (const auto& k : alignment.misaligned) group_for(k).misaligned.push_back(k);
  for (const auto& k : alignment.unmatched) group_for(k).unmatched.push_back(k);
  for (const auto& k : incomplete) group_for(k).incomplete.push_back(k);
  for (const auto& k : inconsistent) group_for(k).inconsistent.push_back(k);
  for (const auto& k : uncovered) group_for(k).uncovered.push_back(k);

  for (auto& [_, g] : groups) {
    sort_roster(g.incomplete);
    g.n_c = g.incomplete.size();
    g.n_l = g.uncovered.size();
    g.criterion_a_ok = g.misaligned.empty();
    std::map<SampleId, std::size_t> per_sample;
    for (const auto& k : g.incomplete) ++per_sample[k.sample()];
    g.english_with_missing_content = per_sample.size();
    g.missing_content_multi_language = static_cast<std::size_t>(
        std::count_if(per_sample.begin(), per_sample.end(), [](const auto& kv) { return kv.second >= 2; }));
    report.groups.push_back(std::move(g));
  }
  return report;
}

namespace {
ordered_json roster_json(const Roster& r) {
  ordered_json arr = ordered_json::array();
  for (const auto& k : r) arr.push_back(to_json(k));
  return arr;
}
}  // namespace

nlohmann::ordered_json to_json(const AuditReport& report) {
  ordered_json j;
  j["target_languages"] = report.target_languages;
  j["clean"] = report.clean();
  ordered_json groups = ordered_json::array();
  for (const auto& g : report.groups) {
    ordered_json o;
    o["dataset"] = to_string(g.dataset);
    o["split"] = to_string(g.split);
    o["N_en"] = g.n_en;
    o["N_T"] = g.n_t;
    o["N_C"] = g.n_c;
    o["N_L"] = g.n_l;
    o["criterion_A_ok"] = g.criterion_a_ok;
    o["secondary"] = {{"english_with_missing_content", g.english_with_missing_content},
                      {"missing_content_multi_language", g.missing_content_multi_language}};
    o["rosters"] = {{"A_misaligned", roster_json(g.misaligned)},
                    {"A_unmatched", roster_json(g.unmatched)},
                    {"B_incomplete", roster_json(g.incomplete)},
                    {"C_inconsistent", roster_json(g.inconsistent)},
                    {"D_uncovered", roster_json(g.uncovered)}};
    groups.push_back(std::move(o));
  }
  j["groups"] = std::move(groups);
  return j;
}

std::string summary_table(const AuditReport& report, std::size_t roster_cap) {
  std::ostringstream out;
  out << fmt::format("{:<12}{:<12}{:>10}{:>10}{:>8}{:>8}  {}\n", "Dataset", "Split", "N_en", "N_T", "N_C", "N_L",
                     "A");
  for (const auto& g : report.groups) {
    out << fmt::format("{:<12}{:<12}{:>10}{:>10}{:>8}{:>8}  {}\n", to_string(g.dataset), to_string(g.split), g.n_en,
                       g.n_t, g.n_c, g.n_l, g.criterion_a_ok ? "ok" : "MISALIGNED");
  }
  auto print_roster = [&](std::string_view label, const GroupReport& g, const Roster& r) {
    if (r.empty()) return;
    out << fmt::format("\n{} {}/{} ({} keys)\n", label, to_string(g.dataset), to_string(g.split), r.size());
    for (std::size_t i = 0; i < r.size() && i < roster_cap; ++i) out << "  " << r[i].to_string() << '\n';
    if (r.size() > roster_cap) out << fmt::format("  ... {} more (see audit_report.json)\n", r.size() - roster_cap);
  };
  for (const auto& g : report.groups) {
    print_roster("[A misaligned]", g, g.misaligned);
    print_roster("[B incomplete]", g, g.incomplete);
    print_roster("[C inconsistent]", g, g.inconsistent);
    print_roster("[D uncovered]", g, g.uncovered);
  }
  return out.str();
}

double estimate_leakage_inflation(const LeakageParams& p) {
  if (p.eval_split_size == 0) throw Error(ErrorKind::DomainError, "evaluation split size must be positive");
  if (p.context_pool_size > p.eval_split_size) {
    throw Error(ErrorKind::DomainError, "context pool larger than the evaluation split");
  }
  if (p.shots > p.context_pool_size) throw Error(ErrorKind::DomainError, "more shots than context pool items");
  if (!(p.true_accuracy >= 0.0 && p.true_accuracy <= 1.0)) {
    throw Error(ErrorKind::DomainError, "accuracy must lie in [0, 1]");
  }
  const double leak_probability = static_cast<double>(p.shots) / static_cast<double>(p.eval_split_size);
  return 100.0 * leak_probability * (1.0 - p.true_accuracy);
}

}  // namespace transaudit
