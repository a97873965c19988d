#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "transaudit/corpus.hpp"

namespace testing {

using namespace transaudit;

inline ItemKey key(std::string lang, Dataset ds, Split split, std::string id, std::string subset = "") {
  return {std::move(lang), ds, std::move(subset), split, std::move(id)};
}

inline BenchmarkItem mc(ItemKey k, std::string question, std::vector<std::string> choices, int answer) {
  BenchmarkItem item;
  item.key = std::move(k);
  item.question = std::move(question);
  item.choices = std::move(choices);
  item.answer_index = AnswerIndex{{answer}, false};
  return item;
}

inline BenchmarkItem gen(ItemKey k, std::string question, std::string answer) {
  BenchmarkItem item;
  item.key = std::move(k);
  item.question = std::move(question);
  item.answer = std::move(answer);
  return item;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "transaudit-tests" /
                   (name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::size_t count_substr(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

}  // namespace testing
