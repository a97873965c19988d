#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace transaudit::cli {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Inputs, outputs, seed and tool version of one command. Carries no
/// timestamps, so identical runs write identical bytes.
struct RunManifest {
  std::string command;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;  // relative to the output directory
  nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
};

/// Merges the record under `runs.<command>` of `<out_dir>/run_manifest.json`,
/// keeping the records of other commands.
void write_run_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest);

}  // namespace transaudit::cli
