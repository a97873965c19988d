#include "cli/digest.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "transaudit/error.hpp"

#ifndef TRANSAUDIT_VERSION
#define TRANSAUDIT_VERSION "0.0.0"
#endif

namespace transaudit::cli {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::IoFailure, "SHA-256 computation failed");
  }
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

void write_run_manifest(const std::filesystem::path& out_dir, const RunManifest& m) {
  const auto path = out_dir / "run_manifest.json";
  nlohmann::json doc = nlohmann::json::object();
  if (std::ifstream in(path); in) {
    doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) doc = nlohmann::json::object();
  }
  doc["tool"] = "transaudit";
  doc["version"] = TRANSAUDIT_VERSION;

  nlohmann::json run;
  run["parameters"] = m.parameters;
  auto inputs = nlohmann::json::array();
  for (const auto& p : m.inputs) inputs.push_back({{"path", p.generic_string()}, {"sha256", sha256_file(p)}});
  run["inputs"] = std::move(inputs);
  auto outputs = nlohmann::json::array();
  for (const auto& p : m.outputs) {
    outputs.push_back({{"path", p.generic_string()}, {"sha256", sha256_file(out_dir / p)}});
  }
  run["outputs"] = std::move(outputs);
  doc["runs"][m.command] = std::move(run);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace transaudit::cli
