#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fosr/errors.hpp"
#include "fosr/version.hpp"

namespace fosr {

// FNV-1a over the file's bytes; cheap content fingerprint for manifests.
inline std::uint64_t fnv1a_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError("cannot hash missing file " + file.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::vector<std::pair<std::string, std::string>> input_hashes;  // path, fnv1a
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

inline constexpr const char* kRunManifestName = "run_manifest.json";

inline void add_input_hash(RunManifest& man, const std::filesystem::path& file) {
  man.input_hashes.emplace_back(file.string(), hex64(fnv1a_file(file)));
}

// Hash every regular file under an input directory (sorted for stability).
inline void add_input_dir(RunManifest& man, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != kRunManifestName)
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) add_input_hash(man, f);
}

inline void write_run_manifest(const RunManifest& man,
                               const std::filesystem::path& dir) {
  nlohmann::json j;
  j["command"] = man.command;
  j["config"] = man.config;
  j["seed"] = man.seed;
  j["version"] = kVersion;
  j["wall_seconds"] = man.wall_seconds;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [path, hash] : man.input_hashes)
    inputs.push_back({{"path", path}, {"fnv1a", hash}});
  j["inputs"] = inputs;
  std::ofstream out(dir / kRunManifestName);
  if (!out) throw ValidationError("cannot write manifest in " + dir.string());
  out << j.dump(1) << "\n";
}

}  // namespace fosr
