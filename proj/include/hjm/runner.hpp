#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hjm/config.hpp"

namespace hjm {

inline constexpr const char* kVersionTag = "hjmlab 0.1.0";

struct ManifestCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct ManifestFile {
  std::string name;  // relative to the output directory
  std::size_t rows = 0;
};

struct RunManifest {
  ExperimentConfig config;
  std::string version = kVersionTag;
  double wall_seconds = 0.0;
  std::vector<std::pair<std::string, double>> summary;
  std::vector<ManifestCheck> checks;
  std::vector<ManifestFile> files;

  bool passed() const;
};

// Runs the configured experiment, writes its CSVs and `manifest.json` into
// config.out, and returns the manifest. Module errors are rethrown with the
// experiment name prepended.
RunManifest run_experiment(const ExperimentConfig& config);

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace hjm
