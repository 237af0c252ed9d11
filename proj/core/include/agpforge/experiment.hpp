#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agpforge {

// Reproduction driver: named experiment pipelines, JSON config ingestion,
// CSV/JSON emission with a run manifest listing every written file.

inline constexpr std::string_view kVersion = "agp-forge 0.1.0";

inline constexpr const char* kExperimentNames[] = {
    "single-spin-check", "two-spin-bound",        "two-spin-fidelity", "ising-fidelity",
    "qpt-size-scan",     "qpt-restriction-scan",  "custom"};

struct ExperimentConfig {
  std::string experiment;
  std::string out_dir = "results";
  int threads = 1;
  std::uint64_t seed = 1;
  std::string document;  // merged JSON document (defaults + user config)
};

/// Built-in defaults for a named experiment.
ExperimentConfig default_config(std::string_view experiment);

/// Parse a JSON config document and merge it over the experiment defaults.
/// Throws std::invalid_argument on malformed JSON or a missing experiment.
ExperimentConfig load_config(const std::string& json_text,
                             std::optional<std::string> experiment_override = {});

struct Finding {
  std::string field;
  std::string message;
};

/// Pure configuration check; returns every violated constraint.
std::vector<Finding> validate(const ExperimentConfig& config);

struct ManifestFile {
  std::string path;      // relative to out_dir
  std::string fnv1a64;   // content hash, hex
};

struct RunManifest {
  std::string config_snapshot;   // JSON
  std::string version;
  double wall_time_s = 0.0;
  std::string diagnostics;       // JSON: per-module ranks, residuals, deltas
  std::vector<ManifestFile> files;
};

/// Execute the configured experiment, writing data files, a plot script and
/// manifest.json under out_dir.  Deterministic for a fixed config and seed.
/// Throws on validation failures (callers should validate() first) and on
/// runtime degradations beyond tolerance.
RunManifest run(const ExperimentConfig& config);

std::string manifest_json(const RunManifest& manifest);

/// FNV-1a 64-bit content hash, hex-encoded (manifest entries).
std::string fnv1a64_hex(std::string_view bytes);

}  // namespace agpforge
