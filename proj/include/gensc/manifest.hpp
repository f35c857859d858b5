#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace gensc {

enum class Split { train, test };

/// Which signal power an SNR is referenced to when noise is injected.
enum class NoiseReference { per_tensor_power, global_power };

std::string to_string(Split split);
std::string to_string(NoiseReference ref);
NoiseReference parse_noise_reference(const std::string& name);

struct SampleEntry {
  std::string id;
  std::size_t label = 0;
  Split split = Split::train;
  std::filesystem::path ground_truth_path;
  std::filesystem::path feature_path;
  std::map<int, std::filesystem::path> noisy_features;  // keyed by SNR in dB
  std::optional<std::filesystem::path> segmentation_mask_path;
};

/// How a noisy collection was produced; recorded per SNR so that
/// verification can recompute the expected per-tensor SNR.
struct AugmentationRecord {
  NoiseReference reference = NoiseReference::per_tensor_power;
  double reference_power = 0.0;  // only meaningful for global_power
  std::uint64_t master_seed = 0;
};

struct ManifestSummary {
  std::size_t classes = 0;
  std::size_t samples = 0;
  std::size_t train = 0;
  std::size_t test = 0;
  std::vector<int> snr_levels;
};

struct DatasetManifest {
  int version = 1;
  std::vector<std::string> classes;
  std::vector<SampleEntry> samples;
  std::map<int, AugmentationRecord> augmentation;
  /// Directory that relative paths resolve against. Not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& rel) const { return base_dir / rel; }
  const SampleEntry* find(const std::string& id) const;
  ManifestSummary summary() const;
};

inline constexpr int kManifestVersion = 1;

/// Structural checks only: label range, unique ids, relative paths.
void validate_manifest(const DatasetManifest& m);

/// Every referenced file exists; features, noisy features and masks parse as
/// tensors (masks must be u8 rank 2 or 3). Errors name the sample id.
void check_manifest_files(const DatasetManifest& m);

DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::ordered_json manifest_to_json(const DatasetManifest& m);

/// Parses, validates and, when `check_files` is set, opens every referenced file.
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);

/// Writes deterministic UTF-8 JSON (fixed key order, two-space indent).
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace gensc
