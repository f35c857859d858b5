#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gensc/manifest.hpp"
#include "gensc/rng.hpp"
#include "gensc/tensor.hpp"

namespace gensc {

struct AugmentPlan {
  std::vector<int> snr_list;
  NoiseReference normalization = NoiseReference::per_tensor_power;
  SeedSpec seed;
  std::filesystem::path output_root;

  void validate() const;
};

/// Stage name used for the noise stream of one SNR level.
std::string augment_stage(int snr_db);

/// Noisy copy of `clean` at `snr_db`, drawn from the (sample_id,
/// "augment:<snr>") stream. Without a reference power the tensor's own mean
/// power is used.
FeatureTensor make_noisy_feature(const FeatureTensor& clean, const std::string& sample_id, int snr_db,
                                 const SeedSpec& seed, std::optional<double> reference_power = std::nullopt);

/// Mean element power over every base feature in the manifest.
double global_feature_power(const DatasetManifest& m);

/// Writes output_root/noisy/snr_<v>/<id>.gsc for every sample and SNR and
/// output_root/manifest.json with paths rebased onto output_root. Existing
/// identical files are accepted; differing ones raise conflict. Input files
/// are only read.
DatasetManifest augment_dataset(const DatasetManifest& m, const AugmentPlan& plan, unsigned jobs = 1);

/// Three-sigma band of a measured SNR for an n-element Gaussian noise draw.
double snr_tolerance_db(std::size_t n);

struct VerificationEntry {
  std::string sample_id;
  int snr_db = 0;
  double measured_db = 0.0;
  double expected_db = 0.0;
  double tolerance_db = 0.0;
  bool flagged = false;
  std::string error;  // unreadable or mismatched files
};

struct VerificationSummary {
  std::size_t entries = 0;
  std::size_t flagged = 0;
  double max_abs_deviation_db = 0.0;
  std::vector<std::pair<int, double>> mean_deviation_db;  // per SNR level
};

struct VerificationReport {
  std::vector<VerificationEntry> entries;  // manifest order, then ascending SNR
  VerificationSummary summary;

  bool ok() const noexcept { return summary.flagged == 0; }
};

VerificationReport verify_collection(const DatasetManifest& m, unsigned jobs = 1);

}  // namespace gensc
