#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gensc/classical.hpp"
#include "gensc/codec.hpp"
#include "gensc/manifest.hpp"
#include "gensc/quantum.hpp"
#include "gensc/report.hpp"
#include "gensc/rng.hpp"

namespace gensc {

enum class Pipeline { classical_digital, classical_jscc, quantum };

std::string to_string(Pipeline p);
Pipeline parse_pipeline(const std::string& name);

inline constexpr const char* kSeedEnvVar = "GENSC_SEED";

/// Experiment description, read from a JSON file. Relative paths resolve
/// against the directory holding the config.
///
///   dataset          manifest path (required)
///   pipeline         classical-digital | classical-jscc | quantum
///   model_tag        row label in the report (default: pipeline name)
///   split            train | test | all (default all)
///   channel          { constellation, ofdm: { n_subcarriers, cyclic_prefix_len } }
///   quantizer        { bits, range_mode: per-tensor | fixed, lo, hi }
///   quantum          { embedding, n_qubits, entanglement, theta, p_bitflip,
///                      p_phaseflip, correction, readout, simulation }
///                    p_* are required for the quantum pipeline, either one
///                    value or one per sweep point.
///   snr_sweep        list of dB values; "inf" is the noiseless sentinel
///   seed             u64
///   outputs          { dir }
///   external_scores  optional sidecar path
///   predictions      optional prediction log path
struct ExperimentConfig {
  std::filesystem::path base_dir;
  std::string dataset;
  Pipeline pipeline = Pipeline::classical_jscc;
  std::string model_tag;
  std::optional<Split> split;
  ChannelConfig channel;
  QuantizerConfig quantizer;
  QuantumChannelConfig quantum;
  std::vector<double> p_bitflip;    // one per sweep point once resolved
  std::vector<double> p_phaseflip;
  std::vector<double> snr_sweep;
  std::optional<std::uint64_t> config_seed;
  SeedSpec seed;
  std::string seed_source = "default";
  std::string output_dir;
  std::optional<std::string> external_scores;
  std::optional<std::string> predictions;

  std::filesystem::path resolve(const std::string& p) const { return base_dir / p; }
  /// Schema rules plus, when `check_paths` is set, existence of referenced files.
  void validate(bool check_paths = true) const;
  /// Full resolved configuration, including the seed actually used. The
  /// output directory is left out so reruns elsewhere stay byte-identical.
  nlohmann::ordered_json to_json() const;
  /// Channel and quantum settings for one sweep point.
  ChannelConfig channel_at(std::size_t sweep_index) const;
  QuantumChannelConfig quantum_at(std::size_t sweep_index) const;
};

ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Seed precedence: command line, then config, then $GENSC_SEED, then 0.
void resolve_seed(ExperimentConfig& cfg, std::optional<std::uint64_t> cli_seed);

/// Stream stage for a pipeline at one sweep point, e.g. "classical-jscc:10".
std::string transmit_stage(Pipeline p, double snr_db);

struct TransmitOutcome {
  FeatureTensor output;
  std::optional<double> ber;
  std::optional<double> compression_rate;
  std::optional<std::uint64_t> compressed_bytes;
};

/// One feature tensor through the configured pipeline at one sweep point.
TransmitOutcome transmit_feature(const FeatureTensor& clean, const ExperimentConfig& cfg, std::size_t sweep_index,
                                 RandomStream& stream);

/// Prediction log:
///   { "classification": { "<snr>": { "<sample>": label } },
///     "segmentation":   { "<snr>": { "<sample>": "<mask path>" } } }
struct PredictionLog {
  std::map<double, std::map<std::string, std::size_t>> classification;
  std::map<double, std::map<std::string, std::string>> segmentation;

  static PredictionLog from_json(const nlohmann::json& j);
  static PredictionLog load(const std::filesystem::path& path);
};

/// Every selected sample at every sweep point, plus one group record per
/// sweep point carrying classification metrics when predictions exist.
/// Per-sample failures become error records; the run continues.
MetricsReport run_experiment(const ExperimentConfig& cfg, unsigned jobs = 1);

/// report.csv, report.json, series/<metric>.csv and resolved-config.json.
std::vector<std::filesystem::path> write_outputs(const MetricsReport& report, const ExperimentConfig& cfg,
                                                 const std::filesystem::path& out_dir);

}  // namespace gensc
