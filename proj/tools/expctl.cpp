// expctl: command line front end for the gensc simulator.
//
// Exit codes: 0 ok, 1 internal error, 2 usage or invalid config, 3 I/O or
// data error, 4 format or schema error, 5 conflict, 6 verification failed.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gensc/error.hpp"
#include "gensc/experiment.hpp"
#include "gensc/manifest.hpp"
#include "gensc/metrics.hpp"
#include "gensc/noisegen.hpp"
#include "gensc/quantum.hpp"
#include "gensc/report.hpp"
#include "gensc/tensor.hpp"

namespace fs = std::filesystem;
using namespace gensc;
using ojson = nlohmann::ordered_json;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kData = 3,
  kFormat = 4,
  kConflict = 5,
  kVerifyFailed = 6,
};

int exit_code(Errc e) {
  switch (e) {
    case Errc::config_invalid:
    case Errc::invalid_argument:
    case Errc::mode_mismatch:
      return kUsage;
    case Errc::bad_magic:
    case Errc::bad_version:
    case Errc::truncated:
    case Errc::trailing_bytes:
    case Errc::unknown_dtype:
    case Errc::schema:
    case Errc::duplicate_id:
    case Errc::corrupt_table:
      return kFormat;
    case Errc::conflict:
      return kConflict;
    default:
      return kData;
  }
}

struct Globals {
  bool quiet = false;
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  std::string out;
};

Globals g;

void info(const std::string& s) {
  if (!g.quiet) std::cout << s << "\n";
}

void write_json(const fs::path& path, const ojson& j) {
  const auto text = j.dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ExperimentConfig config_with_overrides(const std::string& path) {
  auto cfg = load_config(path);
  resolve_seed(cfg, g.seed);
  return cfg;
}

fs::path output_dir(const ExperimentConfig& cfg) {
  if (!g.out.empty()) return g.out;
  if (!cfg.output_dir.empty()) return cfg.resolve(cfg.output_dir);
  throw Error(Errc::config_invalid, "no output directory: pass --out or set outputs.dir");
}

std::uint64_t seed_or_default() {
  ExperimentConfig tmp;
  resolve_seed(tmp, g.seed);
  return tmp.seed.master_seed;
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& config, const std::string& manifest) {
  if (config.empty() == manifest.empty()) throw Error(Errc::config_invalid, "validate needs exactly one of --config or --manifest");
  fs::path mpath = manifest;
  if (!config.empty()) {
    const auto cfg = config_with_overrides(config);
    cfg.validate();
    mpath = cfg.resolve(cfg.dataset);
    info("config ok: pipeline " + to_string(cfg.pipeline) + ", " + std::to_string(cfg.snr_sweep.size()) +
         " sweep points, seed " + std::to_string(cfg.seed.master_seed) + " (" + cfg.seed_source + ")");
  }
  const auto m = load_manifest(mpath, true);
  const auto s = m.summary();
  std::string snrs;
  for (int v : s.snr_levels) snrs += (snrs.empty() ? "" : ",") + std::to_string(v);
  info("manifest ok: " + std::to_string(s.classes) + " classes, " + std::to_string(s.samples) + " samples (" +
       std::to_string(s.train) + " train, " + std::to_string(s.test) + " test), noisy SNR levels [" + snrs + "]");
  return kOk;
}

void print_verification(const VerificationReport& r) {
  for (const auto& e : r.entries)
    if (e.flagged && !g.quiet)
      std::cout << "FLAG " << e.sample_id << " @" << e.snr_db << " dB: "
                << (e.error.empty() ? "measured " + format_number(e.measured_db) + " dB, expected " +
                                          format_number(e.expected_db) + " +/- " + format_number(e.tolerance_db)
                                    : e.error)
                << "\n";
  std::string means;
  for (const auto& [snr, dev] : r.summary.mean_deviation_db)
    means += " " + std::to_string(snr) + "dB:" + format_number(std::round(dev * 1e4) / 1e4);
  info(std::to_string(r.summary.entries) + " entries, " + std::to_string(r.summary.flagged) +
       " flagged, mean deviation" + means);
}

int cmd_augment(const std::string& manifest, const std::vector<int>& snrs, const std::string& normalization) {
  if (g.out.empty()) throw Error(Errc::config_invalid, "augment needs --out");
  const auto m = load_manifest(manifest, true);
  AugmentPlan plan;
  plan.snr_list = snrs;
  plan.normalization = parse_noise_reference(normalization);
  plan.seed.master_seed = seed_or_default();
  plan.output_root = g.out;
  const auto out = augment_dataset(m, plan, g.jobs);
  info("wrote " + std::to_string(m.samples.size() * snrs.size()) + " noisy tensors and " +
       (plan.output_root / "manifest.json").string());
  const auto r = verify_collection(out, g.jobs);
  print_verification(r);
  return r.ok() ? kOk : kVerifyFailed;
}

int cmd_verify(const std::string& manifest) {
  const auto m = load_manifest(manifest, false);
  const auto r = verify_collection(m, g.jobs);
  print_verification(r);
  return r.ok() ? kOk : kVerifyFailed;
}

int run_and_write(const ExperimentConfig& cfg) {
  const auto report = run_experiment(cfg, g.jobs);
  const auto dir = output_dir(cfg);
  const auto files = write_outputs(report, cfg, dir);
  std::size_t failures = 0;
  for (const auto& r : report.rows) failures += r.failures;
  info("wrote " + std::to_string(files.size()) + " files to " + dir.string() + " (" + std::to_string(report.rows.size()) +
       " rows, " + std::to_string(failures) + " failed samples)");
  return kOk;
}

// Single-tensor mode prints metrics and writes the received tensor.
int transmit_one(const ExperimentConfig& cfg, const std::string& in) {
  const auto clean = read_tensor(in);
  const auto dir = output_dir(cfg);
  ojson results = ojson::array();
  for (std::size_t i = 0; i < cfg.snr_sweep.size(); ++i) {
    const double snr = cfg.snr_sweep[i];
    auto stream = derive_stream(cfg.seed, fs::path(in).stem().string(), transmit_stage(cfg.pipeline, snr));
    const auto out = transmit_feature(clean, cfg, i, stream);
    const auto path = dir / (fs::path(in).stem().string() + "_snr_" + format_number(snr) + ".gsc");
    write_tensor(out.output, path);
    ojson r;
    r["snr_db"] = format_number(snr);
    r["output"] = path.generic_string();
    r["mse"] = mse(clean, out.output);
    r["psnr_db"] = format_number(psnr(clean, out.output));
    if (out.ber) r["ber"] = *out.ber;
    if (out.compression_rate) r["compression_rate"] = format_rate(*out.compression_rate);
    results.push_back(std::move(r));
  }
  if (!g.quiet) std::cout << results.dump(2) << "\n";
  return kOk;
}

int cmd_transmit(const std::string& config, const std::string& pipeline_name, bool digital, bool jscc,
                 const std::string& in, const std::vector<std::string>& snrs, const std::string& constellation,
                 bool ofdm) {
  std::vector<Pipeline> picked;
  if (!pipeline_name.empty()) picked.push_back(parse_pipeline(pipeline_name));
  if (digital) picked.push_back(Pipeline::classical_digital);
  if (jscc) picked.push_back(Pipeline::classical_jscc);
  for (const auto p : picked)
    if (p != picked.front()) throw Error(Errc::config_invalid, "conflicting pipeline selections");

  ExperimentConfig cfg;
  if (!config.empty()) {
    cfg = config_with_overrides(config);
    if (!picked.empty() && picked.front() != cfg.pipeline)
      throw Error(Errc::config_invalid, "--pipeline conflicts with the config's pipeline " + to_string(cfg.pipeline));
  } else {
    if (in.empty()) throw Error(Errc::config_invalid, "transmit needs --config or --in");
    if (picked.empty()) throw Error(Errc::config_invalid, "transmit needs a pipeline");
    cfg.pipeline = picked.front();
    if (cfg.pipeline == Pipeline::quantum) throw Error(Errc::config_invalid, "use quantum-sim for the quantum pipeline");
    cfg.model_tag = to_string(cfg.pipeline);
    cfg.dataset = "-";
    resolve_seed(cfg, g.seed);
  }
  if (!in.empty()) {
    if (!snrs.empty()) {
      cfg.snr_sweep.clear();
      for (const auto& s : snrs) cfg.snr_sweep.push_back(s == "inf" ? kInfinityDb : std::stod(s));
    }
    cfg.channel.mode = cfg.pipeline == Pipeline::classical_digital ? ChannelMode::digital : ChannelMode::analog_jscc;
    if (!constellation.empty()) cfg.channel.constellation = parse_constellation(constellation);
    if (ofdm && !cfg.channel.ofdm) cfg.channel.ofdm = OfdmConfig{};
    cfg.validate(false);
    return transmit_one(cfg, in);
  }
  if (cfg.pipeline == Pipeline::quantum) throw Error(Errc::config_invalid, "use quantum-sim for the quantum pipeline");
  return run_and_write(cfg);
}

struct QuantumFlags {
  std::string embedding = "amplitude";
  int n_qubits = 4;
  std::string entanglement = "none";
  double p_bitflip = 0.0;
  double p_phaseflip = 0.0;
  std::string correction = "none";
  std::string simulation = "trajectory";
};

int cmd_quantum(const std::string& config, const std::string& in, const QuantumFlags& f) {
  if (!config.empty()) {
    const auto cfg = config_with_overrides(config);
    if (cfg.pipeline != Pipeline::quantum)
      throw Error(Errc::config_invalid, "quantum-sim needs a config with pipeline quantum");
    if (in.empty()) return run_and_write(cfg);
    cfg.validate(false);
    return transmit_one(cfg, in);
  }
  if (in.empty()) throw Error(Errc::config_invalid, "quantum-sim needs --config or --in");
  ExperimentConfig cfg;
  cfg.pipeline = Pipeline::quantum;
  cfg.model_tag = "quantum";
  cfg.dataset = "-";
  cfg.quantum.embedding = parse_embedding(f.embedding);
  cfg.quantum.readout = cfg.quantum.embedding == Embedding::angle ? Readout::expectation_z : Readout::amplitude_readback;
  cfg.quantum.n_qubits = f.n_qubits;
  cfg.quantum.entanglement.kind = parse_entanglement(f.entanglement);
  cfg.quantum.correction = parse_correction(f.correction);
  cfg.quantum.simulation = parse_noise_simulation(f.simulation);
  cfg.snr_sweep = {0.0};
  cfg.p_bitflip = {f.p_bitflip};
  cfg.p_phaseflip = {f.p_phaseflip};
  resolve_seed(cfg, g.seed);
  cfg.validate(false);
  return transmit_one(cfg, in);
}

int cmd_metrics(const std::string& reference, const std::string& test, std::optional<double> peak,
                const std::string& mask_truth, const std::string& mask_pred, std::size_t classes) {
  ojson j;
  if (!reference.empty() || !test.empty()) {
    if (reference.empty() || test.empty()) throw Error(Errc::config_invalid, "--reference and --test go together");
    const auto a = read_tensor(reference), b = read_tensor(test);
    j["mse"] = mse(a, b);
    j["psnr_db"] = format_number(psnr(a, b, peak));
    j["snr_db"] = format_number(empirical_snr(a, b));
  }
  if (!mask_truth.empty() || !mask_pred.empty()) {
    if (mask_truth.empty() || mask_pred.empty())
      throw Error(Errc::config_invalid, "--mask-truth and --mask-pred go together");
    const auto a = read_tensor(mask_truth), b = read_tensor(mask_pred);
    j["iou"] = iou(a, b);
    if (classes > 0) j["mpa"] = mpa(a, b, classes);
  }
  if (j.empty()) throw Error(Errc::config_invalid, "metrics needs tensors or masks to compare");
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_report(const std::vector<std::string>& inputs) {
  if (g.out.empty()) throw Error(Errc::config_invalid, "report needs --out");
  MetricsReport merged = load_report(inputs.front());
  for (std::size_t i = 1; i < inputs.size(); ++i) merged = merge_reports(merged, load_report(inputs[i]));
  const fs::path dir = g.out;
  const auto csv = report_to_csv(merged);
  write_file_bytes(dir / "report.csv", std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  write_json(dir / "report.json", report_to_json(merged));
  const auto series = emit_plot_data(merged, dir);
  info("merged " + std::to_string(inputs.size()) + " reports into " + std::to_string(merged.rows.size()) + " rows, " +
       std::to_string(series.size()) + " series");
  return kOk;
}

// Small synthetic dataset with masks, prediction logs and an external-score
// sidecar, for examples and tests.
int cmd_synth(std::size_t n_samples, std::size_t n_classes, std::size_t dim, std::size_t mask_size,
              const std::vector<int>& snrs) {
  if (g.out.empty()) throw Error(Errc::config_invalid, "synth needs --out");
  if (n_samples == 0 || n_classes < 2 || dim == 0 || mask_size < 4)
    throw Error(Errc::config_invalid, "synth needs samples >= 1, classes >= 2, dim >= 1, mask-size >= 4");
  const fs::path root = g.out;
  const SeedSpec seed{seed_or_default()};

  DatasetManifest m;
  m.base_dir = root;
  for (std::size_t c = 0; c < n_classes; ++c) m.classes.push_back("class_" + std::string(c < 10 ? "0" : "") + std::to_string(c));

  ojson cls = ojson::object(), seg = ojson::object(), scores = ojson::object();
  for (int snr : snrs) {
    cls[std::to_string(snr)] = ojson::object();
    seg[std::to_string(snr)] = ojson::object();
  }

  for (std::size_t i = 0; i < n_samples; ++i) {
    SampleEntry s;
    s.id = "s" + std::string(i < 100 ? (i < 10 ? "00" : "0") : "") + std::to_string(i);
    s.label = i % n_classes;
    s.split = i % 5 == 4 ? Split::test : Split::train;
    auto stream = derive_stream(seed, s.id, "synth");

    std::vector<double> image(64);
    for (auto& v : image) v = static_cast<double>(stream.next_u64() % 256);
    s.ground_truth_path = "ground_truth/" + s.id + ".gsc";
    write_tensor(FeatureTensor(DType::u8, {8, 8}, image), root / s.ground_truth_path);

    std::vector<double> feat(dim);
    for (std::size_t j = 0; j < dim; ++j)
      feat[j] = std::cos(2.0 * std::numbers::pi * static_cast<double>((j + 1) * (s.label + 1)) / static_cast<double>(dim)) +
                0.3 * stream.normal();
    s.feature_path = "features/" + s.id + ".gsc";
    write_tensor(FeatureTensor(DType::f32, {dim}, feat), root / s.feature_path);

    // Square of the sample's class on background 0.
    const std::size_t lo = mask_size / 4, hi = lo + mask_size / 2;
    std::vector<double> mask(mask_size * mask_size, 0.0);
    for (std::size_t r = lo; r < hi; ++r)
      for (std::size_t c = lo; c < hi; ++c) mask[r * mask_size + c] = static_cast<double>(s.label == 0 ? 1 : s.label);
    s.segmentation_mask_path = "masks/" + s.id + ".gsc";
    write_tensor(FeatureTensor(DType::u8, {mask_size, mask_size}, mask), root / *s.segmentation_mask_path);

    for (int snr : snrs) {
      // Predictions get worse at low SNR: the label is kept with probability
      // growing with SNR and the mask drifts by a pixel or two.
      const double keep = std::min(0.95, 0.55 + 0.015 * snr);
      std::size_t pred = s.label;
      if (stream.uniform() >= keep) pred = (s.label + 1 + stream.next_u64() % (n_classes - 1)) % n_classes;
      cls[std::to_string(snr)][s.id] = pred;

      const std::size_t shift = snr >= 20 ? 1 : 2;
      std::vector<double> pmask(mask.size(), 0.0);
      for (std::size_t r = 0; r < mask_size; ++r)
        for (std::size_t c = shift; c < mask_size; ++c) pmask[r * mask_size + c] = mask[r * mask_size + c - shift];
      const auto rel = "predictions/snr_" + std::to_string(snr) + "/" + s.id + ".gsc";
      write_tensor(FeatureTensor(DType::u8, {mask_size, mask_size}, pmask), root / rel);
      seg[std::to_string(snr)][s.id] = rel;

      scores[s.id]["clip_s"][std::to_string(snr)] = std::round((30.0 + 0.2 * snr + stream.uniform()) * 100.0) / 100.0;
    }
    m.samples.push_back(std::move(s));
  }
  validate_manifest(m);
  save_manifest(m, root / "manifest.json");
  write_json(root / "predictions.json", ojson{{"classification", cls}, {"segmentation", seg}});
  write_json(root / "scores.json", scores);
  info("wrote " + std::to_string(n_samples) + " samples to " + root.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-communication link simulator: channels, noise augmentation, metrics and reports"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--quiet,-q", g.quiet, "Suppress progress output");
  app.add_option("--jobs,-j", g.jobs, "Worker threads (0 = all cores)");
  app.add_option("--seed", g.seed, "Master seed; overrides the config and $GENSC_SEED");
  app.add_option("--out,-o", g.out, "Output directory");
  app.footer(
      "Exit codes: 0 ok, 2 usage or invalid config, 3 I/O or data error, 4 format or schema error,\n"
      "5 conflicting data, 6 verification failed.");

  std::string config, manifest;
  auto* validate = app.add_subcommand("validate", "Check a config and its manifest (or a manifest alone); no side effects");
  validate->add_option("--config,-c", config, "Experiment config");
  validate->add_option("--manifest,-m", manifest, "Dataset manifest");

  std::vector<int> aug_snrs{10, 30};
  std::string normalization = "per-tensor-power";
  auto* augment = app.add_subcommand("augment", "Write AWGN-corrupted copies of every feature and an augmented manifest");
  augment->add_option("--manifest,-m", manifest, "Input manifest")->required();
  augment->add_option("--snr", aug_snrs, "SNR levels in dB")->delimiter(',');
  augment->add_option("--normalization", normalization, "per-tensor-power | global-power");

  auto* verify = app.add_subcommand("verify", "Measure the SNR of every noisy feature; exit 6 on flagged entries");
  verify->add_option("--manifest,-m", manifest, "Augmented manifest")->required();

  std::string pipeline, in, constellation;
  bool digital = false, jscc = false, ofdm = false;
  std::vector<std::string> tx_snrs;
  auto* transmit = app.add_subcommand(
      "transmit", "Run a classical pipeline over a dataset (--config) or over one tensor (--in)");
  transmit->add_option("--config,-c", config, "Experiment config");
  transmit->add_option("--pipeline", pipeline, "classical-digital | classical-jscc");
  transmit->add_flag("--digital", digital, "Shorthand for --pipeline classical-digital");
  transmit->add_flag("--jscc", jscc, "Shorthand for --pipeline classical-jscc");
  transmit->add_option("--in,-i", in, "Single feature tensor to transmit");
  transmit->add_option("--snr", tx_snrs, "SNR levels in dB (\"inf\" = noiseless)")->delimiter(',');
  transmit->add_option("--constellation", constellation, "BPSK | QPSK | 16QAM | 64QAM");
  transmit->add_flag("--ofdm", ofdm, "Frame symbols with OFDM (64 subcarriers, prefix 16)");

  QuantumFlags qf;
  auto* quantum = app.add_subcommand("quantum-sim", "Run the quantum pipeline over a dataset (--config) or one tensor (--in)");
  quantum->add_option("--config,-c", config, "Experiment config with pipeline quantum");
  quantum->add_option("--in,-i", in, "Single feature tensor");
  quantum->add_option("--embedding", qf.embedding, "amplitude | angle");
  quantum->add_option("--n-qubits", qf.n_qubits, "Physical qubits");
  quantum->add_option("--entanglement", qf.entanglement, "none | ring-cnot | controlled-phase");
  quantum->add_option("--p-bitflip", qf.p_bitflip, "Bit-flip probability");
  quantum->add_option("--p-phaseflip", qf.p_phaseflip, "Phase-flip probability");
  quantum->add_option("--correction", qf.correction, "none | repetition3-bitflip | repetition3-phaseflip");
  quantum->add_option("--simulation", qf.simulation, "trajectory | density-matrix");

  std::string reference, test, mask_truth, mask_pred;
  std::optional<double> peak;
  std::size_t classes = 0;
  auto* metrics = app.add_subcommand("metrics", "Compare two tensors (MSE, PSNR, SNR) and/or two masks (IoU, MPA)");
  metrics->add_option("--reference", reference, "Reference tensor");
  metrics->add_option("--test", test, "Test tensor");
  metrics->add_option("--max", peak, "PSNR peak value");
  metrics->add_option("--mask-truth", mask_truth, "Ground-truth class mask");
  metrics->add_option("--mask-pred", mask_pred, "Predicted class mask");
  metrics->add_option("--classes", classes, "Class count for MPA");

  std::vector<std::string> inputs;
  auto* report = app.add_subcommand("report", "Merge report.json files keyed by (model tag, SNR); exit 5 on conflicts");
  report->add_option("inputs", inputs, "report.json files")->required()->expected(1, -1);

  std::size_t n_samples = 12, n_classes = 3, dim = 256, mask_size = 16;
  std::vector<int> synth_snrs{10, 30};
  auto* synth = app.add_subcommand("synth", "Generate a small synthetic dataset with prediction logs");
  synth->add_option("--samples", n_samples, "Sample count");
  synth->add_option("--classes", n_classes, "Class count");
  synth->add_option("--dim", dim, "Feature length");
  synth->add_option("--mask-size", mask_size, "Mask side length");
  synth->add_option("--snr", synth_snrs, "SNR levels for prediction logs")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) return cmd_validate(config, manifest);
    if (*augment) return cmd_augment(manifest, aug_snrs, normalization);
    if (*verify) return cmd_verify(manifest);
    if (*transmit) return cmd_transmit(config, pipeline, digital, jscc, in, tx_snrs, constellation, ofdm);
    if (*quantum) return cmd_quantum(config, in, qf);
    if (*metrics) return cmd_metrics(reference, test, peak, mask_truth, mask_pred, classes);
    if (*report) return cmd_report(inputs);
    if (*synth) return cmd_synth(n_samples, n_classes, dim, mask_size, synth_snrs);
  } catch (const Error& e) {
    std::cerr << "expctl: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::invalid_argument& e) {
    std::cerr << "expctl: bad number: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "expctl: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
